//! Config-driven experiment campaigns: node-count sweeps, multi-seed
//! averaging, and plot-ready CSV emission.
//!
//! A campaign is fully determined by its JSON config: rerunning one produces
//! byte-identical CSVs. Cells (node count x seed) are independent and run in
//! parallel; a single writer emits rows in sorted order.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{
    greedy_insertion_tour, nearest_neighbor_tour, random_tour, PlannerKind, TourStart,
};
use crate::deployment::{build_candidates, generate_scenario, CandidateMode, ScenarioParams};
use crate::diffusion::{plan_tour, two_opt, DiffusionConfig};
use crate::error::{Error, Result};
use crate::metrics::{full_report, MetricParams, MetricReport};
use crate::model::{objective, IntentWeights, NetworkScenario};
use crate::placement::{select_rps, RpPlan};
use crate::service::schedule_tour;

pub const CONFIG_SCHEMA_VERSION: u32 = 1;

// ============================================================================
// Configuration
// ============================================================================

/// How the RP count is chosen for a given node count.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode")]
pub enum RpCountRule {
    Fixed {
        value: usize,
    },
    /// max(min, round(fraction * n)).
    Scaled {
        min: usize,
        fraction: f64,
    },
}

impl RpCountRule {
    pub fn count(&self, n_sensors: usize) -> usize {
        match self {
            RpCountRule::Fixed { value } => *value,
            RpCountRule::Scaled { min, fraction } => {
                (*min).max((fraction * n_sensors as f64).round() as usize)
            }
        }
    }
}

/// Intent weights as configured; per-RP importance defaults to uniform when
/// omitted (the RP count varies across the sweep).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntentConfig {
    pub eta_t: f64,
    pub eta_e: f64,
    pub eta_f: f64,
    pub eta_p: f64,
    #[serde(default)]
    pub rp_importance: Option<Vec<f64>>,
}

impl Default for IntentConfig {
    /// Nominal emphasis on tour duration and freshness.
    fn default() -> Self {
        IntentConfig {
            eta_t: 0.5,
            eta_e: 0.0,
            eta_f: 0.3,
            eta_p: 0.2,
            rp_importance: None,
        }
    }
}

impl IntentConfig {
    pub fn bind(&self, m: usize) -> IntentWeights {
        IntentWeights {
            eta_t: self.eta_t,
            eta_e: self.eta_e,
            eta_f: self.eta_f,
            eta_p: self.eta_p,
            rp_importance: self.rp_importance.clone().unwrap_or_else(|| vec![1.0; m]),
        }
    }
}

/// Full campaign description; serialized as the CLI's JSON config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignConfig {
    pub schema_version: u32,
    pub scenario: ScenarioParams,
    /// Node counts to sweep.
    pub sweep_n_sensors: Vec<usize>,
    pub rp_count: RpCountRule,
    pub candidate_grid_spacing_m: f64,
    /// Deployments per node count; seeds run 0..seeds.
    pub seeds: usize,
    pub planners: Vec<PlannerKind>,
    pub diffusion: DiffusionConfig,
    pub intent: IntentConfig,
    #[serde(default)]
    pub metric_params: MetricParams,
    pub output_dir: String,
}

impl Default for CampaignConfig {
    /// The nominal protocol: 50..=500 nodes in steps of 50, 15 RPs from a
    /// 10 m candidate grid, 30 seeds, every planner.
    fn default() -> Self {
        CampaignConfig {
            schema_version: CONFIG_SCHEMA_VERSION,
            scenario: ScenarioParams::default(),
            sweep_n_sensors: (1..=10).map(|i| i * 50).collect(),
            rp_count: RpCountRule::Fixed { value: 15 },
            candidate_grid_spacing_m: 10.0,
            seeds: 30,
            planners: PlannerKind::ALL.to_vec(),
            diffusion: DiffusionConfig::default(),
            intent: IntentConfig::default(),
            metric_params: MetricParams::default(),
            output_dir: "results".to_string(),
        }
    }
}

impl CampaignConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let config: CampaignConfig = serde_json::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != CONFIG_SCHEMA_VERSION {
            return Err(Error::invalid(format!(
                "unsupported config schema version {}",
                self.schema_version
            )));
        }
        if self.sweep_n_sensors.is_empty() {
            return Err(Error::invalid("sweep_n_sensors must be non-empty"));
        }
        if self.sweep_n_sensors.contains(&0) {
            return Err(Error::invalid("node counts must be >= 1"));
        }
        if self.seeds == 0 {
            return Err(Error::invalid("seeds must be >= 1"));
        }
        if self.planners.is_empty() {
            return Err(Error::invalid("at least one planner is required"));
        }
        for (i, p) in self.planners.iter().enumerate() {
            if self.planners[..i].contains(p) {
                return Err(Error::invalid(format!("duplicate planner {}", p.name())));
            }
        }
        if !(self.candidate_grid_spacing_m > 0.0) {
            return Err(Error::invalid("candidate_grid_spacing_m must be > 0"));
        }
        if self.scenario.area.is_degenerate() {
            return Err(Error::invalid("degenerate scenario area"));
        }
        if !(self.scenario.mdc_speed_mps > 0.0)
            || !(self.scenario.upload_rate_bps > 0.0)
            || !(self.scenario.comm_range_m > 0.0)
            || !(self.scenario.sensor_rate_bps >= 0.0)
        {
            return Err(Error::invalid("scenario rates and ranges must be positive"));
        }

        let nx = (self.scenario.area.width() / self.candidate_grid_spacing_m + 1e-9).floor()
            as usize
            + 1;
        let ny = (self.scenario.area.height() / self.candidate_grid_spacing_m + 1e-9).floor()
            as usize
            + 1;
        let candidate_count = nx * ny;
        let max_m = self
            .sweep_n_sensors
            .iter()
            .map(|&n| self.rp_count.count(n))
            .max()
            .unwrap_or(0);
        if max_m == 0 {
            return Err(Error::invalid("rp_count rule yields zero RPs"));
        }
        if max_m > candidate_count {
            return Err(Error::invalid(format!(
                "rp count {max_m} exceeds the {candidate_count}-point candidate grid"
            )));
        }
        if self.diffusion.waypoints < max_m {
            return Err(Error::invalid(format!(
                "diffusion waypoint count {} is below the maximum RP count {max_m}",
                self.diffusion.waypoints
            )));
        }
        if self.diffusion.steps == 0 {
            return Err(Error::invalid("diffusion steps must be >= 1"));
        }
        if !(self.diffusion.beta_start > 0.0
            && self.diffusion.beta_end < 1.0
            && self.diffusion.beta_start <= self.diffusion.beta_end)
        {
            return Err(Error::invalid("diffusion beta range invalid"));
        }
        if !(self.diffusion.gamma0 >= 0.0) || !(self.diffusion.beta_soft > 0.0) {
            return Err(Error::invalid("diffusion guidance parameters invalid"));
        }
        let etas = [
            self.intent.eta_t,
            self.intent.eta_e,
            self.intent.eta_f,
            self.intent.eta_p,
        ];
        if etas.iter().any(|e| !(*e >= 0.0)) {
            return Err(Error::invalid("intent weights must be >= 0"));
        }
        if let Some(imp) = &self.intent.rp_importance {
            match self.rp_count {
                RpCountRule::Fixed { value } if imp.len() == value => {}
                _ => {
                    return Err(Error::invalid(
                        "explicit rp_importance requires a fixed rp_count of matching length",
                    ))
                }
            }
            if imp.iter().any(|w| !(*w >= 0.0)) {
                return Err(Error::invalid("rp_importance entries must be >= 0"));
            }
        }
        if !(self.metric_params.loss.p_link > 0.0 && self.metric_params.loss.p_link <= 1.0) {
            return Err(Error::invalid("p_link must lie in (0, 1]"));
        }
        if self.metric_params.loss.hop_max == 0 {
            return Err(Error::invalid("hop_max must be >= 1"));
        }
        Ok(())
    }
}

// ============================================================================
// Execution
// ============================================================================

/// One result row: a planner evaluated on one deployment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignRow {
    pub planner: PlannerKind,
    pub n_sensors: usize,
    pub seed: u64,
    pub m_rps: usize,
    /// False when the dwell fixed point did not converge (utilization >= 1).
    pub converged: bool,
    pub report: MetricReport,
    pub objective: f64,
}

/// Identifies one deployment cell of a campaign.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunId {
    pub n_sensors: usize,
    pub seed: u64,
}

/// Runtime options layered over the config by the CLI.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Overrides `config.output_dir` when set.
    pub out_dir: Option<PathBuf>,
    pub seeds_override: Option<usize>,
    pub dump_geometry: bool,
    /// Trajectory snapshot interval for geometry dumps.
    pub snapshot_every: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct CampaignResults {
    pub rows: Vec<CampaignRow>,
    pub runs_csv: PathBuf,
    pub summary_csv: PathBuf,
}

/// Produce the visiting order for one planner on one deployment. This is the
/// single entry point every planner goes through, so each of them feeds the
/// identical service and metrics pipeline.
pub fn plan_order(
    kind: PlannerKind,
    seed: u64,
    scenario: &NetworkScenario,
    plan: &RpPlan,
    weights: &IntentWeights,
    diffusion: &DiffusionConfig,
) -> Result<Vec<usize>> {
    let positions = &plan.rp_positions;
    match kind {
        PlannerKind::Diffusion => Ok(plan_tour(seed, scenario, plan, weights, diffusion)?.order),
        PlannerKind::Nn => nearest_neighbor_tour(TourStart::NearestTo(scenario.sink), positions),
        PlannerKind::Nn2opt => {
            let nn = nearest_neighbor_tour(TourStart::NearestTo(scenario.sink), positions)?;
            two_opt(
                &nn,
                positions,
                scenario.closed_tour,
                diffusion.two_opt_max_passes,
            )
        }
        PlannerKind::GreedyInsertion => greedy_insertion_tour(positions, scenario.closed_tour),
        PlannerKind::Random => random_tour(seed, positions.len()),
    }
}

/// Deterministically prepared deployment cell.
struct Cell {
    scenario: NetworkScenario,
    plan: RpPlan,
    weights: IntentWeights,
    m: usize,
}

fn prepare_cell(config: &CampaignConfig, n: usize, seed: u64) -> Result<Cell> {
    let scenario = generate_scenario(seed, n, &config.scenario)?;
    let candidates = build_candidates(
        &scenario,
        CandidateMode::Grid {
            spacing_m: config.candidate_grid_spacing_m,
        },
    )?;
    let m = config.rp_count.count(n);
    let plan = select_rps(&scenario, &candidates, m)?;
    let weights = config.intent.bind(m);
    Ok(Cell {
        scenario,
        plan,
        weights,
        m,
    })
}

fn run_cell(config: &CampaignConfig, n: usize, seed: u64) -> Result<Vec<CampaignRow>> {
    let cell = prepare_cell(config, n, seed)?;
    let mut rows = Vec::with_capacity(config.planners.len());
    for &kind in &config.planners {
        let order = plan_order(
            kind,
            seed,
            &cell.scenario,
            &cell.plan,
            &cell.weights,
            &config.diffusion,
        )?;
        let (schedule, service) = schedule_tour(&cell.scenario, &cell.plan, &order)?;
        let report = full_report(
            &cell.scenario,
            &cell.plan,
            &schedule,
            &service,
            &config.metric_params,
        )?;
        let objective = objective(&schedule, &cell.weights, &report)?;
        rows.push(CampaignRow {
            planner: kind,
            n_sensors: n,
            seed,
            m_rps: cell.m,
            converged: service.converged,
            report,
            objective,
        });
    }
    Ok(rows)
}

/// Run the whole campaign and write `runs.csv` plus `summary.csv` under the
/// output directory.
pub fn run_campaign(config: &CampaignConfig, opts: &RunOptions) -> Result<CampaignResults> {
    config.validate()?;
    let mut config = config.clone();
    if let Some(seeds) = opts.seeds_override {
        if seeds == 0 {
            return Err(Error::invalid("seeds must be >= 1"));
        }
        config.seeds = seeds;
    }
    let out_dir = opts
        .out_dir
        .clone()
        .unwrap_or_else(|| PathBuf::from(&config.output_dir));
    fs::create_dir_all(&out_dir)?;

    let mut cells: Vec<(usize, u64)> = Vec::new();
    for &n in &config.sweep_n_sensors {
        for seed in 0..config.seeds as u64 {
            cells.push((n, seed));
        }
    }
    type CellOutcome = ((usize, u64), Result<Vec<CampaignRow>>);
    let mut results: Vec<CellOutcome> = cells
        .par_iter()
        .map(|&(n, seed)| ((n, seed), run_cell(&config, n, seed)))
        .collect();
    results.sort_by_key(|((n, seed), _)| (*n, *seed));

    let mut rows = Vec::new();
    for (_, cell_rows) in results {
        rows.extend(cell_rows?);
    }

    let runs_csv = out_dir.join("runs.csv");
    write_runs_csv(&runs_csv, &rows)?;
    let summary_csv = out_dir.join("summary.csv");
    write_summary_csv(&summary_csv, &config, &rows)?;

    if opts.dump_geometry {
        for &n in &config.sweep_n_sensors {
            for seed in 0..config.seeds as u64 {
                emit_geometry(
                    &config,
                    RunId { n_sensors: n, seed },
                    &out_dir,
                    opts.snapshot_every,
                )?;
            }
        }
    }

    Ok(CampaignResults {
        rows,
        runs_csv,
        summary_csv,
    })
}

// ============================================================================
// CSV emission
// ============================================================================

fn write_runs_csv(path: &Path, rows: &[CampaignRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["planner", "n_sensors", "seed", "m_rps", "converged"];
    header.extend(MetricReport::CSV_HEADER);
    header.push("objective");
    w.write_record(&header)?;
    for row in rows {
        let mut fields = vec![
            row.planner.name().to_string(),
            row.n_sensors.to_string(),
            row.seed.to_string(),
            row.m_rps.to_string(),
            row.converged.to_string(),
        ];
        fields.extend(row.report.csv_fields());
        fields.push(row.objective.to_string());
        w.write_record(&fields)?;
    }
    w.flush()?;
    Ok(())
}

type MetricGetter = fn(&CampaignRow) -> f64;

/// Metric accessors used for summary statistics, in frozen column order.
const SUMMARY_METRICS: [(&str, MetricGetter); 12] = [
    ("tour_time_s", |r| r.report.tour_time_s),
    ("tour_length_m", |r| r.report.tour_length_m),
    ("travel_time_s", |r| r.report.travel_time_s),
    ("total_dwell_s", |r| r.report.total_dwell_s),
    ("freshness_s", |r| r.report.freshness_s),
    ("collection_ratio", |r| r.report.collection_ratio),
    ("pdr", |r| r.report.pdr),
    ("energy_efficiency", |r| r.report.energy_efficiency),
    ("energy_j", |r| r.report.energy_j),
    ("throughput_bps", |r| r.report.throughput_bps),
    ("fairness", |r| r.report.fairness),
    ("objective", |r| r.objective),
];

fn mean_and_std(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (0.0, 0.0);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
    (mean, var.sqrt())
}

fn write_summary_csv(path: &Path, config: &CampaignConfig, rows: &[CampaignRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec![
        "planner".to_string(),
        "n_sensors".to_string(),
        "runs".to_string(),
    ];
    for (name, _) in SUMMARY_METRICS {
        header.push(format!("mean_{name}"));
        header.push(format!("std_{name}"));
    }
    w.write_record(&header)?;
    for &kind in &config.planners {
        for &n in &config.sweep_n_sensors {
            let group: Vec<&CampaignRow> = rows
                .iter()
                .filter(|r| r.planner == kind && r.n_sensors == n)
                .collect();
            if group.is_empty() {
                continue;
            }
            let mut fields = vec![
                kind.name().to_string(),
                n.to_string(),
                group.len().to_string(),
            ];
            for (_, get) in SUMMARY_METRICS {
                let values: Vec<f64> = group.iter().map(|r| get(r)).collect();
                let (mean, std) = mean_and_std(&values);
                fields.push(mean.to_string());
                fields.push(std.to_string());
            }
            w.write_record(&fields)?;
        }
    }
    w.flush()?;
    Ok(())
}

// ============================================================================
// Geometry dumps
// ============================================================================

/// Recompute one deployment cell and dump sensor positions, RP positions,
/// association edges, per-planner tour polylines, and (for the diffusion
/// planner) trajectory snapshots as CSV files under
/// `out_dir/geometry/n{N}_seed{S}/`.
pub fn emit_geometry(
    config: &CampaignConfig,
    id: RunId,
    out_dir: &Path,
    snapshot_every: Option<usize>,
) -> Result<()> {
    if !config.sweep_n_sensors.contains(&id.n_sensors) {
        return Err(Error::NotFound(format!(
            "node count {} is not part of the campaign sweep",
            id.n_sensors
        )));
    }
    if id.seed >= config.seeds as u64 {
        return Err(Error::NotFound(format!(
            "seed {} is outside the campaign's 0..{} seed range",
            id.seed, config.seeds
        )));
    }
    let cell = prepare_cell(config, id.n_sensors, id.seed)?;
    let dir = out_dir
        .join("geometry")
        .join(format!("n{}_seed{}", id.n_sensors, id.seed));
    fs::create_dir_all(&dir)?;

    // Replay artifacts: the exact scenario and placement as JSON.
    fs::write(
        dir.join("scenario.json"),
        serde_json::to_string_pretty(&cell.scenario)?,
    )?;
    fs::write(
        dir.join("rp_plan.json"),
        serde_json::to_string_pretty(&cell.plan)?,
    )?;

    let mut w = csv::Writer::from_path(dir.join("sensors.csv"))?;
    w.write_record(["sensor_id", "x_m", "y_m", "rate_bps"])?;
    for s in &cell.scenario.sensors {
        w.write_record([
            s.id.to_string(),
            s.position.x.to_string(),
            s.position.y.to_string(),
            s.rate_bps.to_string(),
        ])?;
    }
    w.flush()?;

    let mut w = csv::Writer::from_path(dir.join("rps.csv"))?;
    w.write_record(["rp", "x_m", "y_m", "rate_bps", "selection_load_bps"])?;
    for (j, p) in cell.plan.rp_positions.iter().enumerate() {
        w.write_record([
            j.to_string(),
            p.x.to_string(),
            p.y.to_string(),
            cell.plan.rp_rate_bps[j].to_string(),
            cell.plan.selection_loads_bps[j].to_string(),
        ])?;
    }
    w.flush()?;

    let mut w = csv::Writer::from_path(dir.join("assoc.csv"))?;
    w.write_record(["sensor_id", "rp", "distance_m", "covered"])?;
    for s in &cell.scenario.sensors {
        let j = cell.plan.assoc[s.id];
        w.write_record([
            s.id.to_string(),
            j.to_string(),
            s.position.distance(&cell.plan.rp_positions[j]).to_string(),
            cell.plan.coverage_flag[s.id].to_string(),
        ])?;
    }
    w.flush()?;

    for &kind in &config.planners {
        let mut diffusion_cfg = config.diffusion.clone();
        if kind == PlannerKind::Diffusion {
            diffusion_cfg.snapshot_every = snapshot_every;
        }
        let (order, snapshots) = if kind == PlannerKind::Diffusion {
            let planned = plan_tour(
                id.seed,
                &cell.scenario,
                &cell.plan,
                &cell.weights,
                &diffusion_cfg,
            )?;
            (planned.order, planned.snapshots)
        } else {
            (
                plan_order(
                    kind,
                    id.seed,
                    &cell.scenario,
                    &cell.plan,
                    &cell.weights,
                    &diffusion_cfg,
                )?,
                Vec::new(),
            )
        };

        let mut w = csv::Writer::from_path(dir.join(format!("tour_{}.csv", kind.name())))?;
        w.write_record(["step", "rp", "x_m", "y_m"])?;
        for (step, &rp) in order.iter().enumerate() {
            let p = cell.plan.rp_positions[rp];
            w.write_record([
                step.to_string(),
                rp.to_string(),
                p.x.to_string(),
                p.y.to_string(),
            ])?;
        }
        if cell.scenario.closed_tour && !order.is_empty() {
            let rp = order[0];
            let p = cell.plan.rp_positions[rp];
            w.write_record([
                order.len().to_string(),
                rp.to_string(),
                p.x.to_string(),
                p.y.to_string(),
            ])?;
        }
        w.flush()?;

        for (k, traj) in snapshots {
            let mut w = csv::Writer::from_path(dir.join(format!("trajectory_k{k}.csv")))?;
            w.write_record(["h", "x_m", "y_m"])?;
            for (h, p) in traj.points.iter().enumerate() {
                w.write_record([h.to_string(), p[0].to_string(), p[1].to_string()])?;
            }
            w.flush()?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_config(dir: &Path) -> CampaignConfig {
        CampaignConfig {
            sweep_n_sensors: vec![50],
            seeds: 1,
            planners: vec![PlannerKind::Nn],
            output_dir: dir.to_string_lossy().to_string(),
            ..CampaignConfig::default()
        }
    }

    #[test]
    fn single_cell_single_planner_counts() {
        let dir = tempfile::tempdir().unwrap();
        let config = small_config(dir.path());
        let results = run_campaign(&config, &RunOptions::default()).unwrap();
        assert_eq!(results.rows.len(), 1);
        let runs = std::fs::read_to_string(&results.runs_csv).unwrap();
        assert_eq!(runs.lines().count(), 2); // header + 1 row
        let summary = std::fs::read_to_string(&results.summary_csv).unwrap();
        assert_eq!(summary.lines().count(), 2);
    }

    #[test]
    fn rerun_is_byte_identical() {
        let dir = tempfile::tempdir().unwrap();
        let mut config = small_config(dir.path());
        config.planners = vec![PlannerKind::Diffusion, PlannerKind::Nn2opt];
        config.seeds = 2;
        let opts = RunOptions::default();
        let first = run_campaign(&config, &opts).unwrap();
        let bytes_a = std::fs::read(&first.runs_csv).unwrap();
        let summary_a = std::fs::read(&first.summary_csv).unwrap();
        let second = run_campaign(&config, &opts).unwrap();
        assert_eq!(bytes_a, std::fs::read(&second.runs_csv).unwrap());
        assert_eq!(summary_a, std::fs::read(&second.summary_csv).unwrap());
    }

    #[test]
    fn adding_a_planner_leaves_other_rows_unchanged() {
        let dir = tempfile::tempdir().unwrap();
        let mut config = small_config(dir.path());
        config.seeds = 2;
        config.planners = vec![PlannerKind::Nn, PlannerKind::Random];
        let base = run_campaign(&config, &RunOptions::default()).unwrap();

        let dir2 = tempfile::tempdir().unwrap();
        let mut wider = config.clone();
        wider.output_dir = dir2.path().to_string_lossy().to_string();
        wider.planners = vec![
            PlannerKind::Nn,
            PlannerKind::GreedyInsertion,
            PlannerKind::Random,
        ];
        let extended = run_campaign(&wider, &RunOptions::default()).unwrap();

        for row in &base.rows {
            let twin = extended
                .rows
                .iter()
                .find(|r| r.planner == row.planner && r.seed == row.seed)
                .unwrap();
            assert_eq!(row.report, twin.report);
            assert_eq!(row.objective, twin.objective);
        }
    }

    #[test]
    fn summary_means_match_row_means() {
        let dir = tempfile::tempdir().unwrap();
        let mut config = small_config(dir.path());
        config.seeds = 5;
        config.planners = vec![PlannerKind::Nn2opt, PlannerKind::Random];
        let results = run_campaign(&config, &RunOptions::default()).unwrap();

        let mut reader = csv::Reader::from_path(&results.summary_csv).unwrap();
        let header: Vec<String> = reader
            .headers()
            .unwrap()
            .iter()
            .map(str::to_string)
            .collect();
        let col = |name: &str| header.iter().position(|h| h == name).unwrap();
        for record in reader.records() {
            let record = record.unwrap();
            let planner = &record[col("planner")];
            let mean_tt: f64 = record[col("mean_tour_time_s")].parse().unwrap();
            let group: Vec<f64> = results
                .rows
                .iter()
                .filter(|r| r.planner.name() == planner)
                .map(|r| r.report.tour_time_s)
                .collect();
            assert_eq!(group.len(), 5);
            let expect = group.iter().sum::<f64>() / group.len() as f64;
            assert!(
                (mean_tt - expect).abs() <= 1e-9 * expect.abs().max(1.0),
                "{planner}: {mean_tt} vs {expect}"
            );
        }
    }

    #[test]
    fn geometry_dump_row_counts() {
        let dir = tempfile::tempdir().unwrap();
        let mut config = small_config(dir.path());
        config.sweep_n_sensors = vec![60];
        config.planners = vec![PlannerKind::Diffusion];
        let opts = RunOptions {
            dump_geometry: true,
            snapshot_every: Some(10),
            ..RunOptions::default()
        };
        run_campaign(&config, &opts).unwrap();

        let gdir = dir.path().join("geometry").join("n60_seed0");
        let count_rows = |name: &str| {
            std::fs::read_to_string(gdir.join(name))
                .unwrap()
                .lines()
                .count()
                - 1 // header
        };
        assert_eq!(count_rows("sensors.csv"), 60);
        assert_eq!(count_rows("assoc.csv"), 60);
        assert_eq!(count_rows("rps.csv"), 15);
        // Closed tour: return edge repeats the first stop.
        assert_eq!(count_rows("tour_diffusion.csv"), 16);
        // K = 50 with interval 10: snapshots at k = 50, 40, 30, 20, 10, 0.
        let snapshots: Vec<_> = std::fs::read_dir(&gdir)
            .unwrap()
            .filter_map(|e| {
                let name = e.unwrap().file_name().into_string().unwrap();
                name.starts_with("trajectory_k").then_some(name)
            })
            .collect();
        assert_eq!(snapshots.len(), 6);
        assert_eq!(count_rows("trajectory_k0.csv"), 80);
    }

    #[test]
    fn emit_geometry_unknown_run_id() {
        let dir = tempfile::tempdir().unwrap();
        let config = small_config(dir.path());
        let err = emit_geometry(
            &config,
            RunId {
                n_sensors: 999,
                seed: 0,
            },
            dir.path(),
            None,
        )
        .unwrap_err();
        assert!(matches!(err, Error::NotFound(_)));
        let err = emit_geometry(
            &config,
            RunId {
                n_sensors: 50,
                seed: 5,
            },
            dir.path(),
            None,
        )
        .unwrap_err();
        assert!(matches!(err, Error::NotFound(_)));
    }

    #[test]
    fn infeasible_service_is_flagged_not_fatal() {
        let dir = tempfile::tempdir().unwrap();
        let mut config = small_config(dir.path());
        // Upload far below the offered load: utilization >> 1.
        config.scenario.upload_rate_bps = 100.0;
        let results = run_campaign(&config, &RunOptions::default()).unwrap();
        assert_eq!(results.rows.len(), 1);
        assert!(!results.rows[0].converged);
        assert!(results.rows[0].report.tour_time_s.is_finite());
    }

    #[test]
    fn config_round_trip_and_validation() {
        let config = CampaignConfig::default();
        let text = serde_json::to_string_pretty(&config).unwrap();
        let parsed = CampaignConfig::from_json(&text).unwrap();
        assert_eq!(config, parsed);

        let mut bad = config.clone();
        bad.sweep_n_sensors.clear();
        assert!(bad.validate().is_err());
        let mut bad = config.clone();
        bad.seeds = 0;
        assert!(bad.validate().is_err());
        let mut bad = config.clone();
        bad.diffusion.waypoints = 3;
        assert!(bad.validate().is_err());
        let mut bad = config.clone();
        bad.planners.push(PlannerKind::Nn);
        assert!(bad.validate().is_err());
    }
}
