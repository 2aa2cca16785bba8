//! Python bindings for the planning pipeline.
//!
//! Exposes scenario generation, RP placement, the diffusion and baseline
//! tour planners, the dwell-time service model, and the metric suite. The
//! module mirrors the Rust API but speaks plain Python types: positions are
//! (x, y) tuples, reports are dicts, and whole objects round-trip as JSON.

use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use mdcplan::baselines::{self, PlannerKind, TourStart};
use mdcplan::campaign::{self, CampaignConfig, RunOptions};
use mdcplan::deployment::{self, CandidateMode, ScenarioParams};
use mdcplan::diffusion::{self, DenoiserKind, DiffusionConfig};
use mdcplan::metrics::{self, MetricParams};
use mdcplan::model::{self, IntentWeights, NetworkScenario, Point2D, Rect};
use mdcplan::placement::{self, RpPlan};
use mdcplan::service;

fn to_py_err(err: mdcplan::Error) -> PyErr {
    match &err {
        mdcplan::Error::Io(_) | mdcplan::Error::Csv(_) => PyIOError::new_err(err.to_string()),
        _ => PyValueError::new_err(err.to_string()),
    }
}

fn json_err(err: serde_json::Error) -> PyErr {
    PyValueError::new_err(err.to_string())
}

// ============================================================================
// Scenario
// ============================================================================

/// A generated deployment: sensors, sink, area, and collector parameters.
#[pyclass(skip_from_py_object)]
#[derive(Clone)]
struct Scenario {
    inner: NetworkScenario,
}

#[pymethods]
impl Scenario {
    #[getter]
    fn n_sensors(&self) -> usize {
        self.inner.sensors.len()
    }

    #[getter]
    fn comm_range_m(&self) -> f64 {
        self.inner.comm_range_m
    }

    #[getter]
    fn total_rate_bps(&self) -> f64 {
        self.inner.total_rate_bps()
    }

    #[getter]
    fn sink(&self) -> (f64, f64) {
        (self.inner.sink.x, self.inner.sink.y)
    }

    #[getter]
    fn closed_tour(&self) -> bool {
        self.inner.closed_tour
    }

    /// Sensor positions as a list of (x, y) tuples in meters.
    fn sensor_positions(&self) -> Vec<(f64, f64)> {
        self.inner
            .sensors
            .iter()
            .map(|s| (s.position.x, s.position.y))
            .collect()
    }

    /// Serialize to the schema-versioned JSON document.
    fn to_json(&self) -> PyResult<String> {
        serde_json::to_string_pretty(&self.inner).map_err(json_err)
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Scenario> {
        let inner: NetworkScenario = serde_json::from_str(text).map_err(json_err)?;
        inner.validate().map_err(to_py_err)?;
        Ok(Scenario { inner })
    }

    fn __repr__(&self) -> String {
        format!(
            "Scenario(n_sensors={}, area={}x{} m, comm_range={} m)",
            self.inner.sensors.len(),
            self.inner.area.width(),
            self.inner.area.height(),
            self.inner.comm_range_m
        )
    }
}

/// Generate a seeded uniform deployment.
#[pyfunction]
#[pyo3(signature = (seed, n_sensors, area_width_m=200.0, area_height_m=200.0,
                    comm_range_m=25.0, sensor_rate_bps=500.0, mdc_speed_mps=2.0,
                    upload_rate_bps=2.0e6, buffer_capacity_bits=4.0e8,
                    sink=(0.0, 0.0), closed_tour=true))]
#[allow(clippy::too_many_arguments)]
fn generate_scenario(
    seed: u64,
    n_sensors: usize,
    area_width_m: f64,
    area_height_m: f64,
    comm_range_m: f64,
    sensor_rate_bps: f64,
    mdc_speed_mps: f64,
    upload_rate_bps: f64,
    buffer_capacity_bits: f64,
    sink: (f64, f64),
    closed_tour: bool,
) -> PyResult<Scenario> {
    let params = ScenarioParams {
        area: Rect::from_size(area_width_m, area_height_m),
        comm_range_m,
        sink: Point2D::new(sink.0, sink.1),
        mdc_speed_mps,
        upload_rate_bps,
        buffer_capacity_bits,
        closed_tour,
        sensor_rate_bps,
        placement: deployment::PlacementKind::Uniform,
    };
    let inner = deployment::generate_scenario(seed, n_sensors, &params).map_err(to_py_err)?;
    Ok(Scenario { inner })
}

// ============================================================================
// Placement
// ============================================================================

/// An RP placement: positions, sensor association, and aggregate rates.
#[pyclass(skip_from_py_object)]
#[derive(Clone)]
struct Plan {
    inner: RpPlan,
}

#[pymethods]
impl Plan {
    #[getter]
    fn rp_count(&self) -> usize {
        self.inner.rp_count()
    }

    fn rp_positions(&self) -> Vec<(f64, f64)> {
        self.inner.rp_positions.iter().map(|p| (p.x, p.y)).collect()
    }

    /// assoc[sensor_id] = RP index.
    fn association(&self) -> Vec<usize> {
        self.inner.assoc.clone()
    }

    fn rp_rates_bps(&self) -> Vec<f64> {
        self.inner.rp_rate_bps.clone()
    }

    /// Number of sensors within comm range of their assigned RP.
    fn covered_sensors(&self) -> usize {
        self.inner.coverage_flag.iter().filter(|c| **c).count()
    }

    fn to_json(&self) -> PyResult<String> {
        serde_json::to_string_pretty(&self.inner).map_err(json_err)
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Plan> {
        let inner: RpPlan = serde_json::from_str(text).map_err(json_err)?;
        Ok(Plan { inner })
    }

    fn __repr__(&self) -> String {
        format!("Plan(rp_count={})", self.inner.rp_count())
    }
}

/// Greedy load-aware RP placement over a uniform candidate grid (or the
/// sensor positions themselves when `grid_spacing_m` is None).
#[pyfunction]
#[pyo3(signature = (scenario, m, grid_spacing_m=10.0))]
fn place_rps(scenario: &Scenario, m: usize, grid_spacing_m: Option<f64>) -> PyResult<Plan> {
    let mode = match grid_spacing_m {
        Some(spacing_m) => CandidateMode::Grid { spacing_m },
        None => CandidateMode::SensorPositions,
    };
    let candidates = deployment::build_candidates(&scenario.inner, mode).map_err(to_py_err)?;
    let inner = placement::select_rps(&scenario.inner, &candidates, m).map_err(to_py_err)?;
    Ok(Plan { inner })
}

// ============================================================================
// Planning
// ============================================================================

fn weights_from(
    eta: (f64, f64, f64, f64),
    rp_importance: Option<Vec<f64>>,
    m: usize,
) -> IntentWeights {
    IntentWeights {
        eta_t: eta.0,
        eta_e: eta.1,
        eta_f: eta.2,
        eta_p: eta.3,
        rp_importance: rp_importance.unwrap_or_else(|| vec![1.0; m]),
    }
}

/// Guided reverse-diffusion tour construction. Returns (order, trajectory)
/// where the trajectory is the sampled waypoint polyline in meters.
#[pyfunction]
#[pyo3(signature = (seed, scenario, plan, eta=(0.5, 0.0, 0.3, 0.2), rp_importance=None,
                    waypoints=80, steps=50, gamma0=0.1, denoiser="analytic_reference"))]
#[allow(clippy::too_many_arguments, clippy::type_complexity)]
fn plan_tour_diffusion(
    seed: u64,
    scenario: &Scenario,
    plan: &Plan,
    eta: (f64, f64, f64, f64),
    rp_importance: Option<Vec<f64>>,
    waypoints: usize,
    steps: usize,
    gamma0: f64,
    denoiser: &str,
) -> PyResult<(Vec<usize>, Vec<(f64, f64)>)> {
    let weights = weights_from(eta, rp_importance, plan.inner.rp_count());
    let kind = match denoiser {
        "zero" => DenoiserKind::Zero,
        "analytic_reference" => DenoiserKind::AnalyticReference,
        other => {
            return Err(PyValueError::new_err(format!(
                "unknown denoiser '{other}' (use 'zero' or 'analytic_reference')"
            )))
        }
    };
    let config = DiffusionConfig {
        waypoints,
        steps,
        gamma0,
        denoiser: kind,
        ..DiffusionConfig::default()
    };
    let planned = diffusion::plan_tour(seed, &scenario.inner, &plan.inner, &weights, &config)
        .map_err(to_py_err)?;
    let trajectory = planned
        .trajectory
        .points
        .iter()
        .map(|p| (p[0], p[1]))
        .collect();
    Ok((planned.order, trajectory))
}

/// One of the reference planners: "nn", "nn_2opt", "greedy_insertion",
/// "random", or "diffusion".
#[pyfunction]
#[pyo3(signature = (name, seed, scenario, plan))]
fn baseline_tour(name: &str, seed: u64, scenario: &Scenario, plan: &Plan) -> PyResult<Vec<usize>> {
    let kind = match name {
        "diffusion" => PlannerKind::Diffusion,
        "nn" => PlannerKind::Nn,
        "nn_2opt" => PlannerKind::Nn2opt,
        "greedy_insertion" => PlannerKind::GreedyInsertion,
        "random" => PlannerKind::Random,
        other => return Err(PyValueError::new_err(format!("unknown planner '{other}'"))),
    };
    let weights = weights_from((0.5, 0.0, 0.3, 0.2), None, plan.inner.rp_count());
    campaign::plan_order(
        kind,
        seed,
        &scenario.inner,
        &plan.inner,
        &weights,
        &DiffusionConfig::default(),
    )
    .map_err(to_py_err)
}

/// First-improvement 2-opt refinement of a visiting order.
#[pyfunction]
#[pyo3(signature = (order, plan, closed=true, max_passes=64))]
fn two_opt(
    order: Vec<usize>,
    plan: &Plan,
    closed: bool,
    max_passes: usize,
) -> PyResult<Vec<usize>> {
    diffusion::two_opt(&order, &plan.inner.rp_positions, closed, max_passes).map_err(to_py_err)
}

/// Nearest-neighbor chain starting at the RP closest to the given anchor.
#[pyfunction]
#[pyo3(signature = (plan, anchor=(0.0, 0.0)))]
fn nearest_neighbor_tour(plan: &Plan, anchor: (f64, f64)) -> PyResult<Vec<usize>> {
    baselines::nearest_neighbor_tour(
        TourStart::NearestTo(Point2D::new(anchor.0, anchor.1)),
        &plan.inner.rp_positions,
    )
    .map_err(to_py_err)
}

// ============================================================================
// Service model and metrics
// ============================================================================

/// Solve the dwell-time fixed point. Returns a dict with tour_time_s,
/// dwell_s, iterations, converged, and utilization.
#[pyfunction]
#[pyo3(signature = (rp_rates_bps, travel_time_s, upload_rate_bps, epsilon_s=1e-6, max_iter=10_000))]
fn solve_dwell<'py>(
    py: Python<'py>,
    rp_rates_bps: Vec<f64>,
    travel_time_s: f64,
    upload_rate_bps: f64,
    epsilon_s: f64,
    max_iter: usize,
) -> PyResult<Bound<'py, PyDict>> {
    let uploads = vec![upload_rate_bps; rp_rates_bps.len()];
    let sol = service::solve_dwell(&rp_rates_bps, travel_time_s, &uploads, epsilon_s, max_iter)
        .map_err(to_py_err)?;
    let out = PyDict::new(py);
    out.set_item("tour_time_s", sol.tour_time_s)?;
    out.set_item("dwell_s", sol.dwell_s)?;
    out.set_item("iterations", sol.iterations)?;
    out.set_item("converged", sol.converged)?;
    out.set_item("utilization", sol.utilization)?;
    Ok(out)
}

/// Exact fixed point T = T_tr / (1 - rho); raises on utilization >= 1.
#[pyfunction]
fn closed_form_tour_time(
    rp_rates_bps: Vec<f64>,
    travel_time_s: f64,
    upload_rate_bps: f64,
) -> PyResult<f64> {
    let uploads = vec![upload_rate_bps; rp_rates_bps.len()];
    service::closed_form_tour_time(travel_time_s, &rp_rates_bps, &uploads).map_err(to_py_err)
}

/// Total Euclidean tour length in meters for a visiting order.
#[pyfunction]
#[pyo3(signature = (order, plan, closed=true))]
fn tour_length(order: Vec<usize>, plan: &Plan, closed: bool) -> PyResult<f64> {
    model::tour_length(&order, &plan.inner.rp_positions, closed).map_err(to_py_err)
}

/// Resolve dwell times for an order and compute the full metric report plus
/// the intent objective. Returns a dict keyed like the CSV columns.
#[pyfunction]
#[pyo3(signature = (scenario, plan, order, eta=(0.5, 0.0, 0.3, 0.2), rp_importance=None))]
fn evaluate<'py>(
    py: Python<'py>,
    scenario: &Scenario,
    plan: &Plan,
    order: Vec<usize>,
    eta: (f64, f64, f64, f64),
    rp_importance: Option<Vec<f64>>,
) -> PyResult<Bound<'py, PyDict>> {
    let (schedule, solution) =
        service::schedule_tour(&scenario.inner, &plan.inner, &order).map_err(to_py_err)?;
    let report = metrics::full_report(
        &scenario.inner,
        &plan.inner,
        &schedule,
        &solution,
        &MetricParams::default(),
    )
    .map_err(to_py_err)?;
    let weights = weights_from(eta, rp_importance, plan.inner.rp_count());
    let objective = model::objective(&schedule, &weights, &report).map_err(to_py_err)?;

    let out = PyDict::new(py);
    out.set_item("order", schedule.order.clone())?;
    out.set_item("converged", solution.converged)?;
    out.set_item("utilization", solution.utilization)?;
    out.set_item("tour_time_s", report.tour_time_s)?;
    out.set_item("tour_length_m", report.tour_length_m)?;
    out.set_item("travel_time_s", report.travel_time_s)?;
    out.set_item("total_dwell_s", report.total_dwell_s)?;
    out.set_item("freshness_s", report.freshness_s)?;
    out.set_item("collection_ratio", report.collection_ratio)?;
    out.set_item("pdr", report.pdr)?;
    out.set_item("energy_efficiency", report.energy_efficiency)?;
    out.set_item("energy_j", report.energy_j)?;
    out.set_item("throughput_bps", report.throughput_bps)?;
    out.set_item("fairness", report.fairness)?;
    out.set_item("objective", objective)?;
    Ok(out)
}

/// Run a campaign from a JSON config string; returns the number of result
/// rows written under `out_dir`.
#[pyfunction]
fn run_campaign(config_json: &str, out_dir: &str) -> PyResult<usize> {
    let config = CampaignConfig::from_json(config_json).map_err(to_py_err)?;
    let opts = RunOptions {
        out_dir: Some(out_dir.into()),
        ..RunOptions::default()
    };
    let results = campaign::run_campaign(&config, &opts).map_err(to_py_err)?;
    Ok(results.rows.len())
}

/// Nominal campaign config as a JSON string, for tweaking from Python.
#[pyfunction]
fn default_campaign_config() -> PyResult<String> {
    serde_json::to_string_pretty(&CampaignConfig::default()).map_err(json_err)
}

#[pymodule]
fn mdcplan_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_class::<Scenario>()?;
    m.add_class::<Plan>()?;
    m.add_function(wrap_pyfunction!(generate_scenario, m)?)?;
    m.add_function(wrap_pyfunction!(place_rps, m)?)?;
    m.add_function(wrap_pyfunction!(plan_tour_diffusion, m)?)?;
    m.add_function(wrap_pyfunction!(baseline_tour, m)?)?;
    m.add_function(wrap_pyfunction!(two_opt, m)?)?;
    m.add_function(wrap_pyfunction!(nearest_neighbor_tour, m)?)?;
    m.add_function(wrap_pyfunction!(solve_dwell, m)?)?;
    m.add_function(wrap_pyfunction!(closed_form_tour_time, m)?)?;
    m.add_function(wrap_pyfunction!(tour_length, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    m.add_function(wrap_pyfunction!(run_campaign, m)?)?;
    m.add_function(wrap_pyfunction!(default_campaign_config, m)?)?;
    Ok(())
}
