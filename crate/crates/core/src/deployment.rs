//! Seeded scenario generation and candidate-set construction for RP
//! placement.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{NetworkScenario, Point2D, Rect, SensorNode, SCENARIO_SCHEMA_VERSION};
use crate::rng::{stream, stream_rng};

/// Spatial law for sensor placement.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum PlacementKind {
    /// i.i.d. uniform over the area (the evaluated configuration).
    #[default]
    Uniform,
    /// Gaussian clusters: uniform centers, normal offsets re-drawn until
    /// they land inside the area.
    Clustered { clusters: usize, spread_m: f64 },
}

/// Scenario template: everything except the sensors themselves.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioParams {
    pub area: Rect,
    pub comm_range_m: f64,
    pub sink: Point2D,
    pub mdc_speed_mps: f64,
    pub upload_rate_bps: f64,
    pub buffer_capacity_bits: f64,
    pub closed_tour: bool,
    /// Uniform per-sensor data rate in bits per second.
    pub sensor_rate_bps: f64,
    #[serde(default)]
    pub placement: PlacementKind,
}

impl Default for ScenarioParams {
    /// Nominal configuration: 200 m x 200 m area, 25 m range, 500 b/s
    /// sensors, 2 m/s collector uploading at 2 Mb/s into 50 MB RP buffers,
    /// sink at the origin, closed tour.
    fn default() -> Self {
        ScenarioParams {
            area: Rect::from_size(200.0, 200.0),
            comm_range_m: 25.0,
            sink: Point2D::new(0.0, 0.0),
            mdc_speed_mps: 2.0,
            upload_rate_bps: 2.0e6,
            buffer_capacity_bits: 50.0 * 8.0 * 1.0e6, // 50 MB
            closed_tour: true,
            sensor_rate_bps: 500.0,
            placement: PlacementKind::Uniform,
        }
    }
}

/// How candidate RP locations are produced.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode")]
pub enum CandidateMode {
    /// Uniform lattice over the closed area with the given spacing.
    Grid { spacing_m: f64 },
    /// Reuse the sensor coordinates themselves.
    SensorPositions,
}

/// Candidate RP locations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateSet {
    pub points: Vec<Point2D>,
    pub source: CandidateMode,
}

/// Place `n_sensors` i.i.d. uniform over the template area. Identical
/// (seed, n, params) inputs produce a bit-identical scenario.
pub fn generate_scenario(
    seed: u64,
    n_sensors: usize,
    params: &ScenarioParams,
) -> Result<NetworkScenario> {
    if n_sensors == 0 {
        return Err(Error::invalid("n_sensors must be >= 1"));
    }
    if params.area.is_degenerate() {
        return Err(Error::invalid("degenerate deployment area"));
    }
    let mut rng = stream_rng(seed, stream::SCENARIO);
    let area = params.area;
    let uniform_point = |rng: &mut rand_chacha::ChaCha8Rng| {
        Point2D::new(
            rng.random_range(area.x_min..area.x_max),
            rng.random_range(area.y_min..area.y_max),
        )
    };
    let positions: Vec<Point2D> = match params.placement {
        PlacementKind::Uniform => (0..n_sensors).map(|_| uniform_point(&mut rng)).collect(),
        PlacementKind::Clustered { clusters, spread_m } => {
            if clusters == 0 || !(spread_m > 0.0) {
                return Err(Error::invalid(
                    "clustered placement needs clusters >= 1 and spread > 0",
                ));
            }
            let centers: Vec<Point2D> = (0..clusters).map(|_| uniform_point(&mut rng)).collect();
            (0..n_sensors)
                .map(|i| {
                    let c = centers[i % clusters];
                    loop {
                        let p = Point2D::new(
                            c.x + spread_m * rng.sample::<f64, _>(rand_distr::StandardNormal),
                            c.y + spread_m * rng.sample::<f64, _>(rand_distr::StandardNormal),
                        );
                        if area.contains(&p) {
                            break p;
                        }
                    }
                })
                .collect()
        }
    };
    let sensors = positions
        .into_iter()
        .enumerate()
        .map(|(id, position)| SensorNode {
            id,
            position,
            rate_bps: params.sensor_rate_bps,
        })
        .collect();
    let scenario = NetworkScenario {
        schema_version: SCENARIO_SCHEMA_VERSION,
        area,
        sensors,
        comm_range_m: params.comm_range_m,
        sink: params.sink,
        mdc_speed_mps: params.mdc_speed_mps,
        upload_rate_bps: params.upload_rate_bps,
        buffer_capacity_bits: params.buffer_capacity_bits,
        closed_tour: params.closed_tour,
    };
    scenario.validate()?;
    Ok(scenario)
}

/// Build the candidate set for RP placement.
pub fn build_candidates(scenario: &NetworkScenario, mode: CandidateMode) -> Result<CandidateSet> {
    let points = match mode {
        CandidateMode::Grid { spacing_m } => {
            if !(spacing_m > 0.0) {
                return Err(Error::invalid("grid spacing must be > 0"));
            }
            let area = scenario.area;
            // Closed interval: boundary lattice lines are included.
            let nx = (area.width() / spacing_m + 1e-9).floor() as usize + 1;
            let ny = (area.height() / spacing_m + 1e-9).floor() as usize + 1;
            let mut pts = Vec::with_capacity(nx * ny);
            for iy in 0..ny {
                let y = (area.y_min + iy as f64 * spacing_m).min(area.y_max);
                for ix in 0..nx {
                    let x = (area.x_min + ix as f64 * spacing_m).min(area.x_max);
                    pts.push(Point2D::new(x, y));
                }
            }
            pts
        }
        CandidateMode::SensorPositions => scenario.sensor_positions(),
    };
    if points.is_empty() {
        return Err(Error::invalid("candidate set is empty"));
    }
    Ok(CandidateSet {
        points,
        source: mode,
    })
}
