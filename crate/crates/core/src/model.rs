//! Domain types and the closed-form tour-time/objective arithmetic shared by
//! every other module.
//!
//! Canonical internal units are meters, seconds, bits, and Joules. Anything
//! read from a config file (kb/s, Mb/s, MB) is converted on ingest so the
//! rest of the code never mixes scales.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

// ============================================================================
// Geometry
// ============================================================================

/// A planar position in meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point2D {
    pub x: f64,
    pub y: f64,
}

impl Point2D {
    pub fn new(x: f64, y: f64) -> Self {
        Point2D { x, y }
    }

    /// Euclidean distance to another point.
    pub fn distance(&self, other: &Point2D) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    /// Squared distance; cheaper when only comparisons are needed.
    pub fn distance_sq(&self, other: &Point2D) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        dx * dx + dy * dy
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

/// Axis-aligned deployment rectangle in meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub x_min: f64,
    pub y_min: f64,
    pub x_max: f64,
    pub y_max: f64,
}

impl Rect {
    pub fn new(x_min: f64, y_min: f64, x_max: f64, y_max: f64) -> Self {
        Rect {
            x_min,
            y_min,
            x_max,
            y_max,
        }
    }

    /// Rectangle anchored at the origin.
    pub fn from_size(width: f64, height: f64) -> Self {
        Rect::new(0.0, 0.0, width, height)
    }

    pub fn width(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn height(&self) -> f64 {
        self.y_max - self.y_min
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    /// Closed-interval containment test.
    pub fn contains(&self, p: &Point2D) -> bool {
        p.x >= self.x_min && p.x <= self.x_max && p.y >= self.y_min && p.y <= self.y_max
    }

    pub fn is_degenerate(&self) -> bool {
        !(self.width() > 0.0 && self.height() > 0.0)
            || !self.x_min.is_finite()
            || !self.y_min.is_finite()
            || !self.x_max.is_finite()
            || !self.y_max.is_finite()
    }
}

// ============================================================================
// Network entities
// ============================================================================

/// A static sensor generating data at a constant rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensorNode {
    /// Index unique within a scenario.
    pub id: usize,
    pub position: Point2D,
    /// Data generation rate in bits per second.
    pub rate_bps: f64,
}

/// The world an experiment runs in: deployment area, sensors, sink, and the
/// collector's kinematic/radio parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkScenario {
    /// Serialization schema version; bumped on breaking field changes.
    pub schema_version: u32,
    pub area: Rect,
    pub sensors: Vec<SensorNode>,
    /// Communication range in meters.
    pub comm_range_m: f64,
    pub sink: Point2D,
    /// Collector speed in meters per second.
    pub mdc_speed_mps: f64,
    /// Uniform per-RP upload rate in bits per second.
    pub upload_rate_bps: f64,
    /// Per-RP buffer capacity in bits.
    pub buffer_capacity_bits: f64,
    /// Whether the tour returns to its starting RP.
    pub closed_tour: bool,
}

pub const SCENARIO_SCHEMA_VERSION: u32 = 1;

impl NetworkScenario {
    /// Validate the scenario invariants.
    pub fn validate(&self) -> Result<()> {
        if self.area.is_degenerate() {
            return Err(Error::invalid("degenerate deployment area"));
        }
        if !(self.mdc_speed_mps > 0.0) {
            return Err(Error::invalid("mdc_speed_mps must be > 0"));
        }
        if !(self.upload_rate_bps > 0.0) {
            return Err(Error::invalid("upload_rate_bps must be > 0"));
        }
        if !(self.comm_range_m > 0.0) {
            return Err(Error::invalid("comm_range_m must be > 0"));
        }
        for s in &self.sensors {
            if !s.position.is_finite() || !self.area.contains(&s.position) {
                return Err(Error::invalid(format!(
                    "sensor {} lies outside the deployment area",
                    s.id
                )));
            }
            if !(s.rate_bps >= 0.0) {
                return Err(Error::invalid(format!("sensor {} has negative rate", s.id)));
            }
        }
        Ok(())
    }

    /// Total data generation rate over all sensors, bits per second.
    pub fn total_rate_bps(&self) -> f64 {
        self.sensors.iter().map(|s| s.rate_bps).sum()
    }

    pub fn sensor_positions(&self) -> Vec<Point2D> {
        self.sensors.iter().map(|s| s.position).collect()
    }
}

// ============================================================================
// Intents
// ============================================================================

/// Weight vector expressing high-level collection intents, plus per-RP
/// importance weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntentWeights {
    /// Tour-time weight.
    pub eta_t: f64,
    /// Sensor-energy weight.
    pub eta_e: f64,
    /// Freshness weight.
    pub eta_f: f64,
    /// RP-importance weight.
    pub eta_p: f64,
    /// Per-RP importance weights w_j >= 0; length must equal the RP count
    /// once bound to a plan.
    pub rp_importance: Vec<f64>,
}

impl IntentWeights {
    /// Uniform-importance weights for `m` RPs.
    pub fn new(eta_t: f64, eta_e: f64, eta_f: f64, eta_p: f64, m: usize) -> Self {
        IntentWeights {
            eta_t,
            eta_e,
            eta_f,
            eta_p,
            rp_importance: vec![1.0; m],
        }
    }

    pub fn validate(&self, rp_count: usize) -> Result<()> {
        let etas = [self.eta_t, self.eta_e, self.eta_f, self.eta_p];
        if etas.iter().any(|w| !(*w >= 0.0)) {
            return Err(Error::invalid("intent weights must be >= 0"));
        }
        if self.rp_importance.len() != rp_count {
            return Err(Error::invalid(format!(
                "rp_importance has length {} but plan has {} RPs",
                self.rp_importance.len(),
                rp_count
            )));
        }
        if self.rp_importance.iter().any(|w| !(*w >= 0.0)) {
            return Err(Error::invalid("rp_importance entries must be >= 0"));
        }
        Ok(())
    }
}

// ============================================================================
// Tour schedule
// ============================================================================

/// A fully resolved collection tour: visiting order, per-RP dwell times, and
/// the converged total tour time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TourSchedule {
    /// Visiting permutation over RP indices.
    pub order: Vec<usize>,
    /// Dwell time in seconds, indexed by RP id (not visit position).
    pub dwell_s: Vec<f64>,
    pub travel_time_s: f64,
    /// Converged total tour time (travel plus total dwell).
    pub tour_time_s: f64,
    pub tour_length_m: f64,
}

impl TourSchedule {
    pub fn total_dwell_s(&self) -> f64 {
        self.dwell_s.iter().sum()
    }

    pub fn validate(&self) -> Result<()> {
        if !is_permutation(&self.order, self.order.len()) {
            return Err(Error::invalid("schedule order is not a permutation"));
        }
        if self.dwell_s.len() != self.order.len() {
            return Err(Error::invalid("dwell vector length mismatch"));
        }
        if self.dwell_s.iter().any(|t| !(*t >= 0.0)) {
            return Err(Error::invalid("dwell times must be >= 0"));
        }
        let recomposed = self.travel_time_s + self.total_dwell_s();
        if (recomposed - self.tour_time_s).abs() > 1e-6_f64.max(1e-9 * self.tour_time_s.abs()) {
            return Err(Error::invalid(
                "tour_time does not decompose into travel + dwell",
            ));
        }
        Ok(())
    }
}

/// True iff `order` is a permutation of 0..m.
pub fn is_permutation(order: &[usize], m: usize) -> bool {
    if order.len() != m {
        return false;
    }
    let mut seen = vec![false; m];
    for &i in order {
        if i >= m || seen[i] {
            return false;
        }
        seen[i] = true;
    }
    true
}

// ============================================================================
// Tour arithmetic
// ============================================================================

/// Total Euclidean length of the tour through `rp_positions` in the visiting
/// order, adding the return segment when `closed`.
pub fn tour_length(order: &[usize], rp_positions: &[Point2D], closed: bool) -> Result<f64> {
    let m = rp_positions.len();
    if m == 0 {
        return Err(Error::invalid("tour_length requires at least one RP"));
    }
    if !is_permutation(order, m) {
        return Err(Error::invalid("order is not a permutation of the RP set"));
    }
    let mut len = 0.0;
    for w in order.windows(2) {
        len += rp_positions[w[0]].distance(&rp_positions[w[1]]);
    }
    if closed && m > 1 {
        len += rp_positions[order[m - 1]].distance(&rp_positions[order[0]]);
    }
    Ok(len)
}

/// Tour length divided by the collector speed.
pub fn travel_time(
    order: &[usize],
    rp_positions: &[Point2D],
    speed_mps: f64,
    closed: bool,
) -> Result<f64> {
    if !(speed_mps > 0.0) {
        return Err(Error::invalid("speed must be > 0"));
    }
    Ok(tour_length(order, rp_positions, closed)? / speed_mps)
}

// ============================================================================
// Intent objective
// ============================================================================

/// Importance-weighted early-visit score in [0, 1]: 1 when every positive-
/// importance RP is visited first, 0 when all are visited last. Returns 1
/// when all importances are zero.
pub fn early_visit_score(order: &[usize], rp_importance: &[f64]) -> f64 {
    let m = order.len();
    let total: f64 = rp_importance.iter().sum();
    if total <= 0.0 || m == 0 {
        return 1.0;
    }
    let denom = (m - 1).max(1) as f64;
    let mut score = 0.0;
    for (pos, &rp) in order.iter().enumerate() {
        let earliness = 1.0 - pos as f64 / denom;
        score += rp_importance[rp] * earliness;
    }
    score / total
}

/// Scalar intent objective: weighted sum of normalized tour time, sensor
/// energy, and freshness, plus an importance-order penalty. Each term is
/// divided by a reference value carried in the report so the result is
/// dimensionless.
pub fn objective(
    schedule: &TourSchedule,
    weights: &IntentWeights,
    report: &crate::metrics::MetricReport,
) -> Result<f64> {
    weights.validate(schedule.order.len())?;
    let mut j = 0.0;
    if weights.eta_t > 0.0 {
        if !(report.t_ref_s > 0.0) {
            return Err(Error::invalid("t_ref_s must be > 0"));
        }
        j += weights.eta_t * report.tour_time_s / report.t_ref_s;
    }
    if weights.eta_e > 0.0 {
        if !(report.e_ref_j > 0.0) {
            return Err(Error::invalid("e_ref_j must be > 0"));
        }
        j += weights.eta_e * report.energy_j / report.e_ref_j;
    }
    if weights.eta_f > 0.0 {
        if !(report.delta_ref_s > 0.0) {
            return Err(Error::invalid("delta_ref_s must be > 0"));
        }
        j += weights.eta_f * report.freshness_s / report.delta_ref_s;
    }
    if weights.eta_p > 0.0 {
        j += weights.eta_p * (1.0 - early_visit_score(&schedule.order, &weights.rp_importance));
    }
    Ok(j)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pts(coords: &[(f64, f64)]) -> Vec<Point2D> {
        coords.iter().map(|&(x, y)| Point2D::new(x, y)).collect()
    }

    #[test]
    fn tour_length_single_rp_open_is_zero() {
        let p = pts(&[(4.0, 7.0)]);
        assert_eq!(tour_length(&[0], &p, false).unwrap(), 0.0);
        assert_eq!(tour_length(&[0], &p, true).unwrap(), 0.0);
    }

    #[test]
    fn tour_length_345_triangle_closed() {
        let p = pts(&[(0.0, 0.0), (3.0, 0.0), (3.0, 4.0)]);
        let len = tour_length(&[0, 1, 2], &p, true).unwrap();
        assert!((len - 12.0).abs() < 1e-12, "len = {len}");
    }

    #[test]
    fn tour_length_rejects_bad_orders() {
        let p = pts(&[(0.0, 0.0), (1.0, 0.0)]);
        assert!(tour_length(&[0, 0], &p, false).is_err());
        assert!(tour_length(&[0], &p, false).is_err());
        assert!(tour_length(&[], &[], false).is_err());
    }

    #[test]
    fn travel_time_basics() {
        let p = pts(&[(0.0, 0.0), (3.0, 0.0), (3.0, 4.0)]);
        // 3-4-5 closed triangle: 12 m at 2 m/s.
        let t = travel_time(&[0, 1, 2], &p, 2.0, true).unwrap();
        assert!((t - 6.0).abs() < 1e-12);
        assert!(travel_time(&[0, 1, 2], &p, 0.0, true).is_err());
        assert!(travel_time(&[0, 1, 2], &p, -1.0, true).is_err());
        // Zero length at any speed.
        let single = pts(&[(5.0, 5.0)]);
        assert_eq!(travel_time(&[0], &single, 3.5, true).unwrap(), 0.0);
    }

    #[test]
    fn fifteen_rp_perimeter_tour_matches_expected_travel_time() {
        // 15 RPs traced along a 250 m x 200 m rectangle boundary: the closed
        // tour length equals the 900 m perimeter, giving 450 s at 2 m/s.
        let mut p = Vec::new();
        for i in 0..5 {
            p.push(Point2D::new(i as f64 * 62.5, 0.0)); // bottom edge incl. both corners
        }
        for i in 0..4 {
            p.push(Point2D::new(250.0, (i + 1) as f64 * 50.0)); // right edge up to corner
        }
        for i in 0..4 {
            p.push(Point2D::new(250.0 - (i + 1) as f64 * 62.5, 200.0)); // top edge
        }
        for i in 0..2 {
            p.push(Point2D::new(0.0, 200.0 - (i + 1) as f64 * 200.0 / 3.0)); // left edge
        }
        assert_eq!(p.len(), 15);
        let order: Vec<usize> = (0..15).collect();
        let len = tour_length(&order, &p, true).unwrap();
        assert!((len - 900.0).abs() < 1e-9, "len = {len}");
        let t = travel_time(&order, &p, 2.0, true).unwrap();
        assert!((t - 450.0).abs() < 1e-9, "t = {t}");
    }

    #[test]
    fn early_visit_score_extremes() {
        // RP 0 carries all importance.
        let w = [1.0, 0.0, 0.0];
        assert_eq!(early_visit_score(&[0, 1, 2], &w), 1.0);
        assert_eq!(early_visit_score(&[1, 2, 0], &w), 0.0);
        // All-zero importance: vacuously satisfied.
        assert_eq!(early_visit_score(&[2, 1, 0], &[0.0; 3]), 1.0);
        // Single RP.
        assert_eq!(early_visit_score(&[0], &[2.0]), 1.0);
    }
}
