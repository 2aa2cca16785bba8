//! Guided reverse-diffusion tour construction.
//!
//! A waypoint trajectory is sampled by running an ancestral denoising loop
//! in a normalized coordinate frame, nudging each intermediate state down
//! the gradient of a differentiable intent loss. The continuous trajectory
//! is then discretized into an RP visiting order by first-visit indices and
//! refined with 2-opt.
//!
//! The noise predictor is pluggable. The default analytic predictor pulls
//! the chain toward a nearest-neighbor reference polyline resampled to the
//! waypoint count; a zero predictor is kept for ablation, and an external
//! handle accepts learned models.

use std::fmt;
use std::sync::Arc;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::baselines::{nearest_neighbor_tour, TourStart};
use crate::error::{Error, Result};
use crate::model::{tour_length, IntentWeights, NetworkScenario, Point2D, Rect};
use crate::placement::RpPlan;
use crate::rng::{stream, stream_rng};

// ============================================================================
// Trajectory and coordinate frame
// ============================================================================

/// An H x 2 waypoint array. Sampling happens in normalized coordinates
/// (nominal range [-1, 1]); callers denormalize with the area map before
/// geometric use.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaypointTrajectory {
    pub points: Vec<[f64; 2]>,
}

impl WaypointTrajectory {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.points
            .iter()
            .all(|p| p[0].is_finite() && p[1].is_finite())
    }

    /// Frobenius norm of the waypoint array.
    pub fn norm(&self) -> f64 {
        self.points
            .iter()
            .map(|p| p[0] * p[0] + p[1] * p[1])
            .sum::<f64>()
            .sqrt()
    }
}

/// Affine map between the deployment rectangle and the [-1, 1]^2 sampling
/// frame.
#[derive(Debug, Clone, Copy)]
pub struct AreaMap {
    cx: f64,
    cy: f64,
    half_w: f64,
    half_h: f64,
}

impl AreaMap {
    pub fn new(area: &Rect) -> Self {
        AreaMap {
            cx: (area.x_min + area.x_max) / 2.0,
            cy: (area.y_min + area.y_max) / 2.0,
            half_w: area.width() / 2.0,
            half_h: area.height() / 2.0,
        }
    }

    pub fn normalize(&self, p: &Point2D) -> [f64; 2] {
        [(p.x - self.cx) / self.half_w, (p.y - self.cy) / self.half_h]
    }

    pub fn denormalize(&self, p: &[f64; 2]) -> Point2D {
        Point2D::new(p[0] * self.half_w + self.cx, p[1] * self.half_h + self.cy)
    }

    pub fn normalize_all(&self, pts: &[Point2D]) -> Vec<[f64; 2]> {
        pts.iter().map(|p| self.normalize(p)).collect()
    }

    pub fn denormalize_trajectory(&self, x: &WaypointTrajectory) -> WaypointTrajectory {
        WaypointTrajectory {
            points: x
                .points
                .iter()
                .map(|p| {
                    let q = self.denormalize(p);
                    [q.x, q.y]
                })
                .collect(),
        }
    }
}

// ============================================================================
// Noise schedule
// ============================================================================

/// Per-step coefficients of the reverse chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseSchedule {
    pub k_steps: usize,
    /// beta[k-1] is the noise increment at step k.
    pub beta: Vec<f64>,
    pub alpha: Vec<f64>,
    pub alpha_bar: Vec<f64>,
    pub sigma: Vec<f64>,
    /// Guidance step sizes gamma[k-1].
    pub gamma: Vec<f64>,
}

impl NoiseSchedule {
    /// Linear beta schedule with sigma_k = sqrt(beta_k) and a constant
    /// guidance step gamma_k = gamma0. A state-noise-proportional step
    /// gamma0 * (1 - alpha_bar_k) was tried first but decays too fast to
    /// steer the early, information-free steps of short chains.
    pub fn linear(k_steps: usize, beta_start: f64, beta_end: f64, gamma0: f64) -> Result<Self> {
        if k_steps == 0 {
            return Err(Error::invalid("schedule needs at least one step"));
        }
        if !(beta_start > 0.0 && beta_end < 1.0 && beta_start <= beta_end) {
            return Err(Error::invalid(
                "beta range must satisfy 0 < start <= end < 1",
            ));
        }
        if !(gamma0 >= 0.0) {
            return Err(Error::invalid("gamma0 must be >= 0"));
        }
        let mut beta = Vec::with_capacity(k_steps);
        for i in 0..k_steps {
            let t = if k_steps == 1 {
                0.0
            } else {
                i as f64 / (k_steps - 1) as f64
            };
            beta.push(beta_start + t * (beta_end - beta_start));
        }
        let alpha: Vec<f64> = beta.iter().map(|b| 1.0 - b).collect();
        let mut alpha_bar = Vec::with_capacity(k_steps);
        let mut prod = 1.0;
        for a in &alpha {
            prod *= a;
            alpha_bar.push(prod);
        }
        let sigma: Vec<f64> = beta.iter().map(|b| b.sqrt()).collect();
        let gamma: Vec<f64> = vec![gamma0; k_steps];
        let schedule = NoiseSchedule {
            k_steps,
            beta,
            alpha,
            alpha_bar,
            sigma,
            gamma,
        };
        schedule.validate()?;
        Ok(schedule)
    }

    /// Default 50-step schedule, beta from 1e-4 to 2e-2, gamma0 = 0.1.
    pub fn default_for_steps(k_steps: usize, gamma0: f64) -> Result<Self> {
        NoiseSchedule::linear(k_steps, 1e-4, 2e-2, gamma0)
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.k_steps;
        if k == 0
            || self.beta.len() != k
            || self.alpha.len() != k
            || self.alpha_bar.len() != k
            || self.sigma.len() != k
            || self.gamma.len() != k
        {
            return Err(Error::invalid("schedule arrays must all have length K"));
        }
        for i in 0..k {
            if !(self.beta[i] > 0.0 && self.beta[i] < 1.0) {
                return Err(Error::invalid("beta must lie in (0, 1)"));
            }
            if !(self.sigma[i] >= 0.0) || !(self.gamma[i] >= 0.0) {
                return Err(Error::invalid("sigma and gamma must be >= 0"));
            }
            if i > 0 && !(self.alpha_bar[i] < self.alpha_bar[i - 1]) {
                return Err(Error::invalid("alpha_bar must be strictly decreasing"));
            }
        }
        Ok(())
    }
}

// ============================================================================
// Noise predictors
// ============================================================================

/// External noise predictor: given the current state, normalized RP
/// positions, intent weights, and the step index k, produce the predicted
/// noise (same shape as the state).
pub trait NoisePredictor: Send + Sync {
    fn predict(
        &self,
        x: &WaypointTrajectory,
        rp_norm: &[[f64; 2]],
        weights: &IntentWeights,
        k: usize,
        schedule: &NoiseSchedule,
    ) -> Vec<[f64; 2]>;
}

/// Which noise predictor drives the reverse chain.
#[derive(Clone)]
pub enum DenoiserSpec {
    /// Predict zero noise everywhere (ablation).
    Zero,
    /// Analytic predictor contracting toward the polyline through the RPs
    /// in `reference_order`, resampled to the waypoint count.
    AnalyticReference { reference_order: Vec<usize> },
    /// Opaque externally supplied model.
    External(Arc<dyn NoisePredictor>),
}

impl fmt::Debug for DenoiserSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DenoiserSpec::Zero => write!(f, "DenoiserSpec::Zero"),
            DenoiserSpec::AnalyticReference { reference_order } => f
                .debug_struct("DenoiserSpec::AnalyticReference")
                .field("reference_order", reference_order)
                .finish(),
            DenoiserSpec::External(_) => write!(f, "DenoiserSpec::External(..)"),
        }
    }
}

/// Resample a polyline to `h` points equally spaced in arc length.
pub fn resample_polyline(points: &[[f64; 2]], h: usize) -> Vec<[f64; 2]> {
    assert!(!points.is_empty() && h >= 1);
    if points.len() == 1 {
        return vec![points[0]; h];
    }
    let mut cum = Vec::with_capacity(points.len());
    cum.push(0.0);
    for w in points.windows(2) {
        let d = (w[1][0] - w[0][0]).hypot(w[1][1] - w[0][1]);
        cum.push(cum.last().unwrap() + d);
    }
    let total = *cum.last().unwrap();
    if total == 0.0 {
        return vec![points[0]; h];
    }
    let mut out = Vec::with_capacity(h);
    let mut seg = 0usize;
    for i in 0..h {
        let target = if h == 1 {
            0.0
        } else {
            total * i as f64 / (h - 1) as f64
        };
        while seg + 2 < cum.len() && cum[seg + 1] < target {
            seg += 1;
        }
        let seg_len = cum[seg + 1] - cum[seg];
        let frac = if seg_len > 0.0 {
            ((target - cum[seg]) / seg_len).clamp(0.0, 1.0)
        } else {
            0.0
        };
        out.push([
            points[seg][0] + frac * (points[seg + 1][0] - points[seg][0]),
            points[seg][1] + frac * (points[seg + 1][1] - points[seg][1]),
        ]);
    }
    out
}

// ============================================================================
// Guidance loss and gradient
// ============================================================================

/// Softening parameters for the intent loss.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GuidanceParams {
    /// Softmin temperature in normalized units; hard min as beta -> inf.
    pub beta_soft: f64,
    /// Additive epsilon under every norm, keeping gradients finite at
    /// coincident points.
    pub safe_norm_eps: f64,
}

impl Default for GuidanceParams {
    fn default() -> Self {
        GuidanceParams {
            beta_soft: 50.0,
            safe_norm_eps: 1e-12,
        }
    }
}

#[inline]
fn safe_norm(dx: f64, dy: f64, eps: f64) -> f64 {
    (dx * dx + dy * dy + eps).sqrt()
}

/// Softmax weights of -beta * d, plus the soft minimum sum(w_h d_h) and the
/// soft argmin index sum(h w_h).
fn soft_stats(dists: &[f64], beta: f64) -> (Vec<f64>, f64, f64) {
    // Shift by the min for numerical stability.
    let d_min = dists.iter().cloned().fold(f64::INFINITY, f64::min);
    let mut weights: Vec<f64> = dists.iter().map(|d| (-beta * (d - d_min)).exp()).collect();
    let z: f64 = weights.iter().sum();
    for w in &mut weights {
        *w /= z;
    }
    let softmin: f64 = weights.iter().zip(dists).map(|(w, d)| w * d).sum();
    let softidx: f64 = weights.iter().enumerate().map(|(h, w)| h as f64 * w).sum();
    (weights, softmin, softidx)
}

/// Differentiable intent loss over a normalized trajectory:
/// a path-length term, an importance-weighted soft-min distance term
/// pulling the path through each RP, and an early-visit term rewarding
/// small first-visit indices for important RPs.
pub fn guidance_loss(
    x: &WaypointTrajectory,
    rp_norm: &[[f64; 2]],
    weights: &IntentWeights,
    params: &GuidanceParams,
) -> f64 {
    let h = x.len();
    let eps = params.safe_norm_eps;
    let mut loss = 0.0;

    if weights.eta_t > 0.0 {
        for w in x.points.windows(2) {
            loss += weights.eta_t * safe_norm(w[1][0] - w[0][0], w[1][1] - w[0][1], eps);
        }
    }

    if weights.eta_p > 0.0 || weights.eta_f > 0.0 {
        for (j, rp) in rp_norm.iter().enumerate() {
            let wj = weights.rp_importance[j];
            if wj == 0.0 {
                continue;
            }
            let dists: Vec<f64> = x
                .points
                .iter()
                .map(|p| safe_norm(p[0] - rp[0], p[1] - rp[1], eps))
                .collect();
            let (_, softmin, softidx) = soft_stats(&dists, params.beta_soft);
            loss += weights.eta_p * wj * softmin;
            loss += weights.eta_f * wj * softidx / h as f64;
        }
    }
    loss
}

/// Exact analytic gradient of [`guidance_loss`] with respect to every
/// waypoint.
pub fn guidance_gradient(
    x: &WaypointTrajectory,
    rp_norm: &[[f64; 2]],
    weights: &IntentWeights,
    params: &GuidanceParams,
) -> Vec<[f64; 2]> {
    let h = x.len();
    let eps = params.safe_norm_eps;
    let beta = params.beta_soft;
    let mut grad = vec![[0.0; 2]; h];

    if weights.eta_t > 0.0 {
        for i in 0..h.saturating_sub(1) {
            let dx = x.points[i + 1][0] - x.points[i][0];
            let dy = x.points[i + 1][1] - x.points[i][1];
            let n = safe_norm(dx, dy, eps);
            let gx = weights.eta_t * dx / n;
            let gy = weights.eta_t * dy / n;
            grad[i][0] -= gx;
            grad[i][1] -= gy;
            grad[i + 1][0] += gx;
            grad[i + 1][1] += gy;
        }
    }

    if weights.eta_p > 0.0 || weights.eta_f > 0.0 {
        for (j, rp) in rp_norm.iter().enumerate() {
            let wj = weights.rp_importance[j];
            if wj == 0.0 {
                continue;
            }
            let dists: Vec<f64> = x
                .points
                .iter()
                .map(|p| safe_norm(p[0] - rp[0], p[1] - rp[1], eps))
                .collect();
            let (sw, softmin, softidx) = soft_stats(&dists, beta);
            for (hh, p) in x.points.iter().enumerate() {
                // d(softmin)/d(d_h) and d(softidx)/d(d_h).
                let dmin_dd = sw[hh] * (1.0 - beta * (dists[hh] - softmin));
                let didx_dd = beta * sw[hh] * (softidx - hh as f64);
                let coeff = weights.eta_p * wj * dmin_dd + weights.eta_f * wj * didx_dd / h as f64;
                let inv = coeff / dists[hh];
                grad[hh][0] += inv * (p[0] - rp[0]);
                grad[hh][1] += inv * (p[1] - rp[1]);
            }
        }
    }
    grad
}

// ============================================================================
// Reverse sampling
// ============================================================================

fn predict_noise(
    denoiser: &DenoiserSpec,
    x: &WaypointTrajectory,
    x_ref: Option<&[[f64; 2]]>,
    rp_norm: &[[f64; 2]],
    weights: &IntentWeights,
    k: usize,
    schedule: &NoiseSchedule,
) -> Vec<[f64; 2]> {
    match denoiser {
        DenoiserSpec::Zero => vec![[0.0; 2]; x.len()],
        DenoiserSpec::AnalyticReference { .. } => {
            // eps_hat = (X_k - sqrt(ab_k) X_ref) / sqrt(1 - ab_k)
            let x_ref = x_ref.expect("reference trajectory prepared at setup");
            let ab = schedule.alpha_bar[k - 1];
            let scale = (1.0 - ab).sqrt();
            let root_ab = ab.sqrt();
            x.points
                .iter()
                .zip(x_ref)
                .map(|(p, r)| {
                    [
                        (p[0] - root_ab * r[0]) / scale,
                        (p[1] - root_ab * r[1]) / scale,
                    ]
                })
                .collect()
        }
        DenoiserSpec::External(model) => model.predict(x, rp_norm, weights, k, schedule),
    }
}

/// One ancestral update plus guided correction, shared by the sampler and
/// its snapshot variant.
#[allow(clippy::too_many_arguments)]
fn reverse_step(
    x: &mut WaypointTrajectory,
    eps_hat: &[[f64; 2]],
    z: Option<&[[f64; 2]]>,
    rp_norm: &[[f64; 2]],
    weights: &IntentWeights,
    params: &GuidanceParams,
    schedule: &NoiseSchedule,
    k: usize,
) {
    let alpha = schedule.alpha[k - 1];
    let ab = schedule.alpha_bar[k - 1];
    let sigma = schedule.sigma[k - 1];
    let gamma = schedule.gamma[k - 1];
    let inv_root_alpha = 1.0 / alpha.sqrt();
    let noise_coeff = (1.0 - alpha) / (1.0 - ab).sqrt();

    for (i, p) in x.points.iter_mut().enumerate() {
        p[0] = inv_root_alpha * (p[0] - noise_coeff * eps_hat[i][0]);
        p[1] = inv_root_alpha * (p[1] - noise_coeff * eps_hat[i][1]);
        if let Some(z) = z {
            p[0] += sigma * z[i][0];
            p[1] += sigma * z[i][1];
        }
    }
    if gamma > 0.0 {
        let grad = guidance_gradient(x, rp_norm, weights, params);
        for (p, g) in x.points.iter_mut().zip(&grad) {
            p[0] -= gamma * g[0];
            p[1] -= gamma * g[1];
        }
    }
}

/// Run the guided reverse chain and return the final normalized trajectory
/// together with any requested intermediate snapshots (pairs of step index
/// and state, including the initial draw at k = K and the final state at
/// k = 0 when the interval divides them).
#[allow(clippy::too_many_arguments)]
pub fn sample_trajectory_with_snapshots(
    seed: u64,
    rp_norm: &[[f64; 2]],
    weights: &IntentWeights,
    schedule: &NoiseSchedule,
    denoiser: &DenoiserSpec,
    h: usize,
    params: &GuidanceParams,
    snapshot_every: Option<usize>,
) -> Result<(WaypointTrajectory, Vec<(usize, WaypointTrajectory)>)> {
    let m = rp_norm.len();
    if h < m {
        return Err(Error::invalid(format!(
            "waypoint count {h} must be >= RP count {m}"
        )));
    }
    if h == 0 {
        return Err(Error::invalid("waypoint count must be >= 1"));
    }
    schedule.validate()?;
    weights.validate(m)?;

    // Prepare the analytic reference polyline once, in normalized space.
    let x_ref: Option<Vec<[f64; 2]>> = match denoiser {
        DenoiserSpec::AnalyticReference { reference_order } => {
            if !crate::model::is_permutation(reference_order, m) {
                return Err(Error::invalid(
                    "analytic reference order is not a permutation of the RP set",
                ));
            }
            let ordered: Vec<[f64; 2]> = reference_order.iter().map(|&j| rp_norm[j]).collect();
            Some(resample_polyline(&ordered, h))
        }
        _ => None,
    };

    // All Gaussian draws come from the diffusion stream, in a fixed order
    // that depends only on (seed, H, K); weights never shift it.
    let mut rng = stream_rng(seed, stream::DIFFUSION);
    let k_steps = schedule.k_steps;
    let mut x = WaypointTrajectory {
        points: (0..h)
            .map(|_| [rng.sample(StandardNormal), rng.sample(StandardNormal)])
            .collect(),
    };

    let snap_wanted = |k: usize| match snapshot_every {
        Some(every) if every > 0 => k.is_multiple_of(every),
        _ => false,
    };
    let mut snapshots = Vec::new();
    if snap_wanted(k_steps) {
        snapshots.push((k_steps, x.clone()));
    }

    for k in (1..=k_steps).rev() {
        let eps_hat = predict_noise(
            denoiser,
            &x,
            x_ref.as_deref(),
            rp_norm,
            weights,
            k,
            schedule,
        );
        let z: Option<Vec<[f64; 2]>> = if k > 1 {
            Some(
                (0..h)
                    .map(|_| [rng.sample(StandardNormal), rng.sample(StandardNormal)])
                    .collect(),
            )
        } else {
            None // z_1 = 0 at the final step
        };
        reverse_step(
            &mut x,
            &eps_hat,
            z.as_deref(),
            rp_norm,
            weights,
            params,
            schedule,
            k,
        );
        if snap_wanted(k - 1) {
            snapshots.push((k - 1, x.clone()));
        }
    }
    Ok((x, snapshots))
}

/// Run the guided reverse chain; deterministic given the seed.
pub fn sample_trajectory(
    seed: u64,
    rp_norm: &[[f64; 2]],
    weights: &IntentWeights,
    schedule: &NoiseSchedule,
    denoiser: &DenoiserSpec,
    h: usize,
    params: &GuidanceParams,
) -> Result<WaypointTrajectory> {
    sample_trajectory_with_snapshots(seed, rp_norm, weights, schedule, denoiser, h, params, None)
        .map(|(x, _)| x)
}

// ============================================================================
// Order extraction and 2-opt
// ============================================================================

/// Discretize a trajectory into an RP visiting order by first-visit index:
/// each RP maps to its nearest waypoint (lowest index on distance ties), and
/// RPs are sorted by that index, breaking index ties by smaller distance and
/// then by RP index. Always a valid permutation.
pub fn extract_order(x: &WaypointTrajectory, rp_positions: &[Point2D]) -> Result<Vec<usize>> {
    let m = rp_positions.len();
    if x.len() < m {
        return Err(Error::invalid("trajectory must have at least M waypoints"));
    }
    let mut keyed: Vec<(usize, f64, usize)> = rp_positions
        .iter()
        .enumerate()
        .map(|(j, rp)| {
            let mut q = 0usize;
            let mut best = f64::INFINITY;
            for (hh, p) in x.points.iter().enumerate() {
                let d = (p[0] - rp.x).hypot(p[1] - rp.y);
                if d < best {
                    best = d;
                    q = hh;
                }
            }
            (q, best, j)
        })
        .collect();
    keyed.sort_by(|a, b| {
        a.0.cmp(&b.0)
            .then(a.1.partial_cmp(&b.1).expect("finite distances"))
            .then(a.2.cmp(&b.2))
    });
    Ok(keyed.into_iter().map(|(_, _, j)| j).collect())
}

/// First-improvement 2-opt: scan (i, j) pairs lexicographically, reversing
/// `order[i..=j]` whenever that shortens the tour, until a full pass makes
/// no improvement or `max_passes` is exhausted. Never lengthens the tour.
pub fn two_opt(
    order: &[usize],
    rp_positions: &[Point2D],
    closed: bool,
    max_passes: usize,
) -> Result<Vec<usize>> {
    let m = rp_positions.len();
    if !crate::model::is_permutation(order, m) {
        return Err(Error::invalid("order is not a permutation"));
    }
    let mut tour = order.to_vec();
    if m < 3 || max_passes == 0 {
        return Ok(tour);
    }
    let dist = |a: usize, b: usize| rp_positions[a].distance(&rp_positions[b]);
    const EPS: f64 = 1e-10;

    for _ in 0..max_passes {
        let mut improved = false;
        for i in 0..m - 1 {
            for j in i + 1..m {
                if closed && i == 0 && j == m - 1 {
                    continue; // full reversal: same cyclic tour
                }
                // Edges touched by reversing tour[i..=j].
                let delta = if closed {
                    let before = tour[(i + m - 1) % m];
                    let after = tour[(j + 1) % m];
                    dist(before, tour[j]) + dist(tour[i], after)
                        - dist(before, tour[i])
                        - dist(tour[j], after)
                } else {
                    let mut d = 0.0;
                    if i > 0 {
                        d += dist(tour[i - 1], tour[j]) - dist(tour[i - 1], tour[i]);
                    }
                    if j < m - 1 {
                        d += dist(tour[i], tour[j + 1]) - dist(tour[j], tour[j + 1]);
                    }
                    d
                };
                if delta < -EPS {
                    tour[i..=j].reverse();
                    improved = true;
                }
            }
        }
        if !improved {
            break;
        }
    }
    Ok(tour)
}

// ============================================================================
// End-to-end planning
// ============================================================================

/// Which built-in predictor a config selects.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DenoiserKind {
    Zero,
    AnalyticReference,
}

/// Sampler configuration for end-to-end tour planning.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiffusionConfig {
    /// Waypoint count H.
    pub waypoints: usize,
    /// Reverse steps K.
    pub steps: usize,
    pub beta_start: f64,
    pub beta_end: f64,
    /// Guidance step size, applied at every reverse step.
    pub gamma0: f64,
    pub beta_soft: f64,
    pub denoiser: DenoiserKind,
    /// 2-opt pass cap applied to the extracted order.
    pub two_opt_max_passes: usize,
    /// Record the trajectory every this many reverse steps (for dumps).
    pub snapshot_every: Option<usize>,
}

impl Default for DiffusionConfig {
    fn default() -> Self {
        DiffusionConfig {
            waypoints: 80,
            steps: 50,
            beta_start: 1e-4,
            beta_end: 2e-2,
            gamma0: 0.1,
            beta_soft: 50.0,
            denoiser: DenoiserKind::AnalyticReference,
            two_opt_max_passes: 64,
            snapshot_every: None,
        }
    }
}

/// Planned tour plus the trajectory that produced it.
#[derive(Debug, Clone)]
pub struct PlannedTour {
    /// Visiting order after 2-opt refinement.
    pub order: Vec<usize>,
    /// Order as extracted from the trajectory, before 2-opt.
    pub raw_order: Vec<usize>,
    /// Final trajectory in scenario coordinates (meters).
    pub trajectory: WaypointTrajectory,
    /// Intermediate states in scenario coordinates, if snapshots were on.
    pub snapshots: Vec<(usize, WaypointTrajectory)>,
}

impl PlannedTour {
    /// Tour length of the pre-refinement order.
    pub fn raw_length(&self, rp_positions: &[Point2D], closed: bool) -> Result<f64> {
        tour_length(&self.raw_order, rp_positions, closed)
    }
}

fn build_denoiser(
    kind: DenoiserKind,
    scenario: &NetworkScenario,
    plan: &RpPlan,
) -> Result<DenoiserSpec> {
    Ok(match kind {
        DenoiserKind::Zero => DenoiserSpec::Zero,
        DenoiserKind::AnalyticReference => DenoiserSpec::AnalyticReference {
            reference_order: nearest_neighbor_tour(
                TourStart::NearestTo(scenario.sink),
                &plan.rp_positions,
            )?,
        },
    })
}

/// Sample a trajectory, discretize it to a visiting order, and refine with
/// 2-opt. Deterministic given the seed.
pub fn plan_tour(
    seed: u64,
    scenario: &NetworkScenario,
    plan: &RpPlan,
    weights: &IntentWeights,
    config: &DiffusionConfig,
) -> Result<PlannedTour> {
    let m = plan.rp_count();
    let map = AreaMap::new(&scenario.area);
    let rp_norm = map.normalize_all(&plan.rp_positions);
    let schedule = NoiseSchedule::linear(
        config.steps,
        config.beta_start,
        config.beta_end,
        config.gamma0,
    )?;
    let params = GuidanceParams {
        beta_soft: config.beta_soft,
        ..GuidanceParams::default()
    };
    let denoiser = build_denoiser(config.denoiser, scenario, plan)?;
    let (x_norm, snaps_norm) = sample_trajectory_with_snapshots(
        seed,
        &rp_norm,
        weights,
        &schedule,
        &denoiser,
        config.waypoints,
        &params,
        config.snapshot_every,
    )?;
    let trajectory = map.denormalize_trajectory(&x_norm);
    let raw_order = extract_order(&trajectory, &plan.rp_positions)?;
    let order = two_opt(
        &raw_order,
        &plan.rp_positions,
        scenario.closed_tour,
        config.two_opt_max_passes,
    )?;
    debug_assert!(crate::model::is_permutation(&order, m));
    let snapshots = snaps_norm
        .into_iter()
        .map(|(k, x)| (k, map.denormalize_trajectory(&x)))
        .collect();
    Ok(PlannedTour {
        order,
        raw_order,
        trajectory,
        snapshots,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn rng(seed: u64) -> rand_chacha::ChaCha8Rng {
        stream_rng(seed, 0x7E57)
    }

    fn random_trajectory(r: &mut impl Rng, h: usize) -> WaypointTrajectory {
        WaypointTrajectory {
            points: (0..h)
                .map(|_| [r.random_range(-1.0..1.0), r.random_range(-1.0..1.0)])
                .collect(),
        }
    }

    fn random_rps(r: &mut impl Rng, m: usize) -> Vec<[f64; 2]> {
        (0..m)
            .map(|_| [r.random_range(-1.0..1.0), r.random_range(-1.0..1.0)])
            .collect()
    }

    fn random_weights(r: &mut impl Rng, m: usize) -> IntentWeights {
        IntentWeights {
            eta_t: r.random_range(0.1..2.0),
            eta_e: 0.0,
            eta_f: r.random_range(0.1..1.0),
            eta_p: r.random_range(0.1..1.0),
            rp_importance: (0..m).map(|_| r.random_range(0.1..2.0)).collect(),
        }
    }

    /// Independent re-implementation of the loss with naive unshifted
    /// softmax arithmetic; used only as a test oracle.
    fn loss_oracle(
        x: &WaypointTrajectory,
        rps: &[[f64; 2]],
        w: &IntentWeights,
        params: &GuidanceParams,
    ) -> f64 {
        let h = x.len();
        let eps = params.safe_norm_eps;
        let beta = params.beta_soft;
        let mut total = 0.0;
        for i in 0..h - 1 {
            let dx = x.points[i + 1][0] - x.points[i][0];
            let dy = x.points[i + 1][1] - x.points[i][1];
            total += w.eta_t * (dx * dx + dy * dy + eps).sqrt();
        }
        for (j, rp) in rps.iter().enumerate() {
            let d: Vec<f64> = (0..h)
                .map(|i| {
                    let dx = x.points[i][0] - rp[0];
                    let dy = x.points[i][1] - rp[1];
                    (dx * dx + dy * dy + eps).sqrt()
                })
                .collect();
            let z: f64 = d.iter().map(|di| (-beta * di).exp()).sum();
            let softmin: f64 = d.iter().map(|di| di * (-beta * di).exp()).sum::<f64>() / z;
            let softidx: f64 = d
                .iter()
                .enumerate()
                .map(|(i, di)| i as f64 * (-beta * di).exp())
                .sum::<f64>()
                / z;
            total += w.eta_p * w.rp_importance[j] * softmin;
            total += w.eta_f * w.rp_importance[j] * softidx / h as f64;
        }
        total
    }

    #[test]
    fn loss_straight_line_path_term() {
        let h = 10;
        let d = 0.07;
        let x = WaypointTrajectory {
            points: (0..h).map(|i| [i as f64 * d, 0.0]).collect(),
        };
        let w = IntentWeights::new(1.0, 0.0, 0.0, 0.0, 0);
        let loss = guidance_loss(&x, &[], &w, &GuidanceParams::default());
        assert!((loss - (h - 1) as f64 * d).abs() < 1e-6, "loss = {loss}");
    }

    #[test]
    fn loss_rp_on_waypoint_vanishes_in_hard_min_limit() {
        let x = WaypointTrajectory {
            points: vec![[0.0, 0.0], [0.5, 0.0], [1.0, 0.0]],
        };
        let w = IntentWeights::new(0.0, 0.0, 0.0, 1.0, 1);
        let params = GuidanceParams {
            beta_soft: 1e6,
            ..GuidanceParams::default()
        };
        let loss = guidance_loss(&x, &[[0.5, 0.0]], &w, &params);
        assert!(loss < 1e-5, "loss = {loss}");
    }

    #[test]
    fn loss_matches_independent_oracle() {
        let mut r = rng(3);
        for _ in 0..20 {
            let x = random_trajectory(&mut r, 16);
            let rps = random_rps(&mut r, 4);
            let w = random_weights(&mut r, 4);
            let params = GuidanceParams::default();
            let a = guidance_loss(&x, &rps, &w, &params);
            let b = loss_oracle(&x, &rps, &w, &params);
            assert!((a - b).abs() <= 1e-9 * b.abs().max(1.0), "{a} vs {b}");
        }
    }

    /// Central finite differences of the loss, step 1e-5.
    #[allow(clippy::needless_range_loop)]
    fn fd_gradient(
        x: &WaypointTrajectory,
        rps: &[[f64; 2]],
        w: &IntentWeights,
        params: &GuidanceParams,
    ) -> Vec<[f64; 2]> {
        let step = 1e-5;
        let mut grad = vec![[0.0; 2]; x.len()];
        for i in 0..x.len() {
            for c in 0..2 {
                let mut plus = x.clone();
                plus.points[i][c] += step;
                let mut minus = x.clone();
                minus.points[i][c] -= step;
                grad[i][c] = (guidance_loss(&plus, rps, w, params)
                    - guidance_loss(&minus, rps, w, params))
                    / (2.0 * step);
            }
        }
        grad
    }

    #[test]
    fn gradient_on_straight_line_cancels_interior() {
        let h = 8;
        let x = WaypointTrajectory {
            points: (0..h).map(|i| [i as f64 * 0.1, 0.0]).collect(),
        };
        let w = IntentWeights::new(0.7, 0.0, 0.0, 0.0, 0);
        let g = guidance_gradient(&x, &[], &w, &GuidanceParams::default());
        for (i, gi) in g.iter().enumerate() {
            let mag = (gi[0] * gi[0] + gi[1] * gi[1]).sqrt();
            if i == 0 || i == h - 1 {
                assert!((mag - 0.7).abs() < 1e-6, "endpoint {i}: {mag}");
            } else {
                assert!(mag < 1e-9, "interior {i}: {mag}");
            }
        }
    }

    #[test]
    fn gradient_zero_weights_zero_array() {
        let mut r = rng(4);
        let x = random_trajectory(&mut r, 12);
        let rps = random_rps(&mut r, 3);
        let w = IntentWeights::new(0.0, 0.0, 0.0, 0.0, 3);
        let g = guidance_gradient(&x, &rps, &w, &GuidanceParams::default());
        assert!(g.iter().all(|p| p[0] == 0.0 && p[1] == 0.0));
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut r = rng(5);
        for _ in 0..10 {
            let x = random_trajectory(&mut r, 20);
            let rps = random_rps(&mut r, 5);
            let w = random_weights(&mut r, 5);
            let params = GuidanceParams::default();
            let ga = guidance_gradient(&x, &rps, &w, &params);
            let gf = fd_gradient(&x, &rps, &w, &params);
            let mut num = 0.0;
            let mut den = 0.0;
            for (a, b) in ga.iter().zip(&gf) {
                num += (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2);
                den += b[0] * b[0] + b[1] * b[1];
            }
            let rel = (num / den).sqrt();
            assert!(rel <= 1e-4, "relative gradient error {rel}");
        }
    }

    #[test]
    fn zero_denoiser_without_noise_or_guidance_rescales_init() {
        let k = 12;
        let beta = vec![0.01; k];
        let alpha: Vec<f64> = beta.iter().map(|b| 1.0 - b).collect();
        let mut alpha_bar = Vec::new();
        let mut prod = 1.0;
        for a in &alpha {
            prod *= a;
            alpha_bar.push(prod);
        }
        let schedule = NoiseSchedule {
            k_steps: k,
            beta,
            alpha: alpha.clone(),
            alpha_bar,
            sigma: vec![0.0; k],
            gamma: vec![0.0; k],
        };
        let h = 6;
        let w = IntentWeights::new(1.0, 0.0, 0.0, 0.0, 1);
        let x = sample_trajectory(
            9,
            &[[0.0, 0.0]],
            &w,
            &schedule,
            &DenoiserSpec::Zero,
            h,
            &GuidanceParams::default(),
        )
        .unwrap();

        // Reproduce the documented draw order for X_K.
        let mut r = stream_rng(9, stream::DIFFUSION);
        let init: Vec<[f64; 2]> = (0..h)
            .map(|_| [r.sample(StandardNormal), r.sample(StandardNormal)])
            .collect();
        let scale: f64 = alpha.iter().map(|a| 1.0 / a.sqrt()).product();
        for (out, start) in x.points.iter().zip(&init) {
            assert!((out[0] - start[0] * scale).abs() < 1e-12);
            assert!((out[1] - start[1] * scale).abs() < 1e-12);
        }
    }

    #[test]
    fn analytic_denoiser_converges_to_reference() {
        let mut r = rng(6);
        let m = 6;
        let h = 40;
        let rps = random_rps(&mut r, m);
        let reference_order: Vec<usize> = vec![2, 0, 4, 1, 5, 3];
        let schedule = NoiseSchedule::default_for_steps(50, 0.0).unwrap();
        let w = IntentWeights::new(1.0, 0.0, 0.3, 0.2, m);
        let x = sample_trajectory(
            21,
            &rps,
            &w,
            &schedule,
            &DenoiserSpec::AnalyticReference {
                reference_order: reference_order.clone(),
            },
            h,
            &GuidanceParams::default(),
        )
        .unwrap();
        let ordered: Vec<[f64; 2]> = reference_order.iter().map(|&j| rps[j]).collect();
        let x_ref = resample_polyline(&ordered, h);
        let mut diff = 0.0;
        let mut norm = 0.0;
        for (a, b) in x.points.iter().zip(&x_ref) {
            diff += (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2);
            norm += b[0] * b[0] + b[1] * b[1];
        }
        assert!(
            diff.sqrt() <= 0.05 * norm.sqrt(),
            "relative deviation {}",
            diff.sqrt() / norm.sqrt()
        );
    }

    #[test]
    fn nominal_sampler_shape_is_finite() {
        let mut r = rng(7);
        let m = 15;
        let rps = random_rps(&mut r, m);
        let schedule = NoiseSchedule::default_for_steps(50, 0.1).unwrap();
        let w = IntentWeights::new(0.5, 0.0, 0.3, 0.2, m);
        let order: Vec<usize> = (0..m).collect();
        let x = sample_trajectory(
            33,
            &rps,
            &w,
            &schedule,
            &DenoiserSpec::AnalyticReference {
                reference_order: order,
            },
            80,
            &GuidanceParams::default(),
        )
        .unwrap();
        assert_eq!(x.len(), 80);
        assert!(x.is_finite());
    }

    #[test]
    fn sampler_rejects_arity_mismatches() {
        let schedule = NoiseSchedule::default_for_steps(10, 0.1).unwrap();
        let w = IntentWeights::new(1.0, 0.0, 0.0, 0.0, 2);
        let rps = [[0.0, 0.0], [0.5, 0.5]];
        // H < M.
        assert!(sample_trajectory(
            0,
            &rps,
            &w,
            &schedule,
            &DenoiserSpec::Zero,
            1,
            &GuidanceParams::default()
        )
        .is_err());
        // Reference order not a permutation of the RP set.
        assert!(sample_trajectory(
            0,
            &rps,
            &w,
            &schedule,
            &DenoiserSpec::AnalyticReference {
                reference_order: vec![0, 0]
            },
            8,
            &GuidanceParams::default()
        )
        .is_err());
        // Importance vector bound to the wrong RP count.
        let bad_w = IntentWeights::new(1.0, 0.0, 0.0, 0.0, 3);
        assert!(sample_trajectory(
            0,
            &rps,
            &bad_w,
            &schedule,
            &DenoiserSpec::Zero,
            8,
            &GuidanceParams::default()
        )
        .is_err());
    }

    #[test]
    fn external_predictor_is_called_like_builtin() {
        struct AlwaysZero;
        impl NoisePredictor for AlwaysZero {
            fn predict(
                &self,
                x: &WaypointTrajectory,
                _rp_norm: &[[f64; 2]],
                _weights: &IntentWeights,
                _k: usize,
                _schedule: &NoiseSchedule,
            ) -> Vec<[f64; 2]> {
                vec![[0.0; 2]; x.len()]
            }
        }
        let mut r = rng(14);
        let rps = random_rps(&mut r, 3);
        let schedule = NoiseSchedule::default_for_steps(15, 0.1).unwrap();
        let w = IntentWeights::new(1.0, 0.0, 0.0, 0.0, 3);
        let params = GuidanceParams::default();
        let external = sample_trajectory(
            5,
            &rps,
            &w,
            &schedule,
            &DenoiserSpec::External(Arc::new(AlwaysZero)),
            12,
            &params,
        )
        .unwrap();
        let builtin =
            sample_trajectory(5, &rps, &w, &schedule, &DenoiserSpec::Zero, 12, &params).unwrap();
        assert_eq!(external, builtin);
    }

    #[test]
    fn weights_do_not_shift_noise_draws() {
        // With gamma = 0 the weights only enter through guidance, so two
        // different weight vectors must produce identical trajectories.
        let mut r = rng(8);
        let rps = random_rps(&mut r, 4);
        let schedule = NoiseSchedule::default_for_steps(20, 0.0).unwrap();
        let w1 = IntentWeights::new(1.0, 0.0, 0.0, 0.0, 4);
        let w2 = IntentWeights::new(0.0, 0.0, 2.0, 3.0, 4);
        let a = sample_trajectory(
            13,
            &rps,
            &w1,
            &schedule,
            &DenoiserSpec::Zero,
            10,
            &GuidanceParams::default(),
        )
        .unwrap();
        let b = sample_trajectory(
            13,
            &rps,
            &w2,
            &schedule,
            &DenoiserSpec::Zero,
            10,
            &GuidanceParams::default(),
        )
        .unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn extract_order_monotone_sweep_is_identity() {
        let x = WaypointTrajectory {
            points: (0..20).map(|i| [i as f64 * 10.0, 0.0]).collect(),
        };
        let rps: Vec<Point2D> = (0..5)
            .map(|j| Point2D::new(j as f64 * 40.0 + 3.0, 5.0))
            .collect();
        let order = extract_order(&x, &rps).unwrap();
        assert_eq!(order, vec![0, 1, 2, 3, 4]);
    }

    #[test]
    fn extract_order_tie_breaks_by_distance_then_index() {
        // Both RPs are nearest to waypoint 1; RP 1 is closer.
        let x = WaypointTrajectory {
            points: vec![[0.0, 0.0], [10.0, 0.0], [20.0, 0.0]],
        };
        let rps = vec![Point2D::new(10.0, 2.0), Point2D::new(10.0, 1.0)];
        let order = extract_order(&x, &rps).unwrap();
        assert_eq!(order, vec![1, 0]);
        // Equal distances: RP index decides.
        let rps = vec![Point2D::new(10.0, 1.0), Point2D::new(10.0, -1.0)];
        let order = extract_order(&x, &rps).unwrap();
        assert_eq!(order, vec![0, 1]);
    }

    #[test]
    fn extract_order_matches_brute_force_oracle() {
        let mut r = rng(10);
        for _ in 0..20 {
            let x = random_trajectory(&mut r, 30);
            let rps: Vec<Point2D> = (0..6)
                .map(|_| Point2D::new(r.random_range(-1.0..1.0), r.random_range(-1.0..1.0)))
                .collect();
            let got = extract_order(&x, &rps).unwrap();
            // Oracle: evaluate every (rp, waypoint) pair, then stable sort.
            let mut keys: Vec<(usize, f64, usize)> = (0..rps.len())
                .map(|j| {
                    let mut best_h = 0;
                    let mut best_d = f64::INFINITY;
                    for h in 0..x.len() {
                        let d = (x.points[h][0] - rps[j].x).hypot(x.points[h][1] - rps[j].y);
                        if d < best_d {
                            best_d = d;
                            best_h = h;
                        }
                    }
                    (best_h, best_d, j)
                })
                .collect();
            keys.sort_by(|a, b| {
                a.0.cmp(&b.0)
                    .then(a.1.partial_cmp(&b.1).unwrap())
                    .then(a.2.cmp(&b.2))
            });
            let expect: Vec<usize> = keys.into_iter().map(|k| k.2).collect();
            assert_eq!(got, expect);
            assert!(crate::model::is_permutation(&got, rps.len()));
        }
    }

    #[test]
    fn extract_order_degenerate_trajectory_falls_back_to_index_order() {
        let x = WaypointTrajectory {
            points: vec![[1.0, 1.0]; 8],
        };
        let rps: Vec<Point2D> = vec![Point2D::new(-1.0, 0.0); 3];
        let order = extract_order(&x, &rps).unwrap();
        assert_eq!(order, vec![0, 1, 2]);
    }

    #[test]
    fn two_opt_uncrosses_square() {
        let rps = vec![
            Point2D::new(0.0, 0.0),
            Point2D::new(10.0, 0.0),
            Point2D::new(10.0, 10.0),
            Point2D::new(0.0, 10.0),
        ];
        // Crossing order 0-2-1-3.
        let crossed = vec![0, 2, 1, 3];
        let fixed = two_opt(&crossed, &rps, true, 64).unwrap();
        let len = tour_length(&fixed, &rps, true).unwrap();
        assert!((len - 40.0).abs() < 1e-9, "len = {len}");
    }

    #[test]
    fn two_opt_leaves_triangle_unchanged() {
        let rps = vec![
            Point2D::new(0.0, 0.0),
            Point2D::new(10.0, 0.0),
            Point2D::new(5.0, 8.0),
        ];
        let order = vec![2, 0, 1];
        assert_eq!(two_opt(&order, &rps, true, 64).unwrap(), order);
    }

    #[test]
    fn two_opt_zero_passes_is_identity() {
        let rps = vec![
            Point2D::new(0.0, 0.0),
            Point2D::new(10.0, 0.0),
            Point2D::new(10.0, 10.0),
            Point2D::new(0.0, 10.0),
        ];
        let crossed = vec![0, 2, 1, 3];
        assert_eq!(two_opt(&crossed, &rps, true, 0).unwrap(), crossed);
    }

    #[test]
    fn two_opt_never_lengthens_and_reaches_local_optimum() {
        let mut r = rng(11);
        for closed in [false, true] {
            for _ in 0..20 {
                let rps: Vec<Point2D> = (0..10)
                    .map(|_| Point2D::new(r.random_range(0.0..200.0), r.random_range(0.0..200.0)))
                    .collect();
                let start: Vec<usize> = (0..10).collect();
                let refined = two_opt(&start, &rps, closed, 64).unwrap();
                let before = tour_length(&start, &rps, closed).unwrap();
                let after = tour_length(&refined, &rps, closed).unwrap();
                assert!(after <= before + 1e-9);
                // No improving exchange remains.
                let m = rps.len();
                for i in 0..m - 1 {
                    for j in i + 1..m {
                        if closed && i == 0 && j == m - 1 {
                            continue;
                        }
                        let mut cand = refined.clone();
                        cand[i..=j].reverse();
                        let len = tour_length(&cand, &rps, closed).unwrap();
                        assert!(
                            len >= after - 1e-9,
                            "improving exchange ({i},{j}) left: {len} < {after}"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn resample_polyline_endpoints_and_spacing() {
        let line = vec![[0.0, 0.0], [1.0, 0.0]];
        let out = resample_polyline(&line, 5);
        assert_eq!(out.len(), 5);
        for (i, p) in out.iter().enumerate() {
            assert!((p[0] - i as f64 * 0.25).abs() < 1e-12);
        }
        // Degenerate single point.
        let out = resample_polyline(&[[2.0, 3.0]], 4);
        assert!(out.iter().all(|p| *p == [2.0, 3.0]));
    }
}
