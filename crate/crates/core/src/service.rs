//! Dwell-time service model.
//!
//! During one tour each RP accumulates data at its aggregate rate for the
//! whole tour duration, and the collector must pause long enough to upload
//! it. Tour time therefore satisfies T = T_tr + sum_j(Lambda_j * T / C_j),
//! a linear fixed point solved iteratively here and in closed form for
//! cross-checking. The system is feasible only when the utilization
//! rho = sum_j Lambda_j / C_j stays below one.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{NetworkScenario, Point2D, TourSchedule};
use crate::placement::RpPlan;

pub const DEFAULT_EPSILON_S: f64 = 1e-6;
pub const DEFAULT_MAX_ITER: usize = 10_000;

/// Converged (or best-effort) solution of the dwell fixed point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ServiceSolution {
    /// Dwell per RP in seconds, indexed by RP id.
    pub dwell_s: Vec<f64>,
    pub tour_time_s: f64,
    pub iterations: usize,
    pub converged: bool,
    /// rho = sum_j Lambda_j / C_j.
    pub utilization: f64,
}

/// Iterate T <- T_tr + sum_j Lambda_j T / C_j from T = T_tr until successive
/// iterates differ by at most `epsilon_s`. An unstable system (rho >= 1) or
/// an exhausted iteration budget returns the best iterate with
/// `converged = false` rather than an error.
pub fn solve_dwell(
    rp_rate_bps: &[f64],
    travel_time_s: f64,
    upload_rates_bps: &[f64],
    epsilon_s: f64,
    max_iter: usize,
) -> Result<ServiceSolution> {
    if rp_rate_bps.len() != upload_rates_bps.len() {
        return Err(Error::invalid("rate and upload vectors differ in length"));
    }
    if !(travel_time_s >= 0.0) {
        return Err(Error::invalid("travel_time must be >= 0"));
    }
    if !(epsilon_s > 0.0) {
        return Err(Error::invalid("epsilon must be > 0"));
    }
    if upload_rates_bps.iter().any(|c| !(*c > 0.0)) {
        return Err(Error::invalid("upload rates must be > 0"));
    }
    let rho: f64 = rp_rate_bps
        .iter()
        .zip(upload_rates_bps)
        .map(|(l, c)| l / c)
        .sum();

    // Unstable systems grow without bound; iterates are capped so the
    // best-effort solution stays finite for downstream reporting.
    const DIVERGENCE_CAP_S: f64 = 1e100;
    let mut t = travel_time_s;
    let mut iterations = 0;
    let mut converged = false;
    while iterations < max_iter {
        let next = travel_time_s + rho * t;
        iterations += 1;
        if !next.is_finite() || next > DIVERGENCE_CAP_S {
            t = if next.is_finite() {
                next.min(DIVERGENCE_CAP_S)
            } else {
                DIVERGENCE_CAP_S
            };
            break;
        }
        let delta = (next - t).abs();
        t = next;
        if delta <= epsilon_s {
            converged = rho < 1.0;
            break;
        }
    }
    if rho >= 1.0 {
        converged = false;
    }

    let dwell: Vec<f64> = rp_rate_bps
        .iter()
        .zip(upload_rates_bps)
        .map(|(l, c)| l * t / c)
        .collect();
    // Converged: report the iterate itself; tau_j = Lambda_j T / C_j holds
    // exactly and the travel + dwell decomposition is off by at most
    // epsilon. Diverged: no self-consistent T exists, so report travel plus
    // dwell to keep downstream accounting finite and exact.
    let tour_time = if converged {
        t
    } else {
        travel_time_s + dwell.iter().sum::<f64>()
    };
    Ok(ServiceSolution {
        dwell_s: dwell,
        tour_time_s: tour_time,
        iterations,
        converged,
        utilization: rho,
    })
}

/// Exact fixed point T* = T_tr / (1 - rho). Errors when rho >= 1.
pub fn closed_form_tour_time(
    travel_time_s: f64,
    rp_rate_bps: &[f64],
    upload_rates_bps: &[f64],
) -> Result<f64> {
    if rp_rate_bps.len() != upload_rates_bps.len() {
        return Err(Error::invalid("rate and upload vectors differ in length"));
    }
    if upload_rates_bps.iter().any(|c| !(*c > 0.0)) {
        return Err(Error::invalid("upload rates must be > 0"));
    }
    let rho: f64 = rp_rate_bps
        .iter()
        .zip(upload_rates_bps)
        .map(|(l, c)| l / c)
        .sum();
    if rho >= 1.0 {
        return Err(Error::InfeasibleSystem { utilization: rho });
    }
    Ok(travel_time_s / (1.0 - rho))
}

/// Per-RP buffered data over one tour: offered bits, the buffer-capped
/// amount, and the overflow lost beyond capacity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BufferedData {
    /// Buffer-capped bits held for the collector, per RP.
    pub stored_bits: Vec<f64>,
    /// Bits lost to buffer overflow, per RP.
    pub overflow_bits: Vec<f64>,
    pub overflowed: Vec<bool>,
}

/// Data accumulated at each RP over a tour of the given duration, capped at
/// the buffer capacity (capacity boundary itself does not overflow).
pub fn buffered_data(
    rp_rate_bps: &[f64],
    tour_time_s: f64,
    buffer_capacity_bits: f64,
) -> Result<BufferedData> {
    if !(tour_time_s >= 0.0) {
        return Err(Error::invalid("tour_time must be >= 0"));
    }
    let mut stored = Vec::with_capacity(rp_rate_bps.len());
    let mut overflow = Vec::with_capacity(rp_rate_bps.len());
    let mut flags = Vec::with_capacity(rp_rate_bps.len());
    for &rate in rp_rate_bps {
        let offered = rate * tour_time_s;
        if offered > buffer_capacity_bits {
            stored.push(buffer_capacity_bits);
            overflow.push(offered - buffer_capacity_bits);
            flags.push(true);
        } else {
            stored.push(offered);
            overflow.push(0.0);
            flags.push(false);
        }
    }
    Ok(BufferedData {
        stored_bits: stored,
        overflow_bits: overflow,
        overflowed: flags,
    })
}

/// Arrival time at each RP: cumulative travel to that stop plus dwell spent
/// at earlier stops. Indexed by RP id; the first visited RP has time zero.
pub fn visit_times(
    order: &[usize],
    rp_positions: &[Point2D],
    speed_mps: f64,
    dwell_s: &[f64],
) -> Result<Vec<f64>> {
    if !(speed_mps > 0.0) {
        return Err(Error::invalid("speed must be > 0"));
    }
    if !crate::model::is_permutation(order, rp_positions.len()) {
        return Err(Error::invalid("order is not a permutation"));
    }
    let mut times = vec![0.0; rp_positions.len()];
    let mut t = 0.0;
    for k in 1..order.len() {
        let prev = order[k - 1];
        let cur = order[k];
        t += rp_positions[prev].distance(&rp_positions[cur]) / speed_mps + dwell_s[prev];
        times[cur] = t;
    }
    Ok(times)
}

/// Resolve a visiting order into a full schedule: travel time, converged
/// dwell fixed point, and tour bookkeeping.
pub fn schedule_tour(
    scenario: &NetworkScenario,
    plan: &RpPlan,
    order: &[usize],
) -> Result<(TourSchedule, ServiceSolution)> {
    let length = crate::model::tour_length(order, &plan.rp_positions, scenario.closed_tour)?;
    let travel = length / scenario.mdc_speed_mps;
    let uploads = vec![scenario.upload_rate_bps; plan.rp_count()];
    let service = solve_dwell(
        &plan.rp_rate_bps,
        travel,
        &uploads,
        DEFAULT_EPSILON_S,
        DEFAULT_MAX_ITER,
    )?;
    let schedule = TourSchedule {
        order: order.to_vec(),
        dwell_s: service.dwell_s.clone(),
        travel_time_s: travel,
        tour_time_s: service.tour_time_s,
        tour_length_m: length,
    };
    Ok((schedule, service))
}
