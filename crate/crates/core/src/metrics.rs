//! Evaluation metrics for one (scenario, plan, schedule) triple.
//!
//! The delivery, energy, freshness, and fairness models are deterministic
//! fluid approximations; their parameters live in [`MetricParams`] and the
//! report carries a `model_version` so downstream consumers can detect
//! recalibrations.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{NetworkScenario, TourSchedule};
use crate::placement::RpPlan;
use crate::service::{buffered_data, visit_times, ServiceSolution};

/// Version of the metric model formulas below.
pub const METRIC_MODEL_VERSION: u32 = 1;

// ============================================================================
// Model parameters
// ============================================================================

/// Multi-hop delivery model: per-hop link success probability and the hop
/// cap beyond which sensors deliver nothing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossModel {
    pub p_link: f64,
    pub hop_max: usize,
}

impl Default for LossModel {
    fn default() -> Self {
        LossModel {
            p_link: 0.98,
            hop_max: 3,
        }
    }
}

/// First-order radio model: e_tx(d) = e_elec + eps_fs * d^2 per bit, plus
/// e_elec per received bit, charged on every hop of the sensor-to-RP chain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyModel {
    /// Electronics energy per bit, Joules.
    pub e_elec_j: f64,
    /// Free-space amplifier energy per bit per square meter, Joules.
    pub eps_fs_j_m2: f64,
}

impl Default for EnergyModel {
    fn default() -> Self {
        EnergyModel {
            e_elec_j: 50e-9,
            eps_fs_j_m2: 10e-12,
        }
    }
}

impl EnergyModel {
    /// Per-bit transmit energy over distance `d`.
    pub fn tx_energy_per_bit(&self, d: f64) -> f64 {
        self.e_elec_j + self.eps_fs_j_m2 * d * d
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MetricParams {
    pub loss: LossModel,
    pub energy: EnergyModel,
}

// ============================================================================
// Report
// ============================================================================

/// The full metric suite for one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub model_version: u32,
    pub tour_time_s: f64,
    pub tour_length_m: f64,
    pub travel_time_s: f64,
    pub total_dwell_s: f64,
    /// Mean age of delivered data at the sink, seconds.
    pub freshness_s: f64,
    /// Buffer-accepted fraction of generated data, before link loss.
    pub collection_ratio: f64,
    /// Sink-delivered fraction of generated data, after link loss.
    pub pdr: f64,
    /// Delivered data per Joule, relative to one-hop-at-full-range transport.
    pub energy_efficiency: f64,
    /// Total sensor-side radio energy, Joules.
    pub energy_j: f64,
    /// Delivered bits per second of tour time.
    pub throughput_bps: f64,
    /// Jain index over per-sensor delivered fractions.
    pub fairness: f64,
    /// Reference scales for the intent objective.
    pub t_ref_s: f64,
    pub e_ref_j: f64,
    pub delta_ref_s: f64,
}

impl MetricReport {
    /// Frozen CSV column order (see README).
    pub const CSV_HEADER: [&'static str; 15] = [
        "tour_time_s",
        "tour_length_m",
        "travel_time_s",
        "total_dwell_s",
        "freshness_s",
        "collection_ratio",
        "pdr",
        "energy_efficiency",
        "energy_j",
        "throughput_bps",
        "fairness",
        "t_ref_s",
        "e_ref_j",
        "delta_ref_s",
        "model_version",
    ];

    pub fn csv_fields(&self) -> Vec<String> {
        vec![
            self.tour_time_s.to_string(),
            self.tour_length_m.to_string(),
            self.travel_time_s.to_string(),
            self.total_dwell_s.to_string(),
            self.freshness_s.to_string(),
            self.collection_ratio.to_string(),
            self.pdr.to_string(),
            self.energy_efficiency.to_string(),
            self.energy_j.to_string(),
            self.throughput_bps.to_string(),
            self.fairness.to_string(),
            self.t_ref_s.to_string(),
            self.e_ref_j.to_string(),
            self.delta_ref_s.to_string(),
            self.model_version.to_string(),
        ]
    }
}

// ============================================================================
// Individual metrics
// ============================================================================

/// Data-weighted mean age of delivered data: each RP's share ages T/2 on
/// average while accruing, then waits from its visit until tour end for sink
/// delivery. Zero when no data was collected.
pub fn freshness(visit_times_s: &[f64], stored_bits: &[f64], tour_time_s: f64) -> f64 {
    let total: f64 = stored_bits.iter().sum();
    if total <= 0.0 {
        return 0.0;
    }
    let mut age = 0.0;
    for (t_j, d_j) in visit_times_s.iter().zip(stored_bits) {
        age += (d_j / total) * (tour_time_s / 2.0 + (tour_time_s - t_j));
    }
    age
}

/// Hop count for a sensor at the given distance from its RP: one hop within
/// range, ceil(dist / r_c) beyond.
pub fn hop_count(dist_m: f64, r_c: f64) -> usize {
    ((dist_m / r_c).ceil() as usize).max(1)
}

/// Per-sensor delivered fraction: link success to the power of the hop
/// count, times the RP's buffer-acceptance fraction; zero beyond the hop
/// cap.
pub fn delivery_model(
    scenario: &NetworkScenario,
    plan: &RpPlan,
    stored_bits: &[f64],
    tour_time_s: f64,
    loss: &LossModel,
) -> Vec<f64> {
    scenario
        .sensors
        .iter()
        .map(|s| {
            let j = plan.assoc[s.id];
            let dist = s.position.distance(&plan.rp_positions[j]);
            let hops = hop_count(dist, scenario.comm_range_m);
            if hops > loss.hop_max {
                return 0.0;
            }
            let offered = plan.rp_rate_bps[j] * tour_time_s;
            let accept = if offered > 0.0 {
                (stored_bits[j] / offered).min(1.0)
            } else {
                1.0
            };
            loss.p_link.powi(hops as i32) * accept
        })
        .collect()
}

/// Total sensor-side energy and the normalized efficiency of delivery.
///
/// Every generated bit is transmitted over its full chain (losses still cost
/// energy); each hop charges transmit energy over the per-hop distance plus
/// receive electronics. Efficiency compares the delivered volume, priced at
/// the one-hop full-range cost, against the total energy spent.
pub fn energy_report(
    scenario: &NetworkScenario,
    plan: &RpPlan,
    delivered_fraction: &[f64],
    tour_time_s: f64,
    energy: &EnergyModel,
) -> (f64, f64) {
    let mut total_energy = 0.0;
    let mut delivered_bits = 0.0;
    for s in &scenario.sensors {
        let generated = s.rate_bps * tour_time_s;
        if generated <= 0.0 {
            continue;
        }
        let j = plan.assoc[s.id];
        let dist = s.position.distance(&plan.rp_positions[j]);
        let hops = hop_count(dist, scenario.comm_range_m);
        let hop_dist = dist / hops as f64;
        let per_bit = hops as f64 * (energy.tx_energy_per_bit(hop_dist) + energy.e_elec_j);
        total_energy += generated * per_bit;
        delivered_bits += generated * delivered_fraction[s.id];
    }
    if total_energy <= 0.0 {
        return (0.0, 0.0);
    }
    let reference = energy.tx_energy_per_bit(scenario.comm_range_m);
    let efficiency = (delivered_bits * reference / total_energy).clamp(0.0, 1.0);
    (total_energy, efficiency)
}

/// Delivered bits divided by tour time.
pub fn throughput(delivered_bits: f64, tour_time_s: f64) -> Result<f64> {
    if !(tour_time_s > 0.0) {
        return Err(Error::invalid("tour_time must be > 0"));
    }
    Ok(delivered_bits / tour_time_s)
}

/// Jain's index over an allocation vector; 1 by convention when everything
/// is zero.
pub fn fairness(fractions: &[f64]) -> f64 {
    let n = fractions.len();
    if n == 0 {
        return 1.0;
    }
    let sum: f64 = fractions.iter().sum();
    let sum_sq: f64 = fractions.iter().map(|x| x * x).sum();
    if sum_sq <= 0.0 {
        return 1.0;
    }
    sum * sum / (n as f64 * sum_sq)
}

// ============================================================================
// Composition
// ============================================================================

/// Compute every metric for a resolved tour.
pub fn full_report(
    scenario: &NetworkScenario,
    plan: &RpPlan,
    schedule: &TourSchedule,
    service: &ServiceSolution,
    params: &MetricParams,
) -> Result<MetricReport> {
    schedule.validate()?;
    if (service.tour_time_s - schedule.tour_time_s).abs()
        > 1e-6_f64.max(1e-9 * schedule.tour_time_s.abs())
    {
        return Err(Error::invalid(
            "schedule and service solution disagree on tour time",
        ));
    }
    let t = schedule.tour_time_s;
    let buffered = buffered_data(&plan.rp_rate_bps, t, scenario.buffer_capacity_bits)?;
    let times = visit_times(
        &schedule.order,
        &plan.rp_positions,
        scenario.mdc_speed_mps,
        &schedule.dwell_s,
    )?;
    let fresh = freshness(&times, &buffered.stored_bits, t);

    let fractions = delivery_model(scenario, plan, &buffered.stored_bits, t, &params.loss);

    let generated: f64 = scenario.sensors.iter().map(|s| s.rate_bps * t).sum();
    let mut collected = 0.0;
    let mut delivered = 0.0;
    for s in &scenario.sensors {
        let g = s.rate_bps * t;
        let j = plan.assoc[s.id];
        let dist = s.position.distance(&plan.rp_positions[j]);
        let hops = hop_count(dist, scenario.comm_range_m);
        if hops <= params.loss.hop_max {
            let offered = plan.rp_rate_bps[j] * t;
            let accept = if offered > 0.0 {
                (buffered.stored_bits[j] / offered).min(1.0)
            } else {
                1.0
            };
            collected += g * accept;
        }
        delivered += g * fractions[s.id];
    }
    let collection_ratio = if generated > 0.0 {
        collected / generated
    } else {
        1.0
    };
    let pdr = if generated > 0.0 {
        delivered / generated
    } else {
        1.0
    };

    let (energy_j, energy_efficiency) =
        energy_report(scenario, plan, &fractions, t, &params.energy);
    let tput = if t > 0.0 {
        throughput(delivered, t)?
    } else {
        0.0
    };
    let fair = fairness(&fractions);

    // Reference scales for the intent objective: a random-tour travel-time
    // scale sqrt(M * area) / v, the same scale for freshness, and the
    // one-hop full-range transport cost of all generated data for energy.
    let m = plan.rp_count() as f64;
    let t_ref = (m * scenario.area.area()).sqrt() / scenario.mdc_speed_mps;
    let e_ref = generated * params.energy.tx_energy_per_bit(scenario.comm_range_m);

    Ok(MetricReport {
        model_version: METRIC_MODEL_VERSION,
        tour_time_s: t,
        tour_length_m: schedule.tour_length_m,
        travel_time_s: schedule.travel_time_s,
        total_dwell_s: schedule.total_dwell_s(),
        freshness_s: fresh,
        collection_ratio,
        pdr,
        energy_efficiency,
        energy_j,
        throughput_bps: tput,
        fairness: fair,
        t_ref_s: t_ref,
        e_ref_j: e_ref,
        delta_ref_s: t_ref,
    })
}
