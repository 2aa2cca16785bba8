//! Load-aware rendezvous-point placement.
//!
//! M locations are selected greedily from a candidate set: each iteration
//! picks the candidate whose communication neighborhood over the still-
//! uncovered sensors carries the highest total data rate, then removes that
//! neighborhood from the uncovered set. Every sensor is afterwards
//! associated with its nearest selected RP, covered or not.

use serde::{Deserialize, Serialize};

use crate::deployment::CandidateSet;
use crate::error::{Error, Result};
use crate::model::{NetworkScenario, Point2D};

/// Placement result: RP coordinates, the total sensor→RP association map,
/// per-RP aggregate rates, and per-sensor coverage flags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RpPlan {
    pub rp_positions: Vec<Point2D>,
    /// assoc[sensor_id] = index of the assigned RP.
    pub assoc: Vec<usize>,
    /// Aggregate offered rate per RP in bits per second.
    pub rp_rate_bps: Vec<f64>,
    /// True iff the sensor lies within comm range of its assigned RP.
    pub coverage_flag: Vec<bool>,
    /// Offered load over the uncovered set at each greedy selection
    /// (zero once every coverable sensor is served).
    pub selection_loads_bps: Vec<f64>,
}

impl RpPlan {
    pub fn rp_count(&self) -> usize {
        self.rp_positions.len()
    }
}

/// Indices of `uncovered` sensors within `r_c` of the candidate location,
/// boundary inclusive.
pub fn coverage_neighborhood(
    c: &Point2D,
    sensors: &[Point2D],
    uncovered: &[bool],
    r_c: f64,
) -> Vec<usize> {
    debug_assert!(r_c > 0.0);
    let r_sq = r_c * r_c;
    sensors
        .iter()
        .enumerate()
        .filter(|(i, p)| uncovered[*i] && p.distance_sq(c) <= r_sq)
        .map(|(i, _)| i)
        .collect()
}

/// Total data rate of uncovered sensors within range of the candidate.
pub fn offered_load(
    c: &Point2D,
    sensors: &[Point2D],
    uncovered: &[bool],
    rates: &[f64],
    r_c: f64,
) -> f64 {
    let r_sq = r_c * r_c;
    let mut load = 0.0;
    for (i, p) in sensors.iter().enumerate() {
        if uncovered[i] && p.distance_sq(c) <= r_sq {
            load += rates[i];
        }
    }
    load
}

/// Map every sensor to its nearest RP; distance ties break to the lowest
/// RP index.
pub fn associate(scenario: &NetworkScenario, rp_positions: &[Point2D]) -> Result<Vec<usize>> {
    if rp_positions.is_empty() {
        return Err(Error::invalid("association requires at least one RP"));
    }
    Ok(scenario
        .sensors
        .iter()
        .map(|s| {
            let mut best = 0usize;
            let mut best_d = f64::INFINITY;
            for (j, rp) in rp_positions.iter().enumerate() {
                let d = s.position.distance_sq(rp);
                if d < best_d {
                    best_d = d;
                    best = j;
                }
            }
            best
        })
        .collect())
}

/// Greedy selection of `m` RP locations followed by nearest-RP association.
pub fn select_rps(
    scenario: &NetworkScenario,
    candidates: &CandidateSet,
    m: usize,
) -> Result<RpPlan> {
    if m == 0 {
        return Err(Error::invalid("m must be >= 1"));
    }
    if m > candidates.points.len() {
        return Err(Error::invalid(format!(
            "m = {} exceeds candidate count {}",
            m,
            candidates.points.len()
        )));
    }
    let sensors = scenario.sensor_positions();
    let rates: Vec<f64> = scenario.sensors.iter().map(|s| s.rate_bps).collect();
    let r_c = scenario.comm_range_m;

    let mut uncovered = vec![true; sensors.len()];
    let mut taken = vec![false; candidates.points.len()];
    let mut rp_positions = Vec::with_capacity(m);
    let mut selection_loads = Vec::with_capacity(m);

    for _ in 0..m {
        let mut best_idx = None;
        let mut best_w = -1.0;
        for (ci, c) in candidates.points.iter().enumerate() {
            if taken[ci] {
                continue;
            }
            let w = offered_load(c, &sensors, &uncovered, &rates, r_c);
            // Strict > keeps the lowest candidate index on ties.
            if w > best_w {
                best_w = w;
                best_idx = Some(ci);
            }
        }
        let (ci, w) = if best_w > 0.0 {
            (best_idx.expect("non-empty candidate set"), best_w)
        } else {
            // Nothing left to cover: re-score over ALL sensors so the
            // remaining RPs split load in dense regions instead of being
            // picked arbitrarily among all-zero candidates.
            let all = vec![true; sensors.len()];
            let mut fb_idx = None;
            let mut fb_w = -1.0;
            for (ci, c) in candidates.points.iter().enumerate() {
                if taken[ci] {
                    continue;
                }
                let w = offered_load(c, &sensors, &all, &rates, r_c);
                if w > fb_w {
                    fb_w = w;
                    fb_idx = Some(ci);
                }
            }
            (fb_idx.expect("m <= candidate count"), 0.0)
        };
        taken[ci] = true;
        let pos = candidates.points[ci];
        for i in coverage_neighborhood(&pos, &sensors, &uncovered, r_c) {
            uncovered[i] = false;
        }
        rp_positions.push(pos);
        if let Some(&prev) = selection_loads.last() {
            // The uncovered set only shrinks, so selected loads cannot grow.
            debug_assert!(w <= prev + 1e-9, "greedy load increased: {w} > {prev}");
        }
        selection_loads.push(w);
    }

    let assoc = associate(scenario, &rp_positions)?;
    let mut rp_rate = vec![0.0; m];
    for (i, &j) in assoc.iter().enumerate() {
        rp_rate[j] += rates[i];
    }
    let coverage_flag: Vec<bool> = scenario
        .sensors
        .iter()
        .zip(&assoc)
        .map(|(s, &j)| s.position.distance(&rp_positions[j]) <= r_c)
        .collect();

    Ok(RpPlan {
        rp_positions,
        assoc,
        rp_rate_bps: rp_rate,
        coverage_flag,
        selection_loads_bps: selection_loads,
    })
}
