//! Deterministic simulator and planning library for mobile data collection
//! in dense sensor networks.
//!
//! The pipeline has two stages. First, rendezvous points are placed by a
//! greedy load-aware coverage heuristic and every sensor is associated with
//! its nearest RP ([`placement`]). Second, a collector tour over the RPs is
//! constructed by guided reverse-diffusion sampling of a waypoint trajectory,
//! discretized by first-visit order and refined with 2-opt ([`diffusion`]).
//! Dwell times at each RP follow from a fixed-point service model
//! ([`service`]), and a ten-metric evaluation suite plus classical baseline
//! planners and a campaign runner ([`metrics`], [`baselines`], [`campaign`])
//! support end-to-end experiments.
//!
//! Everything is deterministic given a seed: random draws come from
//! per-purpose counter-based streams ([`rng`]), so repeated runs reproduce
//! results byte for byte.

// Validations use `!(x > 0.0)` so NaN parameters fail them too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
pub mod campaign;
pub mod deployment;
pub mod diffusion;
pub mod error;
pub mod metrics;
pub mod model;
pub mod placement;
pub mod rng;
pub mod service;

pub use error::{Error, Result};
pub use model::{
    objective, tour_length, travel_time, IntentWeights, NetworkScenario, Point2D, Rect, SensorNode,
    TourSchedule,
};
