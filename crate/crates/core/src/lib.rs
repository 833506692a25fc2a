//! Mean-field uplink power control for a finite ultra-dense mmWave network.
//!
//! The crate covers the finite-disk geometry of LOS/NLOS serving distances,
//! the sectored antenna gain model, gain-threshold association, per-link
//! energy efficiency, the mean-field interference kernel, the coupled
//! HJB/FPK solver with its damped fixed-point iteration, and an independent
//! Monte Carlo oracle for every analytic distribution.

// `!(x > 0.0)` style checks reject NaN on purpose.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![cfg_attr(test, allow(clippy::field_reassign_with_default, clippy::needless_range_loop))]

pub mod antenna;
pub mod association;
pub mod config;
pub mod error;
pub mod geometry;
pub mod interference;
pub mod link;
pub mod mfg;
pub mod montecarlo;
mod par;
pub mod quad;

pub use config::{parse_scenario, Scenario};
pub use error::{Error, Result};
