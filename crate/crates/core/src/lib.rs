//! Slotted vehicle-to-vehicle network simulator with tail-aware
//! age-of-information (AoI) power control.
//!
//! The crate is organized by subsystem:
//!
//! - [`params`]: the parameter record, its validation and derived constants.
//! - [`mobility`]: Manhattan-grid vehicle motion with fixed pair association.
//! - [`channel`]: three-regime path loss, fading and the rate equation.
//! - [`queueing`]: physical queue, packet ledger, AoI process and the
//!   queue-event machinery bounding AoI violations.
//! - [`evt`]: generalized Pareto primitives, fitting and goodness of fit.
//! - [`control`]: virtual queues, drift weight, water-filling and baselines.
//! - [`clustering`]: spectral grouping and orthogonal RB allocation.
//! - [`sim`]: the per-slot loop, summaries, sweeps and presets.

// `!(x > 0.0)` also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channel;
pub mod clustering;
pub mod control;
pub mod error;
pub mod evt;
pub mod metrics;
pub mod mobility;
pub mod output;
pub mod params;
pub mod queueing;
pub mod rng;
pub mod sim;

pub use control::Policy;
pub use error::{Error, Result};
pub use evt::{FitMethod, FitReport, GpdParams};
pub use params::{DerivedParams, SimParams};
pub use sim::{run, sweep, RunSummary, SweepAxis};
