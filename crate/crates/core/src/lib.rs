//! Simulation, exact analytics and excursion statistics for the "fast"
//! fragmentation-coalescence process: Kingman's coalescent (every pair of
//! blocks merges at rate `c`) in which every block is shattered into
//! singletons at rate `lambda`.
//!
//! The block count `N` is a Markov chain on `{1, 2, ...} ∪ {∞}`. The
//! dimensionless ratio `theta = 2 * lambda / c` decides whether the process
//! comes down from infinity (`theta < 1`) or stays infinite (`theta >= 1`).
//!
//! Layout:
//!
//! * [`analytic`]: closed-form quantities (hitting probabilities, stationary
//!   law, hitting times, excursion weights).
//! * [`dynamics`]: event-driven simulation of the block count truncated at a
//!   ceiling `n_max` that stands in for `∞`.
//! * [`partition`]: partition-valued dynamics on `{1..n}` (Coag/Frag,
//!   paintbox sampling, shatter-coalescence simulator).
//! * [`excursions`]: excursion segmentation and empirical estimators.
//! * [`oracle`]: exact linear-algebra computations on the truncated chain.
//! * [`validation`]: the acceptance checks, shared by tests and the CLI.
//!
//! Replica-level Monte Carlo runs in parallel through [`par`] when the
//! `parallel` feature (default) is enabled, and sequentially otherwise. Both
//! paths produce identical results for a given seed.

// `!(x > 0.0)` is the idiom used throughout to reject NaN along with bad values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analytic;
pub mod dynamics;
pub mod error;
pub mod excursions;
pub mod gamma;
pub mod oracle;
pub mod par;
pub mod params;
pub mod partition;
pub mod rng;
pub mod stats;
pub mod summation;
pub mod validation;

pub use error::{Error, Result};
pub use params::{ModelParams, Regime};

/// Version tag written into every JSON header emitted by the toolkit.
pub const SCHEMA_VERSION: u32 = 1;
