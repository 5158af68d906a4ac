//! Kronecker-factored second-order optimization on a small dense
//! network engine.
//!
//! The crate is organized bottom-up:
//!
//! - [`linalg`]: deterministic dense matrices, the only numeric substrate.
//! - [`net`]: feed-forward networks with per-layer activation/gradient capture.
//! - [`optim`]: rank-1 Sherman-Morrison factor updates (MKOR and its hybrid
//!   variant), KFAC, SNGD and SGD with momentum.
//! - [`sched`]: knee-point and milestone learning-rate schedules.
//! - [`analysis`]: rank-1 approximation error, factor spectra, and the
//!   stability/quantization/descent checks.
//! - [`comm`]: analytic and measured cost accounting plus a logical
//!   multi-worker simulator.
//! - [`prune`]: Kronecker-factored Taylor pruning.
//! - [`harness`]: datasets, configuration and experiment driver used by the CLI.

// `!(x > 0.0)` is used on purpose so NaN is rejected along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod comm;
pub mod data;
pub mod error;
pub mod flops;
pub mod harness;
pub mod linalg;
pub mod net;
pub mod optim;
pub mod prune;
pub mod rng;
pub mod sched;

pub use error::{Error, Result};
pub use linalg::{Matrix, Vector};
pub use rng::Rng;
