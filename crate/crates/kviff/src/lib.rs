//! A nonlinear filtering laboratory built around the kernel variational
//! inference flow filter (KVIFF), with Kalman, bootstrap particle, and
//! stochastic ensemble Kalman baselines.
//!
//! The crate has three layers:
//!
//! - [`kernel`], [`models`], [`filters`]: the filters themselves, over a
//!   small state-space-model abstraction and the benchmark scenarios
//!   (a 10D linear problem, cubic sensors with heavy-tailed and asymmetric
//!   noise mismatch, and multi-target acoustic tracking).
//! - [`oracle`]: grid-based machinery that certifies the flow's descent and
//!   fixed-point properties independently of the particle code.
//! - [`harness`], [`validate`]: seeded repeated experiments with CSV/SVG
//!   output, and the self-check suite behind `kviff validate`.

pub mod error;
pub mod filters;
pub mod harness;
pub mod kernel;
pub mod models;
pub mod oracle;
pub mod validate;

pub use error::{Error, Result};
