//! Statistical-learning automated healing (SLAH) of a soft-frequency-reuse
//! ICIC parameter in a downlink LTE network.
//!
//! * [`scenario`]: layout, propagation and traffic parameters.
//! * [`simulator`]: 1 s snapshot simulator producing BCR/FTT KPIs and the
//!   downlink interference matrix.
//! * [`statlearn`]: logistic-regression KPI models.
//! * [`healer`]: the coupling map, cost and constrained optimization, and
//!   the iterative healing loop.
//! * [`harness`]: configuration, sweeps, full healing runs and file output.

// `!(x > 0.0)` style checks are used on purpose so that NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod scenario;
pub mod simulator;
pub mod healer;
pub mod statlearn;
pub mod harness;

pub use error::{FitError, HarnessError, HealError, ScenarioError, SimError};
