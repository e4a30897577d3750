//! Online lithium-ion state-of-charge estimation.
//!
//! The crate couples forgetting-factor recursive least squares, which
//! identifies the parameters of a single-RC Thevenin model as data
//! arrives, with four SOC filters built on the same model: an EKF, an
//! H-infinity EKF, and two variants of the latter that re-estimate their
//! noise covariances from a window of voltage residuals.
//!
//! - [`model`]: OCV curve, coulomb counting, Thevenin propagation and the
//!   bilinear coefficient map.
//! - [`ident`]: FFRLS and its OCV / polynomial / Thevenin uses.
//! - [`filters`]: the four estimators behind [`filters::filter_step`].
//! - [`sim`]: synthetic drive cycles, truth integration and sensor noise.
//! - [`pipeline`]: the joint identification + estimation loop and metrics.
//! - [`cli`]: configuration, CSV I/O and the `socest` subcommands.
//!
//! Current is discharge-positive everywhere.

// `!(x > 0.0)` is used on purpose so that NaN fails validation
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod filters;
pub mod ident;
pub mod model;
pub mod pipeline;
pub mod sim;

pub use filters::{FilterKind, FilterState};
pub use model::{BatterySpec, OcvCurve, TheveninParams};
pub use pipeline::{run_joint, JointEstimator, RunConfig, RunResult};
