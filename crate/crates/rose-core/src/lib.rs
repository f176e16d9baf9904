//! Byzantine-robust distributed M-estimation.
//!
//! The crate simulates a cluster of `m` machines that each hold `n` samples
//! of a convex-loss regression problem. Machines transmit local statistics
//! to a central processor, a configurable fraction of them maliciously.
//! The center combines the reports with variance-reduced median aggregation
//! (a composite-quantile correction of the coordinate-wise median) and
//! applies a single Newton correction to produce the final estimate, with a
//! plug-in covariance for confidence intervals.
//!
//! Two protocols are provided: [`rose::run_algorithm1`] trusts the central
//! machine's own data for its variance scales, [`rose::run_algorithm2`]
//! replaces every scale with a median over machines so a corrupted or empty
//! center is tolerated at twice the node-to-center traffic.

pub mod baselines;
pub mod byzantine;
pub mod error;
pub mod kernels;
pub mod linalg;
pub mod models;
pub mod report;
pub mod rose;
pub mod seeding;
pub mod simnet;
pub mod solver;

pub use error::{Error, Result};
pub use models::{DataShard, Dataset, LossModel, ModelKind, ParamVector};
