//! A desk-scale laboratory for output-space diversification methods under
//! spurious correlation: training-time losses that force multiple hypotheses
//! to disagree on unlabeled data, synthetic tasks with controllable spurious
//! ratios, closed-form oracles, a coding-theory counterexample showing that
//! diversity alone cannot guarantee generalization, and a sweep harness that
//! emits machine-readable results.
//!
//! Start with the runnable examples (`cargo run --example <name>`):
//!
//! - `two_d_endpoints` - second-hypothesis recovery on the 2D task
//! - `beta_tracking` - trained vs. analytic boundary angles across ratios
//! - `concat_sweep` - sweet-spot curves on the concatenated-feature task
//! - `codependence` - architecture/unlabeled-data co-dependence flip
//! - `hadamard_counterexample` - diverse non-generalizing hypothesis sets
//! - `agreement_scores` - inductive-bias alignment of found hypotheses
//!
//! The `divlab` binary exposes the same capabilities as subcommands
//! (`sweep`, `codep`, `oracle`, `verify-code`, `as`).

pub mod datagen;
pub mod dataset;
pub mod error;
pub mod harness;
pub mod hypotheses;
pub mod losses;
pub mod matrix;
pub mod model;
pub mod seeds;
pub mod theory;
pub mod trainers;

pub use dataset::Dataset;
pub use error::{Error, Result};
pub use hypotheses::Hypothesis;
pub use losses::{BatchProbs, DiversificationConfig, LossKind};
pub use matrix::Matrix;
pub use model::{Model, ModelKind, ModelSpec};
pub use trainers::{HypothesisSet, TrainSchedule};
