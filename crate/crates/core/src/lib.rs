//! ROC-guided survival trees and martingale-averaged survival ensembles.
//!
//! The crate fits binary partition trees on the *survivor population*: at every
//! evaluation time the tree partitions the covariate space of the subjects
//! still at risk, so time-dependent covariates move subjects between nodes as
//! follow-up progresses. Trees are grown by maximising a time-integrated
//! concordance measure derived from generalized time-dependent ROC curves,
//! pruned with a concordance-complexity criterion, and combined into ensembles
//! by averaging the per-tree martingale estimating equations rather than the
//! per-tree predictions.
//!
//! The numeric core is generic over the scalar type (`f32`/`f64`) through the
//! [`scalar::Scalar`] trait; the aliases at the crate root fix `f64`, which is
//! what the command-line tools and the simulation harness use.

pub mod bench;
pub mod concordance;
pub mod data;
pub mod error;
pub mod forest;
pub mod kernel;
pub mod model;
pub mod rng;
pub mod scalar;
pub mod sim;
pub mod tree;

pub use error::{Error, Result};
pub use scalar::Scalar;

/// Default number of grid times for the concordance evaluation grid.
pub const DEFAULT_GRID_SIZE: usize = 20;
/// Default minimum number of baseline observations for a splittable node.
pub const DEFAULT_MIN_NODE: usize = 15;
/// Default number of trees in an ensemble.
pub const DEFAULT_ENSEMBLE_SIZE: usize = 500;
/// Default number of cross-validation folds used for pruning.
pub const DEFAULT_CV_FOLDS: usize = 10;

/// `f64` instantiations of the generic core types.
pub type CovariatePath = data::CovariatePath<f64>;
pub type Dataset = data::Dataset<f64>;
pub type TimeGrid = data::TimeGrid<f64>;
pub type TransformedDataset = data::TransformedDataset<f64>;
pub type KernelSpec = kernel::KernelSpec<f64>;
pub type BandwidthPolicy = kernel::BandwidthPolicy<f64>;
pub type NodeHazardCurve = kernel::NodeHazardCurve<f64>;
pub type RocStarCurve = concordance::RocStarCurve<f64>;
pub type ConcordanceReport = concordance::ConcordanceReport<f64>;
pub type PartitionTree = tree::PartitionTree<f64>;
pub type PruneSequence = tree::PruneSequence<f64>;
pub type TreeFit = tree::TreeFit<f64>;
pub type ForestModel = forest::ForestModel<f64>;
pub type ForestFit = forest::ForestFit<f64>;

