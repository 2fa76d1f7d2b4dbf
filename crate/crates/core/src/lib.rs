//! Superpixel scene parsing.
//!
//! The pipeline over-segments an image into superpixels, describes each one
//! with a fixed-length descriptor, scores every class with four one-vs-rest
//! boosted-tree models trained on differently balanced data, fuses those
//! scores with per-class normalized weights, and labels the superpixels by
//! minimizing an MRF energy. A second inference pass adds scene-level label
//! costs estimated from training images whose label sets resemble the first
//! pass output.
//!
//! Modules map onto the stages:
//!
//! * [`corpus`]: rasters, dataset IO, the synthetic scene generator and the
//!   training label index.
//! * [`segment`]: graph-based superpixels and their adjacency.
//! * [`features`]: the per-superpixel descriptor.
//! * [`boost`]: training regimes and gradient-boosted trees.
//! * [`fusion`]: normalized-likelihood weights and score combination.
//! * [`context`]: global label costs from label-set neighbors.
//! * [`mrf`]: energy, max-flow and alpha-expansion with label costs.
//! * [`pipeline`]: configuration, model bundles, two-pass parsing and metrics.

pub mod boost;
pub mod context;
pub mod corpus;
mod error;
pub mod features;
pub mod fusion;
pub mod mrf;
pub mod pipeline;
pub mod segment;

pub(crate) mod codec;

pub use error::{Error, Result};
