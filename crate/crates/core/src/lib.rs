//! SHAP-based supervised clustering.
//!
//! The crate covers the whole analysis: simulate or ingest labeled data, fit a
//! multi-class boosted-tree model, compute out-of-fold interventional SHAP
//! values, embed and density-cluster them, and turn each cluster into a
//! generalized waterfall path over the class axes.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cluster;
pub mod data;
pub mod distance;
pub mod embed;
pub mod error;
pub mod gbt;
pub mod rng;
pub mod shap;
pub mod simgen;
pub mod viz;

pub use cluster::{ClusterLabels, CondensedTree, HdbscanParams, Selection};
pub use data::{Dataset, FoldAssignment};
pub use embed::{EmbedMethod, Embedding2D};
pub use error::{Error, ErrorKind, Result};
pub use gbt::{Ensemble, GbtConfig};
pub use rng::RngStream;
pub use shap::ShapTensor;
pub use viz::{ProjectedPath, WaterfallPath};
