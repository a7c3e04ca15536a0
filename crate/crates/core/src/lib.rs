//! Adaptive approximate k-NN search over a two-level clustered index.
//!
//! The crate builds an IVF index (k-means coarse quantizer plus posting
//! lists) over dense embeddings and probes clusters in order of centroid
//! similarity. On top of the probing loop it implements per-query early-exit
//! policies — a fixed probe budget, an unsupervised patience rule on
//! result-set stability, learned regression/classification of the required
//! probe count, and two-stage cascades — together with the training and
//! evaluation machinery needed to compare them: golden-label generation,
//! gradient-boosted tree learners, SMOTE rebalancing, retrieval metrics and
//! significance testing.

pub mod corpus;
pub mod error;
pub mod eval;
pub mod features;
pub mod ivf;
pub mod learn;
pub mod oracle;
pub mod policy;
pub mod trace;
pub mod vecmath;

mod kmeans;

pub use error::{Error, Result};
