//! Gradient-boosted regression trees: squared-error regression and
//! weighted logistic classification, plus SMOTE oversampling and the
//! train/validation split.
//!
//! Trees are grown with exact (pre-sorted) split search, no histogram
//! binning. Training is single-threaded and deterministic for a fixed
//! seed; ensembles are immutable once trained.

mod boost;
mod smote;
mod tree;

pub use boost::{train_classifier, train_regressor, TrainOutcome};
pub use smote::{smote, smote_rebalance, Rebalanced, SmoteOutput};
pub use tree::{Node, Tree};

use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Floor applied to hessian sums in Newton leaf values and split gains.
pub(crate) const HESSIAN_FLOOR: f64 = 1e-12;

/// Borrowed row-major design matrix.
#[derive(Debug, Clone, Copy)]
pub struct DataView<'a> {
    pub x: &'a [f32],
    pub rows: usize,
    pub cols: usize,
}

impl<'a> DataView<'a> {
    pub fn new(x: &'a [f32], rows: usize, cols: usize) -> Result<Self> {
        if x.len() != rows * cols {
            return Err(Error::InvalidArg(format!(
                "matrix of {} values cannot be {rows} x {cols}",
                x.len()
            )));
        }
        Ok(Self { x, rows, cols })
    }

    #[inline]
    pub fn row(&self, i: usize) -> &'a [f32] {
        &self.x[i * self.cols..(i + 1) * self.cols]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    SquaredError,
    Logistic,
}

/// Additive forest. Raw score = `base_score + learning_rate * sum(trees)`;
/// the logistic objective maps it through a sigmoid at prediction time.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct TreeEnsemble {
    pub trees: Vec<Tree>,
    pub base_score: f32,
    pub learning_rate: f32,
    pub objective: Objective,
    pub num_features: usize,
}

impl TreeEnsemble {
    fn raw_score(&self, x: &[f32]) -> f32 {
        let mut sum = 0.0f32;
        for tree in &self.trees {
            sum += tree.eval(x);
        }
        self.base_score + self.learning_rate * sum
    }

    /// Raw score for regression, sigmoid probability for classification.
    pub fn predict(&self, x: &[f32]) -> Result<f32> {
        if x.len() != self.num_features {
            return Err(Error::DimensionMismatch {
                expected: self.num_features,
                got: x.len(),
            });
        }
        let raw = self.raw_score(x);
        Ok(match self.objective {
            Objective::SquaredError => raw,
            Objective::Logistic => sigmoid(raw),
        })
    }

    pub fn predict_batch(&self, data: DataView<'_>) -> Result<Vec<f32>> {
        (0..data.rows).map(|i| self.predict(data.row(i))).collect()
    }

    pub fn num_trees(&self) -> usize {
        self.trees.len()
    }

    /// Bounds-check node references and feature indices.
    pub fn validate(&self) -> Result<()> {
        for (ti, tree) in self.trees.iter().enumerate() {
            if tree.nodes.is_empty() {
                return Err(Error::InvalidArg(format!("tree {ti} has no nodes")));
            }
            for node in &tree.nodes {
                if let Node::Split {
                    feature,
                    left,
                    right,
                    threshold,
                    ..
                } = node
                {
                    if *feature >= self.num_features {
                        return Err(Error::InvalidArg(format!(
                            "tree {ti} references feature {feature}, model has {}",
                            self.num_features
                        )));
                    }
                    if *left >= tree.nodes.len() || *right >= tree.nodes.len() {
                        return Err(Error::InvalidArg(format!("tree {ti} has a dangling child")));
                    }
                    if !threshold.is_finite() {
                        return Err(Error::InvalidArg(format!("tree {ti} has a non-finite threshold")));
                    }
                }
            }
        }
        Ok(())
    }
}

#[inline]
pub(crate) fn sigmoid(x: f32) -> f32 {
    1.0 / (1.0 + (-x).exp())
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub num_trees: usize,
    pub learning_rate: f32,
    pub max_depth: usize,
    pub min_samples_leaf: usize,
    /// Fraction of features considered per tree.
    pub subsample_features: f64,
    pub seed: u64,
    /// Stop after this many trees without validation improvement.
    pub early_stopping_rounds: usize,
    /// Multiplier applied to Exit-class (y = 1) instances, classification only.
    pub instance_weight_exit: f32,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            num_trees: 100,
            learning_rate: 0.1,
            max_depth: 6,
            min_samples_leaf: 20,
            subsample_features: 1.0,
            seed: 0,
            early_stopping_rounds: 10,
            instance_weight_exit: 1.0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_trees == 0
            || self.max_depth == 0
            || self.min_samples_leaf == 0
            || self.early_stopping_rounds == 0
        {
            return Err(Error::InvalidArg("train config counts must be positive".into()));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::InvalidArg("learning_rate must be positive".into()));
        }
        if !(self.subsample_features > 0.0 && self.subsample_features <= 1.0) {
            return Err(Error::InvalidArg("subsample_features must be in (0, 1]".into()));
        }
        if !(self.instance_weight_exit >= 1.0) {
            return Err(Error::InvalidArg("instance_weight_exit must be >= 1".into()));
        }
        Ok(())
    }
}

/// Deterministic shuffled split of `0..n_rows` into train/validation index
/// sets; `fraction_train = 1.0` leaves the validation side empty.
pub fn split_train_validation(
    n_rows: usize,
    fraction_train: f64,
    seed: u64,
) -> Result<(Vec<usize>, Vec<usize>)> {
    if n_rows < 2 {
        return Err(Error::InvalidArg(format!("cannot split {n_rows} rows")));
    }
    if !(fraction_train > 0.0 && fraction_train <= 1.0) {
        return Err(Error::InvalidArg("fraction_train must be in (0, 1]".into()));
    }
    let mut indices: Vec<usize> = (0..n_rows).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    indices.shuffle(&mut rng);
    let train_len = ((fraction_train * n_rows as f64).round() as usize).clamp(1, n_rows);
    let validation = indices.split_off(train_len);
    Ok((indices, validation))
}

#[derive(serde::Serialize, serde::Deserialize)]
struct ModelFile {
    format_version: u32,
    ensemble: TreeEnsemble,
}

const MODEL_FORMAT_VERSION: u32 = 1;

/// JSON tree dump; round-trips node arrays and f32 values exactly.
pub fn save_model(ensemble: &TreeEnsemble, path: &Path) -> Result<()> {
    let file = ModelFile {
        format_version: MODEL_FORMAT_VERSION,
        ensemble: ensemble.clone(),
    };
    let json = serde_json::to_vec_pretty(&file)
        .map_err(|e| Error::InvalidArg(format!("model serialization failed: {e}")))?;
    crate::corpus::write_atomic(path, &json)
}

pub fn load_model(path: &Path) -> Result<TreeEnsemble> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let file: ModelFile = serde_json::from_slice(&bytes)
        .map_err(|e| Error::parse(path, 0, format!("bad model file: {e}")))?;
    if file.format_version != MODEL_FORMAT_VERSION {
        return Err(Error::parse(
            path,
            0,
            format!("unsupported model format version {}", file.format_version),
        ));
    }
    file.ensemble.validate()?;
    Ok(file.ensemble)
}
