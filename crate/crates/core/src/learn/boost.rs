//! Boosting loops: squared-error regression and weighted Newton logistic
//! classification, both with early stopping on a validation set.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::tree::TreeGrower;
use super::{sigmoid, DataView, Objective, TrainConfig, Tree, TreeEnsemble};
use crate::error::{Error, Result};

/// A trained ensemble with its per-tree loss history (indexed by built
/// tree; the ensemble may be truncated to the best validation iteration).
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub ensemble: TreeEnsemble,
    pub train_loss: Vec<f64>,
    pub valid_loss: Vec<f64>,
}

fn check_shapes(
    train: DataView<'_>,
    y: &[f32],
    valid: Option<(DataView<'_>, &[f32])>,
    cfg: &TrainConfig,
) -> Result<()> {
    cfg.validate()?;
    if train.rows == 0 {
        return Err(Error::InvalidTrainingData("empty training data".into()));
    }
    if train.rows != y.len() {
        return Err(Error::InvalidTrainingData(format!(
            "{} rows but {} targets",
            train.rows,
            y.len()
        )));
    }
    if train.rows < cfg.min_samples_leaf {
        return Err(Error::InvalidTrainingData(format!(
            "{} rows is fewer than min_samples_leaf {}",
            train.rows, cfg.min_samples_leaf
        )));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidTrainingData("non-finite target".into()));
    }
    if let Some((xv, yv)) = valid {
        if xv.cols != train.cols {
            return Err(Error::DimensionMismatch {
                expected: train.cols,
                got: xv.cols,
            });
        }
        if xv.rows != yv.len() {
            return Err(Error::InvalidTrainingData(format!(
                "{} validation rows but {} targets",
                xv.rows,
                yv.len()
            )));
        }
    }
    Ok(())
}

/// Features used by one tree: all of them, or a seeded subsample
/// (ascending order either way so tie-breaking is stable).
fn tree_features(cols: usize, fraction: f64, rng: &mut ChaCha8Rng) -> Vec<usize> {
    if fraction >= 1.0 {
        return (0..cols).collect();
    }
    let count = ((fraction * cols as f64).ceil() as usize).clamp(1, cols);
    let mut picked = rand::seq::index::sample(rng, cols, count).into_vec();
    picked.sort_unstable();
    picked
}

struct EarlyStopper {
    rounds: usize,
    best_loss: f64,
    best_iter: usize,
}

impl EarlyStopper {
    fn new(rounds: usize) -> Self {
        Self {
            rounds,
            best_loss: f64::INFINITY,
            best_iter: 0,
        }
    }

    /// Record iteration `iter`'s validation loss; true means stop.
    fn observe(&mut self, iter: usize, loss: f64) -> bool {
        if loss < self.best_loss {
            self.best_loss = loss;
            self.best_iter = iter;
            return false;
        }
        iter - self.best_iter >= self.rounds
    }
}

/// Squared-error gradient boosting. Base score is the target mean and each
/// tree fits the current residuals, so training MSE never increases.
pub fn train_regressor(
    train: DataView<'_>,
    y: &[f32],
    valid: Option<(DataView<'_>, &[f32])>,
    cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    check_shapes(train, y, valid, cfg)?;
    let rows = train.rows;
    let base: f64 = y.iter().map(|&v| v as f64).sum::<f64>() / rows as f64;

    let grower = TreeGrower::new(train);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let lr = cfg.learning_rate as f64;

    let mut preds: Vec<f64> = vec![base; rows];
    let mut val_preds: Vec<f64> = valid.map(|(xv, _)| vec![base; xv.rows]).unwrap_or_default();
    let hess = vec![1.0f64; rows];
    let mut grad = vec![0.0f64; rows];

    let mut trees: Vec<Tree> = Vec::with_capacity(cfg.num_trees);
    let mut train_loss = Vec::new();
    let mut valid_loss = Vec::new();
    let mut stopper = EarlyStopper::new(cfg.early_stopping_rounds);

    for t in 0..cfg.num_trees {
        for i in 0..rows {
            grad[i] = preds[i] - y[i] as f64;
        }
        let features = tree_features(train.cols, cfg.subsample_features, &mut rng);
        let tree = grower.grow(&grad, &hess, &features, cfg.max_depth, cfg.min_samples_leaf);
        for i in 0..rows {
            preds[i] += lr * tree.eval(train.row(i)) as f64;
        }
        train_loss.push(mse(&preds, y));
        trees.push(tree);

        if let Some((xv, yv)) = valid {
            let tree = trees.last().unwrap();
            for i in 0..xv.rows {
                val_preds[i] += lr * tree.eval(xv.row(i)) as f64;
            }
            let loss = mse(&val_preds, yv);
            valid_loss.push(loss);
            if stopper.observe(t, loss) {
                break;
            }
        }
    }
    if valid.is_some() {
        trees.truncate(stopper.best_iter + 1);
    }

    Ok(TrainOutcome {
        ensemble: TreeEnsemble {
            trees,
            base_score: base as f32,
            learning_rate: cfg.learning_rate,
            objective: Objective::SquaredError,
            num_features: train.cols,
        },
        train_loss,
        valid_loss,
    })
}

/// Weighted Newton logistic boosting. Exit-class rows (y = 1) are
/// up-weighted by `cfg.instance_weight_exit` on top of the supplied
/// per-row weights; validation loss uses the same weighting.
pub fn train_classifier(
    train: DataView<'_>,
    y: &[f32],
    weights: &[f32],
    valid: Option<(DataView<'_>, &[f32])>,
    cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    check_shapes(train, y, valid, cfg)?;
    if weights.len() != train.rows {
        return Err(Error::InvalidTrainingData(format!(
            "{} rows but {} weights",
            train.rows,
            weights.len()
        )));
    }
    let check_binary = |ys: &[f32]| -> Result<()> {
        if ys.iter().any(|&v| v != 0.0 && v != 1.0) {
            return Err(Error::InvalidTrainingData("labels must be 0 or 1".into()));
        }
        Ok(())
    };
    check_binary(y)?;
    if let Some((_, yv)) = valid {
        check_binary(yv)?;
    }
    let class_weight = |label: f32| if label == 1.0 { cfg.instance_weight_exit as f64 } else { 1.0 };
    let w: Vec<f64> = y
        .iter()
        .zip(weights)
        .map(|(&yi, &wi)| wi as f64 * class_weight(yi))
        .collect();
    if w.iter().any(|&wi| !(wi > 0.0) || !wi.is_finite()) {
        return Err(Error::InvalidTrainingData("weights must be positive and finite".into()));
    }

    let rows = train.rows;
    let sum_w: f64 = w.iter().sum();
    let sum_wy: f64 = w.iter().zip(y).map(|(&wi, &yi)| wi * yi as f64).sum();
    if sum_wy == 0.0 || sum_wy == sum_w {
        return Err(Error::InvalidTrainingData(
            "both classes must be present in training data".into(),
        ));
    }
    // log-odds of the weighted class prior
    let base = (sum_wy / (sum_w - sum_wy)).ln();

    let grower = TreeGrower::new(train);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let lr = cfg.learning_rate as f64;

    let mut scores: Vec<f64> = vec![base; rows];
    let (mut val_scores, val_w): (Vec<f64>, Vec<f64>) = match valid {
        Some((xv, yv)) => (
            vec![base; xv.rows],
            yv.iter().map(|&yi| class_weight(yi)).collect(),
        ),
        None => (Vec::new(), Vec::new()),
    };
    let mut grad = vec![0.0f64; rows];
    let mut hess = vec![0.0f64; rows];

    let mut trees: Vec<Tree> = Vec::with_capacity(cfg.num_trees);
    let mut train_loss = Vec::new();
    let mut valid_loss = Vec::new();
    let mut stopper = EarlyStopper::new(cfg.early_stopping_rounds);

    for t in 0..cfg.num_trees {
        for i in 0..rows {
            let p = sigmoid64(scores[i]);
            grad[i] = w[i] * (p - y[i] as f64);
            hess[i] = w[i] * p * (1.0 - p);
        }
        let features = tree_features(train.cols, cfg.subsample_features, &mut rng);
        let tree = grower.grow(&grad, &hess, &features, cfg.max_depth, cfg.min_samples_leaf);
        for i in 0..rows {
            scores[i] += lr * tree.eval(train.row(i)) as f64;
        }
        train_loss.push(weighted_log_loss(&scores, y, &w));
        trees.push(tree);

        if let Some((xv, yv)) = valid {
            let tree = trees.last().unwrap();
            for i in 0..xv.rows {
                val_scores[i] += lr * tree.eval(xv.row(i)) as f64;
            }
            let loss = weighted_log_loss(&val_scores, yv, &val_w);
            valid_loss.push(loss);
            if stopper.observe(t, loss) {
                break;
            }
        }
    }
    if valid.is_some() {
        trees.truncate(stopper.best_iter + 1);
    }

    Ok(TrainOutcome {
        ensemble: TreeEnsemble {
            trees,
            base_score: base as f32,
            learning_rate: cfg.learning_rate,
            objective: Objective::Logistic,
            num_features: train.cols,
        },
        train_loss,
        valid_loss,
    })
}

#[inline]
fn sigmoid64(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn mse(preds: &[f64], y: &[f32]) -> f64 {
    let n = y.len() as f64;
    preds
        .iter()
        .zip(y)
        .map(|(&p, &t)| {
            let d = p - t as f64;
            d * d
        })
        .sum::<f64>()
        / n
}

fn weighted_log_loss(scores: &[f64], y: &[f32], w: &[f64]) -> f64 {
    let mut num = 0.0f64;
    let mut den = 0.0f64;
    for i in 0..y.len() {
        let p = sigmoid64(scores[i]).clamp(1e-15, 1.0 - 1e-15);
        let l = if y[i] == 1.0 { -p.ln() } else { -(1.0 - p).ln() };
        num += w[i] * l;
        den += w[i];
    }
    num / den
}
