//! SMOTE: synthetic minority oversampling by interpolating between a
//! minority row and one of its k nearest minority neighbors.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::DataView;
use crate::error::{Error, Result};
use crate::vecmath::squared_l2;

/// Synthetic rows plus, per row, the indices of the two minority parents
/// it interpolates.
#[derive(Debug, Clone, PartialEq)]
pub struct SmoteOutput {
    pub rows: Vec<f32>,
    pub count: usize,
    pub cols: usize,
    pub parents: Vec<(usize, usize)>,
}

/// Generate `target_count` synthetic rows: `x + u * (neighbor - x)` with
/// `u ~ Uniform(0,1)`, the base row drawn uniformly and the neighbor drawn
/// from the base's k nearest minority neighbors (Euclidean, ties by index).
pub fn smote(
    minority: DataView<'_>,
    k_neighbors: usize,
    target_count: usize,
    seed: u64,
) -> Result<SmoteOutput> {
    let m = minority.rows;
    if m < 2 {
        return Err(Error::InvalidTrainingData(format!(
            "SMOTE needs at least 2 minority rows, got {m}"
        )));
    }
    if k_neighbors == 0 {
        return Err(Error::InvalidArg("k_neighbors must be at least 1".into()));
    }
    let k = k_neighbors.min(m - 1);

    // k nearest minority neighbors per row, excluding the row itself
    let neighbors: Vec<Vec<usize>> = (0..m)
        .map(|i| {
            let xi = minority.row(i);
            let mut dists: Vec<(f32, usize)> = (0..m)
                .filter(|&j| j != i)
                .map(|j| (squared_l2(xi, minority.row(j)), j))
                .collect();
            dists.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.cmp(&b.1)));
            dists.truncate(k);
            dists.into_iter().map(|(_, j)| j).collect()
        })
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cols = minority.cols;
    let mut rows = Vec::with_capacity(target_count * cols);
    let mut parents = Vec::with_capacity(target_count);
    for _ in 0..target_count {
        let base = rng.gen_range(0..m);
        let nb = neighbors[base][rng.gen_range(0..k)];
        let u: f32 = rng.gen_range(0.0..1.0);
        let xb = minority.row(base);
        let xn = minority.row(nb);
        for d in 0..cols {
            rows.push(xb[d] + u * (xn[d] - xb[d]));
        }
        parents.push((base, nb));
    }
    Ok(SmoteOutput {
        rows,
        count: target_count,
        cols,
        parents,
    })
}

/// Training data after SMOTE rebalancing: synthetic minority rows are
/// appended with weight 1 so the two classes end up equal in count.
#[derive(Debug, Clone, PartialEq)]
pub struct Rebalanced {
    pub x: Vec<f32>,
    pub y: Vec<f32>,
    pub weights: Vec<f32>,
    pub rows: usize,
    /// How many synthetic rows were appended.
    pub synthetic: usize,
}

/// Oversample the minority class of a binary problem up to the majority
/// count. A no-op (zero synthetic rows) when classes are already balanced.
pub fn smote_rebalance(
    data: DataView<'_>,
    y: &[f32],
    weights: &[f32],
    k_neighbors: usize,
    seed: u64,
) -> Result<Rebalanced> {
    if y.len() != data.rows || weights.len() != data.rows {
        return Err(Error::InvalidTrainingData(
            "targets/weights misaligned with matrix".into(),
        ));
    }
    if y.iter().any(|&v| v != 0.0 && v != 1.0) {
        return Err(Error::InvalidTrainingData("labels must be 0 or 1".into()));
    }
    let pos = y.iter().filter(|&&v| v == 1.0).count();
    let neg = data.rows - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::InvalidTrainingData(
            "both classes must be present to rebalance".into(),
        ));
    }

    let mut x = data.x.to_vec();
    let mut y_out = y.to_vec();
    let mut w_out = weights.to_vec();
    if pos == neg {
        return Ok(Rebalanced {
            x,
            y: y_out,
            weights: w_out,
            rows: data.rows,
            synthetic: 0,
        });
    }

    let minority_label = if pos < neg { 1.0 } else { 0.0 };
    let minority_rows: Vec<usize> = (0..data.rows).filter(|&i| y[i] == minority_label).collect();
    let deficit = pos.abs_diff(neg);

    let mut minority_x = Vec::with_capacity(minority_rows.len() * data.cols);
    for &i in &minority_rows {
        minority_x.extend_from_slice(data.row(i));
    }
    let minority_view = DataView::new(&minority_x, minority_rows.len(), data.cols)?;
    let synthetic = smote(minority_view, k_neighbors, deficit, seed)?;

    x.extend_from_slice(&synthetic.rows);
    y_out.extend(std::iter::repeat(minority_label).take(deficit));
    w_out.extend(std::iter::repeat(1.0).take(deficit));
    Ok(Rebalanced {
        x,
        y: y_out,
        weights: w_out,
        rows: data.rows + deficit,
        synthetic: deficit,
    })
}
