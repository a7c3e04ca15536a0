//! Per-query features computed from a tau-deep search trace.
//!
//! Four groups, concatenated in fixed order:
//!
//! 1. the query vector itself (n values);
//! 2. similarities of the query to its h-th closest centroid, for h in
//!    `{1..tau} ∪ {10, 20, ..., 100}` (deduplicated, ranks beyond K dropped);
//! 3. result-set statistics after tau probes: best doc similarity, k-th doc
//!    similarity, their ratio, and best-doc over best-centroid similarity;
//! 4. optional stability features: `|RS_{h-1} ∩ RS_h| / k` and
//!    `|RS_1 ∩ RS_h| / k` for h in 2..=tau, stored as fractions in [0, 1].
//!
//! Extraction is a pure function of (trace, index, query, layout).

use std::collections::HashSet;
use std::path::Path;

use crate::error::{Error, Result};
use crate::ivf::IvfIndex;
use crate::oracle::GoldenLabels;
use crate::trace::SearchTrace;

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct FeatureLayout {
    pub dim_query: usize,
    /// 1-based centroid ranks, strictly increasing.
    pub centroid_ranks: Vec<usize>,
    pub has_stability: bool,
    pub tau: usize,
}

impl FeatureLayout {
    /// The standard layout: ranks `{1..tau} ∪ {10,20,...,100}` clamped to
    /// the cluster count.
    pub fn standard(dim_query: usize, tau: usize, num_clusters: usize, has_stability: bool) -> Result<Self> {
        if tau < 2 {
            return Err(Error::InvalidArg("tau must be at least 2".into()));
        }
        let mut ranks: Vec<usize> = (1..=tau).collect();
        for decade in (10..=100).step_by(10) {
            ranks.push(decade);
        }
        ranks.sort_unstable();
        ranks.dedup();
        ranks.retain(|&r| r <= num_clusters);
        Ok(Self {
            dim_query,
            centroid_ranks: ranks,
            has_stability,
            tau,
        })
    }

    pub fn total_len(&self) -> usize {
        let stability = if self.has_stability { 2 * (self.tau - 1) } else { 0 };
        self.dim_query + self.centroid_ranks.len() + 4 + stability
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub values: Vec<f32>,
}

fn guarded_ratio(num: f32, den: f32, what: &str) -> f32 {
    if den == 0.0 {
        log::warn!("zero denominator for {what}; emitting 0");
        0.0
    } else {
        num / den
    }
}

fn intersection_fraction(a: &[(u64, f32)], b: &[(u64, f32)], k: usize) -> f32 {
    let ids: HashSet<u64> = a.iter().map(|&(id, _)| id).collect();
    let overlap = b.iter().filter(|&&(id, _)| ids.contains(&id)).count();
    overlap as f32 / k as f32
}

/// Extract the layout's features from a trace probed at least `tau` deep
/// with snapshots retained through `tau`.
pub fn extract_features(
    trace: &SearchTrace,
    index: &IvfIndex,
    q: &[f32],
    layout: &FeatureLayout,
) -> Result<FeatureVector> {
    if q.len() != layout.dim_query {
        return Err(Error::DimensionMismatch {
            expected: layout.dim_query,
            got: q.len(),
        });
    }
    if trace.depth() < layout.tau {
        return Err(Error::InvalidArg(format!(
            "trace depth {} is shallower than tau {}",
            trace.depth(),
            layout.tau
        )));
    }
    if trace.snapshot_limit() < layout.tau {
        return Err(Error::InvalidArg(format!(
            "trace retains snapshots to depth {}, need tau {}",
            trace.snapshot_limit(),
            layout.tau
        )));
    }
    if let Some(&max_rank) = layout.centroid_ranks.last() {
        if max_rank > index.num_clusters() {
            return Err(Error::InvalidArg(format!(
                "layout rank {max_rank} exceeds cluster count {}",
                index.num_clusters()
            )));
        }
    }

    let mut values = Vec::with_capacity(layout.total_len());
    values.extend_from_slice(q);

    let ranked = trace.ranked_clusters();
    for &rank in &layout.centroid_ranks {
        values.push(ranked[rank - 1].1);
    }

    let k = trace.k();
    let rs_tau = trace.snapshot(layout.tau).expect("snapshot depth checked above");
    let (top_sim, kth_sim) = match (rs_tau.first(), rs_tau.last()) {
        (Some(&(_, top)), Some(&(_, kth))) => (top, kth),
        _ => {
            log::warn!("empty result set after tau probes; emitting zero features");
            (0.0, 0.0)
        }
    };
    let best_centroid_sim = ranked[0].1;
    values.push(top_sim);
    values.push(kth_sim);
    values.push(guarded_ratio(top_sim, kth_sim, "kth doc similarity"));
    values.push(guarded_ratio(top_sim, best_centroid_sim, "closest centroid similarity"));

    if layout.has_stability {
        for h in 2..=layout.tau {
            let prev = trace.snapshot(h - 1).expect("snapshots retained to tau");
            let cur = trace.snapshot(h).expect("snapshots retained to tau");
            values.push(intersection_fraction(prev, cur, k));
        }
        let first = trace.snapshot(1).expect("snapshots retained to tau");
        for h in 2..=layout.tau {
            let cur = trace.snapshot(h).expect("snapshots retained to tau");
            values.push(intersection_fraction(first, cur, k));
        }
    }

    debug_assert_eq!(values.len(), layout.total_len());
    if let Some(bad) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::InvalidArg(format!("non-finite feature at index {bad}")));
    }
    Ok(FeatureVector { values })
}

/// Training target derived from golden labels.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Target {
    /// y = C(q), the minimal probe count.
    Regression,
    /// y = 1 (Exit) when C(q) <= tau, else 0 (Continue).
    Classification { tau: usize },
}

/// Row-major design matrix with aligned targets and weights.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingMatrix {
    pub x: Vec<f32>,
    pub rows: usize,
    pub cols: usize,
    pub y: Vec<f32>,
    pub weights: Vec<f32>,
    pub query_ids: Vec<u64>,
}

impl TrainingMatrix {
    pub fn row(&self, i: usize) -> &[f32] {
        &self.x[i * self.cols..(i + 1) * self.cols]
    }
}

/// Assemble one row per query from extracted features and golden labels.
/// Weights default to 1; class weighting happens at training time.
pub fn build_training_matrix(
    features: &[(u64, FeatureVector)],
    labels: &GoldenLabels,
    layout: &FeatureLayout,
    target: Target,
) -> Result<TrainingMatrix> {
    let cols = layout.total_len();
    let mut x = Vec::with_capacity(features.len() * cols);
    let mut y = Vec::with_capacity(features.len());
    let mut query_ids = Vec::with_capacity(features.len());
    for (qid, fv) in features {
        if fv.values.len() != cols {
            return Err(Error::DimensionMismatch {
                expected: cols,
                got: fv.values.len(),
            });
        }
        let label = labels
            .get(*qid)
            .ok_or_else(|| Error::InvalidArg(format!("query {qid} missing from labels")))?;
        x.extend_from_slice(&fv.values);
        y.push(match target {
            Target::Regression => label.c as f32,
            Target::Classification { tau } => {
                if label.c <= tau {
                    1.0
                } else {
                    0.0
                }
            }
        });
        query_ids.push(*qid);
    }
    let rows = features.len();
    Ok(TrainingMatrix {
        x,
        rows,
        cols,
        y,
        weights: vec![1.0; rows],
        query_ids,
    })
}

const MATRIX_MAGIC: &[u8; 4] = b"FMX1";

/// Persist the matrix as a binary block: magic, target kind, rows, cols,
/// then targets, weights, ids and row-major values, all little-endian.
pub fn save_matrix(m: &TrainingMatrix, target: Target, path: &Path) -> Result<()> {
    let mut out = Vec::new();
    out.extend_from_slice(MATRIX_MAGIC);
    match target {
        Target::Regression => {
            out.push(0u8);
            out.extend_from_slice(&0u64.to_le_bytes());
        }
        Target::Classification { tau } => {
            out.push(1u8);
            out.extend_from_slice(&(tau as u64).to_le_bytes());
        }
    }
    out.extend_from_slice(&(m.rows as u64).to_le_bytes());
    out.extend_from_slice(&(m.cols as u64).to_le_bytes());
    for v in &m.y {
        out.extend_from_slice(&v.to_le_bytes());
    }
    for v in &m.weights {
        out.extend_from_slice(&v.to_le_bytes());
    }
    for v in &m.query_ids {
        out.extend_from_slice(&v.to_le_bytes());
    }
    for v in &m.x {
        out.extend_from_slice(&v.to_le_bytes());
    }
    crate::corpus::write_atomic(path, &out)
}

pub fn load_matrix(path: &Path) -> Result<(TrainingMatrix, Target)> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let mut off = 0usize;
    let take = |off: &mut usize, n: usize| -> Result<&[u8]> {
        if *off + n > bytes.len() {
            return Err(Error::format(path, *off as u64, "truncated file"));
        }
        let s = &bytes[*off..*off + n];
        *off += n;
        Ok(s)
    };
    if take(&mut off, 4)? != MATRIX_MAGIC {
        return Err(Error::format(path, 0, "bad magic, expected \"FMX1\""));
    }
    let kind = take(&mut off, 1)?[0];
    let tau = u64::from_le_bytes(take(&mut off, 8)?.try_into().unwrap()) as usize;
    let target = match kind {
        0 => Target::Regression,
        1 => Target::Classification { tau },
        _ => return Err(Error::format(path, 4, "unknown target kind")),
    };
    let rows = u64::from_le_bytes(take(&mut off, 8)?.try_into().unwrap()) as usize;
    let cols = u64::from_le_bytes(take(&mut off, 8)?.try_into().unwrap()) as usize;
    let read_f32s = |off: &mut usize, n: usize| -> Result<Vec<f32>> {
        let mut v = Vec::with_capacity(n);
        for _ in 0..n {
            v.push(f32::from_le_bytes(take(off, 4)?.try_into().unwrap()));
        }
        Ok(v)
    };
    let y = read_f32s(&mut off, rows)?;
    let weights = read_f32s(&mut off, rows)?;
    let mut query_ids = Vec::with_capacity(rows);
    for _ in 0..rows {
        query_ids.push(u64::from_le_bytes(take(&mut off, 8)?.try_into().unwrap()));
    }
    let x = read_f32s(&mut off, rows * cols)?;
    if off != bytes.len() {
        return Err(Error::format(path, off as u64, "trailing bytes"));
    }
    Ok((
        TrainingMatrix {
            x,
            rows,
            cols,
            y,
            weights,
            query_ids,
        },
        target,
    ))
}

/// CSV dump for debugging: `qid,y,weight,f0,f1,...`.
pub fn save_matrix_csv(m: &TrainingMatrix, path: &Path) -> Result<()> {
    use std::io::Write;
    let mut out = Vec::new();
    for i in 0..m.rows {
        write!(out, "{},{},{}", m.query_ids[i], m.y[i], m.weights[i]).expect("write to vec");
        for v in m.row(i) {
            write!(out, ",{v}").expect("write to vec");
        }
        writeln!(out).expect("write to vec");
    }
    crate::corpus::write_atomic(path, &out)
}
