//! Exact brute-force search and golden-label generation.
//!
//! The golden label `C(q)` is the minimum number of ranked clusters that
//! must be probed before the exact nearest neighbor `d*` is scored (its
//! cluster's rank in the query's cluster ordering), clamped to the probe
//! budget `N` when `d*` sits beyond it. Labels drive regression targets,
//! Exit/Continue classification and `R*@k` evaluation.

use std::collections::HashMap;
use std::path::Path;

use rayon::prelude::*;

use crate::corpus::VectorSet;
use crate::error::{Error, Result};
use crate::ivf::{IvfIndex, Metric};
use crate::vecmath::score_then_id;

/// Exact top-k of the corpus under the metric, sorted by score descending
/// with doc-id ascending as tie-break.
///
/// Scans blocks of rows for throughput; each document's score comes from
/// the same sequential kernel the index probing uses, so results match a
/// naive loop exactly.
pub fn exact_knn(corpus: &VectorSet, q: &[f32], k: usize, metric: Metric) -> Result<Vec<(u64, f32)>> {
    if q.len() != corpus.dim() {
        return Err(Error::DimensionMismatch {
            expected: corpus.dim(),
            got: q.len(),
        });
    }
    if k == 0 || k > corpus.len() {
        return Err(Error::InvalidArg(format!(
            "k {k} must be in [1, corpus size {}]",
            corpus.len()
        )));
    }
    const BLOCK: usize = 4096;
    let mut best: Vec<(u64, f32)> = Vec::with_capacity(k + 1);
    let mut block_scores: Vec<(u64, f32)> = Vec::with_capacity(BLOCK);
    let mut start = 0usize;
    while start < corpus.len() {
        let end = (start + BLOCK).min(corpus.len());
        block_scores.clear();
        for row in start..end {
            block_scores.push((corpus.id_at(row), metric.score(q, corpus.row(row))));
        }
        for &cand in &block_scores {
            if best.len() == k && score_then_id(&cand, best.last().unwrap()) != std::cmp::Ordering::Less {
                continue;
            }
            let pos = best.partition_point(|b| score_then_id(b, &cand) == std::cmp::Ordering::Less);
            best.insert(pos, cand);
            if best.len() > k {
                best.pop();
            }
        }
        start = end;
    }
    Ok(best)
}

/// `exact_knn` across a query set, parallel over queries.
pub fn exact_knn_batch(
    corpus: &VectorSet,
    queries: &VectorSet,
    k: usize,
    metric: Metric,
) -> Result<Vec<Vec<(u64, f32)>>> {
    (0..queries.len())
        .into_par_iter()
        .map(|qi| exact_knn(corpus, queries.row(qi), k, metric))
        .collect()
}

/// Golden record for one query.
#[derive(Debug, Clone, PartialEq)]
pub struct QueryLabel {
    pub query_id: u64,
    /// Exact nearest neighbor over the full corpus.
    pub d_star: u64,
    /// Minimal probes to reach `d_star`'s cluster, clamped to the budget.
    pub c: usize,
    /// Exact top-k (empty when labels were loaded from disk).
    pub exact_topk: Vec<(u64, f32)>,
}

/// Per-query labels computed against one index with probe budget `n_budget`.
#[derive(Debug, Clone, Default)]
pub struct GoldenLabels {
    pub n_budget: usize,
    pub k: usize,
    labels: Vec<QueryLabel>,
    by_query: HashMap<u64, usize>,
}

impl GoldenLabels {
    pub fn from_rows(n_budget: usize, k: usize, labels: Vec<QueryLabel>) -> Result<Self> {
        let mut by_query = HashMap::with_capacity(labels.len());
        for (i, l) in labels.iter().enumerate() {
            if l.c == 0 || l.c > n_budget {
                return Err(Error::InvalidArg(format!(
                    "label C {} for query {} outside [1, {n_budget}]",
                    l.c, l.query_id
                )));
            }
            if by_query.insert(l.query_id, i).is_some() {
                return Err(Error::InvalidArg(format!("duplicate query id {}", l.query_id)));
            }
        }
        Ok(Self {
            n_budget,
            k,
            labels,
            by_query,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn rows(&self) -> &[QueryLabel] {
        &self.labels
    }

    pub fn get(&self, query_id: u64) -> Option<&QueryLabel> {
        self.by_query.get(&query_id).map(|&i| &self.labels[i])
    }

    /// Fraction of queries with `C(q) <= n`; equals `R*@1` of fixed-n
    /// probing when labels were computed with a budget covering n.
    pub fn cdf_at(&self, n: usize) -> f64 {
        if self.labels.is_empty() {
            return 0.0;
        }
        let hits = self.labels.iter().filter(|l| l.c <= n).count();
        hits as f64 / self.labels.len() as f64
    }
}

/// Label every query: `d*` from exact search, `C` from the rank of `d*`'s
/// cluster in the query's cluster ordering (budget-clamped).
pub fn label_queries(
    index: &IvfIndex,
    queries: &VectorSet,
    n_budget: usize,
    k: usize,
) -> Result<GoldenLabels> {
    if n_budget == 0 || n_budget > index.num_clusters() {
        return Err(Error::InvalidArg(format!(
            "n_budget {n_budget} must be in [1, {}]",
            index.num_clusters()
        )));
    }
    let corpus = index.corpus();
    let labels: Vec<QueryLabel> = (0..queries.len())
        .into_par_iter()
        .map(|qi| -> Result<QueryLabel> {
            let q = queries.row(qi);
            let exact = exact_knn(corpus, q, k.min(corpus.len()), index.metric())?;
            let d_star = exact[0].0;
            let star_cluster = index
                .cluster_of_id(d_star)
                .expect("exact_knn returned an id outside the corpus");
            let ranked = index.rank_clusters(q)?;
            let rank = ranked
                .iter()
                .position(|&c| c == star_cluster)
                .expect("cluster ranking must be a permutation");
            let c = if rank + 1 <= n_budget { rank + 1 } else { n_budget };
            Ok(QueryLabel {
                query_id: queries.id_at(qi),
                d_star,
                c,
                exact_topk: exact,
            })
        })
        .collect::<Result<_>>()?;
    GoldenLabels::from_rows(n_budget, k, labels)
}

/// Fraction of queries per C value; fractions sum to 1.
pub fn label_histogram(labels: &GoldenLabels) -> Result<std::collections::BTreeMap<usize, f64>> {
    if labels.is_empty() {
        return Err(Error::InvalidArg("cannot build histogram of zero labels".into()));
    }
    let mut hist = std::collections::BTreeMap::new();
    for l in labels.rows() {
        *hist.entry(l.c).or_insert(0.0) += 1.0;
    }
    let n = labels.len() as f64;
    for v in hist.values_mut() {
        *v /= n;
    }
    Ok(hist)
}

/// Persist labels as TSV `qid d_star C` (the exact top-k stays in memory).
pub fn save_labels(labels: &GoldenLabels, path: &Path) -> Result<()> {
    use std::io::Write;
    let mut out = Vec::new();
    writeln!(out, "# n_budget={}\tk={}", labels.n_budget, labels.k).expect("write to vec");
    for l in labels.rows() {
        writeln!(out, "{}\t{}\t{}", l.query_id, l.d_star, l.c).expect("write to vec");
    }
    crate::corpus::write_atomic(path, &out)
}

pub fn load_labels(path: &Path) -> Result<GoldenLabels> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::parse(path, 1, "empty labels file"))?;
    let parse_kv = |s: &str, key: &str| -> Result<usize> {
        s.strip_prefix(key)
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| Error::parse(path, 1, format!("bad header field {key}")))
    };
    let mut fields = header.trim_start_matches("# ").split('\t');
    let n_budget = parse_kv(fields.next().unwrap_or(""), "n_budget=")?;
    let k = parse_kv(fields.next().unwrap_or(""), "k=")?;
    let mut rows = Vec::new();
    for (lineno, line) in lines {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let mut it = line.split_whitespace();
        let mut next_num = |what: &str| -> Result<u64> {
            it.next()
                .and_then(|t| t.parse().ok())
                .ok_or_else(|| Error::parse(path, lineno + 1, format!("bad {what}")))
        };
        let query_id = next_num("query id")?;
        let d_star = next_num("d_star")?;
        let c = next_num("C")? as usize;
        rows.push(QueryLabel {
            query_id,
            d_star,
            c,
            exact_topk: Vec::new(),
        });
    }
    GoldenLabels::from_rows(n_budget, k, rows)
}
