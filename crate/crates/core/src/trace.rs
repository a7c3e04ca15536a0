//! Probe-by-probe search over an IVF index.
//!
//! A [`SearchTrace`] records, for one query, the ranked cluster order, the
//! top-k result set `RS_h` after each probed cluster and the consecutive
//! intersection percentages `phi_h = 100 * |RS_{h-1} ∩ RS_h| / k`. Full
//! snapshots are retained only up to a configurable depth to bound memory;
//! the phi sequence, the per-depth best doc and the current result set are
//! always kept, which is what the early-exit policies need.

use std::collections::HashSet;

use crate::error::{Error, Result};
use crate::ivf::IvfIndex;
use crate::vecmath::score_then_id;

#[derive(Debug, Clone)]
pub struct SearchTrace {
    query_id: u64,
    k: usize,
    query: Vec<f32>,
    ranked: Vec<(u32, f32)>,
    snapshot_limit: usize,
    snapshots: Vec<Vec<(u64, f32)>>,
    phi: Vec<f32>,
    top1: Vec<Option<u64>>,
    current: Vec<(u64, f32)>,
    depth: usize,
}

impl SearchTrace {
    pub fn query_id(&self) -> u64 {
        self.query_id
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Number of clusters probed so far.
    pub fn depth(&self) -> usize {
        self.depth
    }

    /// Clusters sorted by query similarity descending, with scores.
    pub fn ranked_clusters(&self) -> &[(u32, f32)] {
        &self.ranked
    }

    /// `RS_h` for 1-based `h`, available while `h <= snapshot_limit`.
    pub fn snapshot(&self, h: usize) -> Option<&[(u64, f32)]> {
        if h == 0 || h > self.snapshots.len() {
            None
        } else {
            Some(&self.snapshots[h - 1])
        }
    }

    pub fn snapshot_limit(&self) -> usize {
        self.snapshot_limit
    }

    /// `phi_h` for 2-based `h` (percentage in [0, 100]).
    pub fn phi_at(&self, h: usize) -> Option<f32> {
        if h < 2 || h > self.depth {
            None
        } else {
            Some(self.phi[h - 2])
        }
    }

    /// The whole phi sequence, entry 0 holding `phi_2`.
    pub fn phi(&self) -> &[f32] {
        &self.phi
    }

    /// Best doc id after `h` probes (None while the probed union is empty).
    pub fn top1_at(&self, h: usize) -> Option<u64> {
        if h == 0 || h > self.depth {
            None
        } else {
            self.top1[h - 1]
        }
    }

    /// `RS_depth`, the current result set.
    pub fn result(&self) -> &[(u64, f32)] {
        &self.current
    }

    fn push_probe(&mut self, index: &IvfIndex) {
        let (cluster, _) = self.ranked[self.depth];
        let corpus = index.corpus();
        let metric = index.metric();
        let prev_ids: HashSet<u64> = self.current.iter().map(|&(id, _)| id).collect();

        let mut merged = self.current.clone();
        for &row in index.posting(cluster as usize) {
            let row = row as usize;
            let score = metric.score(&self.query, corpus.row(row));
            merged.push((corpus.id_at(row), score));
        }
        merged.sort_by(score_then_id);
        merged.truncate(self.k);
        self.current = merged;

        self.depth += 1;
        if self.depth >= 2 {
            let overlap = self
                .current
                .iter()
                .filter(|&&(id, _)| prev_ids.contains(&id))
                .count();
            self.phi.push(100.0 * overlap as f32 / self.k as f32);
        }
        self.top1.push(self.current.first().map(|&(id, _)| id));
        if self.depth <= self.snapshot_limit {
            self.snapshots.push(self.current.clone());
        }
    }

    /// Extend the trace to `up_to` probes; the result is field-for-field
    /// identical to having probed that deep in one call.
    pub fn resume(&mut self, index: &IvfIndex, up_to: usize) -> Result<()> {
        if up_to > index.num_clusters() {
            return Err(Error::InvalidArg(format!(
                "cannot probe {up_to} clusters, index has {}",
                index.num_clusters()
            )));
        }
        if up_to < self.depth {
            return Err(Error::InvalidArg(format!(
                "resume target {up_to} is below current depth {}",
                self.depth
            )));
        }
        while self.depth < up_to {
            self.push_probe(index);
        }
        Ok(())
    }
}

/// Incremental prober: rank clusters once, then step one probe at a time.
/// Early-exit policies step until their stop rule fires.
pub struct Prober<'a> {
    index: &'a IvfIndex,
    trace: SearchTrace,
}

impl<'a> Prober<'a> {
    pub fn new(
        index: &'a IvfIndex,
        query_id: u64,
        query: &[f32],
        k: usize,
        snapshot_limit: usize,
    ) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidArg("k must be positive".into()));
        }
        let ranked = index.rank_clusters_scored(query)?;
        Ok(Self {
            index,
            trace: SearchTrace {
                query_id,
                k,
                query: query.to_vec(),
                ranked,
                snapshot_limit,
                snapshots: Vec::new(),
                phi: Vec::new(),
                top1: Vec::new(),
                current: Vec::new(),
                depth: 0,
            },
        })
    }

    pub fn depth(&self) -> usize {
        self.trace.depth()
    }

    /// Probe the next cluster; returns the new depth, or None when all
    /// clusters are exhausted.
    pub fn step(&mut self) -> Option<usize> {
        if self.trace.depth >= self.index.num_clusters() {
            return None;
        }
        self.trace.push_probe(self.index);
        Some(self.trace.depth)
    }

    pub fn trace(&self) -> &SearchTrace {
        &self.trace
    }

    pub fn into_trace(self) -> SearchTrace {
        self.trace
    }
}

/// Probe the `max_probes` most similar clusters, keeping every snapshot.
pub fn probe(index: &IvfIndex, query_id: u64, q: &[f32], k: usize, max_probes: usize) -> Result<SearchTrace> {
    probe_limited(index, query_id, q, k, max_probes, max_probes)
}

/// Probe with snapshots retained only for the first `snapshot_limit`
/// probes. The phi sequence and final result set are kept regardless.
pub fn probe_limited(
    index: &IvfIndex,
    query_id: u64,
    q: &[f32],
    k: usize,
    max_probes: usize,
    snapshot_limit: usize,
) -> Result<SearchTrace> {
    if max_probes == 0 || max_probes > index.num_clusters() {
        return Err(Error::InvalidArg(format!(
            "max_probes {max_probes} must be in [1, {}]",
            index.num_clusters()
        )));
    }
    let mut prober = Prober::new(index, query_id, q, k, snapshot_limit)?;
    while prober.depth() < max_probes {
        prober.step();
    }
    Ok(prober.into_trace())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{generate_synthetic, SyntheticSpec, VectorSet};
    use crate::ivf::{IvfIndex, Metric};
    use crate::kmeans::KMeansConfig;
    use std::sync::Arc;

    fn small_index(seed: u64) -> (Arc<VectorSet>, IvfIndex, VectorSet) {
        let spec = SyntheticSpec {
            num_clusters_planted: 6,
            vectors_per_cluster: 50,
            dim: 12,
            intra_cluster_stddev: 0.25,
            num_queries: 20,
            seed,
        };
        let (corpus, queries, _qrels) = generate_synthetic(&spec).unwrap();
        let corpus = Arc::new(corpus);
        let idx = IvfIndex::build(
            corpus.clone(),
            10,
            Metric::InnerProduct,
            &KMeansConfig { max_iters: 25, seed: 1 },
        )
        .unwrap();
        (corpus, idx, queries)
    }

    /// Brute-force top-k over the union of the first h ranked clusters.
    fn prefix_oracle(
        idx: &IvfIndex,
        q: &[f32],
        k: usize,
        h: usize,
    ) -> Vec<(u64, f32)> {
        let ranked = idx.rank_clusters(q).unwrap();
        let corpus = idx.corpus();
        let mut all = Vec::new();
        for &c in &ranked[..h] {
            for &row in idx.posting(c as usize) {
                let row = row as usize;
                all.push((corpus.id_at(row), idx.metric().score(q, corpus.row(row))));
            }
        }
        all.sort_by(score_then_id);
        all.truncate(k);
        all
    }

    #[test]
    fn snapshots_match_per_prefix_brute_force() {
        let (_corpus, idx, queries) = small_index(21);
        for qi in 0..5 {
            let q = queries.row(qi);
            let trace = probe(&idx, qi as u64, q, 10, idx.num_clusters()).unwrap();
            for h in 1..=idx.num_clusters() {
                let oracle = prefix_oracle(&idx, q, 10, h);
                assert_eq!(trace.snapshot(h).unwrap(), &oracle[..], "query {qi} depth {h}");
            }
        }
    }

    #[test]
    fn kth_score_is_non_decreasing_and_phi_in_range() {
        let (_corpus, idx, queries) = small_index(22);
        for qi in 0..queries.len() {
            let q = queries.row(qi);
            let trace = probe(&idx, qi as u64, q, 10, idx.num_clusters()).unwrap();
            let mut prev_kth: Option<f32> = None;
            for h in 1..=trace.depth() {
                let rs = trace.snapshot(h).unwrap();
                if rs.len() == trace.k() {
                    let kth = rs.last().unwrap().1;
                    if let Some(p) = prev_kth {
                        assert!(kth >= p, "kth score decreased at depth {h}");
                    }
                    prev_kth = Some(kth);
                }
            }
            for h in 2..=trace.depth() {
                let phi = trace.phi_at(h).unwrap();
                assert!((0.0..=100.0).contains(&phi));
                if trace.snapshot(h) == trace.snapshot(h - 1) {
                    assert_eq!(phi, 100.0);
                }
            }
        }
    }

    #[test]
    fn resume_equals_direct_probe() {
        let (_corpus, idx, queries) = small_index(23);
        let q = queries.row(3);
        let k = 10;
        let full = probe(&idx, 3, q, k, 9).unwrap();

        let mut resumed = probe(&idx, 3, q, k, 4).unwrap();
        resumed.resume(&idx, 9).unwrap();
        assert_eq!(resumed.result(), full.result());
        assert_eq!(resumed.phi(), full.phi());
        assert_eq!(resumed.depth(), full.depth());

        // two-step resume equals one-step
        let mut two = probe(&idx, 3, q, k, 2).unwrap();
        two.resume(&idx, 5).unwrap();
        two.resume(&idx, 9).unwrap();
        assert_eq!(two.result(), full.result());
        assert_eq!(two.phi(), full.phi());

        // resume to current depth is the identity
        let mut same = probe(&idx, 3, q, k, 4).unwrap();
        let before = same.result().to_vec();
        same.resume(&idx, 4).unwrap();
        assert_eq!(same.result(), &before[..]);
        assert_eq!(same.depth(), 4);
    }

    #[test]
    fn resume_rejects_out_of_range() {
        let (_corpus, idx, queries) = small_index(24);
        let mut t = probe(&idx, 0, queries.row(0), 5, 3).unwrap();
        assert!(t.resume(&idx, idx.num_clusters() + 1).is_err());
        assert!(t.resume(&idx, 2).is_err());
    }

    #[test]
    fn probe_validates_arguments() {
        let (_corpus, idx, queries) = small_index(25);
        assert!(probe(&idx, 0, queries.row(0), 5, 0).is_err());
        assert!(probe(&idx, 0, queries.row(0), 5, idx.num_clusters() + 1).is_err());
        assert!(probe(&idx, 0, &[1.0, 2.0], 5, 1).is_err());
    }

    #[test]
    fn snapshot_limit_bounds_retention() {
        let (_corpus, idx, queries) = small_index(26);
        let t = probe_limited(&idx, 0, queries.row(0), 5, 8, 3).unwrap();
        assert!(t.snapshot(3).is_some());
        assert!(t.snapshot(4).is_none());
        assert_eq!(t.depth(), 8);
        assert_eq!(t.phi().len(), 7);
        // final result still equals the full-snapshot run
        let full = probe(&idx, 0, queries.row(0), 5, 8).unwrap();
        assert_eq!(t.result(), full.result());
    }
}
