//! Two-level clustered (IVF) index: k-means centroids plus posting lists.
//!
//! Postings partition the corpus; every document sits in the posting of its
//! most-similar centroid under the index metric. Probing visits clusters in
//! decreasing centroid similarity (see [`crate::trace`]).
//!
//! # Index file (`.ivf`)
//!
//! Little-endian throughout:
//!
//! ```text
//! magic:    b"IVF1"                  (4 bytes)
//! metric:   u8 (0 = inner product, 1 = l2)
//! K:        u32
//! dim:      u32
//! centroids K * dim * f32
//! lengths:  K * u64
//! postings: per cluster, length * u64 doc ids
//! ```

use std::path::Path;
use std::sync::Arc;

use rayon::prelude::*;

use crate::corpus::VectorSet;
use crate::error::{Error, Result};
use crate::kmeans::run_kmeans;
use crate::vecmath::{dot, squared_l2};

pub use crate::kmeans::KMeansConfig;

const IVF_MAGIC: &[u8; 4] = b"IVF1";

/// Similarity used for assignment, cluster ranking and document scoring.
/// Higher is always better; L2 scores are negated squared distances.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    InnerProduct,
    L2,
}

impl Metric {
    #[inline]
    pub fn score(&self, a: &[f32], b: &[f32]) -> f32 {
        match self {
            Metric::InnerProduct => dot(a, b),
            Metric::L2 => -squared_l2(a, b),
        }
    }

    fn tag(&self) -> u8 {
        match self {
            Metric::InnerProduct => 0,
            Metric::L2 => 1,
        }
    }

    fn from_tag(tag: u8) -> Option<Self> {
        match tag {
            0 => Some(Metric::InnerProduct),
            1 => Some(Metric::L2),
            _ => None,
        }
    }
}

/// Smallest power of two strictly greater than `16 * sqrt(corpus_size)`.
pub fn default_num_clusters(corpus_size: usize) -> usize {
    assert!(corpus_size >= 1);
    let target = 16.0 * (corpus_size as f64).sqrt();
    let mut p = 1usize;
    while p as f64 <= target {
        p *= 2;
    }
    p
}

pub struct IvfIndex {
    centroids: Vec<f32>,
    postings: Vec<Vec<u32>>,
    doc_cluster: Vec<u32>,
    metric: Metric,
    dim: usize,
    corpus: Arc<VectorSet>,
}

impl IvfIndex {
    /// Train a coarse quantizer on the corpus and assign postings.
    ///
    /// K-means runs in Euclidean space; the final posting assignment uses
    /// the search metric so that probing order and membership agree.
    pub fn build(
        corpus: Arc<VectorSet>,
        num_clusters: usize,
        metric: Metric,
        kmeans_cfg: &KMeansConfig,
    ) -> Result<Self> {
        if corpus.is_empty() {
            return Err(Error::InvalidArg("cannot index an empty corpus".into()));
        }
        if num_clusters == 0 || num_clusters > corpus.len() {
            return Err(Error::InvalidArg(format!(
                "num_clusters {} must be in [1, corpus size {}]",
                num_clusters,
                corpus.len()
            )));
        }
        let centroids = run_kmeans(
            corpus.data(),
            corpus.len(),
            corpus.dim(),
            num_clusters,
            kmeans_cfg,
        );
        Ok(Self::from_centroids(corpus, centroids, metric))
    }

    /// Assign every document to its most-similar centroid (ties to the
    /// lower cluster index) and build postings.
    fn from_centroids(corpus: Arc<VectorSet>, centroids: Vec<f32>, metric: Metric) -> Self {
        let dim = corpus.dim();
        let k = centroids.len() / dim;
        let doc_cluster: Vec<u32> = (0..corpus.len())
            .into_par_iter()
            .map(|row| {
                let v = corpus.row(row);
                let mut best = 0u32;
                let mut best_score = metric.score(v, &centroids[0..dim]);
                for c in 1..k {
                    let s = metric.score(v, &centroids[c * dim..(c + 1) * dim]);
                    if s > best_score {
                        best_score = s;
                        best = c as u32;
                    }
                }
                best
            })
            .collect();
        let mut postings: Vec<Vec<u32>> = vec![Vec::new(); k];
        for (row, &c) in doc_cluster.iter().enumerate() {
            postings[c as usize].push(row as u32);
        }
        Self {
            centroids,
            postings,
            doc_cluster,
            metric,
            dim,
            corpus,
        }
    }

    pub fn num_clusters(&self) -> usize {
        self.postings.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn metric(&self) -> Metric {
        self.metric
    }

    pub fn corpus(&self) -> &Arc<VectorSet> {
        &self.corpus
    }

    pub fn centroid(&self, cluster: usize) -> &[f32] {
        &self.centroids[cluster * self.dim..(cluster + 1) * self.dim]
    }

    /// Posting list as corpus row indices.
    pub fn posting(&self, cluster: usize) -> &[u32] {
        &self.postings[cluster]
    }

    pub fn cluster_of_row(&self, row: usize) -> u32 {
        self.doc_cluster[row]
    }

    pub fn cluster_of_id(&self, id: u64) -> Option<u32> {
        self.corpus.row_of_id(id).map(|r| self.doc_cluster[r])
    }

    /// All clusters sorted by similarity to `q` descending, ties to the
    /// lower cluster index. Scores are included for feature extraction.
    pub fn rank_clusters_scored(&self, q: &[f32]) -> Result<Vec<(u32, f32)>> {
        if q.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: q.len(),
            });
        }
        let mut scored: Vec<(u32, f32)> = (0..self.num_clusters())
            .map(|c| (c as u32, self.metric.score(q, self.centroid(c))))
            .collect();
        scored.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        Ok(scored)
    }

    /// Permutation of cluster indices, most similar first.
    pub fn rank_clusters(&self, q: &[f32]) -> Result<Vec<u32>> {
        Ok(self.rank_clusters_scored(q)?.into_iter().map(|(c, _)| c).collect())
    }

    /// Partition check: postings must disjointly cover all corpus rows and
    /// every document must sit with its most-similar centroid.
    pub fn verify_partition(&self) -> Result<()> {
        let mut seen = vec![false; self.corpus.len()];
        for posting in &self.postings {
            for &row in posting {
                let row = row as usize;
                if row >= seen.len() {
                    return Err(Error::InvalidArg(format!("posting row {row} out of range")));
                }
                if seen[row] {
                    return Err(Error::InvalidArg(format!("row {row} appears twice")));
                }
                seen[row] = true;
            }
        }
        if let Some(missing) = seen.iter().position(|s| !s) {
            return Err(Error::InvalidArg(format!("row {missing} not covered")));
        }
        for (cluster, posting) in self.postings.iter().enumerate() {
            for &row in posting {
                let v = self.corpus.row(row as usize);
                let own = self.metric.score(v, self.centroid(cluster));
                for other in 0..self.num_clusters() {
                    let s = self.metric.score(v, self.centroid(other));
                    let better = s > own || (s == own && other < cluster);
                    if better && other != cluster {
                        return Err(Error::InvalidArg(format!(
                            "row {row} assigned to cluster {cluster} but {other} is more similar"
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut out = Vec::new();
        out.extend_from_slice(IVF_MAGIC);
        out.push(self.metric.tag());
        out.extend_from_slice(&(self.num_clusters() as u32).to_le_bytes());
        out.extend_from_slice(&(self.dim as u32).to_le_bytes());
        for v in &self.centroids {
            out.extend_from_slice(&v.to_le_bytes());
        }
        for posting in &self.postings {
            out.extend_from_slice(&(posting.len() as u64).to_le_bytes());
        }
        for posting in &self.postings {
            for &row in posting {
                out.extend_from_slice(&self.corpus.id_at(row as usize).to_le_bytes());
            }
        }
        crate::corpus::write_atomic(path, &out)
    }

    /// Load an index file and re-attach it to the corpus it was built from.
    pub fn load(path: &Path, corpus: Arc<VectorSet>) -> Result<Self> {
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
        if take(&mut off, 4)? != IVF_MAGIC {
            return Err(Error::format(path, 0, "bad magic, expected \"IVF1\""));
        }
        let metric = Metric::from_tag(take(&mut off, 1)?[0])
            .ok_or_else(|| Error::format(path, 4, "unknown metric tag"))?;
        let k = u32::from_le_bytes(take(&mut off, 4)?.try_into().unwrap()) as usize;
        let dim = u32::from_le_bytes(take(&mut off, 4)?.try_into().unwrap()) as usize;
        if dim != corpus.dim() {
            return Err(Error::DimensionMismatch {
                expected: corpus.dim(),
                got: dim,
            });
        }
        let mut centroids = vec![0.0f32; k * dim];
        for v in centroids.iter_mut() {
            let voff = off;
            *v = f32::from_le_bytes(take(&mut off, 4)?.try_into().unwrap());
            if !v.is_finite() {
                return Err(Error::format(path, voff as u64, "non-finite centroid value"));
            }
        }
        let mut lengths = vec![0u64; k];
        for l in lengths.iter_mut() {
            *l = u64::from_le_bytes(take(&mut off, 8)?.try_into().unwrap());
        }
        let total: u64 = lengths.iter().sum();
        if total as usize != corpus.len() {
            return Err(Error::format(
                path,
                off as u64,
                format!("postings cover {total} docs, corpus has {}", corpus.len()),
            ));
        }
        let mut postings: Vec<Vec<u32>> = Vec::with_capacity(k);
        let mut doc_cluster = vec![0u32; corpus.len()];
        let mut seen = vec![false; corpus.len()];
        for (cluster, &len) in lengths.iter().enumerate() {
            let mut posting = Vec::with_capacity(len as usize);
            for _ in 0..len {
                let id_off = off;
                let id = u64::from_le_bytes(take(&mut off, 8)?.try_into().unwrap());
                let row = corpus.row_of_id(id).ok_or_else(|| {
                    Error::format(path, id_off as u64, format!("doc id {id} not in corpus"))
                })?;
                if seen[row] {
                    return Err(Error::format(
                        path,
                        id_off as u64,
                        format!("doc id {id} appears in two postings"),
                    ));
                }
                seen[row] = true;
                doc_cluster[row] = cluster as u32;
                posting.push(row as u32);
            }
            postings.push(posting);
        }
        if off != bytes.len() {
            return Err(Error::format(path, off as u64, "trailing bytes"));
        }
        Ok(Self {
            centroids,
            postings,
            doc_cluster,
            metric,
            dim,
            corpus,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{generate_synthetic, SyntheticSpec};

    fn unit(dim: usize, axis: usize) -> Vec<f32> {
        let mut v = vec![0.0; dim];
        v[axis] = 1.0;
        v
    }

    #[test]
    fn default_cluster_counts_follow_rule() {
        assert_eq!(default_num_clusters(8_800_000), 65_536);
        assert_eq!(default_num_clusters(1), 32);
        assert_eq!(default_num_clusters(100_000), 8_192);
    }

    #[test]
    fn k1_centroid_is_corpus_mean() {
        let data = vec![1.0, 0.0, 3.0, 0.0, 2.0, 3.0];
        let corpus = Arc::new(VectorSet::from_rows(data, 2).unwrap());
        let idx = IvfIndex::build(corpus, 1, Metric::L2, &KMeansConfig::default()).unwrap();
        assert_eq!(idx.centroid(0), &[2.0, 1.0]);
        assert_eq!(idx.posting(0).len(), 3);
    }

    #[test]
    fn planted_blobs_recover_partition() {
        let spec = SyntheticSpec {
            num_clusters_planted: 3,
            vectors_per_cluster: 40,
            dim: 16,
            intra_cluster_stddev: 0.02,
            num_queries: 1,
            seed: 11,
        };
        let (corpus, _q, _r) = generate_synthetic(&spec).unwrap();
        let corpus = Arc::new(corpus);
        let idx = IvfIndex::build(
            corpus.clone(),
            3,
            Metric::InnerProduct,
            &KMeansConfig { max_iters: 50, seed: 3 },
        )
        .unwrap();
        idx.verify_partition().unwrap();
        // postings must coincide with the planted labels (id / 40)
        for cluster in 0..3 {
            let posting = idx.posting(cluster);
            assert_eq!(posting.len(), 40, "cluster {cluster} has wrong size");
            let planted = corpus.id_at(posting[0] as usize) / 40;
            for &row in posting {
                assert_eq!(corpus.id_at(row as usize) / 40, planted);
            }
        }
    }

    #[test]
    fn build_is_deterministic() {
        let spec = SyntheticSpec {
            num_clusters_planted: 5,
            vectors_per_cluster: 30,
            dim: 8,
            intra_cluster_stddev: 0.15,
            num_queries: 1,
            seed: 2,
        };
        let (corpus, _q, _r) = generate_synthetic(&spec).unwrap();
        let corpus = Arc::new(corpus);
        let cfg = KMeansConfig { max_iters: 25, seed: 9 };
        let a = IvfIndex::build(corpus.clone(), 8, Metric::InnerProduct, &cfg).unwrap();
        let b = IvfIndex::build(corpus.clone(), 8, Metric::InnerProduct, &cfg).unwrap();
        assert_eq!(a.centroids, b.centroids);
        assert_eq!(a.postings, b.postings);
    }

    #[test]
    fn rank_clusters_orders_by_similarity() {
        let dim = 6;
        let mut data = Vec::new();
        for axis in 0..6 {
            data.extend(unit(dim, axis));
        }
        let corpus = Arc::new(VectorSet::from_rows(data, dim).unwrap());
        let idx = IvfIndex::build(
            corpus,
            6,
            Metric::InnerProduct,
            &KMeansConfig { max_iters: 10, seed: 1 },
        )
        .unwrap();
        // query equal to the centroid owning axis 5 must rank that cluster first
        let q = unit(dim, 5);
        let ranked = idx.rank_clusters(&q).unwrap();
        let top = ranked[0] as usize;
        assert_eq!(idx.centroid(top), &q[..]);

        // brute-force sort oracle on a random-ish query
        let q2: Vec<f32> = (0..dim).map(|i| ((i * 7 % 5) as f32) * 0.3 - 0.5).collect();
        let ranked2 = idx.rank_clusters(&q2).unwrap();
        let mut oracle: Vec<(u32, f32)> = (0..6)
            .map(|c| (c as u32, dot(&q2, idx.centroid(c))))
            .collect();
        oracle.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        let oracle: Vec<u32> = oracle.into_iter().map(|(c, _)| c).collect();
        assert_eq!(ranked2, oracle);
    }

    #[test]
    fn ties_break_toward_lower_cluster_index() {
        // two identical centroids arise from duplicated points
        let data = vec![1.0, 0.0, 1.0, 0.0, 0.0, 1.0];
        let corpus = Arc::new(VectorSet::from_rows(data, 2).unwrap());
        let idx = IvfIndex::build(
            corpus,
            3,
            Metric::InnerProduct,
            &KMeansConfig { max_iters: 10, seed: 4 },
        )
        .unwrap();
        let ranked = idx.rank_clusters(&[1.0, 0.0]).unwrap();
        let dup: Vec<usize> = (0..3).filter(|&c| idx.centroid(c) == &[1.0, 0.0]).collect();
        if dup.len() == 2 {
            let pos0 = ranked.iter().position(|&c| c as usize == dup[0]).unwrap();
            let pos1 = ranked.iter().position(|&c| c as usize == dup[1]).unwrap();
            assert!(pos0 < pos1);
        }
    }

    #[test]
    fn rejects_bad_build_args() {
        let corpus = Arc::new(VectorSet::from_rows(vec![1.0, 2.0], 2).unwrap());
        assert!(IvfIndex::build(corpus.clone(), 2, Metric::L2, &KMeansConfig::default()).is_err());
        let empty = Arc::new(VectorSet::from_rows(vec![], 2).unwrap());
        assert!(IvfIndex::build(empty, 1, Metric::L2, &KMeansConfig::default()).is_err());
    }

    #[test]
    fn save_load_round_trip() {
        let spec = SyntheticSpec {
            num_clusters_planted: 4,
            vectors_per_cluster: 20,
            dim: 8,
            intra_cluster_stddev: 0.1,
            num_queries: 1,
            seed: 6,
        };
        let (corpus, _q, _r) = generate_synthetic(&spec).unwrap();
        let corpus = Arc::new(corpus);
        let idx = IvfIndex::build(
            corpus.clone(),
            6,
            Metric::InnerProduct,
            &KMeansConfig::default(),
        )
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("test.ivf");
        idx.save(&path).unwrap();
        let back = IvfIndex::load(&path, corpus).unwrap();
        assert_eq!(back.centroids, idx.centroids);
        assert_eq!(back.postings, idx.postings);
        assert_eq!(back.metric, idx.metric);
        back.verify_partition().unwrap();
    }

    #[test]
    fn load_rejects_wrong_corpus() {
        let corpus = Arc::new(VectorSet::from_rows(vec![1.0, 0.0, 0.0, 1.0], 2).unwrap());
        let idx = IvfIndex::build(
            corpus.clone(),
            2,
            Metric::InnerProduct,
            &KMeansConfig::default(),
        )
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.ivf");
        idx.save(&path).unwrap();
        let other = Arc::new(VectorSet::from_rows(vec![1.0, 0.0], 2).unwrap());
        assert!(IvfIndex::load(&path, other).is_err());
    }
}
