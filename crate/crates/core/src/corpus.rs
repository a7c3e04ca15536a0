//! Embedding collections, relevance judgments, on-disk formats and synthetic
//! data generation.
//!
//! # Native vector file (`.dvec`)
//!
//! All fields little-endian:
//!
//! ```text
//! magic:   b"DVEC"        (4 bytes)
//! version: u32 = 1        (4 bytes)
//! count:   u64            (8 bytes)
//! dim:     u32            (4 bytes)
//! data:    count * dim * f32, row-major
//! ```
//!
//! The file carries no ids; rows are numbered 0..count on load. `fvecs`
//! import (repeated `(i32 dim, dim * f32)` records) is supported for
//! interoperability with common ANN benchmark dumps.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::io::Write;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

const DVEC_MAGIC: &[u8; 4] = b"DVEC";
const DVEC_VERSION: u32 = 1;
const DVEC_HEADER_LEN: u64 = 20;

/// On-disk layout accepted by [`load_vectors`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VectorFormat {
    Native,
    Fvecs,
}

/// An id-addressed, row-major matrix of f32 embeddings.
///
/// Immutable after construction; ids are unique and every value is finite.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorSet {
    ids: Vec<u64>,
    data: Vec<f32>,
    dim: usize,
    id_to_row: HashMap<u64, usize>,
}

impl VectorSet {
    pub fn new(ids: Vec<u64>, data: Vec<f32>, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidArg("vector dim must be positive".into()));
        }
        if data.len() != ids.len() * dim {
            return Err(Error::InvalidArg(format!(
                "data length {} != count {} * dim {}",
                data.len(),
                ids.len(),
                dim
            )));
        }
        if let Some(bad) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidArg(format!(
                "non-finite value at flat index {bad}"
            )));
        }
        let mut id_to_row = HashMap::with_capacity(ids.len());
        for (row, &id) in ids.iter().enumerate() {
            if id_to_row.insert(id, row).is_some() {
                return Err(Error::InvalidArg(format!("duplicate id {id}")));
            }
        }
        Ok(Self {
            ids,
            data,
            dim,
            id_to_row,
        })
    }

    /// Rows with dense 0-based ids.
    pub fn from_rows(data: Vec<f32>, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidArg("vector dim must be positive".into()));
        }
        let count = data.len() / dim;
        Self::new((0..count as u64).collect(), data, dim)
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn ids(&self) -> &[u64] {
        &self.ids
    }

    pub fn id_at(&self, row: usize) -> u64 {
        self.ids[row]
    }

    pub fn row(&self, row: usize) -> &[f32] {
        &self.data[row * self.dim..(row + 1) * self.dim]
    }

    pub fn row_of_id(&self, id: u64) -> Option<usize> {
        self.id_to_row.get(&id).copied()
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    /// True when ids are exactly 0..count, the only layout the native file
    /// format can represent.
    pub fn has_dense_ids(&self) -> bool {
        self.ids.iter().enumerate().all(|(i, &id)| id == i as u64)
    }
}

/// Graded relevance judgments, query id -> (doc id -> grade >= 1).
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Qrels {
    by_query: BTreeMap<u64, BTreeMap<u64, u32>>,
}

impl Qrels {
    pub fn new() -> Self {
        Self::default()
    }

    /// Grade 0 entries are dropped rather than stored.
    pub fn insert(&mut self, query_id: u64, doc_id: u64, grade: u32) {
        if grade >= 1 {
            self.by_query.entry(query_id).or_default().insert(doc_id, grade);
        }
    }

    pub fn relevant(&self, query_id: u64) -> Option<&BTreeMap<u64, u32>> {
        self.by_query.get(&query_id)
    }

    pub fn num_queries(&self) -> usize {
        self.by_query.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&u64, &BTreeMap<u64, u32>)> {
        self.by_query.iter()
    }
}

/// Recipe for a deterministic planted-cluster corpus with matching queries
/// and judgments. Identical spec (including seed) yields bit-identical data.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SyntheticSpec {
    pub num_clusters_planted: usize,
    pub vectors_per_cluster: usize,
    pub dim: usize,
    pub intra_cluster_stddev: f32,
    pub num_queries: usize,
    pub seed: u64,
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if self.num_clusters_planted == 0
            || self.vectors_per_cluster == 0
            || self.dim == 0
            || self.num_queries == 0
        {
            return Err(Error::InvalidArg(
                "synthetic spec counts and dim must be positive".into(),
            ));
        }
        if !(self.intra_cluster_stddev > 0.0) && self.intra_cluster_stddev != 0.0 {
            return Err(Error::InvalidArg(
                "intra_cluster_stddev must be a non-negative finite number".into(),
            ));
        }
        Ok(())
    }
}

/// Queries are source corpus vectors perturbed with this fraction of the
/// intra-cluster noise, so ground truth stays constructible without an
/// encoder.
pub const QUERY_PERTURBATION_FACTOR: f32 = 0.1;

/// Generate planted Gaussian blobs plus perturbed-copy queries.
///
/// Corpus ids are cluster-major: vector `j` of planted cluster `c` gets id
/// `c * vectors_per_cluster + j`, so the planted label of doc `d` is
/// `d / vectors_per_cluster`. Each query perturbs one uniformly drawn corpus
/// vector; the qrels mark that source vector relevant with grade 1.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<(VectorSet, VectorSet, Qrels)> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let dim = spec.dim;

    let mut centers = vec![0.0f32; spec.num_clusters_planted * dim];
    for c in 0..spec.num_clusters_planted {
        let row = &mut centers[c * dim..(c + 1) * dim];
        loop {
            let mut norm_sq = 0.0f64;
            for v in row.iter_mut() {
                let x: f64 = StandardNormal.sample(&mut rng);
                *v = x as f32;
                norm_sq += x * x;
            }
            if norm_sq > 1e-12 {
                let inv = (1.0 / norm_sq.sqrt()) as f32;
                for v in row.iter_mut() {
                    *v *= inv;
                }
                break;
            }
        }
    }

    let count = spec.num_clusters_planted * spec.vectors_per_cluster;
    let mut corpus_data = vec![0.0f32; count * dim];
    let noise = spec.intra_cluster_stddev;
    for c in 0..spec.num_clusters_planted {
        let center = centers[c * dim..(c + 1) * dim].to_vec();
        for j in 0..spec.vectors_per_cluster {
            let row_idx = c * spec.vectors_per_cluster + j;
            let row = &mut corpus_data[row_idx * dim..(row_idx + 1) * dim];
            for (v, &cv) in row.iter_mut().zip(center.iter()) {
                let x: f64 = StandardNormal.sample(&mut rng);
                *v = cv + noise * x as f32;
            }
        }
    }
    let corpus = VectorSet::from_rows(corpus_data, dim)?;

    let perturb = QUERY_PERTURBATION_FACTOR * noise;
    let mut query_data = vec![0.0f32; spec.num_queries * dim];
    let mut qrels = Qrels::new();
    for q in 0..spec.num_queries {
        let source = rng.gen_range(0..count);
        let src_row = corpus.row(source).to_vec();
        let row = &mut query_data[q * dim..(q + 1) * dim];
        for (v, &sv) in row.iter_mut().zip(src_row.iter()) {
            let x: f64 = StandardNormal.sample(&mut rng);
            *v = sv + perturb * x as f32;
        }
        qrels.insert(q as u64, source as u64, 1);
    }
    let queries = VectorSet::from_rows(query_data, dim)?;

    Ok((corpus, queries, qrels))
}

/// Read a vector file. Rows are numbered 0..count in file order.
pub fn load_vectors(path: &Path, format: VectorFormat) -> Result<VectorSet> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    match format {
        VectorFormat::Native => parse_native(path, &bytes),
        VectorFormat::Fvecs => parse_fvecs(path, &bytes),
    }
}

/// Write the native format. The file stores no ids, so only sets with dense
/// 0-based ids round-trip as the identity.
pub fn save_vectors(vs: &VectorSet, path: &Path) -> Result<()> {
    if !vs.has_dense_ids() {
        return Err(Error::InvalidArg(
            "native vector file stores no ids; set must have dense 0-based ids".into(),
        ));
    }
    let mut out = Vec::with_capacity(DVEC_HEADER_LEN as usize + vs.data.len() * 4);
    out.extend_from_slice(DVEC_MAGIC);
    out.extend_from_slice(&DVEC_VERSION.to_le_bytes());
    out.extend_from_slice(&(vs.len() as u64).to_le_bytes());
    out.extend_from_slice(&(vs.dim as u32).to_le_bytes());
    for v in &vs.data {
        out.extend_from_slice(&v.to_le_bytes());
    }
    write_atomic(path, &out)
}

fn parse_native(path: &Path, bytes: &[u8]) -> Result<VectorSet> {
    if bytes.len() < DVEC_HEADER_LEN as usize {
        return Err(Error::format(
            path,
            bytes.len() as u64,
            "truncated header (need 20 bytes)",
        ));
    }
    if &bytes[0..4] != DVEC_MAGIC {
        return Err(Error::format(path, 0, "bad magic, expected \"DVEC\""));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    if version != DVEC_VERSION {
        return Err(Error::format(
            path,
            4,
            format!("unsupported version {version}"),
        ));
    }
    let count = u64::from_le_bytes(bytes[8..16].try_into().unwrap());
    let dim = u32::from_le_bytes(bytes[16..20].try_into().unwrap()) as usize;
    if dim == 0 {
        return Err(Error::format(path, 16, "dim must be positive"));
    }
    let expected = count
        .checked_mul(dim as u64)
        .and_then(|n| n.checked_mul(4))
        .and_then(|n| n.checked_add(DVEC_HEADER_LEN))
        .ok_or_else(|| Error::format(path, 8, "count * dim overflows"))?;
    if bytes.len() as u64 != expected {
        return Err(Error::format(
            path,
            DVEC_HEADER_LEN,
            format!("payload is {} bytes, header implies {}", bytes.len() as u64 - DVEC_HEADER_LEN, expected - DVEC_HEADER_LEN),
        ));
    }
    let n_values = (count as usize) * dim;
    let mut data = Vec::with_capacity(n_values);
    for i in 0..n_values {
        let off = DVEC_HEADER_LEN as usize + i * 4;
        let v = f32::from_le_bytes(bytes[off..off + 4].try_into().unwrap());
        if !v.is_finite() {
            return Err(Error::format(path, off as u64, "non-finite value"));
        }
        data.push(v);
    }
    VectorSet::from_rows(data, dim)
}

fn parse_fvecs(path: &Path, bytes: &[u8]) -> Result<VectorSet> {
    let mut data = Vec::new();
    let mut dim: Option<usize> = None;
    let mut off = 0usize;
    while off < bytes.len() {
        if off + 4 > bytes.len() {
            return Err(Error::format(path, off as u64, "truncated record header"));
        }
        let d = i32::from_le_bytes(bytes[off..off + 4].try_into().unwrap());
        if d <= 0 {
            return Err(Error::format(
                path,
                off as u64,
                format!("record dim {d} must be positive"),
            ));
        }
        let d = d as usize;
        match dim {
            None => dim = Some(d),
            Some(first) if first != d => {
                return Err(Error::format(
                    path,
                    off as u64,
                    format!("record dim {d} differs from first record dim {first}"),
                ));
            }
            _ => {}
        }
        let body = off + 4;
        let end = body + d * 4;
        if end > bytes.len() {
            return Err(Error::format(path, body as u64, "truncated record body"));
        }
        for i in 0..d {
            let voff = body + i * 4;
            let v = f32::from_le_bytes(bytes[voff..voff + 4].try_into().unwrap());
            if !v.is_finite() {
                return Err(Error::format(path, voff as u64, "non-finite value"));
            }
            data.push(v);
        }
        off = end;
    }
    let dim = dim.ok_or_else(|| Error::format(path, 0, "empty fvecs file"))?;
    VectorSet::from_rows(data, dim)
}

/// Read TREC qrels (`qid 0 docid grade`, whitespace separated). Grade 0
/// lines are dropped.
pub fn load_qrels(path: &Path) -> Result<Qrels> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut qrels = Qrels::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 4 {
            return Err(Error::parse(
                path,
                lineno + 1,
                format!("expected 4 fields, got {}", fields.len()),
            ));
        }
        let qid: u64 = fields[0]
            .parse()
            .map_err(|_| Error::parse(path, lineno + 1, "bad query id"))?;
        let docid: u64 = fields[2]
            .parse()
            .map_err(|_| Error::parse(path, lineno + 1, "bad doc id"))?;
        let grade: i64 = fields[3]
            .parse()
            .map_err(|_| Error::parse(path, lineno + 1, "bad grade"))?;
        if grade >= 1 {
            qrels.insert(qid, docid, grade as u32);
        }
    }
    Ok(qrels)
}

pub fn save_qrels(qrels: &Qrels, path: &Path) -> Result<()> {
    let mut out = Vec::new();
    for (qid, docs) in qrels.iter() {
        for (docid, grade) in docs {
            writeln!(out, "{qid}\t0\t{docid}\t{grade}").expect("write to vec");
        }
    }
    write_atomic(path, &out)
}

pub(crate) fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}
