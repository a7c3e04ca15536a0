// temporary calibration probe for the desk-scale default experiment
use adaknn::corpus::{generate_synthetic, SyntheticSpec};
use adaknn::ivf::{IvfIndex, KMeansConfig, Metric};
use adaknn::oracle::label_queries;
use std::sync::Arc;
use std::time::Instant;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let stddev: f32 = args.get(1).map(|s| s.parse().unwrap()).unwrap_or(0.5);
    let clusters: usize = args.get(2).map(|s| s.parse().unwrap()).unwrap_or(100);
    let per: usize = args.get(3).map(|s| s.parse().unwrap()).unwrap_or(1000);
    let k_idx: usize = args.get(4).map(|s| s.parse().unwrap()).unwrap_or(1024);

    let spec = SyntheticSpec {
        num_clusters_planted: clusters,
        vectors_per_cluster: per,
        dim: 64,
        intra_cluster_stddev: stddev,
        num_queries: 500,
        seed: 1,
    };
    let t0 = Instant::now();
    let (corpus, queries, qrels) = generate_synthetic(&spec).unwrap();
    println!("gen: {:?}", t0.elapsed());

    let corpus = Arc::new(corpus);
    let t1 = Instant::now();
    let idx = IvfIndex::build(
        corpus.clone(),
        k_idx,
        Metric::InnerProduct,
        &KMeansConfig { max_iters: 25, seed: 42 },
    )
    .unwrap();
    println!("build K={k_idx}: {:?}", t1.elapsed());

    let t2 = Instant::now();
    let labels = label_queries(&idx, &queries, k_idx, 100).unwrap();
    println!("label: {:?}", t2.elapsed());

    let mut cs: Vec<usize> = labels.rows().iter().map(|l| l.c).collect();
    cs.sort_unstable();
    let q = |p: f64| cs[(p * (cs.len() - 1) as f64).round() as usize];
    let cdf = |n: usize| cs.iter().filter(|&&c| c <= n).count() as f64 / cs.len() as f64;
    println!(
        "stddev={stddev}: CDF(1)={:.3} CDF(10)={:.3} CDF(50)={:.3} p50={} p80={} p90={} p95={} p99={} max={}",
        cdf(1), cdf(10), cdf(50), q(0.5), q(0.8), q(0.9), q(0.95), q(0.99), cs[cs.len() - 1]
    );

    let mut src_hits = 0;
    for l in labels.rows() {
        if qrels.relevant(l.query_id).map(|r| r.contains_key(&l.d_star)).unwrap_or(false) {
            src_hits += 1;
        }
    }
    println!("d* == source: {}/{}", src_hits, labels.len());
}
