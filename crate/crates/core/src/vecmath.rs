//! Scalar similarity kernels shared by index build, probing and the
//! brute-force scan.
//!
//! `dot` and `squared_l2` accumulate strictly left-to-right so that every
//! code path scoring the same (query, document) pair produces the same f32
//! bits. Throughput-oriented callers may block over *rows*, never inside a
//! single reduction.

/// Plain sequential inner product.
#[inline]
pub fn dot(a: &[f32], b: &[f32]) -> f32 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = 0.0f32;
    for (x, y) in a.iter().zip(b.iter()) {
        acc += x * y;
    }
    acc
}

/// Plain sequential squared Euclidean distance.
#[inline]
pub fn squared_l2(a: &[f32], b: &[f32]) -> f32 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = 0.0f32;
    for (x, y) in a.iter().zip(b.iter()) {
        let d = x - y;
        acc += d * d;
    }
    acc
}

/// Ordering key for (score, id) pairs: higher score first, then smaller id.
/// Scores must be finite.
#[inline]
pub fn score_then_id(a: &(u64, f32), b: &(u64, f32)) -> std::cmp::Ordering {
    b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0))
}
