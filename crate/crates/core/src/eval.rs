//! Effectiveness and efficiency measurement: recall against the exact
//! top-k (`R*@k`), recall and mRR against human judgments, probe counts,
//! minimal-budget tuning, paired significance tests with Bonferroni
//! correction, the timing protocol and the intersection-curve export.

use std::path::Path;
use std::time::Instant;

use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::corpus::Qrels;
use crate::error::{Error, Result};
use crate::oracle::GoldenLabels;
use crate::trace::SearchTrace;

/// One query's ranked retrieval output: (query id, ranking).
pub type QueryRanking = (u64, Vec<(u64, f32)>);

/// Recall of the approximate result against the exact top-`cutoff`.
/// At cutoff 1 this is the indicator that the top doc equals `d*`.
pub fn r_star_at_k(results: &[QueryRanking], golden: &GoldenLabels, cutoff: usize) -> Result<f64> {
    if results.is_empty() {
        return Err(Error::InvalidArg("no results to evaluate".into()));
    }
    if cutoff == 0 {
        return Err(Error::InvalidArg("cutoff must be positive".into()));
    }
    let mut total = 0.0f64;
    for (qid, ranking) in results {
        let label = golden
            .get(*qid)
            .ok_or_else(|| Error::InvalidArg(format!("query {qid} missing from golden labels")))?;
        if cutoff == 1 {
            let hit = ranking.first().map(|&(id, _)| id) == Some(label.d_star);
            total += if hit { 1.0 } else { 0.0 };
        } else {
            if label.exact_topk.len() < cutoff {
                return Err(Error::InvalidArg(format!(
                    "golden labels store top-{} but cutoff is {cutoff}",
                    label.exact_topk.len()
                )));
            }
            let exact: std::collections::HashSet<u64> = label.exact_topk[..cutoff]
                .iter()
                .map(|&(id, _)| id)
                .collect();
            let hits = ranking
                .iter()
                .take(cutoff)
                .filter(|&&(id, _)| exact.contains(&id))
                .count();
            total += hits as f64 / cutoff as f64;
        }
    }
    Ok(total / results.len() as f64)
}

/// Metric over judged queries plus the count of unjudged ones that were
/// excluded.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JudgedMetric {
    pub value: f64,
    pub judged: usize,
    pub unjudged: usize,
}

/// Mean over judged queries of |top-k ∩ relevant| / |relevant|.
pub fn recall_at_k(results: &[QueryRanking], qrels: &Qrels, k: usize) -> Result<JudgedMetric> {
    let mut total = 0.0f64;
    let mut judged = 0usize;
    let mut unjudged = 0usize;
    for (qid, ranking) in results {
        let Some(relevant) = qrels.relevant(*qid) else {
            unjudged += 1;
            continue;
        };
        judged += 1;
        let hits = ranking
            .iter()
            .take(k)
            .filter(|&&(id, _)| relevant.contains_key(&id))
            .count();
        total += hits as f64 / relevant.len() as f64;
    }
    if judged == 0 {
        return Err(Error::InvalidArg("no judged queries in results".into()));
    }
    Ok(JudgedMetric {
        value: total / judged as f64,
        judged,
        unjudged,
    })
}

/// Reciprocal rank of the first relevant doc within the top 10, else 0,
/// per judged query.
pub fn rr_at_10_per_query(results: &[QueryRanking], qrels: &Qrels) -> Vec<(u64, f64)> {
    let mut out = Vec::new();
    for (qid, ranking) in results {
        let Some(relevant) = qrels.relevant(*qid) else {
            continue;
        };
        let rr = ranking
            .iter()
            .take(10)
            .position(|&(id, _)| relevant.contains_key(&id))
            .map(|pos| 1.0 / (pos + 1) as f64)
            .unwrap_or(0.0);
        out.push((*qid, rr));
    }
    out
}

pub fn mrr_at_10(results: &[QueryRanking], qrels: &Qrels) -> Result<JudgedMetric> {
    let per_query = rr_at_10_per_query(results, qrels);
    if per_query.is_empty() {
        return Err(Error::InvalidArg("no judged queries in results".into()));
    }
    let judged = per_query.len();
    let value = per_query.iter().map(|&(_, rr)| rr).sum::<f64>() / judged as f64;
    Ok(JudgedMetric {
        value,
        judged,
        unjudged: results.len() - judged,
    })
}

/// Smallest probe budget whose fixed-N `R*@1` reaches `rho`.
///
/// Valid because `R*@1(fixed-N)` equals the fraction of queries with
/// `C(q) <= N`, which is non-decreasing in N; binary search finds the
/// boundary and the result is double-checked against `N-1`.
pub fn tune_min_n(golden: &GoldenLabels, rho: f64) -> Result<usize> {
    if golden.is_empty() {
        return Err(Error::InvalidArg("no golden labels".into()));
    }
    if !(0.0..=1.0).contains(&rho) {
        return Err(Error::InvalidArg(format!("rho {rho} must lie in [0, 1]")));
    }
    let max_n = golden.n_budget;
    if golden.cdf_at(max_n) < rho {
        return Err(Error::Unreachable(format!(
            "R*@1 reaches only {:.4} at the label budget {max_n}, below rho {rho}",
            golden.cdf_at(max_n)
        )));
    }
    let (mut lo, mut hi) = (1usize, max_n);
    while lo < hi {
        let mid = lo + (hi - lo) / 2;
        if golden.cdf_at(mid) >= rho {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    debug_assert!(golden.cdf_at(lo) >= rho);
    debug_assert!(lo == 1 || golden.cdf_at(lo - 1) < rho);
    Ok(lo)
}

/// Two-sided paired t-test with Bonferroni-adjusted p-value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TTestResult {
    pub t: f64,
    pub p: f64,
    pub p_adjusted: f64,
}

/// Conventions: identical samples give (t = 0, p = 1); zero variance with
/// a nonzero mean difference gives p = 0.
pub fn paired_ttest_bonferroni(a: &[f64], b: &[f64], num_comparisons: usize) -> Result<TTestResult> {
    if a.len() != b.len() {
        return Err(Error::InvalidArg(format!(
            "paired samples differ in length: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    let n = a.len();
    if n < 2 {
        return Err(Error::InvalidArg("need at least 2 pairs".into()));
    }
    if num_comparisons == 0 {
        return Err(Error::InvalidArg("num_comparisons must be positive".into()));
    }
    let diffs: Vec<f64> = a.iter().zip(b).map(|(&x, &y)| x - y).collect();
    let mean = diffs.iter().sum::<f64>() / n as f64;
    let var = diffs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0);

    let (t, p) = if var == 0.0 {
        if mean == 0.0 {
            (0.0, 1.0)
        } else {
            (if mean > 0.0 { f64::INFINITY } else { f64::NEG_INFINITY }, 0.0)
        }
    } else {
        let t = mean / (var.sqrt() / (n as f64).sqrt());
        let dist = StudentsT::new(0.0, 1.0, (n - 1) as f64)
            .map_err(|e| Error::InvalidArg(format!("t distribution: {e}")))?;
        let p = 2.0 * (1.0 - dist.cdf(t.abs()));
        (t, p)
    };
    Ok(TTestResult {
        t,
        p,
        p_adjusted: (p * num_comparisons as f64).min(1.0),
    })
}

/// Table-caption marker rule: `**` below 0.01, `*` below 0.05.
pub fn significance_marker(p_adjusted: f64) -> &'static str {
    if p_adjusted < 0.01 {
        "**"
    } else if p_adjusted < 0.05 {
        "*"
    } else {
        ""
    }
}

/// Raw per-repetition times and the protocol mean: the first run is a
/// warm-up and is discarded, the rest are averaged.
#[derive(Debug, Clone, PartialEq)]
pub struct TimingResult {
    pub raw_ms: Vec<f64>,
    pub mean_ms: f64,
}

/// Run a closure that measures itself (returns milliseconds). Split out so
/// tests can inject stub timers.
pub fn timing_harness_measured<F: FnMut() -> f64>(
    mut run: F,
    repetitions: usize,
) -> Result<TimingResult> {
    if repetitions < 2 {
        return Err(Error::InvalidArg(
            "need at least 2 repetitions: the first is discarded".into(),
        ));
    }
    let mut raw_ms = Vec::with_capacity(repetitions);
    for rep in 0..repetitions {
        let ms = run();
        log::debug!("timing repetition {}/{repetitions}: {ms:.3} ms", rep + 1);
        raw_ms.push(ms);
    }
    let mean_ms = raw_ms[1..].iter().sum::<f64>() / (repetitions - 1) as f64;
    Ok(TimingResult { raw_ms, mean_ms })
}

/// Execute `run` `repetitions` times under a wall clock, discard the
/// initial run, return the mean of the rest.
pub fn timing_harness<F: FnMut()>(mut run: F, repetitions: usize) -> Result<TimingResult> {
    timing_harness_measured(
        || {
            let t0 = Instant::now();
            run();
            t0.elapsed().as_secs_f64() * 1e3
        },
        repetitions,
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CurveGroup {
    All,
    Exit,
    Continue,
}

impl std::fmt::Display for CurveGroup {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            CurveGroup::All => "all",
            CurveGroup::Exit => "exit",
            CurveGroup::Continue => "continue",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurveRow {
    pub depth: usize,
    pub group: CurveGroup,
    pub mean: f64,
    pub p5: f64,
    pub p95: f64,
}

#[derive(Debug, Clone, Default)]
pub struct CurveTable {
    pub rows: Vec<CurveRow>,
    pub notes: Vec<String>,
}

/// Linear-interpolation percentile over a sorted slice.
fn percentile(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let rank = p / 100.0 * (n - 1) as f64;
    let lo = rank.floor() as usize;
    let hi = rank.ceil() as usize;
    let frac = rank - lo as f64;
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

/// Mean and 5th/95th percentile of `phi_h` per probing depth, for all
/// queries and for the Exit/Continue split at `tau`. Empty groups are
/// omitted with a note.
pub fn intersection_curves(
    traces: &[SearchTrace],
    labels: &GoldenLabels,
    tau: usize,
) -> Result<CurveTable> {
    if traces.is_empty() {
        return Err(Error::InvalidArg("no traces".into()));
    }
    let depth = traces.iter().map(|t| t.depth()).min().unwrap();
    if depth < 2 {
        return Err(Error::InvalidArg("traces must be at least 2 probes deep".into()));
    }
    let is_exit = |t: &SearchTrace| -> Result<bool> {
        let label = labels.get(t.query_id()).ok_or_else(|| {
            Error::InvalidArg(format!("query {} missing from golden labels", t.query_id()))
        })?;
        Ok(label.c <= tau)
    };
    let mut groups: Vec<(CurveGroup, Vec<&SearchTrace>)> = vec![
        (CurveGroup::All, traces.iter().collect()),
        (CurveGroup::Exit, Vec::new()),
        (CurveGroup::Continue, Vec::new()),
    ];
    for t in traces {
        if is_exit(t)? {
            groups[1].1.push(t);
        } else {
            groups[2].1.push(t);
        }
    }

    let mut table = CurveTable::default();
    for (group, members) in groups {
        if members.is_empty() {
            table.notes.push(format!("group {group} is empty at tau = {tau}; omitted"));
            continue;
        }
        for h in 2..=depth {
            let mut values: Vec<f64> = members
                .iter()
                .map(|t| t.phi_at(h).expect("depth bounded by the shallowest trace") as f64)
                .collect();
            values.sort_by(|a, b| a.total_cmp(b));
            let mean = values.iter().sum::<f64>() / values.len() as f64;
            table.rows.push(CurveRow {
                depth: h,
                group,
                mean,
                p5: percentile(&values, 5.0),
                p95: percentile(&values, 95.0),
            });
        }
    }
    Ok(table)
}

pub fn save_curves_csv(table: &CurveTable, path: &Path) -> Result<()> {
    use std::io::Write;
    let mut out = Vec::new();
    writeln!(out, "depth,group,mean,p5,p95").expect("write to vec");
    for row in &table.rows {
        writeln!(
            out,
            "{},{},{},{},{}",
            row.depth, row.group, row.mean, row.p5, row.p95
        )
        .expect("write to vec");
    }
    for note in &table.notes {
        writeln!(out, "# {note}").expect("write to vec");
    }
    crate::corpus::write_atomic(path, &out)
}

/// One strategy's evaluation row, mirroring the results-table columns.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub strategy: String,
    pub r_star_at_1: f64,
    pub recall_at_k: f64,
    pub mrr_at_10: f64,
    /// Mean probes per query (the C-hat column).
    pub mean_probes: f64,
    /// Wall-clock per-query mean; absent in untimed runs.
    pub mean_time_ms: Option<f64>,
    /// Wall-clock speedup versus the baseline; absent in untimed runs.
    pub speedup_time: Option<f64>,
    /// Machine-independent speedup: baseline mean probes / mean probes.
    pub speedup_probes: f64,
    pub judged: usize,
    pub unjudged: usize,
    /// Bonferroni-adjusted significance of the mRR@10 delta vs baseline.
    pub p_adjusted: Option<f64>,
}

impl EvalReport {
    pub fn tsv_header() -> &'static str {
        "strategy\tr_star_at_1\tr_at_k\tmrr_at_10\ttime_ms\tmean_probes\tspeedup\tspeedup_probes"
    }

    /// Table-shaped row; the significance marker rides on the mRR column.
    pub fn to_tsv_row(&self) -> String {
        let marker = self.p_adjusted.map(significance_marker).unwrap_or("");
        let time = self
            .mean_time_ms
            .map(|t| format!("{t:.3}"))
            .unwrap_or_else(|| "NA".into());
        let sp = self
            .speedup_time
            .map(|s| format!("{s:.2}"))
            .unwrap_or_else(|| "NA".into());
        format!(
            "{}\t{:.3}\t{:.3}\t{:.3}{}\t{}\t{:.1}\t{}\t{:.2}",
            self.strategy,
            self.r_star_at_1,
            self.recall_at_k,
            self.mrr_at_10,
            marker,
            time,
            self.mean_probes,
            sp,
            self.speedup_probes,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::QueryLabel;

    fn golden(cs: &[usize], budget: usize) -> GoldenLabels {
        let rows: Vec<QueryLabel> = cs
            .iter()
            .enumerate()
            .map(|(i, &c)| QueryLabel {
                query_id: i as u64,
                d_star: 1000 + i as u64,
                c,
                exact_topk: vec![(1000 + i as u64, 1.0), (5000 + i as u64, 0.5)],
            })
            .collect();
        GoldenLabels::from_rows(budget, 2, rows).unwrap()
    }

    #[test]
    fn r_star_at_1_counts_exact_matches() {
        let g = golden(&[1, 1], 4);
        let results: Vec<QueryRanking> = vec![
            (0, vec![(1000, 0.9), (7, 0.1)]), // hit
            (1, vec![(8, 0.9), (1001, 0.8)]), // miss at cutoff 1
        ];
        assert_eq!(r_star_at_k(&results, &g, 1).unwrap(), 0.5);
        // at cutoff 2 query 1 recovers one of two exact docs
        let v = r_star_at_k(&results, &g, 2).unwrap();
        assert!((v - 0.5).abs() < 1e-12); // (0.5 + 0.5) / 2
    }

    #[test]
    fn r_star_missing_golden_entry_errors() {
        let g = golden(&[1], 4);
        let results: Vec<QueryRanking> = vec![(9, vec![(1, 1.0)])];
        assert!(r_star_at_k(&results, &g, 1).is_err());
    }

    #[test]
    fn recall_and_mrr_match_hand_computation() {
        // 3-query toy fixture, worked by hand:
        //   q0: relevant {10, 11}; retrieved 10 at rank 1 -> R = 1/2, RR = 1
        //   q1: relevant {20};     retrieved 20 at rank 3 -> R = 1,   RR = 1/3
        //   q2: relevant {30};     not retrieved          -> R = 0,   RR = 0
        let mut qrels = Qrels::new();
        qrels.insert(0, 10, 1);
        qrels.insert(0, 11, 1);
        qrels.insert(1, 20, 2);
        qrels.insert(2, 30, 1);
        let results: Vec<QueryRanking> = vec![
            (0, vec![(10, 0.9), (1, 0.8), (2, 0.7)]),
            (1, vec![(5, 0.9), (6, 0.8), (20, 0.7)]),
            (2, vec![(7, 0.9), (8, 0.8)]),
        ];
        let recall = recall_at_k(&results, &qrels, 100).unwrap();
        assert!((recall.value - 0.5).abs() < 1e-12); // (0.5 + 1 + 0) / 3
        assert_eq!(recall.judged, 3);

        let mrr = mrr_at_10(&results, &qrels).unwrap();
        assert!((mrr.value - (1.0 + 1.0 / 3.0) / 3.0).abs() < 1e-12);
    }

    #[test]
    fn mrr_cutoff_rules() {
        let mut qrels = Qrels::new();
        qrels.insert(0, 5, 1);
        // first relevant at rank 11 scores zero
        let ranking: Vec<(u64, f32)> = (0..11).map(|i| (100 + i, 1.0 - i as f32 * 0.01)).collect();
        let mut with_late = ranking.clone();
        with_late.push((5, 0.0));
        let results: Vec<QueryRanking> = vec![(0, with_late)];
        assert_eq!(mrr_at_10(&results, &qrels).unwrap().value, 0.0);

        // first relevant at rank 3 scores 1/3
        let results: Vec<QueryRanking> = vec![(0, vec![(1, 0.9), (2, 0.8), (5, 0.7)])];
        assert!((mrr_at_10(&results, &qrels).unwrap().value - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn unjudged_queries_are_excluded_and_counted() {
        let mut qrels = Qrels::new();
        qrels.insert(0, 10, 1);
        let results: Vec<QueryRanking> = vec![(0, vec![(10, 1.0)]), (42, vec![(10, 1.0)])];
        let recall = recall_at_k(&results, &qrels, 10).unwrap();
        assert_eq!(recall.value, 1.0);
        assert_eq!(recall.judged, 1);
        assert_eq!(recall.unjudged, 1);
    }

    #[test]
    fn tuner_finds_the_minimal_budget() {
        // C values: CDF(1) = .4, CDF(2) = .7, CDF(3) = .9, CDF(5) = 1.0
        let g = golden(&[1, 1, 1, 1, 2, 2, 2, 3, 3, 5], 5);
        assert_eq!(tune_min_n(&g, 0.0).unwrap(), 1);
        assert_eq!(tune_min_n(&g, 0.7).unwrap(), 2);
        assert_eq!(tune_min_n(&g, 0.71).unwrap(), 3);
        assert_eq!(tune_min_n(&g, 0.95).unwrap(), 5);
        // rho = 1 requires the max C
        assert_eq!(tune_min_n(&g, 1.0).unwrap(), 5);
    }

    #[test]
    fn tuner_reports_unreachable_targets() {
        // budget-clamped labels: CDF never reaches 1 below the budget, and
        // labels computed with a budget of 3 cap the achievable R*@1 there
        let g = golden(&[1, 3, 3, 3], 3);
        // all mass is within the budget so rho = 1 is fine here
        assert_eq!(tune_min_n(&g, 1.0).unwrap(), 3);
        assert!(matches!(tune_min_n(&g, 1.1), Err(Error::InvalidArg(_))));
    }

    #[test]
    fn ttest_matches_independent_reference() {
        // frozen oracle values computed with an independent statistical
        // package (scipy.stats.ttest_rel)
        let a = [0.91, 0.84, 0.77, 0.95, 0.62, 0.88, 0.79, 0.85, 0.90, 0.73];
        let b = [0.89, 0.80, 0.79, 0.90, 0.60, 0.86, 0.75, 0.86, 0.84, 0.70];
        let r = paired_ttest_bonferroni(&a, &b, 1).unwrap();
        assert!((r.t - 3.155273714337534).abs() < 1e-9, "t = {}", r.t);
        assert!((r.p - 1.163836846642050e-2).abs() < 1e-9, "p = {}", r.p);
        let r5 = paired_ttest_bonferroni(&a, &b, 5).unwrap();
        assert!((r5.p_adjusted - 5.819184233210251e-2).abs() < 1e-9);

        let a2 = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0, 10.0];
        let b2 = [1.1, 1.8, 3.3, 3.9, 5.2, 5.8, 7.1, 8.2, 8.7, 10.1];
        let r2 = paired_ttest_bonferroni(&a2, &b2, 1).unwrap();
        assert!((r2.t - -0.309426373877635).abs() < 1e-9);
        assert!((r2.p - 7.640411601083026e-1).abs() < 1e-9);
    }

    #[test]
    fn ttest_edge_conventions() {
        let a = [1.0, 2.0, 3.0];
        let r = paired_ttest_bonferroni(&a, &a, 3).unwrap();
        assert_eq!(r.t, 0.0);
        assert_eq!(r.p_adjusted, 1.0);

        // constant nonzero difference: zero variance, p = 0
        let b = [2.0, 3.0, 4.0];
        let r = paired_ttest_bonferroni(&b, &a, 3).unwrap();
        assert!(r.t.is_infinite() && r.t > 0.0);
        assert_eq!(r.p_adjusted, 0.0);
    }

    #[test]
    fn ttest_large_consistent_shift_is_significant() {
        let a: Vec<f64> = (0..100).map(|i| 1.0 + (i as f64 * 0.7).sin() * 0.01).collect();
        let b = vec![0.0f64; 100];
        let r = paired_ttest_bonferroni(&a, &b, 8).unwrap();
        assert!(r.p_adjusted < 0.01);
        assert_eq!(significance_marker(r.p_adjusted), "**");
    }

    #[test]
    fn marker_thresholds_follow_caption_rule() {
        assert_eq!(significance_marker(0.009), "**");
        assert_eq!(significance_marker(0.01), "*");
        assert_eq!(significance_marker(0.049), "*");
        assert_eq!(significance_marker(0.05), "");
        assert_eq!(significance_marker(1.0), "");
    }

    #[test]
    fn timing_discards_first_and_averages_rest() {
        let script = [10.0, 2.0, 4.0, 6.0, 8.0, 0.0];
        let mut calls = 0usize;
        let r = timing_harness_measured(
            || {
                let v = script[calls];
                calls += 1;
                v
            },
            6,
        )
        .unwrap();
        assert_eq!(calls, 6, "must execute every repetition");
        assert_eq!(r.raw_ms.len(), 6);
        assert_eq!(r.mean_ms, (2.0 + 4.0 + 6.0 + 8.0 + 0.0) / 5.0);

        // repetitions = 2 averages the second run only
        let mut calls = 0usize;
        let r = timing_harness_measured(
            || {
                calls += 1;
                if calls == 1 {
                    100.0
                } else {
                    7.0
                }
            },
            2,
        )
        .unwrap();
        assert_eq!(r.mean_ms, 7.0);

        assert!(timing_harness_measured(|| 0.0, 1).is_err());
    }

    #[test]
    fn wall_clock_harness_measures_the_closure() {
        let r = timing_harness(
            || std::thread::sleep(std::time::Duration::from_millis(2)),
            3,
        )
        .unwrap();
        assert_eq!(r.raw_ms.len(), 3);
        assert!(r.mean_ms >= 1.5, "sleep stub should dominate: {}", r.mean_ms);
    }

    #[test]
    fn percentile_is_linear_interpolation() {
        let v = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(percentile(&v, 0.0), 1.0);
        assert_eq!(percentile(&v, 100.0), 4.0);
        assert!((percentile(&v, 50.0) - 2.5).abs() < 1e-12);
        assert!((percentile(&v, 5.0) - 1.15).abs() < 1e-12);
    }

    #[test]
    fn report_row_formats_marker_and_na() {
        let r = EvalReport {
            strategy: "patience".into(),
            r_star_at_1: 0.933,
            recall_at_k: 0.772,
            mrr_at_10: 0.291,
            mean_probes: 18.7,
            mean_time_ms: None,
            speedup_time: None,
            speedup_probes: 4.28,
            judged: 100,
            unjudged: 0,
            p_adjusted: Some(0.03),
        };
        let row = r.to_tsv_row();
        assert!(row.contains("0.291*\t"));
        assert!(row.contains("\tNA\t"));
        assert!(row.ends_with("4.28"));
    }
}
