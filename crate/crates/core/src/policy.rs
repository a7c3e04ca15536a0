//! Early-exit strategies: each one maps a query to a stopping depth while
//! probing, never altering the ranking itself.
//!
//! * fixed: always probe N clusters;
//! * patience: stop once the consecutive-intersection signal `phi_h` stays
//!   at or above a tolerance for a run of Delta probes;
//! * regression: probe tau clusters, predict the total probe count, resume
//!   to the clamped prediction;
//! * classifier: probe tau, exit there when P(Exit) clears the threshold,
//!   otherwise run to N;
//! * cascade: classifier at tau, then patience or regression for the
//!   queries it lets through.

use crate::error::{Error, Result};
use crate::features::{extract_features, FeatureLayout};
use crate::ivf::IvfIndex;
use crate::learn::TreeEnsemble;
use crate::trace::Prober;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExitReason {
    Fixed,
    Patience,
    Regression,
    ClassifierExit,
    CascadeSecondStage,
    BudgetExhausted,
}

impl std::fmt::Display for ExitReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            ExitReason::Fixed => "fixed",
            ExitReason::Patience => "patience",
            ExitReason::Regression => "regression",
            ExitReason::ClassifierExit => "classifier_exit",
            ExitReason::CascadeSecondStage => "cascade_second_stage",
            ExitReason::BudgetExhausted => "budget_exhausted",
        };
        f.write_str(s)
    }
}

/// Outcome of running one policy on one query.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyDecision {
    pub query_id: u64,
    /// Clusters actually probed, in [1, N].
    pub stop_depth: usize,
    pub exit_reason: ExitReason,
    /// `RS_{stop_depth}`: top-k over the probed prefix.
    pub result: Vec<(u64, f32)>,
}

/// Consecutive-run counter for the patience rule: fire once `phi >= Phi`
/// has held for `delta` probes in a row.
#[derive(Debug, Clone, Copy)]
struct PatienceCounter {
    delta: usize,
    phi: f32,
    run: usize,
}

impl PatienceCounter {
    fn new(delta: usize, phi: f32) -> Self {
        Self { delta, phi, run: 0 }
    }

    fn observe(&mut self, phi_h: f32) -> bool {
        if phi_h >= self.phi {
            self.run += 1;
        } else {
            self.run = 0;
        }
        self.run >= self.delta
    }
}

fn validate_patience(delta: usize, phi: f32) -> Result<()> {
    if delta < 1 {
        return Err(Error::InvalidArg("patience delta must be at least 1".into()));
    }
    if !(90.0..=100.0).contains(&phi) {
        return Err(Error::InvalidArg(format!(
            "patience tolerance {phi} must lie in [90, 100]"
        )));
    }
    Ok(())
}

fn validate_budget(index: &IvfIndex, n: usize) -> Result<()> {
    if n == 0 || n > index.num_clusters() {
        return Err(Error::InvalidArg(format!(
            "probe budget {n} must be in [1, {}]",
            index.num_clusters()
        )));
    }
    Ok(())
}

fn validate_tau(tau: usize, n: usize) -> Result<()> {
    if tau == 0 || tau >= n {
        return Err(Error::InvalidArg(format!("tau {tau} must satisfy 0 < tau < N = {n}")));
    }
    Ok(())
}

fn decision(prober: Prober<'_>, reason: ExitReason) -> PolicyDecision {
    let trace = prober.into_trace();
    PolicyDecision {
        query_id: trace.query_id(),
        stop_depth: trace.depth(),
        exit_reason: reason,
        result: trace.result().to_vec(),
    }
}

/// Probe exactly `n` clusters.
pub fn run_fixed(index: &IvfIndex, query_id: u64, q: &[f32], k: usize, n: usize) -> Result<PolicyDecision> {
    validate_budget(index, n)?;
    let mut prober = Prober::new(index, query_id, q, k, 0)?;
    while prober.depth() < n {
        prober.step();
    }
    Ok(decision(prober, ExitReason::Fixed))
}

/// Patience rule: stop at the earliest depth h such that `phi_j >= phi`
/// for all j in (h - delta, h] (phi is defined from h = 2). Runs to `n`
/// when the rule never fires.
pub fn run_patience(
    index: &IvfIndex,
    query_id: u64,
    q: &[f32],
    k: usize,
    delta: usize,
    phi: f32,
    n: usize,
) -> Result<PolicyDecision> {
    validate_patience(delta, phi)?;
    validate_budget(index, n)?;
    let mut prober = Prober::new(index, query_id, q, k, 0)?;
    let mut counter = PatienceCounter::new(delta, phi);
    while prober.depth() < n {
        let depth = prober.step().expect("budget validated against cluster count");
        if depth >= 2 {
            let phi_h = prober.trace().phi_at(depth).expect("phi recorded for depth >= 2");
            if counter.observe(phi_h) {
                return Ok(decision(prober, ExitReason::Patience));
            }
        }
    }
    Ok(decision(prober, ExitReason::BudgetExhausted))
}

/// Round half away from zero, then clamp the predicted probe count to
/// [tau, n]: tau probes are already spent and n is the hard budget.
fn clamp_prediction(pred: f32, tau: usize, n: usize) -> usize {
    let rounded = pred.round();
    if !rounded.is_finite() || rounded <= tau as f32 {
        return tau;
    }
    if rounded >= n as f32 {
        return n;
    }
    rounded as usize
}

/// Probe tau clusters, predict the total probe count with a regression
/// ensemble, resume to the clamped prediction.
pub fn run_regression(
    index: &IvfIndex,
    query_id: u64,
    q: &[f32],
    k: usize,
    model: &TreeEnsemble,
    layout: &FeatureLayout,
    tau: usize,
    n: usize,
) -> Result<PolicyDecision> {
    validate_budget(index, n)?;
    validate_tau(tau, n)?;
    let mut prober = Prober::new(index, query_id, q, k, tau)?;
    while prober.depth() < tau {
        prober.step();
    }
    let features = extract_features(prober.trace(), index, q, layout)?;
    let pred = model.predict(&features.values)?;
    let target = clamp_prediction(pred, tau, n);
    while prober.depth() < target {
        prober.step();
    }
    Ok(decision(prober, ExitReason::Regression))
}

/// Probe tau clusters, exit there when P(Exit) >= threshold, otherwise run
/// to the budget.
#[allow(clippy::too_many_arguments)]
pub fn run_classifier(
    index: &IvfIndex,
    query_id: u64,
    q: &[f32],
    k: usize,
    model: &TreeEnsemble,
    layout: &FeatureLayout,
    tau: usize,
    threshold: f32,
    n: usize,
) -> Result<PolicyDecision> {
    validate_budget(index, n)?;
    validate_tau(tau, n)?;
    let mut prober = Prober::new(index, query_id, q, k, tau)?;
    while prober.depth() < tau {
        prober.step();
    }
    let features = extract_features(prober.trace(), index, q, layout)?;
    let p_exit = model.predict(&features.values)?;
    if p_exit >= threshold {
        return Ok(decision(prober, ExitReason::ClassifierExit));
    }
    while prober.depth() < n {
        prober.step();
    }
    Ok(decision(prober, ExitReason::BudgetExhausted))
}

/// Second stage of a cascade.
pub enum SecondStage<'a> {
    Patience { delta: usize, phi: f32 },
    Regression { model: &'a TreeEnsemble, layout: &'a FeatureLayout },
}

/// Two-stage cascade: the classifier decides at tau; Continue queries are
/// handed to the second stage.
///
/// With a patience second stage the run counter starts empty at tau —
/// phi values at h <= tau do not count — unless `count_prefix_phi` seeds
/// it with the run observed up to tau.
#[allow(clippy::too_many_arguments)]
pub fn run_cascade(
    index: &IvfIndex,
    query_id: u64,
    q: &[f32],
    k: usize,
    classifier: &TreeEnsemble,
    classifier_layout: &FeatureLayout,
    second: SecondStage<'_>,
    tau: usize,
    threshold: f32,
    n: usize,
    count_prefix_phi: bool,
) -> Result<PolicyDecision> {
    validate_budget(index, n)?;
    validate_tau(tau, n)?;
    if let SecondStage::Patience { delta, phi } = second {
        validate_patience(delta, phi)?;
    }
    let mut prober = Prober::new(index, query_id, q, k, tau)?;
    while prober.depth() < tau {
        prober.step();
    }
    let features = extract_features(prober.trace(), index, q, classifier_layout)?;
    let p_exit = classifier.predict(&features.values)?;
    if p_exit >= threshold {
        return Ok(decision(prober, ExitReason::ClassifierExit));
    }

    match second {
        SecondStage::Regression { model, layout } => {
            let features = extract_features(prober.trace(), index, q, layout)?;
            let pred = model.predict(&features.values)?;
            let target = clamp_prediction(pred, tau, n);
            while prober.depth() < target {
                prober.step();
            }
            Ok(decision(prober, ExitReason::CascadeSecondStage))
        }
        SecondStage::Patience { delta, phi } => {
            let mut counter = PatienceCounter::new(delta, phi);
            if count_prefix_phi {
                for h in 2..=tau {
                    counter.observe(prober.trace().phi_at(h).expect("phi recorded"));
                }
            }
            while prober.depth() < n {
                let depth = prober.step().expect("budget validated");
                let phi_h = prober.trace().phi_at(depth).expect("depth > tau >= 1");
                if counter.observe(phi_h) {
                    return Ok(decision(prober, ExitReason::CascadeSecondStage));
                }
            }
            Ok(decision(prober, ExitReason::BudgetExhausted))
        }
    }
}

/// Serializable policy parameters, the JSON wire form used by run
/// configurations. Model artifacts are resolved by the orchestration layer.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum PolicySpec {
    /// The A-kNN baseline: probe the tuned budget for every query.
    Fixed,
    Patience {
        delta: usize,
        phi: f32,
    },
    /// `stability = false` is the bare feature set; `true` adds the
    /// intersection features.
    Regression {
        stability: bool,
    },
    Classifier {
        /// Use the Exit-weighted model rather than the plain one.
        weighted: bool,
        #[serde(default = "default_threshold")]
        threshold: f32,
    },
    CascadePatience {
        delta: usize,
        phi: f32,
        #[serde(default = "default_threshold")]
        threshold: f32,
    },
    CascadeRegression {
        #[serde(default = "default_threshold")]
        threshold: f32,
    },
}

fn default_threshold() -> f32 {
    0.5
}

impl PolicySpec {
    /// Stable identifier used for run/report file naming.
    pub fn name(&self) -> &'static str {
        match self {
            PolicySpec::Fixed => "fixed",
            PolicySpec::Patience { .. } => "patience",
            PolicySpec::Regression { stability: false } => "reg",
            PolicySpec::Regression { stability: true } => "reg_int",
            PolicySpec::Classifier { weighted: false, .. } => "classifier",
            PolicySpec::Classifier { weighted: true, .. } => "classifier_w",
            PolicySpec::CascadePatience { .. } => "cascade_patience",
            PolicySpec::CascadeRegression { .. } => "cascade_reg_int",
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{generate_synthetic, SyntheticSpec, VectorSet};
    use crate::features::{build_training_matrix, Target};
    use crate::ivf::Metric;
    use crate::kmeans::KMeansConfig;
    use crate::learn::{train_classifier, train_regressor, DataView, Node, Objective, TrainConfig, Tree};
    use crate::oracle::{exact_knn, label_queries};
    use crate::trace::probe;
    use std::sync::Arc;

    struct Fixture {
        index: IvfIndex,
        queries: VectorSet,
    }

    fn fixture(seed: u64) -> Fixture {
        let spec = SyntheticSpec {
            num_clusters_planted: 8,
            vectors_per_cluster: 80,
            dim: 16,
            intra_cluster_stddev: 0.3,
            num_queries: 60,
            seed,
        };
        let (corpus, queries, _qrels) = generate_synthetic(&spec).unwrap();
        let corpus = Arc::new(corpus);
        let index = IvfIndex::build(
            corpus,
            20,
            Metric::InnerProduct,
            &KMeansConfig { max_iters: 25, seed: 1 },
        )
        .unwrap();
        Fixture { index, queries }
    }

    /// Ensemble that always predicts the same raw value.
    fn constant_model(value: f32, objective: Objective, num_features: usize) -> TreeEnsemble {
        TreeEnsemble {
            trees: vec![Tree {
                nodes: vec![Node::Leaf { value }],
            }],
            base_score: 0.0,
            learning_rate: 1.0,
            objective,
            num_features,
        }
    }

    /// Naive reference: earliest h completing a delta-run over the phi
    /// sequence (phi[0] is phi_2), or n when no run completes.
    fn patience_reference(phi: &[f32], delta: usize, tolerance: f32, n: usize) -> usize {
        let mut run = 0usize;
        for h in 2..=n {
            if phi[h - 2] >= tolerance {
                run += 1;
            } else {
                run = 0;
            }
            if run >= delta {
                return h;
            }
        }
        n
    }

    #[test]
    fn fixed_with_full_budget_reproduces_exact_search() {
        let f = fixture(51);
        let k = 20;
        let n = f.index.num_clusters();
        for qi in 0..10 {
            let q = f.queries.row(qi);
            let d = run_fixed(&f.index, qi as u64, q, k, n).unwrap();
            assert_eq!(d.stop_depth, n);
            assert_eq!(d.exit_reason, ExitReason::Fixed);
            let exact = exact_knn(f.index.corpus(), q, k, Metric::InnerProduct).unwrap();
            assert_eq!(d.result, exact);
        }
    }

    #[test]
    fn fixed_n1_scans_only_top_cluster() {
        let f = fixture(52);
        let q = f.queries.row(0);
        let d = run_fixed(&f.index, 0, q, 5, 1).unwrap();
        let top_cluster = f.index.rank_clusters(q).unwrap()[0];
        for (id, _) in &d.result {
            assert_eq!(f.index.cluster_of_id(*id), Some(top_cluster));
        }
    }

    #[test]
    fn patience_matches_reference_scan_across_grid() {
        let f = fixture(53);
        let k = 10;
        let n = f.index.num_clusters();
        for qi in 0..f.queries.len() {
            let q = f.queries.row(qi);
            let trace = probe(&f.index, qi as u64, q, k, n).unwrap();
            for &delta in &[1usize, 3, 7] {
                for &tol in &[90.0f32, 95.0, 100.0] {
                    let d = run_patience(&f.index, qi as u64, q, k, delta, tol, n).unwrap();
                    let expect = patience_reference(trace.phi(), delta, tol, n);
                    assert_eq!(d.stop_depth, expect, "q{qi} delta={delta} tol={tol}");
                    assert_eq!(d.result, trace.snapshot(d.stop_depth).unwrap());
                }
            }
        }
    }

    #[test]
    fn patience_dominance_weaker_condition_fires_no_later() {
        let f = fixture(54);
        let k = 10;
        let n = f.index.num_clusters();
        let grid: &[(usize, f32)] = &[(1, 90.0), (3, 95.0), (3, 90.0), (7, 95.0), (7, 100.0)];
        for qi in 0..20 {
            let q = f.queries.row(qi);
            for &(d1, p1) in grid {
                for &(d2, p2) in grid {
                    if d1 <= d2 && p1 <= p2 {
                        let weak = run_patience(&f.index, qi as u64, q, k, d1, p1, n).unwrap();
                        let strong = run_patience(&f.index, qi as u64, q, k, d2, p2, n).unwrap();
                        assert!(
                            weak.stop_depth <= strong.stop_depth,
                            "dominance violated at q{qi}: ({d1},{p1}) stopped after ({d2},{p2})"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn patience_frozen_result_stops_at_delta_plus_one() {
        // every doc points the same way, so whichever cluster ranks first
        // already holds the global top-k and phi = 100 from h = 2 onward
        let data: Vec<f32> = (0..40)
            .flat_map(|i| vec![1.0 + (i as f32) * 1e-3, 0.0])
            .collect();
        let corpus = Arc::new(VectorSet::from_rows(data, 2).unwrap());
        let index = IvfIndex::build(
            corpus,
            4,
            Metric::InnerProduct,
            &KMeansConfig { max_iters: 20, seed: 2 },
        )
        .unwrap();
        let q = [1.0f32, 0.0];
        let d = run_patience(&index, 0, &q, 3, 3, 95.0, 4).unwrap();
        assert_eq!(d.stop_depth, 4);
        assert_eq!(d.exit_reason, ExitReason::Patience);
    }

    #[test]
    fn patience_impossible_tolerance_exhausts_budget() {
        let f = fixture(55);
        let q = f.queries.row(1);
        let n = f.index.num_clusters();
        // delta so large the run cannot complete within n probes
        let d = run_patience(&f.index, 1, q, 10, n, 90.0, n).unwrap();
        assert_eq!(d.stop_depth, n);
        assert_eq!(d.exit_reason, ExitReason::BudgetExhausted);
    }

    #[test]
    fn patience_rejects_bad_parameters() {
        let f = fixture(56);
        let q = f.queries.row(0);
        assert!(run_patience(&f.index, 0, q, 5, 0, 95.0, 5).is_err());
        assert!(run_patience(&f.index, 0, q, 5, 2, 80.0, 5).is_err());
        assert!(run_patience(&f.index, 0, q, 5, 2, 95.0, 0).is_err());
    }

    #[test]
    fn regression_clamps_and_rounds() {
        let f = fixture(57);
        let k = 10;
        let tau = 4;
        let n = 15;
        let layout = FeatureLayout::standard(f.index.dim(), tau, f.index.num_clusters(), true).unwrap();
        let q = f.queries.row(0);

        // prediction below tau clamps up: the tau probes are already spent
        let low = constant_model(3.2, Objective::SquaredError, layout.total_len());
        let d = run_regression(&f.index, 0, q, k, &low, &layout, tau, n).unwrap();
        assert_eq!(d.stop_depth, tau);
        assert_eq!(d.exit_reason, ExitReason::Regression);

        // enormous prediction clamps to the budget
        let high = constant_model(1e6, Objective::SquaredError, layout.total_len());
        let d = run_regression(&f.index, 0, q, k, &high, &layout, tau, n).unwrap();
        assert_eq!(d.stop_depth, n);

        // half-up rounding
        let mid = constant_model(7.5, Objective::SquaredError, layout.total_len());
        let d = run_regression(&f.index, 0, q, k, &mid, &layout, tau, n).unwrap();
        assert_eq!(d.stop_depth, 8);
    }

    #[test]
    fn classifier_threshold_extremes() {
        let f = fixture(58);
        let k = 10;
        let tau = 4;
        let n = 15;
        let layout = FeatureLayout::standard(f.index.dim(), tau, f.index.num_clusters(), true).unwrap();
        let q = f.queries.row(2);

        let sure_exit = constant_model(50.0, Objective::Logistic, layout.total_len());
        let d = run_classifier(&f.index, 2, q, k, &sure_exit, &layout, tau, 0.5, n).unwrap();
        assert_eq!(d.stop_depth, tau);
        assert_eq!(d.exit_reason, ExitReason::ClassifierExit);

        let sure_continue = constant_model(-50.0, Objective::Logistic, layout.total_len());
        let d = run_classifier(&f.index, 2, q, k, &sure_continue, &layout, tau, 0.5, n).unwrap();
        assert_eq!(d.stop_depth, n);
        assert_eq!(d.exit_reason, ExitReason::BudgetExhausted);

        // threshold 0 exits every query at tau
        let d = run_classifier(&f.index, 2, q, k, &sure_continue, &layout, tau, 0.0, n).unwrap();
        assert_eq!(d.stop_depth, tau);
    }

    /// Train small real models over the fixture for cascade tests.
    fn trained_models(f: &Fixture, tau: usize) -> (TreeEnsemble, TreeEnsemble, FeatureLayout) {
        let k = 10;
        let layout = FeatureLayout::standard(f.index.dim(), tau, f.index.num_clusters(), true).unwrap();
        let labels = label_queries(&f.index, &f.queries, f.index.num_clusters(), k).unwrap();
        let feats: Vec<(u64, crate::features::FeatureVector)> = (0..f.queries.len())
            .map(|qi| {
                let q = f.queries.row(qi);
                let trace = probe(&f.index, qi as u64, q, k, tau).unwrap();
                (qi as u64, extract_features(&trace, &f.index, q, &layout).unwrap())
            })
            .collect();
        let reg_m = build_training_matrix(&feats, &labels, &layout, Target::Regression).unwrap();
        let cls_m =
            build_training_matrix(&feats, &labels, &layout, Target::Classification { tau }).unwrap();
        let cfg = TrainConfig {
            num_trees: 20,
            min_samples_leaf: 5,
            ..TrainConfig::default()
        };
        let reg = train_regressor(
            DataView::new(&reg_m.x, reg_m.rows, reg_m.cols).unwrap(),
            &reg_m.y,
            None,
            &cfg,
        )
        .unwrap()
        .ensemble;
        let cls = train_classifier(
            DataView::new(&cls_m.x, cls_m.rows, cls_m.cols).unwrap(),
            &cls_m.y,
            &cls_m.weights,
            None,
            &cfg,
        )
        .unwrap()
        .ensemble;
        (reg, cls, layout)
    }

    #[test]
    fn cascade_exit_path_matches_classifier() {
        let f = fixture(59);
        let tau = 5;
        let n = 18;
        let k = 10;
        let (reg, cls, layout) = trained_models(&f, tau);
        for qi in 0..15 {
            let q = f.queries.row(qi);
            // threshold 0: every query exits at stage 1
            let cascade = run_cascade(
                &f.index, qi as u64, q, k, &cls, &layout,
                SecondStage::Regression { model: &reg, layout: &layout },
                tau, 0.0, n, false,
            )
            .unwrap();
            let classifier = run_classifier(&f.index, qi as u64, q, k, &cls, &layout, tau, 0.0, n).unwrap();
            assert_eq!(cascade.stop_depth, classifier.stop_depth);
            assert_eq!(cascade.result, classifier.result);
            assert_eq!(cascade.stop_depth, tau, "exit queries probe exactly tau");
            assert_eq!(cascade.exit_reason, ExitReason::ClassifierExit);
        }
    }

    #[test]
    fn cascade_always_continue_equals_second_stage() {
        let f = fixture(60);
        let tau = 5;
        let n = 18;
        let k = 10;
        let (reg, cls, layout) = trained_models(&f, tau);
        for qi in 0..15 {
            let q = f.queries.row(qi);
            // threshold above any probability: stage 1 never exits
            let cascade = run_cascade(
                &f.index, qi as u64, q, k, &cls, &layout,
                SecondStage::Regression { model: &reg, layout: &layout },
                tau, 2.0, n, false,
            )
            .unwrap();
            let reg_only = run_regression(&f.index, qi as u64, q, k, &reg, &layout, tau, n).unwrap();
            assert_eq!(cascade.stop_depth, reg_only.stop_depth);
            assert_eq!(cascade.result, reg_only.result);
            assert_eq!(cascade.exit_reason, ExitReason::CascadeSecondStage);
        }
    }

    #[test]
    fn cascade_patience_counts_runs_after_tau_only() {
        let f = fixture(61);
        let tau = 5;
        let n = f.index.num_clusters();
        let k = 10;
        let (_reg, cls, layout) = trained_models(&f, tau);
        for qi in 0..f.queries.len() {
            let q = f.queries.row(qi);
            let trace = probe(&f.index, qi as u64, q, k, n).unwrap();
            let (delta, tol) = (3usize, 95.0f32);
            let cascade = run_cascade(
                &f.index, qi as u64, q, k, &cls, &layout,
                SecondStage::Patience { delta, phi: tol },
                tau, 2.0, n, false,
            )
            .unwrap();
            // reference: scan phi restricted to h > tau with a fresh counter
            let mut run = 0usize;
            let mut expect = n;
            for h in (tau + 1)..=n {
                if trace.phi()[h - 2] >= tol {
                    run += 1;
                } else {
                    run = 0;
                }
                if run >= delta {
                    expect = h;
                    break;
                }
            }
            assert_eq!(cascade.stop_depth, expect, "q{qi}");
        }
    }

    #[test]
    fn cascade_prefix_flag_seeds_the_run_counter() {
        let f = fixture(62);
        let tau = 6;
        let n = f.index.num_clusters();
        let k = 10;
        let (_reg, cls, layout) = trained_models(&f, tau);
        let (delta, tol) = (4usize, 90.0f32);
        let mut differs = false;
        for qi in 0..f.queries.len() {
            let q = f.queries.row(qi);
            let fresh = run_cascade(
                &f.index, qi as u64, q, k, &cls, &layout,
                SecondStage::Patience { delta, phi: tol },
                tau, 2.0, n, false,
            )
            .unwrap();
            let seeded = run_cascade(
                &f.index, qi as u64, q, k, &cls, &layout,
                SecondStage::Patience { delta, phi: tol },
                tau, 2.0, n, true,
            )
            .unwrap();
            assert!(seeded.stop_depth <= fresh.stop_depth);
            if seeded.stop_depth != fresh.stop_depth {
                differs = true;
            }
        }
        assert!(differs, "prefix counting should matter for some query");
    }

    #[test]
    fn policies_never_alter_ranking() {
        let f = fixture(63);
        let k = 10;
        let n = 16;
        let tau = 4;
        let (reg, cls, layout) = trained_models(&f, tau);
        for qi in 0..10 {
            let q = f.queries.row(qi);
            let full = probe(&f.index, qi as u64, q, k, n).unwrap();
            let decisions = vec![
                run_fixed(&f.index, qi as u64, q, k, n).unwrap(),
                run_patience(&f.index, qi as u64, q, k, 3, 95.0, n).unwrap(),
                run_regression(&f.index, qi as u64, q, k, &reg, &layout, tau, n).unwrap(),
                run_classifier(&f.index, qi as u64, q, k, &cls, &layout, tau, 0.5, n).unwrap(),
            ];
            for d in decisions {
                assert!(d.stop_depth >= 1 && d.stop_depth <= n);
                assert_eq!(d.result, full.snapshot(d.stop_depth).unwrap(), "q{qi} {:?}", d.exit_reason);
            }
        }
    }

    #[test]
    fn policy_spec_json_round_trip() {
        let specs = vec![
            PolicySpec::Fixed,
            PolicySpec::Patience { delta: 7, phi: 95.0 },
            PolicySpec::Regression { stability: true },
            PolicySpec::Classifier { weighted: true, threshold: 0.5 },
            PolicySpec::CascadePatience { delta: 7, phi: 95.0, threshold: 0.5 },
            PolicySpec::CascadeRegression { threshold: 0.5 },
        ];
        for spec in specs {
            let json = serde_json::to_string(&spec).unwrap();
            let back: PolicySpec = serde_json::from_str(&json).unwrap();
            assert_eq!(back, spec);
        }
        // names are stable identifiers
        assert_eq!(PolicySpec::Regression { stability: false }.name(), "reg");
        assert_eq!(PolicySpec::Regression { stability: true }.name(), "reg_int");
    }
}
