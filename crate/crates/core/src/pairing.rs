//! Task-to-adapter pairing via budgeted evaluation.
//!
//! Three strategies build the pairing map: exhaustive search (every adapter
//! on the full validation set), uniform selection (the budget split evenly
//! across adapters), and successive halving (tournament elimination with a
//! warmup phase and geometric budget growth). Budget is counted in
//! adapter-sample evaluations: scoring one adapter on `m` samples costs `m`.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::catalog::{Catalog, TaskRecord, ValidationItem};
use crate::error::{Error, Result};
use crate::linalg::LoraAdapter;
use crate::metrics::{self, MetricKind};
use crate::retrieval::{hash_str, mix64};

/// Scores one adapter on a sample subset. Implementations must be
/// deterministic given the adapter and the exact sample multiset, and must
/// return values in `[0, 1]`.
pub trait Evaluator {
    fn score(&self, adapter_id: &str, samples: &[ValidationItem], metric: MetricKind) -> Result<f64>;
}

/// Produces a model output for one (adapter, input) pair.
pub trait Predictor {
    fn predict(&self, adapter_id: &str, input: &str) -> Result<String>;
}

/// Mean per-sample metric score of an adapter's predictions against targets.
pub fn evaluate(
    predictor: &dyn Predictor,
    adapter_id: &str,
    samples: &[ValidationItem],
    metric: MetricKind,
) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::Evaluation(format!("no samples to evaluate adapter {adapter_id}")));
    }
    let mut total = 0.0;
    for item in samples {
        let prediction = predictor.predict(adapter_id, &item.input)?;
        total += metrics::score(metric, &prediction, &item.target);
    }
    Ok(total / samples.len() as f64)
}

/// Evaluator that runs a predictor and averages metric scores.
pub struct MetricEvaluator<'a> {
    predictor: &'a dyn Predictor,
}

impl<'a> MetricEvaluator<'a> {
    pub fn new(predictor: &'a dyn Predictor) -> Self {
        MetricEvaluator { predictor }
    }
}

impl Evaluator for MetricEvaluator<'_> {
    fn score(&self, adapter_id: &str, samples: &[ValidationItem], metric: MetricKind) -> Result<f64> {
        evaluate(self.predictor, adapter_id, samples, metric)
    }
}

/// Replay cache of precomputed outputs keyed by (adapter, input); stands in
/// for live inference when adapter outputs were computed ahead of time.
#[derive(Debug, Clone, Default)]
pub struct ReplayPredictor {
    outputs: BTreeMap<(String, String), String>,
}

impl ReplayPredictor {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, adapter_id: &str, input: &str, output: &str) {
        self.outputs.insert((adapter_id.to_string(), input.to_string()), output.to_string());
    }
}

impl Predictor for ReplayPredictor {
    fn predict(&self, adapter_id: &str, input: &str) -> Result<String> {
        self.outputs
            .get(&(adapter_id.to_string(), input.to_string()))
            .cloned()
            .ok_or_else(|| {
                Error::Evaluation(format!("no replayed output for adapter {adapter_id} on {input:?}"))
            })
    }
}

/// Successive-halving configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShConfig {
    /// Per-adapter samples during warmup rounds.
    pub base_samples: usize,
    /// Fraction of survivors kept per round, in (0, 1).
    pub keep_ratio: f64,
    /// Per-round budget growth after warmup, > 1.
    pub budget_growth: f64,
    /// Maximum rounds.
    pub rounds: usize,
    /// Rounds evaluated at `base_samples` before growth kicks in.
    pub warmup_rounds: usize,
    pub seed: u64,
}

impl ShConfig {
    /// Defaults for a pool of `n`: halving with doubling budget and enough
    /// rounds to reach a single survivor with slack.
    pub fn for_pool_size(n: usize, seed: u64) -> Self {
        let n = n.max(1) as f64;
        ShConfig {
            base_samples: 8,
            keep_ratio: 0.5,
            budget_growth: 2.0,
            rounds: (n.ln() / 2.0f64.ln()).ceil() as usize + 2,
            warmup_rounds: 1,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.base_samples == 0 {
            return Err(Error::Config("base_samples must be positive".into()));
        }
        if !(self.keep_ratio > 0.0 && self.keep_ratio < 1.0) {
            return Err(Error::Config(format!("keep_ratio {} outside (0, 1)", self.keep_ratio)));
        }
        if !(self.budget_growth > 1.0 && self.budget_growth.is_finite()) {
            return Err(Error::Config(format!("budget_growth {} must exceed 1", self.budget_growth)));
        }
        if self.rounds == 0 {
            return Err(Error::Config("rounds must be positive".into()));
        }
        Ok(())
    }

    /// Per-round sample count before capping at the validation size.
    fn samples_for_round(&self, round: usize) -> usize {
        if round < self.warmup_rounds {
            self.base_samples
        } else {
            let exponent = (round - self.warmup_rounds + 1) as i32;
            (self.base_samples as f64 * self.budget_growth.powi(exponent)).ceil() as usize
        }
    }

    /// Exact budget the schedule will spend: survivor counts depend only on
    /// the keep ratio, never on scores, so the cost is computable up front.
    pub fn cost(&self, n_adapters: usize, validation_size: usize) -> u64 {
        let mut survivors = n_adapters;
        let mut cost = 0u64;
        for round in 0..self.rounds {
            let m_r = self.samples_for_round(round).min(validation_size);
            cost += (m_r * survivors) as u64;
            survivors = ((self.keep_ratio * survivors as f64).ceil() as usize).max(1);
            if survivors == 1 {
                break;
            }
        }
        cost
    }
}

/// Successive halving capped at a total budget: runs a sharper-elimination
/// schedule (keep 30% per round) with the largest base sample count whose
/// exact cost fits. The aggressive keep ratio lets the tournament operate
/// at budgets far below what even one full uniform pass would need.
pub fn successive_halving_with_budget(
    task: &TaskRecord,
    pool: &BTreeMap<String, LoraAdapter>,
    evaluator: &dyn Evaluator,
    total_budget: u64,
    seed: u64,
) -> Result<PairingOutcome> {
    if pool.is_empty() {
        return Err(Error::EmptyPool(format!("no adapters to pair with task {}", task.id)));
    }
    let keep_ratio = 0.3f64;
    let n = pool.len().max(1) as f64;
    let mut cfg = ShConfig {
        base_samples: 1,
        keep_ratio,
        budget_growth: 2.0,
        rounds: (n.ln() / (1.0 / keep_ratio).ln()).ceil() as usize + 2,
        warmup_rounds: 1,
        seed,
    };
    let minimum = cfg.cost(pool.len(), task.validation.len());
    if minimum > total_budget {
        return Err(Error::InsufficientBudget(format!(
            "budget {total_budget} below the minimum halving cost {minimum}"
        )));
    }
    // Cost is monotone in base_samples; binary search the largest fit.
    let (mut lo, mut hi) = (1usize, task.validation.len().max(1));
    while lo < hi {
        let mid = (lo + hi + 1) / 2;
        cfg.base_samples = mid;
        if cfg.cost(pool.len(), task.validation.len()) <= total_budget {
            lo = mid;
        } else {
            hi = mid - 1;
        }
    }
    cfg.base_samples = lo;
    successive_halving(task, pool, evaluator, &cfg)
}

/// One evaluation round: every survivor scored on the same `samples_used`
/// validation items. `survivors` is the set evaluated this round, sorted by
/// adapter id, aligned with `scores`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundTrace {
    pub round: usize,
    pub samples_used: usize,
    pub survivors: Vec<String>,
    pub scores: Vec<f64>,
}

/// Result of one pairing search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairingOutcome {
    pub winner: String,
    #[serde(rename = "budget_spent")]
    pub total_budget_spent: u64,
    pub trace: Vec<RoundTrace>,
}

fn rank_by_score<'a>(ids: &[&'a str], scores: &BTreeMap<&'a str, f64>) -> Vec<&'a str> {
    let mut ranked: Vec<&str> = ids.to_vec();
    ranked.sort_by(|a, b| {
        scores[b].total_cmp(&scores[a]).then_with(|| a.cmp(b))
    });
    ranked
}

fn score_survivors<'a>(
    evaluator: &dyn Evaluator,
    survivors: &[&'a str],
    samples: &[ValidationItem],
    metric: MetricKind,
) -> Result<(BTreeMap<&'a str, f64>, RoundTrace)> {
    let mut scores = BTreeMap::new();
    for id in survivors {
        let s = evaluator.score(id, samples, metric)?;
        if !(0.0..=1.0).contains(&s) {
            return Err(Error::Evaluation(format!("adapter {id} scored {s}, outside [0, 1]")));
        }
        scores.insert(*id, s);
    }
    let trace = RoundTrace {
        round: 0,
        samples_used: samples.len(),
        survivors: survivors.iter().map(|s| s.to_string()).collect(),
        scores: survivors.iter().map(|s| scores[s]).collect(),
    };
    Ok((scores, trace))
}

/// Score every adapter on the full validation set; the argmax wins, with
/// ties broken by lexicographic adapter id. Budget is `N * |D|`.
pub fn exhaustive_pairing(
    task: &TaskRecord,
    pool: &BTreeMap<String, LoraAdapter>,
    evaluator: &dyn Evaluator,
) -> Result<PairingOutcome> {
    if pool.is_empty() {
        return Err(Error::EmptyPool(format!("no adapters to pair with task {}", task.id)));
    }
    let ids: Vec<&str> = pool.keys().map(String::as_str).collect();
    let (scores, trace) = score_survivors(evaluator, &ids, &task.validation, task.metric)?;
    let winner = rank_by_score(&ids, &scores)[0].to_string();
    let budget = (ids.len() * task.validation.len()) as u64;
    Ok(PairingOutcome { winner, total_budget_spent: budget, trace: vec![trace] })
}

/// Tournament elimination: each round draws a fresh seeded sample of the
/// validation set, scores all survivors on it, keeps the top
/// `max(1, ceil(keep_ratio * |S|))`, and stops when one survivor remains or
/// the round limit is hit. Samples grow geometrically after the warmup.
pub fn successive_halving(
    task: &TaskRecord,
    pool: &BTreeMap<String, LoraAdapter>,
    evaluator: &dyn Evaluator,
    cfg: &ShConfig,
) -> Result<PairingOutcome> {
    if pool.is_empty() {
        return Err(Error::EmptyPool(format!("no adapters to pair with task {}", task.id)));
    }
    cfg.validate()?;
    let validation = &task.validation;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut survivors: Vec<&str> = pool.keys().map(String::as_str).collect();
    let mut trace = Vec::new();
    let mut budget = 0u64;
    let mut last_ranked: Vec<&str> = survivors.clone();
    for round in 0..cfg.rounds {
        let m_r = cfg.samples_for_round(round).min(validation.len());
        let picked = rand::seq::index::sample(&mut rng, validation.len(), m_r);
        let samples: Vec<ValidationItem> =
            picked.iter().map(|i| validation[i].clone()).collect();
        let (scores, mut round_trace) = score_survivors(evaluator, &survivors, &samples, task.metric)?;
        round_trace.round = round;
        budget += (m_r * survivors.len()) as u64;
        trace.push(round_trace);
        let keep = ((cfg.keep_ratio * survivors.len() as f64).ceil() as usize).max(1);
        let ranked = rank_by_score(&survivors, &scores);
        last_ranked = ranked.clone();
        survivors = ranked.into_iter().take(keep).collect();
        survivors.sort_unstable();
        if survivors.len() == 1 {
            break;
        }
    }
    // If several survivors remain after the round limit, the final round's
    // ranking decides.
    let winner = if survivors.len() == 1 {
        survivors[0].to_string()
    } else {
        last_ranked[0].to_string()
    };
    Ok(PairingOutcome { winner, total_budget_spent: budget, trace })
}

/// Evenly split a total budget: every adapter is scored on the same
/// `floor(budget / N)` seeded-sampled items (capped at the validation size).
pub fn uniform_selection(
    task: &TaskRecord,
    pool: &BTreeMap<String, LoraAdapter>,
    evaluator: &dyn Evaluator,
    total_budget: u64,
    seed: u64,
) -> Result<PairingOutcome> {
    if pool.is_empty() {
        return Err(Error::EmptyPool(format!("no adapters to pair with task {}", task.id)));
    }
    let n = pool.len() as u64;
    if total_budget < n {
        return Err(Error::InsufficientBudget(format!(
            "budget {total_budget} cannot cover {n} adapters"
        )));
    }
    let per_adapter = ((total_budget / n) as usize).min(task.validation.len());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let picked = rand::seq::index::sample(&mut rng, task.validation.len(), per_adapter);
    let samples: Vec<ValidationItem> = picked.iter().map(|i| task.validation[i].clone()).collect();
    let ids: Vec<&str> = pool.keys().map(String::as_str).collect();
    let (scores, trace) = score_survivors(evaluator, &ids, &samples, task.metric)?;
    let winner = rank_by_score(&ids, &scores)[0].to_string();
    let budget = (ids.len() * per_adapter) as u64;
    Ok(PairingOutcome { winner, total_budget_spent: budget, trace: vec![trace] })
}

/// How `build_pairing` searches for each task's adapter.
#[derive(Debug, Clone, PartialEq)]
pub enum PairingStrategy {
    Exhaustive,
    SuccessiveHalving(ShConfig),
    Uniform { total_budget: u64, seed: u64 },
}

/// Per-task pairing outcomes, keyed by task id; serialized as the pairing
/// report sidecar.
pub type PairingReport = BTreeMap<String, PairingOutcome>;

/// Pair every task in the catalog against the pool. Returns a new catalog
/// with the pairing map set plus the per-task report. Per-task failures are
/// collected and reported together; no partial catalog escapes.
pub fn build_pairing(
    catalog: &Catalog,
    evaluator: &dyn Evaluator,
    strategy: &PairingStrategy,
) -> Result<(Catalog, PairingReport)> {
    if catalog.pool.is_empty() {
        return Err(Error::EmptyPool("cannot pair against an empty adapter pool".into()));
    }
    let mut pairing = BTreeMap::new();
    let mut report = PairingReport::new();
    let mut failures = Vec::new();
    for task in catalog.tasks.values() {
        let outcome = match strategy {
            PairingStrategy::Exhaustive => exhaustive_pairing(task, &catalog.pool, evaluator),
            PairingStrategy::SuccessiveHalving(cfg) => {
                let mut task_cfg = cfg.clone();
                task_cfg.seed = mix64(cfg.seed ^ hash_str(0x9a1e, &task.id));
                successive_halving(task, &catalog.pool, evaluator, &task_cfg)
            }
            PairingStrategy::Uniform { total_budget, seed } => {
                let task_seed = mix64(seed ^ hash_str(0x9a1e, &task.id));
                uniform_selection(task, &catalog.pool, evaluator, *total_budget, task_seed)
            }
        };
        match outcome {
            Ok(outcome) => {
                pairing.insert(task.id.clone(), outcome.winner.clone());
                report.insert(task.id.clone(), outcome);
            }
            Err(e) => failures.push(format!("{}: {e}", task.id)),
        }
    }
    if !failures.is_empty() {
        return Err(Error::Evaluation(format!("pairing failed for tasks [{}]", failures.join("; "))));
    }
    let mut out = catalog.clone();
    out.pairing = pairing;
    Ok((out, report))
}

/// Serialize a pairing report in its sidecar form.
pub fn pairing_report_to_json(report: &PairingReport) -> String {
    let mut text = serde_json::to_string_pretty(report).expect("report serialization");
    text.push('\n');
    text
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{LayerDelta, Matrix};

    fn items(n: usize) -> Vec<ValidationItem> {
        (0..n)
            .map(|i| ValidationItem { input: format!("q{i}"), target: format!("t{i}") })
            .collect()
    }

    fn task(n_items: usize) -> TaskRecord {
        TaskRecord::new("task", MetricKind::ExactMatch, items(n_items))
    }

    fn pool(ids: &[&str]) -> BTreeMap<String, LoraAdapter> {
        ids.iter()
            .map(|id| {
                let a = Matrix::zeros(1, 2);
                let b = Matrix::zeros(2, 1);
                let adapter = LoraAdapter::new(*id, 1, 1.0, vec![LayerDelta { a, b, layer_index: 0 }])
                    .unwrap();
                (id.to_string(), adapter)
            })
            .collect()
    }

    /// Sample-independent evaluator with fixed per-adapter scores.
    struct FixedScores(BTreeMap<String, f64>);

    impl Evaluator for FixedScores {
        fn score(&self, adapter_id: &str, _s: &[ValidationItem], _m: MetricKind) -> Result<f64> {
            Ok(self.0[adapter_id])
        }
    }

    fn fixed(scores: &[(&str, f64)]) -> FixedScores {
        FixedScores(scores.iter().map(|(k, v)| (k.to_string(), *v)).collect())
    }

    #[test]
    fn evaluate_mean_of_sample_scores() {
        let mut replay = ReplayPredictor::new();
        for (i, item) in items(4).iter().enumerate() {
            // Three of four correct.
            let out = if i < 3 { item.target.clone() } else { "wrong".to_string() };
            replay.insert("a", &item.input, &out);
        }
        let score = evaluate(&replay, "a", &items(4), MetricKind::ExactMatch).unwrap();
        assert_eq!(score, 0.75);
    }

    #[test]
    fn evaluate_extremes() {
        let mut perfect = ReplayPredictor::new();
        let mut hopeless = ReplayPredictor::new();
        for item in &items(3) {
            perfect.insert("a", &item.input, &item.target);
            hopeless.insert("a", &item.input, "nope");
        }
        assert_eq!(evaluate(&perfect, "a", &items(3), MetricKind::ExactMatch).unwrap(), 1.0);
        assert_eq!(evaluate(&hopeless, "a", &items(3), MetricKind::ExactMatch).unwrap(), 0.0);
    }

    #[test]
    fn evaluate_missing_output_is_error() {
        let replay = ReplayPredictor::new();
        assert!(matches!(
            evaluate(&replay, "a", &items(1), MetricKind::ExactMatch),
            Err(Error::Evaluation(_))
        ));
    }

    #[test]
    fn exhaustive_single_adapter() {
        let t = task(5);
        let outcome = exhaustive_pairing(&t, &pool(&["only"]), &fixed(&[("only", 0.4)])).unwrap();
        assert_eq!(outcome.winner, "only");
        assert_eq!(outcome.total_budget_spent, 5);
    }

    #[test]
    fn exhaustive_tie_goes_lexicographic() {
        let t = task(3);
        let outcome = exhaustive_pairing(
            &t,
            &pool(&["beta", "alpha"]),
            &fixed(&[("alpha", 0.7), ("beta", 0.7)]),
        )
        .unwrap();
        assert_eq!(outcome.winner, "alpha");
    }

    #[test]
    fn exhaustive_planted_best_wins() {
        let t = task(4);
        let outcome = exhaustive_pairing(
            &t,
            &pool(&["a", "b", "c"]),
            &fixed(&[("a", 0.2), ("b", 0.9), ("c", 0.5)]),
        )
        .unwrap();
        assert_eq!(outcome.winner, "b");
        assert_eq!(outcome.total_budget_spent, 12);
    }

    #[test]
    fn exhaustive_empty_pool() {
        let t = task(4);
        assert!(matches!(
            exhaustive_pairing(&t, &BTreeMap::new(), &fixed(&[])),
            Err(Error::EmptyPool(_))
        ));
    }

    #[test]
    fn sh_survivor_counts_halve() {
        let t = task(64);
        let ids = ["a0", "a1", "a2", "a3", "a4", "a5", "a6", "a7"];
        let scores: Vec<(&str, f64)> =
            ids.iter().enumerate().map(|(i, id)| (*id, i as f64 / 10.0)).collect();
        let cfg = ShConfig { base_samples: 8, keep_ratio: 0.5, budget_growth: 2.0, rounds: 10, warmup_rounds: 1, seed: 3 };
        let outcome = successive_halving(&t, &pool(&ids), &fixed(&scores), &cfg).unwrap();
        let counts: Vec<usize> = outcome.trace.iter().map(|r| r.survivors.len()).collect();
        assert_eq!(counts, vec![8, 4, 2]);
        assert_eq!(outcome.winner, "a7");
    }

    #[test]
    fn sh_budget_schedule() {
        let t = task(64);
        let ids = ["a0", "a1", "a2", "a3", "a4", "a5", "a6", "a7"];
        let scores: Vec<(&str, f64)> =
            ids.iter().enumerate().map(|(i, id)| (*id, i as f64 / 10.0)).collect();
        let cfg = ShConfig { base_samples: 8, keep_ratio: 0.5, budget_growth: 2.0, rounds: 10, warmup_rounds: 1, seed: 3 };
        let outcome = successive_halving(&t, &pool(&ids), &fixed(&scores), &cfg).unwrap();
        let m: Vec<usize> = outcome.trace.iter().map(|r| r.samples_used).collect();
        assert_eq!(m, vec![8, 16, 32]);
        let expected: u64 = outcome
            .trace
            .iter()
            .map(|r| (r.samples_used * r.survivors.len()) as u64)
            .sum();
        assert_eq!(outcome.total_budget_spent, expected);
    }

    #[test]
    fn sh_single_adapter_returns_immediately() {
        let t = task(16);
        let cfg = ShConfig::for_pool_size(1, 0);
        let outcome = successive_halving(&t, &pool(&["solo"]), &fixed(&[("solo", 0.5)]), &cfg).unwrap();
        assert_eq!(outcome.winner, "solo");
        assert_eq!(outcome.trace.len(), 1);
    }

    #[test]
    fn sh_caps_samples_at_validation_size() {
        let t = task(10);
        let ids = ["a", "b"];
        let cfg = ShConfig { base_samples: 64, keep_ratio: 0.5, budget_growth: 2.0, rounds: 4, warmup_rounds: 1, seed: 1 };
        let outcome =
            successive_halving(&t, &pool(&ids), &fixed(&[("a", 0.9), ("b", 0.1)]), &cfg).unwrap();
        assert!(outcome.trace.iter().all(|r| r.samples_used <= 10));
    }

    #[test]
    fn sh_deterministic_under_seed() {
        let t = task(32);
        let ids = ["a", "b", "c", "d", "e"];
        let scores: Vec<(&str, f64)> =
            ids.iter().enumerate().map(|(i, id)| (*id, i as f64 / 7.0)).collect();
        let cfg = ShConfig::for_pool_size(5, 42);
        let o1 = successive_halving(&t, &pool(&ids), &fixed(&scores), &cfg).unwrap();
        let o2 = successive_halving(&t, &pool(&ids), &fixed(&scores), &cfg).unwrap();
        assert_eq!(
            serde_json::to_string(&o1).unwrap(),
            serde_json::to_string(&o2).unwrap()
        );
    }

    #[test]
    fn uniform_full_budget_matches_exhaustive() {
        let t = task(6);
        let p = pool(&["a", "b", "c"]);
        let ev = fixed(&[("a", 0.1), ("b", 0.8), ("c", 0.3)]);
        let budget = (p.len() * t.validation.len()) as u64;
        let uni = uniform_selection(&t, &p, &ev, budget, 9).unwrap();
        let exh = exhaustive_pairing(&t, &p, &ev).unwrap();
        assert_eq!(uni.winner, exh.winner);
        assert_eq!(uni.total_budget_spent, budget);
    }

    #[test]
    fn uniform_floor_arithmetic() {
        let t = task(6);
        let p = pool(&["a", "b", "c"]);
        let ev = fixed(&[("a", 0.1), ("b", 0.8), ("c", 0.3)]);
        let outcome = uniform_selection(&t, &p, &ev, 3, 9).unwrap();
        assert_eq!(outcome.trace[0].samples_used, 1);
        assert_eq!(outcome.total_budget_spent, 3);
    }

    #[test]
    fn uniform_insufficient_budget() {
        let t = task(6);
        let p = pool(&["a", "b", "c"]);
        assert!(matches!(
            uniform_selection(&t, &p, &fixed(&[]), 2, 9),
            Err(Error::InsufficientBudget(_))
        ));
    }

    #[test]
    fn build_pairing_sets_every_task() {
        let tasks = vec![
            TaskRecord::new("t0", MetricKind::ExactMatch, items(4)),
            TaskRecord::new("t1", MetricKind::ExactMatch, items(4)),
        ];
        let cat = Catalog::new("enc#0", tasks, pool(&["a", "b"]), BTreeMap::new(), "").unwrap();
        let ev = fixed(&[("a", 0.2), ("b", 0.9)]);
        let (paired, report) = build_pairing(&cat, &ev, &PairingStrategy::Exhaustive).unwrap();
        // Both tasks map to the same best adapter; sharing is allowed.
        assert_eq!(paired.pairing["t0"], "b");
        assert_eq!(paired.pairing["t1"], "b");
        assert_eq!(report.len(), 2);
        assert!(report.values().all(|o| o.total_budget_spent == 8));
    }

    #[test]
    fn build_pairing_reports_failed_tasks() {
        struct Failing;
        impl Evaluator for Failing {
            fn score(&self, _: &str, _: &[ValidationItem], _: MetricKind) -> Result<f64> {
                Err(Error::Evaluation("backend offline".into()))
            }
        }
        let tasks = vec![TaskRecord::new("t0", MetricKind::ExactMatch, items(2))];
        let cat = Catalog::new("enc#0", tasks, pool(&["a"]), BTreeMap::new(), "").unwrap();
        let err = build_pairing(&cat, &Failing, &PairingStrategy::Exhaustive).unwrap_err();
        assert!(matches!(err, Error::Evaluation(m) if m.contains("t0")));
    }
}
