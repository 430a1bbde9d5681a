//! Evaluation protocol: the three routing regimes with oracle-normalized
//! averages, the selection budget sweep, and the row-normalized performance
//! matrix. The synthetic world that makes all of this checkable at desk
//! scale lives in [`world`].

pub mod world;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::catalog::{Catalog, Regime, ValidationItem};
use crate::error::{Error, Result};
use crate::fusion::{route, RoutingDecision};
use crate::linalg::{LoraAdapter, Matrix};
use crate::metrics::{self, MetricKind};
use crate::pairing::{
    exhaustive_pairing, successive_halving_with_budget, uniform_selection, Evaluator,
    MetricEvaluator, Predictor,
};
use crate::retrieval::{mix64, Encoder};

/// Per-task held-out test items.
pub type TestSets = BTreeMap<String, Vec<ValidationItem>>;

/// One scored task in a regime evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskRow {
    pub task_id: String,
    pub metric: MetricKind,
    pub method_score: f64,
    pub oracle_score: f64,
}

/// A regime evaluation: per-task raw scores plus the oracle-normalized
/// average in percent. Tasks whose oracle scored zero are excluded from the
/// average and listed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub regime: String,
    pub rows: Vec<TaskRow>,
    pub normalized_average: f64,
    pub excluded: Vec<String>,
}

impl EvaluationReport {
    pub fn to_json(&self) -> String {
        let mut text = serde_json::to_string_pretty(self).expect("report serialization");
        text.push('\n');
        text
    }
}

/// Mean over tasks of `100 * method / oracle`, excluding (and returning)
/// tasks with a zero oracle score.
pub fn normalized_average(rows: &[TaskRow]) -> (f64, Vec<String>) {
    let mut excluded = Vec::new();
    let mut total = 0.0;
    let mut counted = 0usize;
    for row in rows {
        if row.oracle_score == 0.0 {
            excluded.push(row.task_id.clone());
        } else {
            total += 100.0 * row.method_score / row.oracle_score;
            counted += 1;
        }
    }
    let average = if counted == 0 { 0.0 } else { total / counted as f64 };
    (average, excluded)
}

/// Routing knobs used when evaluating a regime.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RouterConfig {
    pub k: usize,
    pub temperature: f64,
}

impl Default for RouterConfig {
    fn default() -> Self {
        RouterConfig {
            k: crate::retrieval::DEFAULT_TOP_K,
            temperature: crate::retrieval::DEFAULT_TEMPERATURE,
        }
    }
}

/// Everything a regime run needs to turn routed adapters into scored text:
/// the query encoder plus fused and single-adapter prediction.
pub trait RegimePipeline {
    fn encoder(&self) -> &dyn Encoder;
    fn predict_fused(
        &self,
        pool: &BTreeMap<String, LoraAdapter>,
        decision: &RoutingDecision,
        input: &str,
    ) -> Result<String>;
    fn predict_single(
        &self,
        pool: &BTreeMap<String, LoraAdapter>,
        adapter_id: &str,
        input: &str,
    ) -> Result<String>;
}

/// Adapts a pipeline's single-adapter prediction to the `Predictor`
/// contract, resolving adapters in a fixed pool.
pub struct PipelinePredictor<'a> {
    pub pipeline: &'a dyn RegimePipeline,
    pub pool: &'a BTreeMap<String, LoraAdapter>,
}

impl Predictor for PipelinePredictor<'_> {
    fn predict(&self, adapter_id: &str, input: &str) -> Result<String> {
        self.pipeline.predict_single(self.pool, adapter_id, input)
    }
}

/// Score each task's designated aligned adapter on its held-out test set.
/// The oracle is fixed: it never changes with the evaluation regime.
pub fn oracle_scores(
    catalog: &Catalog,
    evaluator: &dyn Evaluator,
    test_sets: &TestSets,
    aligned: &BTreeMap<String, String>,
) -> Result<BTreeMap<String, f64>> {
    let mut out = BTreeMap::new();
    for (task_id, items) in test_sets {
        let task = catalog
            .tasks
            .get(task_id)
            .ok_or_else(|| Error::NotFound(format!("test task {task_id} not in catalog")))?;
        let adapter_id = aligned
            .get(task_id)
            .ok_or_else(|| Error::Config(format!("no aligned adapter for task {task_id}")))?;
        out.insert(task_id.clone(), evaluator.score(adapter_id, items, task.metric)?);
    }
    Ok(out)
}

/// Evaluate one regime end to end. For each test task: derive the regime
/// view, re-pair any task the removal left unpaired (exhaustively, against
/// the reduced pool), route every test query, fuse in the output space,
/// score predictions, and aggregate the oracle-normalized average.
pub fn run_regime(
    catalog: &Catalog,
    regime: Regime,
    cfg: &RouterConfig,
    pipeline: &dyn RegimePipeline,
    repair_evaluator: &dyn Evaluator,
    test_sets: &TestSets,
    aligned: &BTreeMap<String, String>,
) -> Result<EvaluationReport> {
    let oracle_predictor = PipelinePredictor { pipeline, pool: &catalog.pool };
    let oracle_evaluator = MetricEvaluator::new(&oracle_predictor);
    let oracle = oracle_scores(catalog, &oracle_evaluator, test_sets, aligned)?;

    let mut rows = Vec::with_capacity(test_sets.len());
    for (task_id, items) in test_sets {
        let metric = catalog.tasks[task_id].metric;
        let mut reduced = catalog.remove_for_regime(task_id, regime)?;
        if !reduced.pool.is_empty() {
            let unpaired: Vec<String> = reduced
                .tasks
                .keys()
                .filter(|id| !reduced.pairing.contains_key(*id))
                .cloned()
                .collect();
            for id in unpaired {
                let outcome = exhaustive_pairing(&reduced.tasks[&id], &reduced.pool, repair_evaluator)?;
                reduced.pairing.insert(id, outcome.winner);
            }
        }
        let mut total = 0.0;
        for (index, item) in items.iter().enumerate() {
            let query_id = format!("{task_id}:{index}");
            let decision = route(
                &reduced,
                pipeline.encoder(),
                &query_id,
                &item.input,
                cfg.k,
                cfg.temperature,
            )?;
            let prediction = pipeline.predict_fused(&reduced.pool, &decision, &item.input)?;
            total += metrics::score(metric, &prediction, &item.target);
        }
        let method_score = if items.is_empty() { 0.0 } else { total / items.len() as f64 };
        rows.push(TaskRow { task_id: task_id.clone(), metric, method_score, oracle_score: oracle[task_id] });
    }
    let (average, excluded) = normalized_average(&rows);
    Ok(EvaluationReport {
        regime: regime.name().to_string(),
        rows,
        normalized_average: average,
        excluded,
    })
}

/// Raw task-by-adapter validation scores and their row-wise min-max
/// normalization to `[0, 1]`. Constant rows map to all zeros.
#[derive(Debug, Clone, PartialEq)]
pub struct PerformanceMatrix {
    pub task_ids: Vec<String>,
    pub adapter_ids: Vec<String>,
    pub raw: Matrix,
    pub normalized: Matrix,
}

pub fn performance_matrix(catalog: &Catalog, evaluator: &dyn Evaluator) -> Result<PerformanceMatrix> {
    let task_ids: Vec<String> = catalog.tasks.keys().cloned().collect();
    let adapter_ids: Vec<String> = catalog.pool.keys().cloned().collect();
    let (t, n) = (task_ids.len(), adapter_ids.len());
    let mut raw = Vec::with_capacity(t * n);
    for task_id in &task_ids {
        let task = &catalog.tasks[task_id];
        for adapter_id in &adapter_ids {
            raw.push(evaluator.score(adapter_id, &task.validation, task.metric)?);
        }
    }
    let mut normalized = raw.clone();
    for row in normalized.chunks_mut(n.max(1)) {
        let min = row.iter().copied().fold(f64::INFINITY, f64::min);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let range = max - min;
        for v in row.iter_mut() {
            *v = if range > 0.0 { (*v - min) / range } else { 0.0 };
        }
    }
    Ok(PerformanceMatrix {
        task_ids,
        adapter_ids,
        raw: Matrix::new(t, n, raw)?,
        normalized: Matrix::new(t, n, normalized)?,
    })
}

/// Selection quality at one budget: mean and sample standard deviation of
/// the winner's true (full-validation) score, normalized by the best
/// adapter's true score, over the independent runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BudgetSweepRow {
    pub budget: u64,
    pub uniform_mean: f64,
    pub uniform_stddev: f64,
    pub sh_mean: f64,
    pub sh_stddev: f64,
}

fn mean_stddev(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Compare uniform selection against successive halving across budgets.
/// Each (budget, run) pair draws its own validation subsets; the selected
/// winner is then scored on the full validation set and normalized by the
/// best adapter's full-validation score.
pub fn budget_sweep(
    task: &crate::catalog::TaskRecord,
    pool: &BTreeMap<String, LoraAdapter>,
    evaluator: &dyn Evaluator,
    budgets: &[u64],
    runs: usize,
    seed: u64,
) -> Result<Vec<BudgetSweepRow>> {
    if budgets.is_empty() || runs == 0 {
        return Err(Error::Config("sweep needs budgets and at least one run".into()));
    }
    if budgets.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Config("budgets must be strictly ascending".into()));
    }
    let mut true_scores = BTreeMap::new();
    let mut best_true = 0.0f64;
    for adapter_id in pool.keys() {
        let s = evaluator.score(adapter_id, &task.validation, task.metric)?;
        best_true = best_true.max(s);
        true_scores.insert(adapter_id.clone(), s);
    }
    if best_true == 0.0 {
        return Err(Error::Config("every adapter scores zero; nothing to normalize by".into()));
    }
    let mut rows = Vec::with_capacity(budgets.len());
    for (bi, &budget) in budgets.iter().enumerate() {
        let mut uniform = Vec::with_capacity(runs);
        let mut halving = Vec::with_capacity(runs);
        for run in 0..runs {
            let run_seed = mix64(seed ^ ((bi as u64) << 40) ^ run as u64);
            let u = uniform_selection(task, pool, evaluator, budget, run_seed)?;
            uniform.push(true_scores[&u.winner] / best_true);
            let h = successive_halving_with_budget(task, pool, evaluator, budget, run_seed)?;
            halving.push(true_scores[&h.winner] / best_true);
        }
        let (u_mean, u_std) = mean_stddev(&uniform);
        let (h_mean, h_std) = mean_stddev(&halving);
        rows.push(BudgetSweepRow {
            budget,
            uniform_mean: u_mean,
            uniform_stddev: u_std,
            sh_mean: h_mean,
            sh_stddev: h_std,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::TaskRecord;

    fn rows(pairs: &[(&str, f64, f64)]) -> Vec<TaskRow> {
        pairs
            .iter()
            .map(|(id, m, o)| TaskRow {
                task_id: id.to_string(),
                metric: MetricKind::ExactMatch,
                method_score: *m,
                oracle_score: *o,
            })
            .collect()
    }

    #[test]
    fn oracle_equal_scores_average_exactly_100() {
        let rs = rows(&[("a", 0.7, 0.7), ("b", 0.3, 0.3), ("c", 0.9, 0.9)]);
        let (avg, excluded) = normalized_average(&rs);
        assert_eq!(avg, 100.0);
        assert!(excluded.is_empty());
    }

    #[test]
    fn scaling_methods_scales_average_linearly() {
        let base = rows(&[("a", 0.8, 0.5), ("b", 0.2, 0.4)]);
        let halved = rows(&[("a", 0.4, 0.5), ("b", 0.1, 0.4)]);
        let (avg, _) = normalized_average(&base);
        let (half_avg, _) = normalized_average(&halved);
        assert_eq!(half_avg, avg / 2.0);
    }

    #[test]
    fn zero_oracle_tasks_excluded_and_listed() {
        let rs = rows(&[("a", 0.5, 0.5), ("dead", 0.3, 0.0)]);
        let (avg, excluded) = normalized_average(&rs);
        assert_eq!(avg, 100.0);
        assert_eq!(excluded, vec!["dead".to_string()]);
    }

    struct TableEvaluator(BTreeMap<(String, String), f64>);

    impl Evaluator for TableEvaluator {
        fn score(&self, adapter_id: &str, samples: &[ValidationItem], _m: MetricKind) -> Result<f64> {
            // Keyed by (task marker from first sample input, adapter).
            let task = samples[0].input.split(':').next().unwrap().to_string();
            Ok(self.0[&(task, adapter_id.to_string())])
        }
    }

    fn matrix_catalog() -> (Catalog, TableEvaluator) {
        let items = |t: &str| vec![ValidationItem { input: format!("{t}:q"), target: "x".into() }];
        let tasks = vec![
            TaskRecord::new("t0", MetricKind::ExactMatch, items("t0")),
            TaskRecord::new("t1", MetricKind::ExactMatch, items("t1")),
        ];
        let pool: BTreeMap<String, LoraAdapter> = ["a0", "a1"]
            .iter()
            .map(|id| {
                let a = Matrix::zeros(1, 2);
                let b = Matrix::zeros(2, 1);
                (
                    id.to_string(),
                    LoraAdapter::new(*id, 1, 1.0, vec![crate::linalg::LayerDelta { a, b, layer_index: 0 }])
                        .unwrap(),
                )
            })
            .collect();
        let cat = Catalog::new("enc#0", tasks, pool, BTreeMap::new(), "").unwrap();
        let table = TableEvaluator(BTreeMap::from([
            (("t0".to_string(), "a0".to_string()), 0.2),
            (("t0".to_string(), "a1".to_string()), 0.8),
            (("t1".to_string(), "a0".to_string()), 0.5),
            (("t1".to_string(), "a1".to_string()), 0.5),
        ]));
        (cat, table)
    }

    #[test]
    fn performance_matrix_min_max_rows() {
        let (cat, ev) = matrix_catalog();
        let pm = performance_matrix(&cat, &ev).unwrap();
        assert_eq!(pm.raw.get(0, 0), 0.2);
        assert_eq!(pm.normalized.get(0, 0), 0.0);
        assert_eq!(pm.normalized.get(0, 1), 1.0);
        // Constant row maps to zeros.
        assert_eq!(pm.normalized.get(1, 0), 0.0);
        assert_eq!(pm.normalized.get(1, 1), 0.0);
    }

    #[test]
    fn mean_stddev_basics() {
        let (m, s) = mean_stddev(&[1.0, 1.0, 1.0]);
        assert_eq!(m, 1.0);
        assert_eq!(s, 0.0);
        let (m, s) = mean_stddev(&[0.0, 2.0]);
        assert_eq!(m, 1.0);
        assert!((s - std::f64::consts::SQRT_2).abs() < 1e-12);
    }
}
