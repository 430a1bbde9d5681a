//! Adapter composition: input-aware weighted fusion in the output space,
//! plus the two classic parameter-space modes (pairwise interpolation and
//! summed-factor merging) kept for comparison.
//!
//! Output-space fusion sums weighted per-layer delta outputs, so adapters of
//! different ranks compose freely. Parameter-space modes require matching
//! shapes and are enforced with explicit errors.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::catalog::Catalog;
use crate::error::{Error, Result};
use crate::linalg::{lora_delta, LayerDelta, LoraAdapter, Matrix, ToyBackend, Vector};
use crate::retrieval::{retrieve, Encoder, TASK_INSTRUCTION};

/// One resolved routing entry: a retrieved task, its paired adapter, and the
/// fusion weight (the retrieval probability, possibly merged).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoutedAdapter {
    pub task_id: String,
    pub adapter_id: String,
    pub weight: f64,
}

/// The resolved weighted adapter set for one query. Weights sum to 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoutingDecision {
    pub query_id: String,
    pub entries: Vec<RoutedAdapter>,
}

impl RoutingDecision {
    /// Check the simplex invariant and that every adapter resolves.
    pub fn validate(&self, pool: &BTreeMap<String, LoraAdapter>) -> Result<()> {
        if self.entries.is_empty() {
            return Err(Error::Validation(format!("decision {} has no entries", self.query_id)));
        }
        let mut total = 0.0;
        for entry in &self.entries {
            if !(0.0..=1.0).contains(&entry.weight) {
                return Err(Error::Validation(format!(
                    "decision {}: weight {} outside [0, 1]",
                    self.query_id, entry.weight
                )));
            }
            if !pool.contains_key(&entry.adapter_id) {
                return Err(Error::NotFound(format!(
                    "decision {}: adapter {} not in pool",
                    self.query_id, entry.adapter_id
                )));
            }
            total += entry.weight;
        }
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::Validation(format!(
                "decision {}: weights sum to {total}, expected 1",
                self.query_id
            )));
        }
        Ok(())
    }

    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("decision serialization")
    }

    pub fn from_json_line(line: &str) -> Result<Self> {
        serde_json::from_str(line).map_err(Error::from)
    }
}

/// How adapters are combined.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CompositionMode {
    /// Weighted sum of per-layer delta outputs.
    OutputSpace,
    /// Pairwise parameter interpolation with coefficient lambda in [0, 1].
    ParamInterp(f64),
    /// Summed-factor parameter merge `(sum w_i B_i)(sum w_i A_i)`.
    ParamProduct,
}

/// Fused forward pass: per layer, the delta is the weighted sum of each
/// entry's `(alpha/rank) * B (A x)`. Deltas accumulate in adapter-id order
/// so the floating-point association is fixed regardless of entry order.
pub fn compose_output_space(
    backend: &ToyBackend,
    decision: &RoutingDecision,
    pool: &BTreeMap<String, LoraAdapter>,
    x: &Vector,
) -> Result<Vector> {
    decision.validate(pool)?;
    let mut weighted: Vec<(f64, &LoraAdapter)> = decision
        .entries
        .iter()
        .map(|e| (e.weight, &pool[&e.adapter_id]))
        .collect();
    weighted.sort_by(|a, b| a.1.id().cmp(b.1.id()));
    backend.forward(x, &weighted)
}

/// Lazily evaluated pairwise interpolation of two adapters' deltas:
/// `delta(x) = lambda * delta_a(x) + (1 - lambda) * delta_b(x)`.
#[derive(Debug, Clone)]
pub struct InterpolatedDelta<'a> {
    a: &'a LoraAdapter,
    b: &'a LoraAdapter,
    lambda: f64,
}

impl InterpolatedDelta<'_> {
    pub fn delta(&self, layer_index: usize, x: &Vector) -> Result<Vector> {
        let mut da = lora_delta(self.a, layer_index, x)?;
        let db = lora_delta(self.b, layer_index, x)?;
        if da.dim() != db.dim() {
            return Err(Error::IncompatibleAdapters(format!(
                "layer {layer_index}: outputs {} vs {}",
                da.dim(),
                db.dim()
            )));
        }
        let values: Vec<f64> = da
            .values()
            .iter()
            .zip(db.values())
            .map(|(va, vb)| self.lambda * va + (1.0 - self.lambda) * vb)
            .collect();
        da = Vector::new(values)?;
        Ok(da)
    }
}

fn layer_indices(adapter: &LoraAdapter) -> Vec<usize> {
    adapter.layers().iter().map(|l| l.layer_index).collect()
}

/// Pairwise parameter interpolation (per-layer delta operator). Both
/// adapters must cover identical layer sets with matching outer dimensions.
pub fn compose_param_interp<'a>(
    a: &'a LoraAdapter,
    b: &'a LoraAdapter,
    lambda: f64,
) -> Result<InterpolatedDelta<'a>> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::Config(format!("lambda {lambda} outside [0, 1]")));
    }
    if layer_indices(a) != layer_indices(b) {
        return Err(Error::IncompatibleAdapters(format!(
            "{} and {} cover different layer sets",
            a.id(),
            b.id()
        )));
    }
    for (la, lb) in a.layers().iter().zip(b.layers()) {
        if la.a.cols() != lb.a.cols() || la.b.rows() != lb.b.rows() {
            return Err(Error::IncompatibleAdapters(format!(
                "{} and {} disagree on layer {} outer dimensions",
                a.id(),
                b.id(),
                la.layer_index
            )));
        }
    }
    Ok(InterpolatedDelta { a, b, lambda })
}

fn add_scaled_matrix(acc: &mut Matrix, weight: f64, m: &Matrix) {
    for r in 0..acc.rows() {
        for c in 0..acc.cols() {
            acc.set(r, c, acc.get(r, c) + weight * m.get(r, c));
        }
    }
}

/// Summed-factor parameter merge: per layer, `A' = sum w_i A_i` and
/// `B' = sum w_i B_i`, yielding one synthetic adapter. All inputs must share
/// rank, alpha, layer sets, and per-layer shapes. The cross terms make this
/// differ from output-space fusion in general.
pub fn compose_lorahub(adapters: &[&LoraAdapter], weights: &[f64]) -> Result<LoraAdapter> {
    if adapters.is_empty() {
        return Err(Error::EmptyPool("no adapters to merge".into()));
    }
    if adapters.len() != weights.len() {
        return Err(Error::Config(format!(
            "{} adapters but {} weights",
            adapters.len(),
            weights.len()
        )));
    }
    let first = adapters[0];
    for other in &adapters[1..] {
        if other.rank() != first.rank() {
            return Err(Error::IncompatibleAdapters(format!(
                "{} has rank {}, {} has rank {}",
                first.id(),
                first.rank(),
                other.id(),
                other.rank()
            )));
        }
        if other.alpha() != first.alpha() {
            return Err(Error::IncompatibleAdapters(format!(
                "{} has alpha {}, {} has alpha {}",
                first.id(),
                first.alpha(),
                other.id(),
                other.alpha()
            )));
        }
        if layer_indices(other) != layer_indices(first) {
            return Err(Error::IncompatibleAdapters(format!(
                "{} and {} cover different layer sets",
                first.id(),
                other.id()
            )));
        }
    }
    let mut layers = Vec::with_capacity(first.layers().len());
    for (li, base_layer) in first.layers().iter().enumerate() {
        let mut a_sum = Matrix::zeros(base_layer.a.rows(), base_layer.a.cols());
        let mut b_sum = Matrix::zeros(base_layer.b.rows(), base_layer.b.cols());
        for (adapter, weight) in adapters.iter().zip(weights) {
            let layer = &adapter.layers()[li];
            if layer.a.rows() != a_sum.rows()
                || layer.a.cols() != a_sum.cols()
                || layer.b.rows() != b_sum.rows()
                || layer.b.cols() != b_sum.cols()
            {
                return Err(Error::IncompatibleAdapters(format!(
                    "{} disagrees on layer {} shape",
                    adapter.id(),
                    layer.layer_index
                )));
            }
            add_scaled_matrix(&mut a_sum, *weight, &layer.a);
            add_scaled_matrix(&mut b_sum, *weight, &layer.b);
        }
        layers.push(LayerDelta { a: a_sum, b: b_sum, layer_index: base_layer.layer_index });
    }
    let ids: Vec<&str> = adapters.iter().map(|a| a.id()).collect();
    LoraAdapter::new(format!("lorahub[{}]", ids.join("+")), first.rank(), first.alpha(), layers)
}

/// Route one query: encode it under the task instruction, retrieve the
/// top-K tasks, resolve their paired adapters, and carry the retrieval
/// probabilities over as fusion weights. When two retrieved tasks map to
/// the same adapter their weights are summed onto one entry (keeping the
/// higher-ranked task's id), preserving the weight simplex.
pub fn route(
    catalog: &Catalog,
    encoder: &dyn Encoder,
    query_id: &str,
    query: &str,
    k: usize,
    temperature: f64,
) -> Result<RoutingDecision> {
    if catalog.pool.is_empty() {
        return Err(Error::EmptyPool("routing disabled: adapter pool is empty".into()));
    }
    let embedding = encoder.encode(TASK_INSTRUCTION, query)?;
    let retrieved = retrieve(catalog, encoder.spec(), &embedding, k, temperature)?;
    let mut entries: Vec<RoutedAdapter> = Vec::with_capacity(retrieved.entries.len());
    for hit in &retrieved.entries {
        let adapter_id = catalog.pairing.get(&hit.task_id).ok_or_else(|| {
            Error::Unpaired(format!("retrieved task {} has no paired adapter", hit.task_id))
        })?;
        match entries.iter_mut().find(|e| e.adapter_id == *adapter_id) {
            Some(existing) => existing.weight += hit.probability,
            None => entries.push(RoutedAdapter {
                task_id: hit.task_id.clone(),
                adapter_id: adapter_id.clone(),
                weight: hit.probability,
            }),
        }
    }
    Ok(RoutingDecision { query_id: query_id.to_string(), entries })
}
