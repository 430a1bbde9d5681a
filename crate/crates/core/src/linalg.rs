//! Dense vector/matrix arithmetic, LoRA adapter representation, and the toy
//! feed-forward backend used for desk-scale verification.
//!
//! An adapter is a per-layer pair of low-rank matrices `(A, B)`; its
//! contribution to a layer output is `(alpha / rank) * B * (A * x)`, added on
//! top of the frozen base weight `W`. The backend applies layers in order and
//! sums weighted adapter deltas into each layer before the activation.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense vector of 64-bit reals. Entries are always finite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Vector {
    values: Vec<f64>,
}

impl Vector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::Validation(format!("non-finite vector entry {v}")));
        }
        Ok(Vector { values })
    }

    pub fn zeros(dim: usize) -> Self {
        Vector { values: vec![0.0; dim] }
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn dot(&self, other: &Vector) -> Result<f64> {
        if self.dim() != other.dim() {
            return Err(Error::Dimension(format!(
                "dot of {} vs {}",
                self.dim(),
                other.dim()
            )));
        }
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a * b)
            .sum())
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// `self += scale * other`; dimensions must already match.
    pub(crate) fn add_scaled(&mut self, scale: f64, other: &Vector) {
        debug_assert_eq!(self.dim(), other.dim());
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += scale * b;
        }
    }
}

impl TryFrom<Vec<f64>> for Vector {
    type Error = Error;
    fn try_from(values: Vec<f64>) -> Result<Self> {
        Vector::new(values)
    }
}

impl From<Vector> for Vec<f64> {
    fn from(v: Vector) -> Vec<f64> {
        v.values
    }
}

/// Row-major dense matrix of 64-bit reals. Entries are always finite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct Matrix {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != rows * cols {
            return Err(Error::Validation(format!(
                "matrix {rows}x{cols} needs {} values, got {}",
                rows * cols,
                values.len()
            )));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::Validation(format!("non-finite matrix entry {v}")));
        }
        Ok(Matrix { rows, cols, values })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix { rows, cols, values: vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m.values[i * n + i] = 1.0;
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.values[r * self.cols + c]
    }

    pub(crate) fn set(&mut self, r: usize, c: usize, v: f64) {
        self.values[r * self.cols + c] = v;
    }
}

impl TryFrom<Vec<Vec<f64>>> for Matrix {
    type Error = Error;
    fn try_from(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n_rows = rows.len();
        let n_cols = rows.first().map_or(0, |r| r.len());
        if rows.iter().any(|r| r.len() != n_cols) {
            return Err(Error::Format("ragged matrix rows".into()));
        }
        Matrix::new(n_rows, n_cols, rows.into_iter().flatten().collect())
    }
}

impl From<Matrix> for Vec<Vec<f64>> {
    fn from(m: Matrix) -> Vec<Vec<f64>> {
        m.values.chunks(m.cols.max(1)).map(|c| c.to_vec()).collect()
    }
}

/// Standard matrix-vector product in 64-bit arithmetic.
pub fn matvec(m: &Matrix, x: &Vector) -> Result<Vector> {
    if m.cols != x.dim() {
        return Err(Error::Dimension(format!(
            "matvec {}x{} with vector of length {}",
            m.rows,
            m.cols,
            x.dim()
        )));
    }
    let mut out = vec![0.0; m.rows];
    for (r, slot) in out.iter_mut().enumerate() {
        let row = &m.values[r * m.cols..(r + 1) * m.cols];
        *slot = row.iter().zip(x.values()).map(|(a, b)| a * b).sum();
    }
    Ok(Vector { values: out })
}

/// One layer's low-rank update: `A` is `rank x d`, `B` is `m x rank`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerDelta {
    #[serde(rename = "A")]
    pub a: Matrix,
    #[serde(rename = "B")]
    pub b: Matrix,
    pub layer_index: usize,
}

/// A routable LoRA adapter: an id plus one `(A, B)` pair per covered layer,
/// all sharing the same rank, with the standard `alpha / rank` output scale.
#[derive(Debug, Clone, PartialEq)]
pub struct LoraAdapter {
    id: String,
    rank: usize,
    alpha: f64,
    layers: Vec<LayerDelta>,
}

impl LoraAdapter {
    pub fn new(id: impl Into<String>, rank: usize, alpha: f64, mut layers: Vec<LayerDelta>) -> Result<Self> {
        let id = id.into();
        if id.is_empty() {
            return Err(Error::Validation("adapter id must be non-empty".into()));
        }
        if rank == 0 {
            return Err(Error::Validation(format!("adapter {id}: rank must be positive")));
        }
        if !(alpha.is_finite() && alpha > 0.0) {
            return Err(Error::Validation(format!("adapter {id}: alpha must be a positive real")));
        }
        layers.sort_by_key(|l| l.layer_index);
        for pair in layers.windows(2) {
            if pair[0].layer_index == pair[1].layer_index {
                return Err(Error::Validation(format!(
                    "adapter {id}: duplicate delta for layer {}",
                    pair[0].layer_index
                )));
            }
        }
        for layer in &layers {
            if layer.a.rows != rank || layer.b.cols != rank {
                return Err(Error::Validation(format!(
                    "adapter {id} layer {}: A is {}x{}, B is {}x{}, expected rank {rank}",
                    layer.layer_index, layer.a.rows, layer.a.cols, layer.b.rows, layer.b.cols
                )));
            }
        }
        Ok(LoraAdapter { id, rank, alpha, layers })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn layers(&self) -> &[LayerDelta] {
        &self.layers
    }

    pub fn layer(&self, layer_index: usize) -> Option<&LayerDelta> {
        self.layers.iter().find(|l| l.layer_index == layer_index)
    }

    /// The `alpha / rank` scale applied to every delta.
    pub fn scale(&self) -> f64 {
        self.alpha / self.rank as f64
    }
}

/// The adapter's contribution `(alpha / rank) * B * (A * x)` at one layer.
/// Does not include the base term `W * x`.
pub fn lora_delta(adapter: &LoraAdapter, layer_index: usize, x: &Vector) -> Result<Vector> {
    let layer = adapter.layer(layer_index).ok_or_else(|| {
        Error::MissingLayer(format!("adapter {} has no delta for layer {layer_index}", adapter.id))
    })?;
    let ax = matvec(&layer.a, x)?;
    let mut bax = matvec(&layer.b, &ax)?;
    let scale = adapter.scale();
    for v in &mut bax.values {
        *v *= scale;
    }
    Ok(bax)
}

/// Pointwise activation applied after each backend layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Identity,
    Relu,
    Tanh,
}

impl Activation {
    fn apply(self, v: f64) -> f64 {
        match self {
            Activation::Identity => v,
            Activation::Relu => v.max(0.0),
            Activation::Tanh => v.tanh(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackendLayer {
    pub weight: Matrix,
    pub activation: Activation,
}

/// A small frozen feed-forward stack standing in for the base model.
#[derive(Debug, Clone, PartialEq)]
pub struct ToyBackend {
    layers: Vec<BackendLayer>,
}

impl ToyBackend {
    pub fn new(layers: Vec<BackendLayer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::Validation("backend needs at least one layer".into()));
        }
        for (i, pair) in layers.windows(2).enumerate() {
            if pair[0].weight.rows != pair[1].weight.cols {
                return Err(Error::Validation(format!(
                    "backend layer {i} outputs {} but layer {} expects {}",
                    pair[0].weight.rows,
                    i + 1,
                    pair[1].weight.cols
                )));
            }
        }
        Ok(ToyBackend { layers })
    }

    pub fn layers(&self) -> &[BackendLayer] {
        &self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].weight.cols
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().unwrap().weight.rows
    }

    /// Base forward pass without any adapters.
    pub fn forward_plain(&self, x: &Vector) -> Result<Vector> {
        self.forward(x, &[])
    }

    /// Forward pass with a weighted adapter set fused in the output space:
    /// per layer, `h = act(W x + sum_i w_i * delta_i(layer, x))`.
    ///
    /// Adapters that do not cover a given layer contribute nothing there.
    /// Deltas are accumulated in the order given; callers that need a fixed
    /// floating-point association sort by adapter id first.
    pub fn forward(&self, x: &Vector, weighted_adapters: &[(f64, &LoraAdapter)]) -> Result<Vector> {
        if x.dim() != self.input_dim() {
            return Err(Error::Dimension(format!(
                "backend expects input of length {}, got {}",
                self.input_dim(),
                x.dim()
            )));
        }
        let mut h = x.clone();
        for (layer_index, layer) in self.layers.iter().enumerate() {
            let mut out = matvec(&layer.weight, &h)?;
            for (weight, adapter) in weighted_adapters {
                if adapter.layer(layer_index).is_some() {
                    let delta = lora_delta(adapter, layer_index, &h)?;
                    if delta.dim() != out.dim() {
                        return Err(Error::Dimension(format!(
                            "adapter {} layer {layer_index} produces {} outputs, backend layer has {}",
                            adapter.id(),
                            delta.dim(),
                            out.dim()
                        )));
                    }
                    out.add_scaled(*weight, &delta);
                }
            }
            for v in &mut out.values {
                *v = layer.activation.apply(*v);
            }
            h = out;
        }
        Ok(h)
    }
}

#[derive(Serialize, Deserialize)]
struct AdapterRecord {
    alpha: f64,
    id: String,
    layers: Vec<LayerDelta>,
    rank: usize,
}

#[derive(Serialize, Deserialize)]
struct PoolFile {
    adapters: Vec<AdapterRecord>,
}

/// Parse an adapter pool document from a JSON string.
pub fn pool_from_json(text: &str) -> Result<BTreeMap<String, LoraAdapter>> {
    let file: PoolFile = serde_json::from_str(text)?;
    let mut pool = BTreeMap::new();
    for rec in file.adapters {
        let adapter = LoraAdapter::new(rec.id, rec.rank, rec.alpha, rec.layers)?;
        if pool.contains_key(adapter.id()) {
            return Err(Error::Validation(format!("duplicate adapter id {}", adapter.id())));
        }
        pool.insert(adapter.id().to_string(), adapter);
    }
    Ok(pool)
}

/// Load an adapter pool file (`{"adapters": [...]}`).
pub fn load_pool(path: &Path) -> Result<BTreeMap<String, LoraAdapter>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    pool_from_json(&text)
}

/// Serialize an adapter pool to its canonical JSON form: adapters sorted by
/// id, keys lexicographic, numbers at full round-trip precision.
pub fn pool_to_json(pool: &BTreeMap<String, LoraAdapter>) -> String {
    let file = PoolFile {
        adapters: pool
            .values()
            .map(|a| AdapterRecord {
                alpha: a.alpha,
                id: a.id.clone(),
                layers: a.layers.clone(),
                rank: a.rank,
            })
            .collect(),
    };
    let mut text = serde_json::to_string_pretty(&file).expect("pool serialization");
    text.push('\n');
    text
}

/// Write an adapter pool file in canonical form.
pub fn save_pool(pool: &BTreeMap<String, LoraAdapter>, path: &Path) -> Result<()> {
    std::fs::write(path, pool_to_json(pool))
        .map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}
