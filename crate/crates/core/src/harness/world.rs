//! Seeded synthetic worlds for desk-scale verification.
//!
//! A world plants `T` task anchors on a ring in embedding space (adjacent
//! tasks overlap, distant tasks are nearly orthogonal) and `N` adapters with
//! known per-task skills. Queries are jittered anchors; the toy backend is a
//! single zero-weight layer, so fused logits come entirely from adapter
//! deltas and decode to `label...` strings. Every stream is derived from the
//! world seed, so identical specs reproduce identical worlds.
//!
//! Two evaluation channels coexist:
//! - [`AffinityEvaluator`] scores adapters from the planted affinity matrix
//!   plus optional per-sample noise; it drives pairing searches and budget
//!   sweeps, and is sample-independent when the noise scale is zero.
//! - [`WorldPipeline`] runs the real text pipeline (encode, route, fuse,
//!   decode, metric) for regime evaluations.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::catalog::{Catalog, TaskRecord, ValidationItem, DEFAULT_VALIDATION_CAP};
use crate::error::{Error, Result};
use crate::fusion::{compose_output_space, RoutedAdapter, RoutingDecision};
use crate::harness::{RegimePipeline, TestSets};
use crate::linalg::{
    Activation, BackendLayer, LayerDelta, LoraAdapter, Matrix, ToyBackend, Vector,
};
use crate::metrics::MetricKind;
use crate::pairing::Evaluator;
use crate::retrieval::{hash_str, mix64, Embedding, Encoder, EncoderSpec, HashedNgramEncoder};

/// Skill of each adapter on the task it is aligned with.
const ALIGNED_PRIMARY: f64 = 0.90;
/// Aligned adapters' secondary skill on ring neighbors.
const ALIGNED_RING1: f64 = 0.45;
/// ...and on second-ring neighbors.
const ALIGNED_RING2: f64 = 0.15;
/// Best surplus adapter's skill on its primary task; later tiers decay
/// slowly, forming a tight rival band below the aligned adapter that makes
/// budgeted selection genuinely hard under sample noise.
const EXTRA_PRIMARY: f64 = 0.78;
const EXTRA_DECAY: f64 = 0.998;
const EXTRA_RING: f64 = 0.30;

fn default_validation_per_task() -> usize {
    DEFAULT_VALIDATION_CAP
}

fn default_test_per_task() -> usize {
    50
}

/// Parameters of a synthetic world.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldSpec {
    /// Number of tasks `T` (at least 2).
    pub tasks: usize,
    /// Number of adapters `N` (at least `T`).
    pub adapters: usize,
    /// Embedding dimension (at least `4 * T` so ring anchors stay separated).
    pub embed_dim: usize,
    /// Scale of both query jitter and evaluator sample noise.
    pub noise_sigma: f64,
    pub seed: u64,
    #[serde(default = "default_validation_per_task")]
    pub validation_per_task: usize,
    #[serde(default = "default_test_per_task")]
    pub test_per_task: usize,
}

impl WorldSpec {
    pub fn validate(&self) -> Result<()> {
        if self.tasks < 2 {
            return Err(Error::Config(format!("world needs at least 2 tasks, got {}", self.tasks)));
        }
        if self.adapters < self.tasks {
            return Err(Error::Config(format!(
                "world needs at least as many adapters ({}) as tasks ({})",
                self.adapters, self.tasks
            )));
        }
        if self.embed_dim < 4 * self.tasks {
            return Err(Error::Config(format!(
                "embed_dim {} too small for {} ring anchors; need at least {}",
                self.embed_dim,
                self.tasks,
                4 * self.tasks
            )));
        }
        if !(self.noise_sigma.is_finite() && self.noise_sigma >= 0.0) {
            return Err(Error::Config(format!("noise_sigma {} must be >= 0", self.noise_sigma)));
        }
        if self.validation_per_task == 0 || self.validation_per_task > DEFAULT_VALIDATION_CAP {
            return Err(Error::Config(format!(
                "validation_per_task {} outside 1..={DEFAULT_VALIDATION_CAP}",
                self.validation_per_task
            )));
        }
        if self.test_per_task == 0 {
            return Err(Error::Config("test_per_task must be positive".into()));
        }
        Ok(())
    }
}

pub fn task_id(index: usize) -> String {
    format!("task{index:03}")
}

pub fn adapter_id(index: usize) -> String {
    format!("adapter{index:03}")
}

pub fn label(index: usize) -> String {
    format!("label{index:03}")
}

fn query_text(task: usize, query: usize) -> String {
    format!("task{task:03} q{query:05}")
}

/// Parse `"taskNNN qNNNNN"` into (task, query) indices.
fn parse_world_query(text: &str) -> Option<(usize, usize)> {
    let mut parts = text.split_whitespace();
    let t = parts.next()?.strip_prefix("task")?.parse().ok()?;
    let q = parts.next()?.strip_prefix('q')?.parse().ok()?;
    if parts.next().is_some() {
        return None;
    }
    Some((t, q))
}

fn parse_adapter_index(id: &str) -> Option<usize> {
    id.strip_prefix("adapter")?.parse().ok()
}

/// Unit-norm ring anchors: Gaussian bumps spaced evenly around the
/// coordinate circle, width tuned so adjacent anchors overlap (~0.6 cosine)
/// while anchors two steps apart are nearly orthogonal.
fn build_anchors(tasks: usize, dim: usize) -> Vec<Vec<f64>> {
    let spacing = dim as f64 / tasks as f64;
    let width = spacing / 1.43;
    (0..tasks)
        .map(|i| {
            let center = i as f64 * spacing;
            let mut v: Vec<f64> = (0..dim)
                .map(|c| {
                    let direct = (c as f64 - center).abs();
                    let ring = direct.min(dim as f64 - direct);
                    (-(ring * ring) / (2.0 * width * width)).exp()
                })
                .collect();
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            for x in &mut v {
                *x /= norm;
            }
            v
        })
        .collect()
}

/// Planted per-task skills for adapter `j`. Aligned adapters (`j < T`) are
/// strongest on their own task with decaying ring skills; surplus adapters
/// specialize on `(j - T) mod T` in decaying tiers so pools form a dense
/// near-best continuum for selection searches.
fn adapter_skills(spec: &WorldSpec, j: usize) -> BTreeMap<usize, f64> {
    let t = spec.tasks;
    let mut skills: BTreeMap<usize, f64> = BTreeMap::new();
    let bump = |skills: &mut BTreeMap<usize, f64>, task: usize, s: f64| {
        let slot = skills.entry(task).or_insert(0.0);
        if s > *slot {
            *slot = s;
        }
    };
    if j < t {
        bump(&mut skills, j, ALIGNED_PRIMARY);
        bump(&mut skills, (j + 1) % t, ALIGNED_RING1);
        bump(&mut skills, (j + t - 1) % t, ALIGNED_RING1);
        bump(&mut skills, (j + 2) % t, ALIGNED_RING2);
        bump(&mut skills, (j + t - 2) % t, ALIGNED_RING2);
    } else {
        let primary = (j - t) % t;
        let tier = ((j - t) / t) as i32;
        bump(&mut skills, primary, EXTRA_PRIMARY * EXTRA_DECAY.powi(tier));
        bump(&mut skills, (primary + 1) % t, EXTRA_RING);
        bump(&mut skills, (primary + t - 1) % t, EXTRA_RING);
    }
    skills
}

fn unit_hash(seed: u64, a: u64, b: u64) -> f64 {
    (mix64(mix64(seed ^ 0xaff1_aff1) ^ (a << 32) ^ b) >> 11) as f64 / (1u64 << 53) as f64
}

fn normals(rng: &mut ChaCha8Rng, count: usize) -> Vec<f64> {
    (0..count).map(|_| StandardNormal.sample(rng)).collect()
}

/// Encoder whose embeddings are planted anchors plus seeded jitter; text
/// outside the world's `taskNNN qNNNNN` form falls back to a deterministic
/// pseudo-random unit vector.
#[derive(Debug, Clone)]
pub struct SyntheticEncoder {
    spec: EncoderSpec,
    anchors: Vec<Vec<f64>>,
    sigma: f64,
    seed: u64,
}

impl SyntheticEncoder {
    pub fn new(tasks: usize, dim: usize, sigma: f64, seed: u64) -> Self {
        let spec = EncoderSpec::new(
            "world",
            dim,
            &[
                ("seed", seed.to_string()),
                ("sigma", format!("{sigma:?}")),
                ("tasks", tasks.to_string()),
            ],
        );
        SyntheticEncoder { spec, anchors: build_anchors(tasks, dim), sigma, seed }
    }

    pub fn from_fingerprint(fp: &str) -> Result<Self> {
        let (name, dim, params) = EncoderSpec::parse_fingerprint(fp)?;
        if name != "world" {
            return Err(Error::EncoderMismatch(format!("{fp} is not a world fingerprint")));
        }
        let get = |key: &str| {
            params
                .get(key)
                .ok_or_else(|| Error::EncoderMismatch(format!("{fp} lacks {key}")))
        };
        let seed: u64 = get("seed")?.parse().map_err(|_| Error::EncoderMismatch(format!("{fp}: bad seed")))?;
        let sigma: f64 = get("sigma")?.parse().map_err(|_| Error::EncoderMismatch(format!("{fp}: bad sigma")))?;
        let tasks: usize = get("tasks")?.parse().map_err(|_| Error::EncoderMismatch(format!("{fp}: bad tasks")))?;
        Ok(SyntheticEncoder::new(tasks, dim, sigma, seed))
    }

    fn jittered_anchor(&self, task: usize, query: usize) -> Vec<f64> {
        let anchor = &self.anchors[task];
        if self.sigma == 0.0 {
            return anchor.clone();
        }
        let dim = anchor.len();
        let stream = mix64(self.seed ^ mix64(0x0a11_c0de ^ ((task as u64) << 32) ^ query as u64));
        let mut rng = ChaCha8Rng::seed_from_u64(stream);
        let scale = self.sigma / (dim as f64).sqrt();
        anchor
            .iter()
            .zip(normals(&mut rng, dim))
            .map(|(a, g)| a + scale * g)
            .collect()
    }
}

impl Encoder for SyntheticEncoder {
    fn spec(&self) -> &EncoderSpec {
        &self.spec
    }

    fn encode(&self, _instruction: &str, body: &str) -> Result<Embedding> {
        let dim = self.spec.dimension;
        match parse_world_query(body) {
            Some((t, q)) if t < self.anchors.len() => Embedding::new(self.jittered_anchor(t, q)),
            _ => {
                let mut rng = ChaCha8Rng::seed_from_u64(hash_str(self.seed, body));
                let mut v = normals(&mut rng, dim);
                let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                for x in &mut v {
                    *x /= norm;
                }
                Embedding::new(v)
            }
        }
    }
}

/// A generated world: tasks with validation/test splits, an adapter pool
/// with planted skills, the planted affinity matrix, ground-truth task-to-
/// adapter alignment, the toy backend, and the synthetic encoder.
#[derive(Debug, Clone)]
pub struct SyntheticWorld {
    pub spec: WorldSpec,
    pub tasks: Vec<TaskRecord>,
    pub pool: BTreeMap<String, LoraAdapter>,
    /// `affinity[task][adapter]`: planted evaluator score, unique row argmax.
    pub affinity: Vec<Vec<f64>>,
    pub aligned: BTreeMap<String, String>,
    pub backend: ToyBackend,
    pub encoder: SyntheticEncoder,
    test_sets: TestSets,
    /// Per (task, adapter, sample) evaluator noise; zeros when sigma is 0.
    noise: Vec<Vec<Vec<f64>>>,
}

/// Build a world from its spec. Deterministic: identical specs yield
/// identical worlds.
pub fn generate_world(spec: &WorldSpec) -> Result<SyntheticWorld> {
    spec.validate()?;
    let (t, n, dim) = (spec.tasks, spec.adapters, spec.embed_dim);
    let encoder = SyntheticEncoder::new(t, dim, spec.noise_sigma, spec.seed);
    let anchors = &encoder.anchors;

    let mut pool = BTreeMap::new();
    let mut skills_by_adapter = Vec::with_capacity(n);
    for j in 0..n {
        let skills = adapter_skills(spec, j);
        let rank = skills.len();
        let mut a_values = Vec::with_capacity(rank * dim);
        let mut b = Matrix::zeros(t, rank);
        for (k, (&task, &skill)) in skills.iter().enumerate() {
            a_values.extend(anchors[task].iter().map(|v| skill * v));
            b.set(task, k, 1.0);
        }
        let a = Matrix::new(rank, dim, a_values)?;
        // alpha = rank so the alpha/rank scale is exactly 1.
        let adapter = LoraAdapter::new(adapter_id(j), rank, rank as f64, vec![LayerDelta {
            a,
            b,
            layer_index: 0,
        }])?;
        pool.insert(adapter.id().to_string(), adapter);
        skills_by_adapter.push(skills);
    }

    let mut affinity = vec![vec![0.0; n]; t];
    for (i, row) in affinity.iter_mut().enumerate() {
        for (j, slot) in row.iter_mut().enumerate() {
            *slot = match skills_by_adapter[j].get(&i) {
                Some(&s) => s,
                None => 0.02 + 0.03 * unit_hash(spec.seed, i as u64, j as u64),
            };
        }
    }

    let total_samples = spec.validation_per_task + spec.test_per_task;
    let mut tasks = Vec::with_capacity(t);
    let mut test_sets = TestSets::new();
    for i in 0..t {
        let items: Vec<ValidationItem> = (0..total_samples)
            .map(|q| ValidationItem { input: query_text(i, q), target: label(i) })
            .collect();
        let (validation, test) = items.split_at(spec.validation_per_task);
        tasks.push(TaskRecord::new(task_id(i), MetricKind::ExactMatch, validation.to_vec()));
        test_sets.insert(task_id(i), test.to_vec());
    }

    let noise = (0..t)
        .map(|i| {
            (0..n)
                .map(|j| {
                    if spec.noise_sigma == 0.0 {
                        vec![0.0; total_samples]
                    } else {
                        let stream = mix64(
                            spec.seed ^ mix64(0x0153_beef ^ ((i as u64) << 32) ^ j as u64),
                        );
                        let mut rng = ChaCha8Rng::seed_from_u64(stream);
                        normals(&mut rng, total_samples)
                            .into_iter()
                            .map(|g| spec.noise_sigma * g)
                            .collect()
                    }
                })
                .collect()
        })
        .collect();

    let aligned = (0..t).map(|i| (task_id(i), adapter_id(i))).collect();
    let backend = ToyBackend::new(vec![BackendLayer {
        weight: Matrix::zeros(t, dim),
        activation: Activation::Identity,
    }])?;

    Ok(SyntheticWorld {
        spec: spec.clone(),
        tasks,
        pool,
        affinity,
        aligned,
        backend,
        encoder,
        test_sets,
        noise,
    })
}

impl SyntheticWorld {
    /// Fresh unpaired catalog over this world's tasks and pool
    /// (representations not yet built).
    pub fn catalog(&self) -> Result<Catalog> {
        Catalog::new(
            self.encoder.spec().fingerprint.clone(),
            self.tasks.clone(),
            self.pool.clone(),
            BTreeMap::new(),
            "",
        )
    }

    pub fn test_sets(&self) -> &TestSets {
        &self.test_sets
    }

    pub fn affinity_evaluator(&self) -> AffinityEvaluator<'_> {
        AffinityEvaluator { world: self }
    }

    pub fn pipeline(&self) -> WorldPipeline<'_> {
        WorldPipeline { world: self }
    }
}

/// Scores adapters from the planted affinity matrix plus per-sample noise.
/// Deterministic given the adapter and the exact sample multiset.
pub struct AffinityEvaluator<'w> {
    world: &'w SyntheticWorld,
}

impl Evaluator for AffinityEvaluator<'_> {
    fn score(&self, adapter_id: &str, samples: &[ValidationItem], _metric: MetricKind) -> Result<f64> {
        if samples.is_empty() {
            return Err(Error::Evaluation("no samples".into()));
        }
        let j = parse_adapter_index(adapter_id)
            .filter(|j| *j < self.world.spec.adapters)
            .ok_or_else(|| Error::Evaluation(format!("unknown adapter {adapter_id}")))?;
        let mut total = 0.0;
        for item in samples {
            let (t, q) = parse_world_query(&item.input)
                .filter(|(t, q)| *t < self.world.spec.tasks && *q < self.world.noise[*t][j].len())
                .ok_or_else(|| Error::Evaluation(format!("unknown sample {:?}", item.input)))?;
            total += (self.world.affinity[t][j] + self.world.noise[t][j][q]).clamp(0.0, 1.0);
        }
        Ok(total / samples.len() as f64)
    }
}

/// Index of the strongest logit, first index on ties.
fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

fn one_hot_decision(adapter_id: &str) -> RoutingDecision {
    RoutingDecision {
        query_id: "single".to_string(),
        entries: vec![RoutedAdapter {
            task_id: String::new(),
            adapter_id: adapter_id.to_string(),
            weight: 1.0,
        }],
    }
}

/// The world's text pipeline: encode the query, fuse adapter deltas through
/// the toy backend, and decode the strongest logit as a label string.
pub struct WorldPipeline<'w> {
    world: &'w SyntheticWorld,
}

impl RegimePipeline for WorldPipeline<'_> {
    fn encoder(&self) -> &dyn Encoder {
        &self.world.encoder
    }

    fn predict_fused(
        &self,
        pool: &BTreeMap<String, LoraAdapter>,
        decision: &RoutingDecision,
        input: &str,
    ) -> Result<String> {
        let emb = self.world.encoder.encode(crate::retrieval::TASK_INSTRUCTION, input)?;
        let x = Vector::new(emb.values().to_vec())?;
        let y = compose_output_space(&self.world.backend, decision, pool, &x)?;
        Ok(label(argmax(y.values())))
    }

    fn predict_single(
        &self,
        pool: &BTreeMap<String, LoraAdapter>,
        adapter_id: &str,
        input: &str,
    ) -> Result<String> {
        self.predict_fused(pool, &one_hot_decision(adapter_id), input)
    }
}

/// File-driven serving pipeline: reconstructs the encoder from the
/// catalog's fingerprint and derives a single zero-weight layer backend
/// from the pool's layer-0 shapes. Output component `i` decodes to
/// `label{i:03}`, the toy serving convention.
pub struct ToyPipeline {
    backend: ToyBackend,
    encoder: Box<dyn Encoder>,
}

/// Rebuild the encoder a catalog was embedded with from its fingerprint.
pub fn encoder_from_fingerprint(fp: &str) -> Result<Box<dyn Encoder>> {
    let (name, _, _) = EncoderSpec::parse_fingerprint(fp)?;
    match name.as_str() {
        "hashed-ngram" => Ok(Box::new(HashedNgramEncoder::from_fingerprint(fp)?)),
        "world" => Ok(Box::new(SyntheticEncoder::from_fingerprint(fp)?)),
        other => Err(Error::EncoderMismatch(format!("no encoder registered for {other:?}"))),
    }
}

impl ToyPipeline {
    pub fn from_catalog(catalog: &Catalog) -> Result<Self> {
        let encoder = encoder_from_fingerprint(&catalog.encoder_fingerprint)?;
        if catalog.pool.is_empty() {
            return Err(Error::Config("cannot build a serving pipeline without adapters".into()));
        }
        let dim = encoder.spec().dimension;
        let mut out_dim = None;
        for adapter in catalog.pool.values() {
            let layer = adapter.layer(0).ok_or_else(|| {
                Error::Validation(format!("adapter {} has no layer-0 delta", adapter.id()))
            })?;
            if layer.a.cols() != dim {
                return Err(Error::Dimension(format!(
                    "adapter {} expects inputs of length {}, encoder emits {dim}",
                    adapter.id(),
                    layer.a.cols()
                )));
            }
            match out_dim {
                None => out_dim = Some(layer.b.rows()),
                Some(m) if m != layer.b.rows() => {
                    return Err(Error::Dimension(format!(
                        "adapter {} outputs {} values, pool established {m}",
                        adapter.id(),
                        layer.b.rows()
                    )))
                }
                _ => {}
            }
        }
        let backend = ToyBackend::new(vec![BackendLayer {
            weight: Matrix::zeros(out_dim.unwrap(), dim),
            activation: Activation::Identity,
        }])?;
        Ok(ToyPipeline { backend, encoder })
    }

    pub fn encoder(&self) -> &dyn Encoder {
        self.encoder.as_ref()
    }
}

impl RegimePipeline for ToyPipeline {
    fn encoder(&self) -> &dyn Encoder {
        self.encoder.as_ref()
    }

    fn predict_fused(
        &self,
        pool: &BTreeMap<String, LoraAdapter>,
        decision: &RoutingDecision,
        input: &str,
    ) -> Result<String> {
        let emb = self.encoder.encode(crate::retrieval::TASK_INSTRUCTION, input)?;
        let x = Vector::new(emb.values().to_vec())?;
        let y = compose_output_space(&self.backend, decision, pool, &x)?;
        Ok(label(argmax(y.values())))
    }

    fn predict_single(
        &self,
        pool: &BTreeMap<String, LoraAdapter>,
        adapter_id: &str,
        input: &str,
    ) -> Result<String> {
        self.predict_fused(pool, &one_hot_decision(adapter_id), input)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::retrieval::cosine;

    fn spec(tasks: usize, adapters: usize, sigma: f64, seed: u64) -> WorldSpec {
        WorldSpec {
            tasks,
            adapters,
            embed_dim: 4 * tasks.max(8),
            noise_sigma: sigma,
            seed,
            validation_per_task: 24,
            test_per_task: 8,
        }
    }

    #[test]
    fn anchors_are_unit_and_ring_ordered() {
        let anchors = build_anchors(8, 64);
        for a in &anchors {
            let norm: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
            assert!((norm - 1.0).abs() < 1e-12);
        }
        let at = |i: usize| Embedding::new(anchors[i].clone()).unwrap();
        let near = cosine(&at(0), &at(1)).unwrap();
        let far = cosine(&at(0), &at(4)).unwrap();
        assert!(near > 0.4 && near < 0.8, "adjacent cosine {near}");
        assert!(far < 0.1, "opposite cosine {far}");
    }

    #[test]
    fn zero_sigma_queries_sit_on_anchors() {
        let world = generate_world(&spec(4, 4, 0.0, 1)).unwrap();
        let emb = world.encoder.encode("", &query_text(2, 5)).unwrap();
        let anchor = Embedding::new(world.encoder.anchors[2].clone()).unwrap();
        assert_eq!(emb, anchor);
    }

    #[test]
    fn world_is_deterministic() {
        let s = spec(3, 6, 0.1, 9);
        let w1 = generate_world(&s).unwrap();
        let w2 = generate_world(&s).unwrap();
        assert_eq!(w1.affinity, w2.affinity);
        assert_eq!(w1.pool, w2.pool);
        assert_eq!(
            w1.encoder.encode("", &query_text(0, 0)).unwrap(),
            w2.encoder.encode("", &query_text(0, 0)).unwrap()
        );
    }

    #[test]
    fn affinity_rows_have_unique_argmax_on_diagonal() {
        let world = generate_world(&spec(5, 17, 0.2, 3)).unwrap();
        for (i, row) in world.affinity.iter().enumerate() {
            let best = argmax(row);
            assert_eq!(best, i, "row {i} argmax at {best}");
            let mut sorted = row.clone();
            sorted.sort_by(f64::total_cmp);
            assert!(sorted[row.len() - 1] > sorted[row.len() - 2], "row {i} argmax not unique");
        }
    }

    #[test]
    fn exhaustive_pairing_recovers_the_diagonal() {
        let world = generate_world(&spec(4, 9, 0.0, 5)).unwrap();
        let evaluator = world.affinity_evaluator();
        for (i, task) in world.tasks.iter().enumerate() {
            let outcome =
                crate::pairing::exhaustive_pairing(task, &world.pool, &evaluator).unwrap();
            assert_eq!(outcome.winner, adapter_id(i));
        }
    }

    #[test]
    fn noiseless_affinity_evaluator_is_sample_independent() {
        let world = generate_world(&spec(3, 5, 0.0, 2)).unwrap();
        let evaluator = world.affinity_evaluator();
        let task = &world.tasks[1];
        let s1 = evaluator.score("adapter002", &task.validation[..3], task.metric).unwrap();
        let s2 = evaluator.score("adapter002", &task.validation[5..9], task.metric).unwrap();
        assert_eq!(s1, s2);
        assert_eq!(s1, world.affinity[1][2]);
    }

    #[test]
    fn aligned_adapter_decodes_its_own_task() {
        let world = generate_world(&spec(4, 8, 0.0, 7)).unwrap();
        let pipeline = world.pipeline();
        for (i, _) in world.tasks.iter().enumerate() {
            let pred = pipeline
                .predict_single(&world.pool, &adapter_id(i), &query_text(i, 0))
                .unwrap();
            assert_eq!(pred, label(i));
        }
    }

    #[test]
    fn neighbor_adapter_alone_mislabels() {
        // An adjacent task's adapter decodes its own label, not the query's.
        let world = generate_world(&spec(6, 6, 0.0, 7)).unwrap();
        let pipeline = world.pipeline();
        let pred = pipeline
            .predict_single(&world.pool, &adapter_id(1), &query_text(0, 0))
            .unwrap();
        assert_eq!(pred, label(1));
    }

    #[test]
    fn world_catalog_validates() {
        let world = generate_world(&spec(3, 4, 0.05, 11)).unwrap();
        let catalog = world.catalog().unwrap();
        assert_eq!(catalog.tasks.len(), 3);
        assert_eq!(catalog.pool.len(), 4);
        assert_eq!(world.test_sets().len(), 3);
        assert!(catalog.pairing.is_empty());
    }

    #[test]
    fn synthetic_encoder_round_trips_through_fingerprint() {
        let world = generate_world(&spec(4, 4, 0.25, 13)).unwrap();
        let fp = &world.encoder.spec().fingerprint;
        let rebuilt = SyntheticEncoder::from_fingerprint(fp).unwrap();
        let q = query_text(1, 3);
        assert_eq!(
            world.encoder.encode("", &q).unwrap(),
            rebuilt.encode("", &q).unwrap()
        );
        assert_eq!(rebuilt.spec().fingerprint, *fp);
    }

    #[test]
    fn spec_validation_rejects_bad_worlds() {
        assert!(generate_world(&spec(1, 4, 0.0, 0)).is_err());
        let mut s = spec(4, 3, 0.0, 0);
        s.adapters = 3;
        assert!(generate_world(&s).is_err());
        let mut s = spec(4, 8, 0.0, 0);
        s.embed_dim = 4;
        assert!(generate_world(&s).is_err());
    }
}
