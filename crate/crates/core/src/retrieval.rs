//! Query-to-task retrieval: encoder interface, task representations, and
//! top-K cosine retrieval with temperature softmax.
//!
//! A task representation is the mean embedding of a seeded sample of its
//! validation queries, each encoded under a fixed instruction prefix. At
//! query time the engine scans all `T` task representations (one similarity
//! evaluation each), keeps the top-K, and converts their similarities into
//! probabilities with a max-subtracted softmax.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::io::{BufRead, BufWriter, Write};
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::catalog::{Catalog, TaskRecord};
use crate::error::{Error, Result};

/// Instruction prefixed to every encoded sentence so embeddings capture task
/// similarity rather than raw content.
pub const TASK_INSTRUCTION: &str = "Represent the sentence for similar task retrieval";

/// Default number of validation queries sampled per task representation.
pub const DEFAULT_REPRESENTATION_SAMPLES: usize = 32;

/// Default softmax temperature for retrieval probabilities.
pub const DEFAULT_TEMPERATURE: f64 = 0.2;

/// Default number of tasks retrieved per query.
pub const DEFAULT_TOP_K: usize = 3;

/// A fixed-dimension embedding with finite entries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Embedding {
    values: Vec<f64>,
}

impl Embedding {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::Validation(format!("non-finite embedding entry {v}")));
        }
        Ok(Embedding { values })
    }

    pub fn zeros(dim: usize) -> Self {
        Embedding { values: vec![0.0; dim] }
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn dot(&self, other: &Embedding) -> Result<f64> {
        if self.dim() != other.dim() {
            return Err(Error::Dimension(format!(
                "embedding dot of {} vs {}",
                self.dim(),
                other.dim()
            )));
        }
        Ok(self.values.iter().zip(&other.values).map(|(a, b)| a * b).sum())
    }
}

impl TryFrom<Vec<f64>> for Embedding {
    type Error = Error;
    fn try_from(values: Vec<f64>) -> Result<Self> {
        Embedding::new(values)
    }
}

impl From<Embedding> for Vec<f64> {
    fn from(e: Embedding) -> Vec<f64> {
        e.values
    }
}

pub(crate) fn mix64(mut h: u64) -> u64 {
    h ^= h >> 30;
    h = h.wrapping_mul(0xbf58_476d_1ce4_e5b9);
    h ^= h >> 27;
    h = h.wrapping_mul(0x94d0_49bb_1331_11eb);
    h ^ (h >> 31)
}

pub(crate) fn hash_str(seed: u64, text: &str) -> u64 {
    let mut h = mix64(seed ^ 0x9e37_79b9_7f4a_7c15);
    for b in text.bytes() {
        h = mix64(h ^ u64::from(b));
    }
    h
}

/// Identifies an encoder: name, output dimension, and a fingerprint that is
/// stable across runs for identical parameters. The fingerprint embeds the
/// canonical parameter string so catalogs can name the encoder that produced
/// their representations and tools can reconstruct it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EncoderSpec {
    pub name: String,
    pub dimension: usize,
    pub fingerprint: String,
}

impl EncoderSpec {
    /// Build a spec from a name, dimension, and sorted `key=value` params.
    pub fn new(name: &str, dimension: usize, params: &[(&str, String)]) -> Self {
        let mut canonical = format!("{name};dim={dimension}");
        for (k, v) in params {
            canonical.push_str(&format!(";{k}={v}"));
        }
        let digest = hash_str(0x5ca1_ab1e, &canonical);
        EncoderSpec {
            name: name.to_string(),
            dimension,
            fingerprint: format!("{canonical}#{digest:016x}"),
        }
    }

    /// Split a fingerprint back into its canonical parameter map, verifying
    /// the digest. Returns `(name, dimension, params)`.
    pub fn parse_fingerprint(fp: &str) -> Result<(String, usize, BTreeMap<String, String>)> {
        let (canonical, digest) = fp
            .rsplit_once('#')
            .ok_or_else(|| Error::EncoderMismatch(format!("malformed fingerprint {fp}")))?;
        if format!("{:016x}", hash_str(0x5ca1_ab1e, canonical)) != digest {
            return Err(Error::EncoderMismatch(format!("fingerprint digest mismatch in {fp}")));
        }
        let mut parts = canonical.split(';');
        let name = parts
            .next()
            .filter(|n| !n.is_empty())
            .ok_or_else(|| Error::EncoderMismatch(format!("fingerprint {fp} has no name")))?;
        let mut params = BTreeMap::new();
        for part in parts {
            let (k, v) = part.split_once('=').ok_or_else(|| {
                Error::EncoderMismatch(format!("malformed fingerprint field {part}"))
            })?;
            params.insert(k.to_string(), v.to_string());
        }
        let dimension = params
            .remove("dim")
            .and_then(|d| d.parse().ok())
            .ok_or_else(|| Error::EncoderMismatch(format!("fingerprint {fp} has no dimension")))?;
        Ok((name.to_string(), dimension, params))
    }
}

/// Anything that can turn `instruction + " " + body` into an embedding of a
/// declared dimension. Implementations must be deterministic.
pub trait Encoder {
    fn spec(&self) -> &EncoderSpec;
    fn encode(&self, instruction: &str, body: &str) -> Result<Embedding>;
}

/// Deterministic reference encoder: case-folds and whitespace-tokenizes the
/// text, hashes every unigram and bigram into `dimension` buckets with a
/// seeded multiply-shift hash, accumulates signed counts, and L2-normalizes.
///
/// A text with n tokens yields 2n-1 n-grams; an odd number of unit-count
/// contributions cannot cancel to zero, so the zero vector only appears for
/// an empty token list.
#[derive(Debug, Clone)]
pub struct HashedNgramEncoder {
    spec: EncoderSpec,
    seed: u64,
}

impl HashedNgramEncoder {
    pub fn new(dimension: usize, seed: u64) -> Result<Self> {
        if dimension == 0 {
            return Err(Error::Config("encoder dimension must be positive".into()));
        }
        let spec = EncoderSpec::new("hashed-ngram", dimension, &[("seed", seed.to_string())]);
        Ok(HashedNgramEncoder { spec, seed })
    }

    /// Rebuild from a fingerprint produced by `spec().fingerprint`.
    pub fn from_fingerprint(fp: &str) -> Result<Self> {
        let (name, dimension, params) = EncoderSpec::parse_fingerprint(fp)?;
        if name != "hashed-ngram" {
            return Err(Error::EncoderMismatch(format!("{fp} is not a hashed-ngram fingerprint")));
        }
        let seed = params
            .get("seed")
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::EncoderMismatch(format!("{fp} has no seed")))?;
        HashedNgramEncoder::new(dimension, seed)
    }
}

impl Encoder for HashedNgramEncoder {
    fn spec(&self) -> &EncoderSpec {
        &self.spec
    }

    fn encode(&self, instruction: &str, body: &str) -> Result<Embedding> {
        let text = format!("{instruction} {body}").to_lowercase();
        let tokens: Vec<&str> = text.split_whitespace().collect();
        let dim = self.spec.dimension;
        let mut values = vec![0.0f64; dim];
        let mut add = |gram: &str| {
            let h = hash_str(self.seed, gram);
            let bucket = (h % dim as u64) as usize;
            let sign = if mix64(h ^ 0xa5a5_a5a5_a5a5_a5a5) & 1 == 0 { 1.0 } else { -1.0 };
            values[bucket] += sign;
        };
        for token in &tokens {
            add(token);
        }
        for pair in tokens.windows(2) {
            add(&format!("{} {}", pair[0], pair[1]));
        }
        let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            for v in &mut values {
                *v /= norm;
            }
        }
        Embedding::new(values)
    }
}

/// Mean embedding of `min(m, |validation|)` queries sampled without
/// replacement with the seeded generator. The mean is stored raw (not
/// re-normalized); a zero-norm result is rejected here so retrieval can
/// assume task representations have positive norm.
pub fn build_task_representation(
    task: &TaskRecord,
    encoder: &dyn Encoder,
    m: usize,
    seed: u64,
) -> Result<Embedding> {
    if task.validation.is_empty() {
        return Err(Error::EmptyTask(format!("task {} has no validation items", task.id)));
    }
    if m == 0 {
        return Err(Error::Config("representation sample count m must be positive".into()));
    }
    let take = m.min(task.validation.len());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let chosen = rand::seq::index::sample(&mut rng, task.validation.len(), take);
    let dim = encoder.spec().dimension;
    let mut sum = vec![0.0f64; dim];
    for idx in chosen {
        let emb = encoder.encode(TASK_INSTRUCTION, &task.validation[idx].input)?;
        if emb.dim() != dim {
            return Err(Error::EncoderMismatch(format!(
                "encoder produced dimension {}, spec says {dim}",
                emb.dim()
            )));
        }
        for (s, v) in sum.iter_mut().zip(emb.values()) {
            *s += v;
        }
    }
    for s in &mut sum {
        *s /= take as f64;
    }
    let rep = Embedding::new(sum)?;
    if rep.norm() == 0.0 {
        return Err(Error::Validation(format!("task {}: zero-norm representation", task.id)));
    }
    Ok(rep)
}

/// Attach representations to every task of a catalog, stamping the encoder
/// fingerprint. Returns a new catalog.
pub fn build_representations(
    catalog: &Catalog,
    encoder: &dyn Encoder,
    m: usize,
    seed: u64,
) -> Result<Catalog> {
    let mut out = catalog.clone();
    for task in out.tasks.values_mut() {
        let task_seed = mix64(seed ^ hash_str(0x7a53_c0de, &task.id));
        task.representation = Some(build_task_representation(task, encoder, m, task_seed)?);
    }
    out.encoder_fingerprint = encoder.spec().fingerprint.clone();
    Ok(out)
}

/// Cosine similarity. A zero-norm left argument (degenerate query) yields
/// 0; zero-norm right arguments are rejected when representations are built.
pub fn cosine(a: &Embedding, b: &Embedding) -> Result<f64> {
    let dot = a.dot(b)?;
    let na = a.norm();
    let nb = b.norm();
    if na == 0.0 || nb == 0.0 {
        return Ok(0.0);
    }
    Ok(dot / (na * nb))
}

/// One retrieved task with its similarity and softmax probability.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievedTask {
    pub task_id: String,
    pub similarity: f64,
    pub probability: f64,
}

/// Top-K retrieval output, sorted by similarity descending with ties broken
/// by ascending task id. Probabilities sum to 1 over the retained entries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievalResult {
    pub entries: Vec<RetrievedTask>,
    pub temperature: f64,
}

/// Candidate ordering: higher similarity first, then ascending task id.
fn better(a: &(f64, &str), b: &(f64, &str)) -> Ordering {
    match a.0.total_cmp(&b.0) {
        Ordering::Equal => b.1.cmp(a.1),
        other => other,
    }
}

/// Retrieve the top-`min(k, T)` tasks for a query embedding and normalize
/// their similarities with a temperature softmax (max-subtracted for
/// stability). Scans each stored representation exactly once.
pub fn retrieve(
    catalog: &Catalog,
    encoder_spec: &EncoderSpec,
    query: &Embedding,
    k: usize,
    temperature: f64,
) -> Result<RetrievalResult> {
    if k == 0 {
        return Err(Error::Config("retrieval k must be positive".into()));
    }
    if !(temperature.is_finite() && temperature > 0.0) {
        return Err(Error::Config(format!("temperature must be positive, got {temperature}")));
    }
    if encoder_spec.fingerprint != catalog.encoder_fingerprint {
        return Err(Error::EncoderMismatch(format!(
            "query encoder {} vs catalog {}",
            encoder_spec.fingerprint, catalog.encoder_fingerprint
        )));
    }
    // Bounded selection: `kept` holds the current top set, worst entry last.
    let mut kept: Vec<(f64, &str)> = Vec::with_capacity(k + 1);
    let mut seen = 0usize;
    for task in catalog.represented_tasks() {
        let rep = task.representation.as_ref().unwrap();
        let similarity = cosine(query, rep)?;
        seen += 1;
        let candidate = (similarity, task.id.as_str());
        let pos = kept.partition_point(|held| better(held, &candidate) != Ordering::Less);
        if pos < k {
            kept.insert(pos, candidate);
            kept.truncate(k);
        }
    }
    if seen == 0 {
        return Err(Error::EmptyCatalog("no tasks with stored representations".into()));
    }
    let max_sim = kept[0].0;
    let weights: Vec<f64> = kept.iter().map(|(s, _)| ((s - max_sim) / temperature).exp()).collect();
    let total: f64 = weights.iter().sum();
    let entries = kept
        .iter()
        .zip(&weights)
        .map(|((similarity, task_id), w)| RetrievedTask {
            task_id: (*task_id).to_string(),
            similarity: *similarity,
            probability: w / total,
        })
        .collect();
    Ok(RetrievalResult { entries, temperature })
}

/// One line of the external-encoder request file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncodeRequest {
    pub id: String,
    pub instruction: String,
    pub body: String,
}

/// One line of the external-encoder response file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncodeResponse {
    pub id: String,
    pub embedding: Vec<f64>,
}

/// Write encode requests as JSON lines.
pub fn write_encode_requests(path: &Path, requests: &[EncodeRequest]) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    let mut out = BufWriter::new(file);
    for req in requests {
        serde_json::to_writer(&mut out, req)?;
        out.write_all(b"\n").map_err(Error::from)?;
    }
    out.flush().map_err(Error::from)
}

/// Read encode responses from JSON lines, checking the declared dimension.
pub fn read_encode_responses(path: &Path, dimension: usize) -> Result<BTreeMap<String, Embedding>> {
    let file = std::fs::File::open(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    let reader = std::io::BufReader::new(file);
    let mut out = BTreeMap::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line.map_err(Error::from)?;
        if line.trim().is_empty() {
            continue;
        }
        let resp: EncodeResponse = serde_json::from_str(&line)
            .map_err(|e| Error::Format(format!("line {}: {e}", lineno + 1)))?;
        if resp.embedding.len() != dimension {
            return Err(Error::EncoderMismatch(format!(
                "response {} has dimension {}, expected {dimension}",
                resp.id,
                resp.embedding.len()
            )));
        }
        let emb = Embedding::new(resp.embedding)?;
        if out.insert(resp.id.clone(), emb).is_some() {
            return Err(Error::Format(format!("duplicate response id {}", resp.id)));
        }
    }
    Ok(out)
}

/// An encoder backed by precomputed embeddings exchanged through the
/// request/response files, keyed by `(instruction, body)`.
#[derive(Debug, Clone)]
pub struct ExternalEncoder {
    spec: EncoderSpec,
    table: BTreeMap<(String, String), Embedding>,
}

impl ExternalEncoder {
    pub fn new(spec: EncoderSpec) -> Self {
        ExternalEncoder { spec, table: BTreeMap::new() }
    }

    /// Join request and response files on id.
    pub fn from_files(spec: EncoderSpec, requests: &Path, responses: &Path) -> Result<Self> {
        let file = std::fs::File::open(requests)
            .map_err(|e| Error::Io(format!("{}: {e}", requests.display())))?;
        let reader = std::io::BufReader::new(file);
        let mut by_id = BTreeMap::new();
        for line in reader.lines() {
            let line = line.map_err(Error::from)?;
            if line.trim().is_empty() {
                continue;
            }
            let req: EncodeRequest = serde_json::from_str(&line)?;
            by_id.insert(req.id.clone(), (req.instruction, req.body));
        }
        let embeddings = read_encode_responses(responses, spec.dimension)?;
        let mut encoder = ExternalEncoder::new(spec);
        for (id, emb) in embeddings {
            let key = by_id
                .get(&id)
                .ok_or_else(|| Error::Format(format!("response id {id} has no request")))?;
            encoder.table.insert(key.clone(), emb);
        }
        Ok(encoder)
    }

    pub fn insert(&mut self, instruction: &str, body: &str, embedding: Embedding) {
        self.table.insert((instruction.to_string(), body.to_string()), embedding);
    }
}

impl Encoder for ExternalEncoder {
    fn spec(&self) -> &EncoderSpec {
        &self.spec
    }

    fn encode(&self, instruction: &str, body: &str) -> Result<Embedding> {
        self.table
            .get(&(instruction.to_string(), body.to_string()))
            .cloned()
            .ok_or_else(|| Error::NotFound(format!("no external embedding for {body:?}")))
    }
}
