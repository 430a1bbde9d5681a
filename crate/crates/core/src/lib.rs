//! Training-free LoRA adapter routing.
//!
//! The engine organizes an unstructured adapter pool into a task-indexed
//! catalog, selects per-task best adapters under evaluation budgets, routes
//! queries to the top-K most similar tasks via embedding cosine similarity,
//! and composes the mapped adapters by input-aware weighted fusion in the
//! output space.
//!
//! Module map:
//! - [`linalg`]: dense math, adapters, the toy backend, pool files
//! - [`metrics`]: exact match, BLEU, ROUGE-1/2/L
//! - [`catalog`]: task database, pairing map, evaluation regimes
//! - [`retrieval`]: encoders, task representations, top-K retrieval
//! - [`pairing`]: exhaustive / uniform / successive-halving selection
//! - [`fusion`]: output-space and parameter-space composition, routing
//! - [`clustering`]: K-Means pseudo-tasks
//! - [`harness`]: regime evaluation, budget sweeps, synthetic worlds

pub mod catalog;
pub mod clustering;
pub mod error;
pub mod fusion;
pub mod harness;
pub mod linalg;
pub mod metrics;
pub mod pairing;
pub mod retrieval;

pub use catalog::{Catalog, Regime, TaskRecord, ValidationItem};
pub use error::{Error, Result};
pub use fusion::{RoutedAdapter, RoutingDecision};
pub use linalg::{LayerDelta, LoraAdapter, Matrix, ToyBackend, Vector};
pub use metrics::MetricKind;
pub use pairing::{Evaluator, PairingOutcome, PairingStrategy, ShConfig};
pub use retrieval::{Embedding, Encoder, EncoderSpec, HashedNgramEncoder};
