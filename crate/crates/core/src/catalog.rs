//! The task database, adapter pool registry, and task-to-adapter pairing map.
//!
//! A `Catalog` is an immutable snapshot: loading or building yields a fully
//! validated value, and every mutating operation returns a new copy. The
//! on-disk form is canonical JSON (lexicographic keys, tasks sorted by id,
//! full round-trip float precision) so saving the same catalog twice is
//! byte-identical.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{load_pool, LoraAdapter};
use crate::metrics::MetricKind;
use crate::retrieval::Embedding;

/// Default cap on validation items per task.
pub const DEFAULT_VALIDATION_CAP: usize = 200;

/// One labeled validation sample.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationItem {
    pub input: String,
    pub target: String,
}

/// A representative task: an id, its metric, a small validation set, and an
/// optional stored embedding representation.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskRecord {
    pub id: String,
    pub metric: MetricKind,
    pub validation: Vec<ValidationItem>,
    pub representation: Option<Embedding>,
}

impl TaskRecord {
    pub fn new(id: impl Into<String>, metric: MetricKind, validation: Vec<ValidationItem>) -> Self {
        TaskRecord { id: id.into(), metric, validation, representation: None }
    }
}

/// Evaluation regime controlling what a target task sees of itself.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Regime {
    /// Task data and its aligned adapter both present.
    NonOod,
    /// Validation data present, aligned adapter removed from the pool.
    SemiOod,
    /// Task (including its representation) and aligned adapter both removed.
    Ood,
}

impl Regime {
    pub fn parse(name: &str) -> Option<Regime> {
        match name {
            "non-ood" => Some(Regime::NonOod),
            "semi-ood" => Some(Regime::SemiOod),
            "ood" => Some(Regime::Ood),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Regime::NonOod => "non-ood",
            Regime::SemiOod => "semi-ood",
            Regime::Ood => "ood",
        }
    }
}

/// The routing engine's single source of truth: tasks, pool, and pairing.
#[derive(Debug, Clone, PartialEq)]
pub struct Catalog {
    pub encoder_fingerprint: String,
    pub tasks: BTreeMap<String, TaskRecord>,
    pub pool: BTreeMap<String, LoraAdapter>,
    pub pairing: BTreeMap<String, String>,
    /// Pool file reference as written in the catalog file; empty for none.
    pub adapter_pool_path: String,
}

impl Catalog {
    pub fn new(
        encoder_fingerprint: impl Into<String>,
        tasks: Vec<TaskRecord>,
        pool: BTreeMap<String, LoraAdapter>,
        pairing: BTreeMap<String, String>,
        adapter_pool_path: impl Into<String>,
    ) -> Result<Self> {
        let mut task_map = BTreeMap::new();
        for task in tasks {
            if task_map.insert(task.id.clone(), task).is_some() {
                return Err(Error::Validation("duplicate task id".into()));
            }
        }
        let catalog = Catalog {
            encoder_fingerprint: encoder_fingerprint.into(),
            tasks: task_map,
            pool,
            pairing,
            adapter_pool_path: adapter_pool_path.into(),
        };
        catalog.validate(DEFAULT_VALIDATION_CAP)?;
        Ok(catalog)
    }

    /// Check every catalog invariant; names the offending record on failure.
    pub fn validate(&self, validation_cap: usize) -> Result<()> {
        for (id, task) in &self.tasks {
            if *id != task.id {
                return Err(Error::Validation(format!("task key {id} holds record {}", task.id)));
            }
            if task.validation.is_empty() || task.validation.len() > validation_cap {
                return Err(Error::Validation(format!(
                    "task {id}: validation size {} outside 1..={validation_cap}",
                    task.validation.len()
                )));
            }
            if let Some(item) = task.validation.iter().find(|v| v.input.is_empty()) {
                return Err(Error::Validation(format!(
                    "task {id}: empty input with target {:?}",
                    item.target
                )));
            }
            if let Some(rep) = &task.representation {
                if rep.values().iter().any(|v| !v.is_finite()) {
                    return Err(Error::Validation(format!("task {id}: non-finite representation")));
                }
                if rep.norm() == 0.0 {
                    return Err(Error::Validation(format!("task {id}: zero-norm representation")));
                }
            }
        }
        for (task_id, adapter_id) in &self.pairing {
            if !self.tasks.contains_key(task_id) {
                return Err(Error::Validation(format!("pairing references unknown task {task_id}")));
            }
            if !self.pool.contains_key(adapter_id) {
                return Err(Error::Validation(format!(
                    "pairing for task {task_id} references unknown adapter {adapter_id}"
                )));
            }
        }
        Ok(())
    }

    /// Tasks that carry a stored representation, in id order.
    pub fn represented_tasks(&self) -> impl Iterator<Item = &TaskRecord> {
        self.tasks.values().filter(|t| t.representation.is_some())
    }

    /// Derive the regime-specific view for one target task. The input
    /// catalog is never mutated.
    ///
    /// Removing an adapter clears every pairing entry that referenced it,
    /// so affected tasks are explicitly unpaired pending a re-pair against
    /// the reduced pool.
    pub fn remove_for_regime(&self, target_task: &str, regime: Regime) -> Result<Catalog> {
        if !self.tasks.contains_key(target_task) {
            return Err(Error::NotFound(format!("task {target_task}")));
        }
        let mut out = self.clone();
        match regime {
            Regime::NonOod => {}
            Regime::SemiOod | Regime::Ood => {
                if let Some(adapter_id) = self.pairing.get(target_task).cloned() {
                    out.pool.remove(&adapter_id);
                    out.pairing.retain(|_, v| *v != adapter_id);
                }
                if regime == Regime::Ood {
                    out.tasks.remove(target_task);
                    out.pairing.remove(target_task);
                }
            }
        }
        Ok(out)
    }
}

#[derive(Serialize, Deserialize)]
struct TaskFileRecord {
    id: String,
    metric: MetricKind,
    representation: Option<Vec<f64>>,
    validation: Vec<ValidationItem>,
}

#[derive(Serialize, Deserialize)]
struct CatalogFile {
    adapter_pool_path: String,
    encoder_fingerprint: String,
    pairing: BTreeMap<String, String>,
    tasks: Vec<TaskFileRecord>,
}

/// Serialize a catalog to its canonical JSON form (pool stored separately,
/// referenced by path).
pub fn catalog_to_json(catalog: &Catalog) -> Result<String> {
    catalog.validate(DEFAULT_VALIDATION_CAP)?;
    let file = CatalogFile {
        adapter_pool_path: catalog.adapter_pool_path.clone(),
        encoder_fingerprint: catalog.encoder_fingerprint.clone(),
        pairing: catalog.pairing.clone(),
        tasks: catalog
            .tasks
            .values()
            .map(|t| TaskFileRecord {
                id: t.id.clone(),
                metric: t.metric,
                representation: t.representation.as_ref().map(|e| e.values().to_vec()),
                validation: t.validation.clone(),
            })
            .collect(),
    };
    let mut text = serde_json::to_string_pretty(&file)?;
    text.push('\n');
    Ok(text)
}

/// Write a catalog file; refuses invalid catalogs before touching the disk.
pub fn save_catalog(catalog: &Catalog, path: &Path) -> Result<()> {
    let text = catalog_to_json(catalog)?;
    std::fs::write(path, text).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

/// Resolve a pool reference relative to the catalog file's directory.
fn resolve_pool_path(catalog_path: &Path, pool_path: &str) -> PathBuf {
    let p = Path::new(pool_path);
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        catalog_path.parent().unwrap_or_else(|| Path::new(".")).join(p)
    }
}

/// Load and fully validate a catalog file plus its referenced adapter pool.
pub fn load_catalog(path: &Path) -> Result<Catalog> {
    let text =
        std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    let file: CatalogFile = serde_json::from_str(&text)?;
    let pool = if file.adapter_pool_path.is_empty() {
        BTreeMap::new()
    } else {
        load_pool(&resolve_pool_path(path, &file.adapter_pool_path))?
    };
    let mut tasks = Vec::with_capacity(file.tasks.len());
    for rec in file.tasks {
        let representation = match rec.representation {
            Some(values) => Some(Embedding::new(values).map_err(|e| {
                Error::Validation(format!("task {}: bad representation: {e}", rec.id))
            })?),
            None => None,
        };
        tasks.push(TaskRecord {
            id: rec.id,
            metric: rec.metric,
            validation: rec.validation,
            representation,
        });
    }
    Catalog::new(file.encoder_fingerprint, tasks, pool, file.pairing, file.adapter_pool_path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{LayerDelta, Matrix};

    fn item(i: usize) -> ValidationItem {
        ValidationItem { input: format!("input {i}"), target: format!("target {i}") }
    }

    fn adapter(id: &str) -> LoraAdapter {
        let a = Matrix::zeros(1, 2);
        let b = Matrix::zeros(2, 1);
        LoraAdapter::new(id, 1, 1.0, vec![LayerDelta { a, b, layer_index: 0 }]).unwrap()
    }

    fn small_catalog() -> Catalog {
        let tasks = vec![
            TaskRecord::new("t0", MetricKind::ExactMatch, vec![item(0), item(1)]),
            TaskRecord::new("t1", MetricKind::RougeAvg, vec![item(2)]),
        ];
        let mut pool = BTreeMap::new();
        pool.insert("a0".to_string(), adapter("a0"));
        pool.insert("a1".to_string(), adapter("a1"));
        let pairing =
            BTreeMap::from([("t0".to_string(), "a0".to_string()), ("t1".to_string(), "a1".to_string())]);
        Catalog::new("enc#0", tasks, pool, pairing, "pool.json").unwrap()
    }

    #[test]
    fn empty_pool_catalog_is_valid() {
        let tasks = vec![TaskRecord::new("t", MetricKind::Bleu, vec![item(0)])];
        let cat = Catalog::new("enc#0", tasks, BTreeMap::new(), BTreeMap::new(), "").unwrap();
        assert!(cat.pool.is_empty());
    }

    #[test]
    fn pairing_to_missing_adapter_rejected() {
        let tasks = vec![TaskRecord::new("t", MetricKind::Bleu, vec![item(0)])];
        let pairing = BTreeMap::from([("t".to_string(), "ghost".to_string())]);
        let err = Catalog::new("enc#0", tasks, BTreeMap::new(), pairing, "").unwrap_err();
        assert!(matches!(err, Error::Validation(m) if m.contains("ghost")));
    }

    #[test]
    fn validation_cap_enforced() {
        let items: Vec<_> = (0..DEFAULT_VALIDATION_CAP + 1).map(item).collect();
        let tasks = vec![TaskRecord::new("t", MetricKind::Bleu, items)];
        assert!(Catalog::new("enc#0", tasks, BTreeMap::new(), BTreeMap::new(), "").is_err());
    }

    #[test]
    fn regime_non_ood_is_identity() {
        let cat = small_catalog();
        let out = cat.remove_for_regime("t0", Regime::NonOod).unwrap();
        assert_eq!(out, cat);
    }

    #[test]
    fn regime_semi_ood_removes_adapter_keeps_task() {
        let cat = small_catalog();
        let out = cat.remove_for_regime("t0", Regime::SemiOod).unwrap();
        assert!(out.tasks.contains_key("t0"));
        assert!(!out.pool.contains_key("a0"));
        assert!(!out.pairing.contains_key("t0"));
        assert_eq!(out.pool.len(), cat.pool.len() - 1);
        // ...and the original is untouched.
        assert!(cat.pool.contains_key("a0"));
    }

    #[test]
    fn regime_ood_removes_task_and_adapter() {
        let cat = small_catalog();
        let out = cat.remove_for_regime("t0", Regime::Ood).unwrap();
        assert_eq!(out.tasks.len(), cat.tasks.len() - 1);
        assert!(!out.tasks.contains_key("t0"));
        assert!(!out.pool.contains_key("a0"));
        out.validate(DEFAULT_VALIDATION_CAP).unwrap();
    }

    #[test]
    fn regime_removal_clears_shared_pairings() {
        // Two tasks paired to one adapter: removing it unpairs both.
        let tasks = vec![
            TaskRecord::new("t0", MetricKind::ExactMatch, vec![item(0)]),
            TaskRecord::new("t1", MetricKind::ExactMatch, vec![item(1)]),
        ];
        let mut pool = BTreeMap::new();
        pool.insert("shared".to_string(), adapter("shared"));
        let pairing = BTreeMap::from([
            ("t0".to_string(), "shared".to_string()),
            ("t1".to_string(), "shared".to_string()),
        ]);
        let cat = Catalog::new("enc#0", tasks, pool, pairing, "").unwrap();
        let out = cat.remove_for_regime("t0", Regime::SemiOod).unwrap();
        assert!(out.pairing.is_empty());
        out.validate(DEFAULT_VALIDATION_CAP).unwrap();
    }

    #[test]
    fn regime_unknown_task() {
        let cat = small_catalog();
        assert!(matches!(cat.remove_for_regime("nope", Regime::Ood), Err(Error::NotFound(_))));
    }

    #[test]
    fn save_load_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let mut cat = small_catalog();
        cat.adapter_pool_path = "pool.json".to_string();
        crate::linalg::save_pool(&cat.pool, &dir.path().join("pool.json")).unwrap();
        let path = dir.path().join("catalog.json");
        save_catalog(&cat, &path).unwrap();
        let first = std::fs::read(&path).unwrap();
        let loaded = load_catalog(&path).unwrap();
        assert_eq!(loaded, cat);
        save_catalog(&loaded, &path).unwrap();
        let second = std::fs::read(&path).unwrap();
        assert_eq!(first, second);
    }

    #[test]
    fn load_rejects_bad_json() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("broken.json");
        std::fs::write(&path, "{not json").unwrap();
        assert!(matches!(load_catalog(&path), Err(Error::Format(_))));
    }

    #[test]
    fn regime_names_round_trip() {
        for r in [Regime::NonOod, Regime::SemiOod, Regime::Ood] {
            assert_eq!(Regime::parse(r.name()), Some(r));
        }
    }
}
