//! Pseudo-task construction: K-Means over validation-query embeddings for
//! pools where ground-truth task labels are unavailable.
//!
//! Seeding is k-means++ with a seeded generator; iterations are standard
//! Lloyd steps with squared Euclidean distance. Empty clusters are repaired
//! by stealing the point farthest from its assigned centroid, which keeps
//! the recorded inertia non-increasing across iterations.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::catalog::{TaskRecord, ValidationItem};
use crate::error::{Error, Result};
use crate::metrics::MetricKind;
use crate::retrieval::{Embedding, Encoder, TASK_INSTRUCTION};

pub const DEFAULT_KMEANS_MAX_ITER: usize = 100;
pub const DEFAULT_KMEANS_TOL: f64 = 1e-6;

/// A fitted clustering: centroids, point assignments, the final inertia,
/// and the per-iteration inertia trace.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterModel {
    pub centroids: Vec<Embedding>,
    pub assignments: Vec<usize>,
    pub inertia: f64,
    pub iterations_run: usize,
    pub inertia_trace: Vec<f64>,
}

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(point: &[f64], centroids: &[Vec<f64>]) -> (usize, f64) {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (c, centroid) in centroids.iter().enumerate() {
        let d = dist2(point, centroid);
        if d < best_d {
            best = c;
            best_d = d;
        }
    }
    (best, best_d)
}

fn kmeans_plus_plus(points: &[Vec<f64>], k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let mut centroids: Vec<Vec<f64>> = Vec::with_capacity(k);
    let mut chosen = vec![false; points.len()];
    let first = rng.random_range(0..points.len());
    centroids.push(points[first].clone());
    chosen[first] = true;
    let mut d2: Vec<f64> = points.iter().map(|p| dist2(p, &centroids[0])).collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let mut target = rng.random_range(0.0..total);
            let mut pick = points.len() - 1;
            for (i, w) in d2.iter().enumerate() {
                if target < *w {
                    pick = i;
                    break;
                }
                target -= w;
            }
            pick
        } else {
            // All remaining mass is zero (duplicate points); take the first
            // index not yet chosen.
            chosen.iter().position(|c| !c).unwrap_or(0)
        };
        chosen[next] = true;
        centroids.push(points[next].clone());
        let latest = centroids.last().unwrap();
        for (i, p) in points.iter().enumerate() {
            let d = dist2(p, latest);
            if d < d2[i] {
                d2[i] = d;
            }
        }
    }
    centroids
}

/// Lloyd's algorithm with k-means++ seeding. Runs until the maximum
/// per-coordinate centroid shift drops below `tol` or `max_iter` passes.
pub fn kmeans(
    points: &[Embedding],
    k: usize,
    seed: u64,
    max_iter: usize,
    tol: f64,
) -> Result<ClusterModel> {
    if k == 0 {
        return Err(Error::Config("k must be positive".into()));
    }
    if points.len() < k {
        return Err(Error::TooFewPoints(format!("{} points for k={k}", points.len())));
    }
    let dim = points[0].dim();
    if points.iter().any(|p| p.dim() != dim) {
        return Err(Error::Dimension("points share no common dimension".into()));
    }
    let raw: Vec<Vec<f64>> = points.iter().map(|p| p.values().to_vec()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centroids = kmeans_plus_plus(&raw, k, &mut rng);

    let assign = |centroids: &[Vec<f64>]| -> (Vec<usize>, f64) {
        let mut assignments = Vec::with_capacity(raw.len());
        let mut inertia = 0.0;
        for p in &raw {
            let (c, d) = nearest(p, centroids);
            assignments.push(c);
            inertia += d;
        }
        (assignments, inertia)
    };

    let (mut assignments, mut inertia) = assign(&centroids);
    let mut trace = vec![inertia];
    let mut iterations_run = 0;
    for iter in 1..=max_iter {
        // Mean update.
        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (p, &c) in raw.iter().zip(&assignments) {
            counts[c] += 1;
            for (s, v) in sums[c].iter_mut().zip(p) {
                *s += v;
            }
        }
        let mut new_centroids = centroids.clone();
        for c in 0..k {
            if counts[c] > 0 {
                for (s, slot) in sums[c].iter().zip(new_centroids[c].iter_mut()) {
                    *slot = s / counts[c] as f64;
                }
            }
        }
        // Empty-cluster repair: hand each empty cluster the point currently
        // farthest from its assigned centroid.
        let mut empties: Vec<usize> = (0..k).filter(|c| counts[*c] == 0).collect();
        if !empties.is_empty() {
            let mut taken = vec![false; raw.len()];
            for c in empties.drain(..) {
                let farthest = raw
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| !taken[*i])
                    .map(|(i, p)| (i, dist2(p, &new_centroids[assignments[i]])))
                    .max_by(|x, y| x.1.total_cmp(&y.1).then_with(|| y.0.cmp(&x.0)))
                    .map(|(i, _)| i);
                if let Some(i) = farthest {
                    taken[i] = true;
                    new_centroids[c] = raw[i].clone();
                }
            }
        }
        let shift = centroids
            .iter()
            .zip(&new_centroids)
            .flat_map(|(old, new)| old.iter().zip(new).map(|(o, n)| (o - n).abs()))
            .fold(0.0f64, f64::max);
        centroids = new_centroids;
        let (a, j) = assign(&centroids);
        assignments = a;
        inertia = j;
        trace.push(inertia);
        iterations_run = iter;
        if shift < tol {
            break;
        }
    }
    let centroids = centroids
        .into_iter()
        .map(Embedding::new)
        .collect::<Result<Vec<_>>>()?;
    Ok(ClusterModel { centroids, assignments, inertia, iterations_run, inertia_trace: trace })
}

/// Embed pooled validation items (under the task instruction), cluster them,
/// and emit one pseudo-task per cluster. Task `cluster_<i>` holds the
/// cluster's members as its validation set and the centroid as its stored
/// representation; all pseudo-tasks share the supplied default metric.
pub fn build_pseudo_tasks(
    items: &[ValidationItem],
    encoder: &dyn Encoder,
    k: usize,
    seed: u64,
    default_metric: MetricKind,
) -> Result<Vec<TaskRecord>> {
    if items.is_empty() {
        return Err(Error::EmptyTask("no items to cluster".into()));
    }
    if k > items.len() {
        return Err(Error::TooFewPoints(format!("{} items for k={k}", items.len())));
    }
    let embeddings = items
        .iter()
        .map(|item| encoder.encode(TASK_INSTRUCTION, &item.input))
        .collect::<Result<Vec<_>>>()?;
    let model = kmeans(&embeddings, k, seed, DEFAULT_KMEANS_MAX_ITER, DEFAULT_KMEANS_TOL)?;
    let mut tasks: Vec<TaskRecord> = (0..k)
        .map(|c| {
            let mut t = TaskRecord::new(format!("cluster_{c}"), default_metric, Vec::new());
            t.representation = Some(model.centroids[c].clone());
            t
        })
        .collect();
    for (item, &c) in items.iter().zip(&model.assignments) {
        tasks[c].validation.push(item.clone());
    }
    // Duplicate inputs can leave a repaired centroid without members.
    if let Some(empty) = tasks.iter().find(|t| t.validation.is_empty()) {
        return Err(Error::Validation(format!("{} ended up empty", empty.id)));
    }
    Ok(tasks)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn emb(values: &[f64]) -> Embedding {
        Embedding::new(values.to_vec()).unwrap()
    }

    #[test]
    fn k_equals_points_gives_zero_inertia() {
        let points = vec![emb(&[0.0, 0.0]), emb(&[1.0, 0.0]), emb(&[0.0, 1.0])];
        let model = kmeans(&points, 3, 0, 50, 1e-9).unwrap();
        assert_eq!(model.inertia, 0.0);
        let mut sorted = model.assignments.clone();
        sorted.sort_unstable();
        assert_eq!(sorted, vec![0, 1, 2]);
    }

    #[test]
    fn k_one_centroid_is_mean() {
        let points = vec![emb(&[0.0, 0.0]), emb(&[2.0, 4.0]), emb(&[4.0, 2.0])];
        let model = kmeans(&points, 1, 7, 50, 1e-9).unwrap();
        assert_eq!(model.centroids[0].values(), &[2.0, 2.0]);
    }

    #[test]
    fn too_few_points_rejected() {
        let points = vec![emb(&[0.0]), emb(&[1.0])];
        assert!(matches!(kmeans(&points, 3, 0, 10, 1e-6), Err(Error::TooFewPoints(_))));
    }

    #[test]
    fn inertia_trace_is_non_increasing() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let points: Vec<Embedding> = (0..60)
            .map(|_| emb(&[rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)]))
            .collect();
        for seed in 0..5 {
            let model = kmeans(&points, 5, seed, 50, 1e-9).unwrap();
            for pair in model.inertia_trace.windows(2) {
                assert!(pair[1] <= pair[0] + 1e-12, "inertia rose: {pair:?}");
            }
        }
    }

    #[test]
    fn seed_determinism() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let points: Vec<Embedding> = (0..40)
            .map(|_| emb(&[rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)]))
            .collect();
        let m1 = kmeans(&points, 4, 123, 50, 1e-9).unwrap();
        let m2 = kmeans(&points, 4, 123, 50, 1e-9).unwrap();
        assert_eq!(m1, m2);
    }

    #[test]
    fn separated_blobs_recovered() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let centers = [[0.0, 0.0], [10.0, 0.0], [0.0, 10.0], [10.0, 10.0]];
        let mut points = Vec::new();
        let mut truth = Vec::new();
        for (label, c) in centers.iter().enumerate() {
            for _ in 0..20 {
                let jitter = [rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5)];
                points.push(emb(&[c[0] + jitter[0], c[1] + jitter[1]]));
                truth.push(label);
            }
        }
        let model = kmeans(&points, 4, 11, 100, 1e-9).unwrap();
        // Partition equality up to label permutation.
        for i in 0..points.len() {
            for j in 0..points.len() {
                let same_truth = truth[i] == truth[j];
                let same_model = model.assignments[i] == model.assignments[j];
                assert_eq!(same_truth, same_model, "points {i} and {j} split differently");
            }
        }
    }

    struct DimEncoder {
        spec: crate::retrieval::EncoderSpec,
    }

    impl DimEncoder {
        fn new(dim: usize) -> Self {
            DimEncoder { spec: crate::retrieval::EncoderSpec::new("test", dim, &[]) }
        }
    }

    impl Encoder for DimEncoder {
        fn spec(&self) -> &crate::retrieval::EncoderSpec {
            &self.spec
        }
        fn encode(&self, _instruction: &str, body: &str) -> Result<Embedding> {
            // Position encodes the body's first byte; enough to separate items.
            let x = body.bytes().next().unwrap_or(0) as f64;
            Embedding::new(vec![x, x * 0.5])
        }
    }

    #[test]
    fn pseudo_tasks_partition_items() {
        let items: Vec<ValidationItem> = (0..30)
            .map(|i| ValidationItem {
                input: format!("{}{i}", (b'a' + (i % 3) as u8) as char),
                target: "t".into(),
            })
            .collect();
        let encoder = DimEncoder::new(2);
        let tasks = build_pseudo_tasks(&items, &encoder, 3, 5, MetricKind::ExactMatch).unwrap();
        assert_eq!(tasks.len(), 3);
        let total: usize = tasks.iter().map(|t| t.validation.len()).sum();
        assert_eq!(total, items.len());
        for t in &tasks {
            assert!(t.representation.is_some());
            assert!(t.id.starts_with("cluster_"));
        }
    }

    #[test]
    fn pseudo_tasks_k_one_holds_everything() {
        let items: Vec<ValidationItem> = (0..5)
            .map(|i| ValidationItem { input: format!("item {i}"), target: "t".into() })
            .collect();
        let encoder = DimEncoder::new(2);
        let tasks = build_pseudo_tasks(&items, &encoder, 1, 5, MetricKind::Bleu).unwrap();
        assert_eq!(tasks.len(), 1);
        assert_eq!(tasks[0].validation.len(), 5);
    }
}
