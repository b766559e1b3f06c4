//! Seeded Lloyd clustering with k-means++ initialization.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::EventId;

const MAX_ITERS: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cluster {
    /// 1-based guide-suffix round that produced the embedding.
    pub round: usize,
    pub members: Vec<EventId>,
    pub centroid: Vec<f64>,
}

impl Cluster {
    pub fn label(&self, index: usize) -> String {
        format!("r{}c{}", self.round, index)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ClusterSet {
    pub clusters: Vec<Cluster>,
}

pub(crate) fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(point: &[f64], centroids: &[Vec<f64>]) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (i, c) in centroids.iter().enumerate() {
        let d = sq_dist(point, c);
        if d < best_d {
            best = i;
            best_d = d;
        }
    }
    best
}

fn plus_plus_init(vectors: &[Vec<f64>], k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let mut centroids = vec![vectors[rng.random_range(0..vectors.len())].clone()];
    while centroids.len() < k {
        let d2: Vec<f64> = vectors
            .iter()
            .map(|v| centroids.iter().map(|c| sq_dist(v, c)).fold(f64::INFINITY, f64::min))
            .collect();
        let total: f64 = d2.iter().sum();
        let pick = if total <= 0.0 {
            // All points coincide with chosen centroids.
            rng.random_range(0..vectors.len())
        } else {
            let mut target = rng.random::<f64>() * total;
            let mut idx = vectors.len() - 1;
            for (i, d) in d2.iter().enumerate() {
                if target < *d {
                    idx = i;
                    break;
                }
                target -= d;
            }
            idx
        };
        centroids.push(vectors[pick].clone());
    }
    centroids
}

/// Lloyd iterations until assignments stop changing. Empty clusters keep
/// their previous centroid.
pub fn kmeans(vectors: &[Vec<f64>], k: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    if k == 0 {
        return Err(Error::invalid("k_clusters must be >= 1"));
    }
    if vectors.len() < k {
        return Err(Error::invalid(format!(
            "cannot form {k} clusters from {} observations",
            vectors.len()
        )));
    }
    let dim = vectors[0].len();
    if vectors.iter().any(|v| v.len() != dim) {
        return Err(Error::invalid("vectors have unequal dimensions"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centroids = plus_plus_init(vectors, k, &mut rng);
    let mut assign: Vec<usize> = vectors.iter().map(|v| nearest(v, &centroids)).collect();
    for _ in 0..MAX_ITERS {
        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (v, &a) in vectors.iter().zip(&assign) {
            counts[a] += 1;
            for (s, x) in sums[a].iter_mut().zip(v) {
                *s += x;
            }
        }
        for (c, (sum, n)) in centroids.iter_mut().zip(sums.into_iter().zip(counts)) {
            if n > 0 {
                *c = sum.into_iter().map(|s| s / n as f64).collect();
            }
        }
        let next: Vec<usize> = vectors.iter().map(|v| nearest(v, &centroids)).collect();
        if next == assign {
            break;
        }
        assign = next;
    }
    Ok(centroids)
}

/// Clusters `vectors` and returns, per centroid, the `m` nearest
/// observations (ties broken by id). Clusters may overlap.
pub fn cluster_round(
    vectors: &[Vec<f64>],
    ids: &[EventId],
    k_clusters: usize,
    m: usize,
    seed: u64,
    round: usize,
) -> Result<Vec<Cluster>> {
    if vectors.len() != ids.len() {
        return Err(Error::invalid("one id per vector required"));
    }
    let centroids = kmeans(vectors, k_clusters, seed)?;
    Ok(centroids
        .into_iter()
        .map(|c| {
            let mut order: Vec<(f64, &EventId)> = vectors.iter().map(|v| sq_dist(v, &c)).zip(ids).collect();
            order.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.cmp(b.1)));
            Cluster {
                round,
                members: order.into_iter().take(m).map(|(_, id)| id.clone()).collect(),
                centroid: c,
            }
        })
        .collect())
}

/// Clusters per round: one per `m` observations, between 2 and 8, never
/// more than there are observations.
pub fn k_clusters(n_events: usize, m: usize) -> usize {
    (n_events / m.max(1)).clamp(2, 8).min(n_events).max(1)
}
