use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::preprocess::cumsum;
use crate::error::{Error, Result};

pub const DEFAULT_K: usize = 3;
pub const MAX_ITERATIONS: usize = 300;

/// Nearest-centroid clustering of cumulative-sum traces.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KMeansModel {
    pub centroids: Vec<Vec<f64>>,
    pub iterations: usize,
    pub converged: bool,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

impl KMeansModel {
    pub fn k(&self) -> usize {
        self.centroids.len()
    }

    /// Index of the nearest centroid; ties go to the lower index.
    pub fn nearest(&self, features: &[f64]) -> usize {
        let mut best = (0, f64::INFINITY);
        for (c, centroid) in self.centroids.iter().enumerate() {
            let d = sq_dist(features, centroid);
            if d < best.1 {
                best = (c, d);
            }
        }
        best.0
    }

    pub fn assign(&self, trace: &[u16]) -> Result<usize> {
        let dim = self.centroids[0].len();
        if trace.len() != dim {
            return Err(Error::LengthMismatch { expected: dim, actual: trace.len() });
        }
        Ok(self.nearest(&cumsum(trace)))
    }

    pub fn assign_all(&self, traces: &[&[u16]]) -> Result<Vec<usize>> {
        traces.iter().map(|t| self.assign(t)).collect()
    }
}

/// Lloyd iterations from k-means++ seeding on cumulative-sum features.
pub fn kmeans_fit(traces: &[&[u16]], k: usize, seed: u64) -> Result<KMeansModel> {
    if k == 0 {
        return Err(Error::InvalidParameter("k must be at least 1".into()));
    }
    if k > traces.len() {
        return Err(Error::InvalidParameter(format!("k = {k} exceeds the {} available traces", traces.len())));
    }
    let dim = traces[0].len();
    if let Some(bad) = traces.iter().find(|t| t.len() != dim) {
        return Err(Error::LengthMismatch { expected: dim, actual: bad.len() });
    }
    let points: Vec<Vec<f64>> = traces.iter().map(|t| cumsum(t)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut centroids = vec![points[rng.random_range(0..points.len())].clone()];
    let mut d2: Vec<f64> = points.iter().map(|p| sq_dist(p, &centroids[0])).collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let mut u = rng.random::<f64>() * total;
            let mut pick = points.len() - 1;
            for (i, &d) in d2.iter().enumerate() {
                if u < d {
                    pick = i;
                    break;
                }
                u -= d;
            }
            pick
        } else {
            rng.random_range(0..points.len())
        };
        centroids.push(points[next].clone());
        for (p, d) in points.iter().zip(d2.iter_mut()) {
            *d = d.min(sq_dist(p, &centroids[centroids.len() - 1]));
        }
    }

    let mut model = KMeansModel { centroids, iterations: 0, converged: false };
    let mut assignment: Vec<usize> = vec![usize::MAX; points.len()];
    for it in 1..=MAX_ITERATIONS {
        model.iterations = it;
        let mut changed = false;
        for (p, a) in points.iter().zip(assignment.iter_mut()) {
            let c = model.nearest(p);
            if c != *a {
                *a = c;
                changed = true;
            }
        }
        if !changed {
            model.converged = true;
            break;
        }
        let mut sums = vec![vec![0.0; dim]; k];
        let mut sizes = vec![0usize; k];
        for (p, &a) in points.iter().zip(&assignment) {
            sizes[a] += 1;
            for (s, x) in sums[a].iter_mut().zip(p) {
                *s += x;
            }
        }
        for c in 0..k {
            // An emptied cluster keeps its previous centroid.
            if sizes[c] > 0 {
                let inv = 1.0 / sizes[c] as f64;
                model.centroids[c] = sums[c].iter().map(|s| s * inv).collect();
            }
        }
    }
    Ok(model)
}

/// Result of removing the least populated cluster.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KMeansDiscard {
    pub assignments: Vec<usize>,
    pub cluster_sizes: Vec<usize>,
    pub discarded_cluster: usize,
    /// Indices (into the input) of traces outside the discarded cluster.
    pub kept: Vec<usize>,
    pub discard_ratio: f64,
}

/// Drops every trace assigned to the smallest cluster; ties go to the lowest index.
pub fn kmeans_discard(model: &KMeansModel, traces: &[&[u16]]) -> Result<KMeansDiscard> {
    let assignments = model.assign_all(traces)?;
    let mut cluster_sizes = vec![0usize; model.k()];
    for &a in &assignments {
        cluster_sizes[a] += 1;
    }
    let discarded_cluster = (0..model.k()).min_by_key(|&c| (cluster_sizes[c], c)).unwrap_or(0);
    let kept: Vec<usize> = (0..traces.len()).filter(|&i| assignments[i] != discarded_cluster).collect();
    let discard_ratio =
        if traces.is_empty() { 0.0 } else { cluster_sizes[discarded_cluster] as f64 / traces.len() as f64 };
    Ok(KMeansDiscard { assignments, cluster_sizes, discarded_cluster, kept, discard_ratio })
}
