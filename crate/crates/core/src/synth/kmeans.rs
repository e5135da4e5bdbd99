//! Scalar-intensity k-means over a `(rows, cols, frames)` volume.

use rand::Rng;

use super::seeded_rng;
use crate::error::{invalid_config, invalid_input, Result};
use crate::volume::Dims;

const MAX_ITER: usize = 100;
const REL_TOL: f64 = 1e-6;

/// One label in `[0, k)` per voxel, canonical `(row, col, frame)` order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ClusterLabels {
    dims: Dims,
    k: usize,
    labels: Vec<usize>,
}

impl ClusterLabels {
    pub fn new(dims: Dims, k: usize, labels: Vec<usize>) -> Result<ClusterLabels> {
        if labels.len() != dims.len() {
            return Err(invalid_input(format!("expected {} labels, got {}", dims.len(), labels.len())));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= k) {
            return Err(invalid_input(format!("label {bad} not below cluster count {k}")));
        }
        Ok(ClusterLabels { dims, k, labels })
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct KMeansResult {
    pub labels: ClusterLabels,
    pub centroids: Vec<f64>,
    /// Within-cluster sum of squares after each Lloyd iteration, followed by
    /// the value after single-point refinement.
    pub objective_trace: Vec<f64>,
}

impl KMeansResult {
    pub fn objective(&self) -> f64 {
        *self.objective_trace.last().expect("trace is never empty")
    }
}

/// Within-cluster sum of squared deviations for a labelling with the
/// given centroids.
pub fn kmeans_objective(values: &[f64], labels: &[usize], centroids: &[f64]) -> f64 {
    values.iter().zip(labels).map(|(v, &l)| (v - centroids[l]).powi(2)).sum()
}

fn nearest(v: f64, centroids: &[f64]) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (j, c) in centroids.iter().enumerate() {
        let d = (v - c).powi(2);
        if d < best_d {
            best_d = d;
            best = j;
        }
    }
    best
}

fn plus_plus_init(values: &[f64], k: usize, seed: u64, stream: u64) -> Vec<f64> {
    let mut rng = seeded_rng(seed, stream);
    let n = values.len();
    let mut centroids = vec![values[rng.random_range(0..n)]];
    let mut d2: Vec<f64> = values.iter().map(|v| (v - centroids[0]).powi(2)).collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut chosen = n - 1;
            for (i, d) in d2.iter().enumerate() {
                acc += d;
                if acc > target {
                    chosen = i;
                    break;
                }
            }
            chosen
        } else {
            rng.random_range(0..n)
        };
        let c = values[pick];
        centroids.push(c);
        for (d, v) in d2.iter_mut().zip(values) {
            *d = d.min((v - c).powi(2));
        }
    }
    centroids
}

fn update_centroids(values: &[f64], labels: &mut [usize], centroids: &mut [f64]) {
    let k = centroids.len();
    let mut sums = vec![0.0; k];
    let mut counts = vec![0usize; k];
    for (v, &l) in values.iter().zip(labels.iter()) {
        sums[l] += v;
        counts[l] += 1;
    }
    for j in 0..k {
        if counts[j] > 0 {
            centroids[j] = sums[j] / counts[j] as f64;
        }
    }
    // Empty clusters take the point farthest from its centroid, drawn from
    // clusters that can spare one.
    for j in 0..k {
        if counts[j] > 0 {
            continue;
        }
        let far = values
            .iter()
            .zip(labels.iter())
            .enumerate()
            .filter(|(_, (_, &l))| counts[l] > 1)
            .map(|(i, (v, &l))| (i, (v - centroids[l]).powi(2)))
            .fold(None::<(usize, f64)>, |best, (i, d)| match best {
                Some((_, bd)) if bd >= d => best,
                _ => Some((i, d)),
            });
        let Some((i, _)) = far else { continue };
        let old = labels[i];
        let n_old = counts[old] as f64;
        centroids[old] = (centroids[old] * n_old - values[i]) / (n_old - 1.0);
        counts[old] -= 1;
        labels[i] = j;
        counts[j] = 1;
        centroids[j] = values[i];
    }
}

/// Single-point (Hartigan) moves until no move lowers the objective.
fn refine(values: &[f64], labels: &mut [usize], centroids: &mut [f64]) {
    let k = centroids.len();
    for _ in 0..MAX_ITER {
        let mut counts = vec![0usize; k];
        for &l in labels.iter() {
            counts[l] += 1;
        }
        let mut moved = false;
        for (i, &v) in values.iter().enumerate() {
            let a = labels[i];
            if counts[a] < 2 {
                continue;
            }
            let na = counts[a] as f64;
            let gain = na / (na - 1.0) * (v - centroids[a]).powi(2);
            let mut best: Option<(usize, f64)> = None;
            for b in (0..k).filter(|&b| b != a) {
                let nb = counts[b] as f64;
                let cost = nb / (nb + 1.0) * (v - centroids[b]).powi(2);
                if best.is_none_or(|(_, c)| cost < c) {
                    best = Some((b, cost));
                }
            }
            if let Some((b, cost)) = best {
                if cost < gain * (1.0 - 1e-12) {
                    let nb = counts[b] as f64;
                    centroids[a] = (centroids[a] * na - v) / (na - 1.0);
                    centroids[b] = (centroids[b] * nb + v) / (nb + 1.0);
                    counts[a] -= 1;
                    counts[b] += 1;
                    labels[i] = b;
                    moved = true;
                }
            }
        }
        // exact means after each sweep
        let mut sums = vec![0.0; k];
        for (v, &l) in values.iter().zip(labels.iter()) {
            sums[l] += v;
        }
        for j in 0..k {
            if counts[j] > 0 {
                centroids[j] = sums[j] / counts[j] as f64;
            }
        }
        if !moved {
            break;
        }
    }
}

/// Lloyd iterations from a k-means++ seeding on scalar intensities, then
/// single-point refinement. Deterministic for a fixed `(seed, stream)`.
pub fn kmeans3d(magnitude: &[f64], dims: Dims, k: usize, seed: u64) -> Result<KMeansResult> {
    kmeans3d_stream(magnitude, dims, k, seed, 0)
}

pub(crate) fn kmeans3d_stream(values: &[f64], dims: Dims, k: usize, seed: u64, stream: u64) -> Result<KMeansResult> {
    if values.len() != dims.len() {
        return Err(invalid_input(format!("expected {} voxels, got {}", dims.len(), values.len())));
    }
    if k == 0 || k > values.len() {
        return Err(invalid_config(format!("cluster count {k} must be in 1..={}", values.len())));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(invalid_input("k-means input contains non-finite values"));
    }

    let mut centroids = plus_plus_init(values, k, seed, stream);
    let mut labels: Vec<usize> = values.iter().map(|&v| nearest(v, &centroids)).collect();
    let mut trace = Vec::new();
    let mut prev = f64::INFINITY;
    for _ in 0..MAX_ITER {
        update_centroids(values, &mut labels, &mut centroids);
        let obj = kmeans_objective(values, &labels, &centroids);
        trace.push(obj);
        if prev.is_finite() && (prev - obj).abs() <= REL_TOL * prev.abs() {
            break;
        }
        prev = obj;
        let next: Vec<usize> = values.iter().map(|&v| nearest(v, &centroids)).collect();
        if next == labels {
            break;
        }
        labels = next;
    }
    refine(values, &mut labels, &mut centroids);
    trace.push(kmeans_objective(values, &labels, &centroids));
    Ok(KMeansResult { labels: ClusterLabels::new(dims, k, labels)?, centroids, objective_trace: trace })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_cluster_takes_the_mean() {
        let d = Dims::new(2, 2, 2).unwrap();
        let v = [0.1, 0.4, 0.2, 0.9, 0.3, 0.3, 0.0, 0.8];
        let r = kmeans3d(&v, d, 1, 7).unwrap();
        assert!(r.labels.labels().iter().all(|&l| l == 0));
        assert!((r.centroids[0] - v.iter().sum::<f64>() / 8.0).abs() < 1e-15);
    }

    #[test]
    fn too_many_clusters_is_a_config_error() {
        let d = Dims::new(1, 2, 1).unwrap();
        assert!(matches!(kmeans3d(&[0.0, 1.0], d, 3, 0), Err(crate::Error::InvalidConfig(_))));
        assert!(kmeans3d(&[0.0, 1.0], d, 0, 0).is_err());
    }

    #[test]
    fn labels_reject_out_of_range() {
        let d = Dims::new(1, 2, 1).unwrap();
        assert!(ClusterLabels::new(d, 2, vec![0, 2]).is_err());
    }
}
