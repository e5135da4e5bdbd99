//! Synthetic phase: per-cluster Gaussian offsets propagated across slices
//! by majority vote, plus a per-coil sinusoidal grating.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::kmeans::ClusterLabels;
use super::{seeded_rng, STREAM_CLUSTER_PHASE, STREAM_GRATING};
use crate::error::{invalid_config, invalid_input, Result};
use crate::volume::StackShape;

/// Draws a `coils x k` table of independent `N(0, sigma^2)` phases.
pub fn sample_cluster_phases(k: usize, coils: usize, sigma: f64, seed: u64) -> Result<Vec<Vec<f64>>> {
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(invalid_config(format!("phase sigma must be > 0, got {sigma}")));
    }
    let normal = Normal::new(0.0, sigma).map_err(|e| invalid_config(e.to_string()))?;
    let mut rng = seeded_rng(seed, STREAM_CLUSTER_PHASE);
    Ok((0..coils).map(|_| (0..k).map(|_| normal.sample(&mut rng)).collect()).collect())
}

/// For each cluster of `labels_s`, the phase of the `labels_0` cluster that
/// covers most of its voxels (ties to the smaller index). Clusters with no
/// voxels get 0.
pub fn propagate_majority(labels_s: &ClusterLabels, labels_0: &ClusterLabels, phases_0: &[f64]) -> Result<Vec<f64>> {
    if labels_s.dims() != labels_0.dims() {
        return Err(invalid_input(format!("label lattices differ: {:?} vs {:?}", labels_s.dims(), labels_0.dims())));
    }
    if phases_0.len() < labels_0.k() {
        return Err(invalid_input(format!("{} source phases for {} source clusters", phases_0.len(), labels_0.k())));
    }
    let k0 = labels_0.k();
    let mut votes = vec![0usize; labels_s.k() * k0];
    for (&q, &src) in labels_s.labels().iter().zip(labels_0.labels()) {
        votes[q * k0 + src] += 1;
    }
    Ok(votes
        .chunks(k0)
        .map(|row| {
            let mut best = 0;
            for (j, &count) in row.iter().enumerate() {
                if count > row[best] {
                    best = j;
                }
            }
            if row[best] == 0 {
                0.0
            } else {
                phases_0[best]
            }
        })
        .collect())
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GratingRanges {
    /// Amplitude range in radians.
    pub amplitude: (f64, f64),
    /// Spatial frequency range in cycles per field of view.
    pub frequency: (f64, f64),
}

impl Default for GratingRanges {
    fn default() -> Self {
        GratingRanges { amplitude: (PI / 4.0, PI / 2.0), frequency: (0.5, 3.0) }
    }
}

impl GratingRanges {
    pub fn validate(&self) -> Result<()> {
        for (name, (lo, hi)) in [("amplitude", self.amplitude), ("frequency", self.frequency)] {
            if !lo.is_finite() || !hi.is_finite() || lo >= hi || lo < 0.0 {
                return Err(invalid_config(format!(
                    "grating {name} range must satisfy 0 <= lo < hi, got ({lo}, {hi})"
                )));
            }
        }
        Ok(())
    }
}

/// Parameters of one grating `A sin(2 pi (fx r/rows + fy c/cols) + psi)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Grating {
    pub amplitude: f64,
    pub freq_rows: f64,
    pub freq_cols: f64,
    pub offset: f64,
}

impl Grating {
    pub fn draw(coil: usize, seed: u64, ranges: &GratingRanges) -> Result<Grating> {
        ranges.validate()?;
        let mut rng = seeded_rng(seed, STREAM_GRATING + coil as u64);
        Ok(Grating {
            amplitude: rng.random_range(ranges.amplitude.0..ranges.amplitude.1),
            freq_rows: rng.random_range(ranges.frequency.0..ranges.frequency.1),
            freq_cols: rng.random_range(ranges.frequency.0..ranges.frequency.1),
            offset: rng.random_range(0.0..2.0 * PI),
        })
    }

    pub fn render(&self, rows: usize, cols: usize) -> Vec<f64> {
        let mut out = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                let arg =
                    2.0 * PI * (self.freq_rows * r as f64 / rows as f64 + self.freq_cols * c as f64 / cols as f64)
                        + self.offset;
                out.push(self.amplitude * arg.sin());
            }
        }
        out
    }
}

/// Row-major `rows x cols` grating for one coil; reused unchanged for every
/// frame and slice.
pub fn grating_phase(rows: usize, cols: usize, coil: usize, seed: u64, ranges: &GratingRanges) -> Result<Vec<f64>> {
    Ok(Grating::draw(coil, seed, ranges)?.render(rows, cols))
}

/// Phase `phi = cluster + grating` for `(coil, slice, row, col, frame)`.
#[derive(Clone, Debug, PartialEq)]
pub struct PhaseMap {
    coils: usize,
    shape: StackShape,
    cluster: Vec<f64>,
    grating: Vec<f64>,
    phi: Vec<f64>,
}

impl PhaseMap {
    /// `cluster` is `(coil, slice, row, col, frame)`, `grating` is
    /// `(coil, row, col)`.
    pub fn new(coils: usize, shape: StackShape, cluster: Vec<f64>, grating: Vec<f64>) -> Result<PhaseMap> {
        let plane = shape.rows * shape.cols;
        if coils == 0 || cluster.len() != coils * shape.len() || grating.len() != coils * plane {
            return Err(invalid_input(format!("phase components do not match {coils} coils of shape {shape}")));
        }
        if cluster.iter().chain(&grating).any(|v| !v.is_finite()) {
            return Err(invalid_input("phase map contains non-finite values"));
        }
        let frames = shape.frames;
        let per_coil = shape.len();
        let mut phi = cluster.clone();
        for c in 0..coils {
            let g = &grating[c * plane..(c + 1) * plane];
            for (i, p) in phi[c * per_coil..(c + 1) * per_coil].iter_mut().enumerate() {
                *p += g[(i / frames) % plane];
            }
        }
        Ok(PhaseMap { coils, shape, cluster, grating, phi })
    }

    pub fn zeros(coils: usize, shape: StackShape) -> PhaseMap {
        PhaseMap::new(coils, shape, vec![0.0; coils * shape.len()], vec![0.0; coils * shape.rows * shape.cols])
            .expect("zero phase is well formed")
    }

    pub fn num_coils(&self) -> usize {
        self.coils
    }

    pub fn shape(&self) -> StackShape {
        self.shape
    }

    /// Total phase, `(coil, slice, row, col, frame)`.
    pub fn data(&self) -> &[f64] {
        &self.phi
    }

    /// Total phase of one coil, `(slice, row, col, frame)`.
    pub fn coil(&self, c: usize) -> &[f64] {
        let n = self.shape.len();
        &self.phi[c * n..(c + 1) * n]
    }

    pub fn cluster_component(&self, c: usize) -> &[f64] {
        let n = self.shape.len();
        &self.cluster[c * n..(c + 1) * n]
    }

    pub fn grating_component(&self, c: usize) -> &[f64] {
        let plane = self.shape.rows * self.shape.cols;
        &self.grating[c * plane..(c + 1) * plane]
    }

    pub fn get(&self, coil: usize, slice: usize, row: usize, col: usize, frame: usize) -> f64 {
        self.coil(coil)[self.shape.index(slice, row, col, frame)]
    }
}
