//! Synthetic multi-coil SMS k-space from magnitude-only dynamic images.
//!
//! Magnitudes `R` are lifted to complex coil images `R * exp(j*phi_c) * CSM_c`
//! where the phase `phi_c` is a per-coil draw that follows intensity
//! clusters, is shared across slices by majority vote and carries a
//! sinusoidal grating that is constant over time and slices.

mod csm;
mod kmeans;
mod phase;

pub use csm::{csm_circular, csm_gaussian, gaussian_blobs, GaussianBlob, GaussianCsmRanges};
pub use kmeans::{kmeans3d, kmeans_objective, ClusterLabels, KMeansResult};
pub use phase::{grating_phase, propagate_majority, sample_cluster_phases, Grating, GratingRanges, PhaseMap};

use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{invalid_config, invalid_input, Result};
use crate::sampling::{apply_mask, embed_sms_mask, MaskSpec, SamplingMask};
use crate::transforms::{apply_coil_map, f3d, fft2_stack, Direction};
use crate::volume::{Complex, CsmSet, Domain, ImageStack, KSpaceVolume, MultiCoilStack, RealStack, Stack};

pub(crate) const STREAM_CLUSTER_PHASE: u64 = 1;
pub(crate) const STREAM_CSM: u64 = 2;
pub(crate) const STREAM_KMEANS: u64 = 0x100;
pub(crate) const STREAM_GRATING: u64 = 0x1_0000;

/// ChaCha8 keyed by `seed`, on an independent stream per purpose.
pub(crate) fn seeded_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum CsmKind {
    /// Ring of coils; `ring_radius` in pixels, `None` = 0.6 x the larger
    /// in-plane dimension.
    Circular {
        ring_radius: Option<f64>,
    },
    Gaussian(GaussianCsmRanges),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SynthConfig {
    pub k_clusters: usize,
    pub sigma_phase: f64,
    pub coils: usize,
    pub grating: GratingRanges,
    pub csm: CsmKind,
    pub d_min: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            k_clusters: 8,
            sigma_phase: PI / 3.0,
            coils: 4,
            grating: GratingRanges::default(),
            csm: CsmKind::Circular { ring_radius: None },
            d_min: 2.0,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k_clusters == 0 {
            return Err(invalid_config("k_clusters must be >= 1"));
        }
        if self.coils == 0 {
            return Err(invalid_config("coils must be >= 1"));
        }
        if !(self.sigma_phase > 0.0) || !self.sigma_phase.is_finite() {
            return Err(invalid_config(format!("sigma_phase must be > 0, got {}", self.sigma_phase)));
        }
        if !(self.d_min > 0.0) || !self.d_min.is_finite() {
            return Err(invalid_config(format!("d_min must be > 0, got {}", self.d_min)));
        }
        self.grating.validate()?;
        if let CsmKind::Gaussian(r) = &self.csm {
            r.validate()?;
        }
        Ok(())
    }

    pub fn make_csm(&self, slices: usize, rows: usize, cols: usize) -> Result<CsmSet> {
        match self.csm {
            CsmKind::Circular { ring_radius } => {
                let radius = ring_radius.unwrap_or(0.6 * rows.max(cols) as f64);
                csm_circular(self.coils, slices, rows, cols, radius, self.d_min)
            }
            CsmKind::Gaussian(ranges) => csm_gaussian(self.coils, slices, rows, cols, self.seed, &ranges),
        }
    }
}

/// Cluster labels for every slice and the resulting phase map.
pub fn synthesize_phase(magnitudes: &RealStack, cfg: &SynthConfig) -> Result<(Vec<ClusterLabels>, PhaseMap)> {
    cfg.validate()?;
    let shape = magnitudes.shape();
    let dims = shape.dims();
    let labels = (0..shape.slices)
        .map(|s| {
            kmeans::kmeans3d_stream(magnitudes.slice(s), dims, cfg.k_clusters, cfg.seed, STREAM_KMEANS + s as u64)
                .map(|r| r.labels)
        })
        .collect::<Result<Vec<_>>>()?;

    let table = sample_cluster_phases(cfg.k_clusters, cfg.coils, cfg.sigma_phase, cfg.seed)?;
    let mut cluster = Vec::with_capacity(cfg.coils * shape.len());
    let mut grating = Vec::with_capacity(cfg.coils * shape.rows * shape.cols);
    for (c, phases_0) in table.iter().enumerate() {
        for (s, l) in labels.iter().enumerate() {
            let per_cluster = if s == 0 { phases_0.clone() } else { propagate_majority(l, &labels[0], phases_0)? };
            cluster.extend(l.labels().iter().map(|&q| per_cluster[q]));
        }
        grating.extend(grating_phase(shape.rows, shape.cols, c, cfg.seed, &cfg.grating)?);
    }
    Ok((labels, PhaseMap::new(cfg.coils, shape, cluster, grating)?))
}

#[derive(Clone, Debug)]
pub struct SynthOutput {
    /// `U ⊙ F3D(X_c)` per coil.
    pub undersampled: MultiCoilStack<KSpaceVolume>,
    /// Per-slice 2D k-space of each coil image (no slice mixing).
    pub fully_sampled: MultiCoilStack<ImageStack>,
    /// Complex coil images `R * exp(j*phi_c) * CSM_c`.
    pub coil_images: MultiCoilStack<ImageStack>,
    pub phase: PhaseMap,
    pub csm: CsmSet,
    pub mask: SamplingMask,
    pub labels: Vec<ClusterLabels>,
}

/// Complex coil images and k-space from magnitudes, a phase map, coil maps
/// and a mask.
pub fn compose_kspace(
    magnitudes: &RealStack,
    phase: &PhaseMap,
    csm: &CsmSet,
    mask: &SamplingMask,
) -> Result<(MultiCoilStack<KSpaceVolume>, MultiCoilStack<ImageStack>, MultiCoilStack<ImageStack>)> {
    let shape = magnitudes.shape();
    if phase.shape() != shape || phase.num_coils() != csm.num_coils() {
        return Err(invalid_input(format!(
            "phase map ({} coils, {}) does not match magnitudes {shape} with {} coil maps",
            phase.num_coils(),
            phase.shape(),
            csm.num_coils()
        )));
    }
    if mask.shape() != shape {
        return Err(invalid_input(format!("mask shape {} does not match magnitudes {shape}", mask.shape())));
    }
    let mut under = Vec::with_capacity(csm.num_coils());
    let mut full = Vec::with_capacity(csm.num_coils());
    let mut images = Vec::with_capacity(csm.num_coils());
    for c in 0..csm.num_coils() {
        let data: Vec<Complex> =
            magnitudes.data().iter().zip(phase.coil(c)).map(|(&r, &phi)| Complex::from_polar(r, phi)).collect();
        let x = ImageStack::from_flat(shape, Domain::Image, data)?;
        let xc = apply_coil_map(&x, csm, c)?;
        under.push(apply_mask(&f3d(&xc)?, mask)?);
        full.push(fft2_stack(&xc, Direction::Forward)?);
        images.push(xc);
    }
    Ok((MultiCoilStack::new(under)?, MultiCoilStack::new(full)?, MultiCoilStack::new(images)?))
}

/// End-to-end synthesis: clustering, phase draw and propagation, grating,
/// coil maps, SMS composition and undersampling.
pub fn synthesize_kspace(magnitudes: &RealStack, cfg: &SynthConfig, mask_spec: &MaskSpec) -> Result<SynthOutput> {
    cfg.validate()?;
    let shape = magnitudes.shape();
    if mask_spec.shape() != shape {
        return Err(invalid_input(format!("mask spec shape {} does not match magnitudes {shape}", mask_spec.shape())));
    }
    let mask = embed_sms_mask(mask_spec)?;
    let (labels, phase) = synthesize_phase(magnitudes, cfg)?;
    let csm = cfg.make_csm(shape.slices, shape.rows, shape.cols)?;
    let (undersampled, fully_sampled, coil_images) = compose_kspace(magnitudes, &phase, &csm, &mask)?;
    Ok(SynthOutput { undersampled, fully_sampled, coil_images, phase, csm, mask, labels })
}
