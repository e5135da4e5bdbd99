//! Zero-filled initialisation, hard data consistency and the unrolled
//! denoise/DC cascade `X(n+1) = F^-1(Y_u + (1 - U) ⊙ F(G(X(n))))`.

use rayon::prelude::*;

use super::config::ReconConfig;
use super::denoise::denoise_scaled;
use crate::error::{invalid_input, Result};
use crate::sampling::SamplingMask;
use crate::transforms::{f3d, f3d_inverse};
use crate::volume::{ImageStack, KSpaceVolume, MultiCoilStack, Stack};

/// `F^-1(Y_u)`.
pub fn zero_filled(y_u: &KSpaceVolume) -> Result<ImageStack> {
    f3d_inverse(y_u)
}

/// Replaces the estimate's k-space at sampled locations with the
/// measurements: `F^-1(Y_u + (1 - U) ⊙ F(x))`.
pub fn data_consistency(x_est: &ImageStack, y_u: &KSpaceVolume, u: &SamplingMask) -> Result<ImageStack> {
    if x_est.shape() != y_u.shape() || u.shape() != y_u.shape() {
        return Err(invalid_input(format!(
            "data consistency shapes disagree: estimate {}, k-space {}, mask {}",
            x_est.shape(),
            y_u.shape(),
            u.shape()
        )));
    }
    let mut k = f3d(x_est)?;
    let mask = u.values();
    let mut offset = 0;
    for (band, measured) in k.volumes_mut().iter_mut().zip(y_u.volumes()) {
        let n = band.data().len();
        for ((z, y), &m) in band.data_mut().iter_mut().zip(measured.data()).zip(&mask[offset..offset + n]) {
            if m == 1 {
                *z = *y;
            }
        }
        offset += n;
    }
    f3d_inverse(&k)
}

/// Runs the cascade from the zero-filled image. `IndependentNoDc` skips the
/// DC step. The denoiser's weights are scaled by `cfg.step`.
pub fn cascade_recon(y_u: &KSpaceVolume, u: &SamplingMask, cfg: &ReconConfig) -> Result<ImageStack> {
    cfg.validate()?;
    if u.shape() != y_u.shape() {
        return Err(invalid_input(format!("mask shape {} does not match k-space shape {}", u.shape(), y_u.shape())));
    }
    let mut x = zero_filled(y_u)?;
    for _ in 0..cfg.n_iter {
        let denoised = denoise_scaled(&x, &cfg.denoiser, cfg.mode, cfg.step)?;
        x = if cfg.mode.uses_dc() { data_consistency(&denoised, y_u, u)? } else { denoised };
    }
    Ok(x)
}

/// Coils run as an independent batch through the cascade with the shared
/// mask and denoiser.
pub fn cascade_recon_multicoil(
    y_u: &MultiCoilStack<KSpaceVolume>,
    u: &SamplingMask,
    cfg: &ReconConfig,
) -> Result<MultiCoilStack<ImageStack>> {
    let coils = y_u.coils().par_iter().map(|y| cascade_recon(y, u, cfg)).collect::<Result<Vec<_>>>()?;
    MultiCoilStack::new(coils)
}
