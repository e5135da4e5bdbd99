//! Reference proximal-gradient solver for
//! `min_X R(X) + lambda/2 * |Y_u - U ⊙ F(X)|^2` with temporal TV as `R`.
//!
//! The fidelity is half-scaled so its gradient `lambda * F^-1(U ⊙ F X - Y_u)`
//! has Lipschitz constant `lambda` (F unitary, U binary). The step is
//! `tau = 1/lambda`, which makes every iteration monotone.

use super::config::{DenoiserSpec, SliceMode};
use super::denoise::denoise_scaled;
use super::tv::total_variation;
use crate::error::{invalid_config, invalid_input, Result};
use crate::sampling::{apply_mask, SamplingMask};
use crate::transforms::{f3d, f3d_inverse};
use crate::volume::{Complex, ImageStack, KSpaceVolume, Stack};

#[derive(Clone, Debug)]
pub struct ProxGradResult {
    pub image: ImageStack,
    /// Objective at the initial point followed by one value per iteration.
    pub objective: Vec<f64>,
}

/// `w_t * sum over voxels of TV_t(re) + TV_t(im)`.
pub fn temporal_tv_penalty(x: &ImageStack, w_t: f64) -> f64 {
    if w_t == 0.0 {
        return 0.0;
    }
    let frames = x.shape().frames;
    let mut re = vec![0.0; frames];
    let mut im = vec![0.0; frames];
    let mut total = 0.0;
    for v in x.slices() {
        for series in v.data().chunks(frames) {
            for (s, z) in series.iter().enumerate() {
                re[s] = z.re;
                im[s] = z.im;
            }
            total += total_variation(&re) + total_variation(&im);
        }
    }
    w_t * total
}

pub fn objective(x: &ImageStack, y_u: &KSpaceVolume, u: &SamplingMask, lambda: f64, w_t: f64) -> Result<f64> {
    let residual = apply_mask(&f3d(x)?, u)?.combine(Complex::new(1.0, 0.0), y_u, Complex::new(-1.0, 0.0));
    Ok(temporal_tv_penalty(x, w_t) + 0.5 * lambda * residual.norm_sqr())
}

fn check(y_u: &KSpaceVolume, u: &SamplingMask, lambda: f64, w_t: f64) -> Result<()> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(invalid_config(format!("lambda must be > 0, got {lambda}")));
    }
    if !(w_t >= 0.0) || !w_t.is_finite() {
        return Err(invalid_config(format!("w_t must be >= 0, got {w_t}")));
    }
    if u.shape() != y_u.shape() {
        return Err(invalid_input(format!("mask shape {} does not match k-space shape {}", u.shape(), y_u.shape())));
    }
    Ok(())
}

/// One proximal-gradient update `prox_{tau R}(x - tau * grad)`.
pub fn prox_gradient_step(
    x: &ImageStack,
    y_u: &KSpaceVolume,
    u: &SamplingMask,
    lambda: f64,
    w_t: f64,
) -> Result<ImageStack> {
    check(y_u, u, lambda, w_t)?;
    let tau = 1.0 / lambda;
    let residual = apply_mask(&f3d(x)?, u)?.combine(Complex::new(1.0, 0.0), y_u, Complex::new(-1.0, 0.0));
    let grad = f3d_inverse(&residual)?;
    let moved = x.combine(Complex::new(1.0, 0.0), &grad, Complex::new(-tau * lambda, 0.0));
    denoise_scaled(&moved, &DenoiserSpec::TvTemporal { w_t }, SliceMode::SharedPerSlice, tau)
}

/// Runs `n_outer` iterations from the zero-filled image.
pub fn prox_gradient_solve(
    y_u: &KSpaceVolume,
    u: &SamplingMask,
    lambda: f64,
    w_t: f64,
    n_outer: usize,
) -> Result<ProxGradResult> {
    check(y_u, u, lambda, w_t)?;
    let mut x = f3d_inverse(y_u)?;
    let mut trace = vec![objective(&x, y_u, u, lambda, w_t)?];
    for _ in 0..n_outer {
        x = prox_gradient_step(&x, y_u, u, lambda, w_t)?;
        trace.push(objective(&x, y_u, u, lambda, w_t)?);
    }
    Ok(ProxGradResult { image: x, objective: trace })
}

/// `|x - T(x)|_2` for the proximal-gradient map `T`; zero at a minimiser.
pub fn fixed_point_residual(
    x: &ImageStack,
    y_u: &KSpaceVolume,
    u: &SamplingMask,
    lambda: f64,
    w_t: f64,
) -> Result<f64> {
    let next = prox_gradient_step(x, y_u, u, lambda, w_t)?;
    Ok(next.combine(Complex::new(1.0, 0.0), x, Complex::new(-1.0, 0.0)).norm())
}
