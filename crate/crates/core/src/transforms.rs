//! Orthonormal Fourier operators for SMS data.
//!
//! `F3D = slice DFT ∘ per-slice 2D FFT` maps an [`ImageStack`] to the
//! 3D-formatted [`KSpaceVolume`]. All transforms are unitary, so the inverse
//! is also the adjoint.

use std::cell::RefCell;
use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::Arc;

use rayon::prelude::*;
use rustfft::{Fft, FftDirection, FftPlanner};

use crate::error::{invalid_input, Result};
use crate::volume::{
    Complex, ComplexVolume, CsmSet, Domain, ImageStack, KSpaceVolume, MultiCoilStack, RealStack, Stack,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Inverse,
}

thread_local! {
    static PLANS: RefCell<(FftPlanner<f64>, HashMap<(usize, bool), Arc<dyn Fft<f64>>>)> =
        RefCell::new((FftPlanner::new(), HashMap::new()));
}

fn plan(len: usize, dir: Direction) -> Arc<dyn Fft<f64>> {
    PLANS.with(|p| {
        let (planner, cache) = &mut *p.borrow_mut();
        let fwd = dir == Direction::Forward;
        cache
            .entry((len, fwd))
            .or_insert_with(|| planner.plan_fft(len, if fwd { FftDirection::Forward } else { FftDirection::Inverse }))
            .clone()
    })
}

/// `exp(sign * j*2*pi*n/m)`, exact at multiples of a quarter turn.
pub(crate) fn twiddle(n: usize, m: usize, sign: f64) -> Complex {
    let n = n % m;
    if (4 * n) % m == 0 {
        let q = 4 * n / m;
        let (re, im) = [(1.0, 0.0), (0.0, 1.0), (-1.0, 0.0), (0.0, -1.0)][q];
        return Complex::new(re, sign * im);
    }
    let theta = 2.0 * PI * n as f64 / m as f64;
    Complex::new(theta.cos(), sign * theta.sin())
}

/// Per-frame 2D DFT over `(rows, cols)` with `1/sqrt(rows*cols)` scaling.
/// The domain tag flips.
pub fn fft2(v: &ComplexVolume, direction: Direction) -> Result<ComplexVolume> {
    if !v.is_finite() {
        return Err(invalid_input("fft2 input contains non-finite samples"));
    }
    let d = v.dims();
    let (rows, cols, frames) = (d.rows, d.cols, d.frames);
    let row_fft = plan(cols, direction);
    let col_fft = plan(rows, direction);
    let scale = 1.0 / ((rows * cols) as f64).sqrt();

    let mut out = vec![Complex::new(0.0, 0.0); d.len()];
    let mut plane = vec![Complex::new(0.0, 0.0); rows * cols];
    let mut transposed = vec![Complex::new(0.0, 0.0); rows * cols];
    let src = v.data();
    for t in 0..frames {
        for p in 0..rows * cols {
            plane[p] = src[p * frames + t];
        }
        row_fft.process(&mut plane);
        for r in 0..rows {
            for c in 0..cols {
                transposed[c * rows + r] = plane[r * cols + c];
            }
        }
        col_fft.process(&mut transposed);
        for r in 0..rows {
            for c in 0..cols {
                out[(r * cols + c) * frames + t] = transposed[c * rows + r] * scale;
            }
        }
    }
    Ok(v.with_data(v.domain().flipped(), out))
}

fn slice_transform(volumes: &[ComplexVolume], sign: f64) -> Vec<ComplexVolume> {
    let m = volumes.len();
    if m == 1 {
        return volumes.to_vec();
    }
    let scale = 1.0 / (m as f64).sqrt();
    let n = volumes[0].dims().len();
    (0..m)
        .map(|k| {
            let w: Vec<Complex> = (0..m).map(|i| twiddle(i * k, m, sign) * scale).collect();
            let mut acc = vec![Complex::new(0.0, 0.0); n];
            for (i, v) in volumes.iter().enumerate() {
                for (a, x) in acc.iter_mut().zip(v.data()) {
                    *a += x * w[i];
                }
            }
            volumes[0].with_data(volumes[0].domain(), acc)
        })
        .collect()
}

/// Orthonormal length-`M` DFT along the slice index:
/// `band_k = (1/sqrt(M)) * sum_i slice_i * exp(-j*2*pi*i*k/M)`.
pub fn slice_dft(x: &ImageStack) -> KSpaceVolume {
    KSpaceVolume::new(slice_transform(x.slices(), -1.0)).expect("shape preserved")
}

/// Inverse of [`slice_dft`] (conjugate kernel, same `1/sqrt(M)` scale).
pub fn slice_idft(y: &KSpaceVolume) -> ImageStack {
    ImageStack::new(slice_transform(y.bands(), 1.0)).expect("shape preserved")
}

fn fft2_all(volumes: &[ComplexVolume], direction: Direction) -> Result<Vec<ComplexVolume>> {
    volumes.par_iter().map(|v| fft2(v, direction)).collect()
}

/// The 3D Fourier operator `F`: 2D FFT of every slice followed by the slice
/// DFT. Maps image-domain slices to k-space bands.
pub fn f3d(x: &ImageStack) -> Result<KSpaceVolume> {
    let planes = ImageStack::new(fft2_all(x.slices(), Direction::Forward)?)?;
    Ok(slice_dft(&planes))
}

/// `F^-1`, equal to the adjoint of [`f3d`].
pub fn f3d_inverse(y: &KSpaceVolume) -> Result<ImageStack> {
    let slices = slice_idft(y);
    ImageStack::new(fft2_all(slices.slices(), Direction::Inverse)?)
}

/// 2D FFT of every slice without mixing slices (per-slice k-space).
pub fn fft2_stack(x: &ImageStack, direction: Direction) -> Result<ImageStack> {
    ImageStack::new(fft2_all(x.slices(), direction)?)
}

/// Simulates a phase-modulated SMS acquisition. Each acquired readout line
/// `(ky, frame)` receives `sum_i exp(-j*2*pi*i*ky/M) * fft2(x_i)(ky, ., frame)`;
/// all other lines are zero. The result has no slice dimension.
pub fn acquire_sms_lines(x: &ImageStack, acquired: impl IntoIterator<Item = (usize, usize)>) -> Result<ComplexVolume> {
    if x.domain() != Domain::Image {
        return Err(invalid_input("SMS acquisition expects image-domain slices"));
    }
    let shape = x.shape();
    let d = shape.dims();
    let m = shape.slices;
    let kspace = fft2_all(x.slices(), Direction::Forward)?;
    let mut out = ComplexVolume::zeros(d, Domain::KSpace);
    for (ky, t) in acquired {
        if ky >= d.rows || t >= d.frames {
            return Err(invalid_input(format!(
                "acquired line (ky={ky}, frame={t}) outside {}x{} grid",
                d.rows, d.frames
            )));
        }
        for col in 0..d.cols {
            let mut acc = Complex::new(0.0, 0.0);
            for (i, k) in kspace.iter().enumerate() {
                acc += k.get(ky, col, t) * twiddle(i * ky, m, -1.0);
            }
            out.set(ky, col, t, acc);
        }
    }
    Ok(out)
}

/// Places each line `ky` of a composite acquisition into band `ky mod M` of
/// a 3D-formatted k-space volume; every other band is zero at that line.
pub fn embed_composite(composite: &ComplexVolume, m: usize) -> Result<KSpaceVolume> {
    if m == 0 {
        return Err(invalid_input("slice count must be >= 1"));
    }
    let d = composite.dims();
    let mut bands = vec![ComplexVolume::zeros(d, Domain::KSpace); m];
    for ky in 0..d.rows {
        let band = &mut bands[ky % m];
        for col in 0..d.cols {
            for t in 0..d.frames {
                band.set(ky, col, t, composite.get(ky, col, t));
            }
        }
    }
    KSpaceVolume::new(bands)
}

/// Coil images `x ⊙ CSM_c`, maps broadcast over frames.
pub fn apply_csm(x: &ImageStack, csm: &CsmSet) -> Result<MultiCoilStack<ImageStack>> {
    let coils = (0..csm.num_coils()).map(|c| apply_coil_map(x, csm, c)).collect::<Result<Vec<_>>>()?;
    MultiCoilStack::new(coils)
}

/// Weights `x` by the sensitivity of a single coil.
pub fn apply_coil_map(x: &ImageStack, csm: &CsmSet, coil: usize) -> Result<ImageStack> {
    let shape = x.shape();
    if csm.num_slices() != shape.slices || csm.rows() != shape.rows || csm.cols() != shape.cols {
        return Err(invalid_input(format!(
            "coil maps ({}, {}, {}) do not match stack {shape}",
            csm.num_slices(),
            csm.rows(),
            csm.cols()
        )));
    }
    if coil >= csm.num_coils() {
        return Err(invalid_input(format!("coil {coil} out of range")));
    }
    let frames = shape.frames;
    let mut out = x.clone();
    for (s, v) in out.volumes_mut().iter_mut().enumerate() {
        let map = csm.map(coil, s);
        for (i, z) in v.data_mut().iter_mut().enumerate() {
            *z *= map[i / frames];
        }
    }
    Ok(out)
}

/// Root-sum-of-squares coil combination `sqrt(sum_c |x_c|^2)`.
pub fn rss_combine(m: &MultiCoilStack<ImageStack>) -> RealStack {
    let shape = m.shape();
    let mut acc = vec![0.0; shape.len()];
    for coil in m.coils() {
        let mut offset = 0;
        for v in coil.slices() {
            for (a, z) in acc[offset..].iter_mut().zip(v.data()) {
                *a += z.norm_sqr();
            }
            offset += v.data().len();
        }
    }
    for a in &mut acc {
        *a = a.sqrt();
    }
    RealStack::new(shape, acc).expect("finite combination")
}
