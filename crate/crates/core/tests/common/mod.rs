//! Shared fixtures and brute-force oracles for the integration tests.

#![allow(dead_code)]

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use smslab::{Complex, ComplexVolume, Dims, Domain, ImageStack, KSpaceVolume, Stack, StackShape};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn shape(slices: usize, rows: usize, cols: usize, frames: usize) -> StackShape {
    StackShape::new(slices, rows, cols, frames).unwrap()
}

pub fn random_volume(rng: &mut ChaCha8Rng, dims: Dims, domain: Domain) -> ComplexVolume {
    ComplexVolume::from_fn(dims, domain, |_, _, _| {
        Complex::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
    })
}

pub fn random_stack(rng: &mut ChaCha8Rng, shape: StackShape) -> ImageStack {
    let vols = (0..shape.slices).map(|_| random_volume(rng, shape.dims(), Domain::Image)).collect();
    ImageStack::new(vols).unwrap()
}

pub fn random_kspace(rng: &mut ChaCha8Rng, shape: StackShape) -> KSpaceVolume {
    let vols = (0..shape.slices).map(|_| random_volume(rng, shape.dims(), Domain::KSpace)).collect();
    KSpaceVolume::new(vols).unwrap()
}

fn expi(angle: f64) -> Complex {
    Complex::new(angle.cos(), angle.sin())
}

/// Orthonormal 2D DFT of every frame by direct summation.
pub fn naive_dft2(v: &ComplexVolume, sign: f64) -> ComplexVolume {
    let d = v.dims();
    let scale = 1.0 / ((d.rows * d.cols) as f64).sqrt();
    let domain = if sign < 0.0 { Domain::KSpace } else { Domain::Image };
    ComplexVolume::from_fn(d, domain, |ky, kx, t| {
        let mut acc = Complex::new(0.0, 0.0);
        for r in 0..d.rows {
            for c in 0..d.cols {
                let angle = sign * 2.0 * PI * ((ky * r) as f64 / d.rows as f64 + (kx * c) as f64 / d.cols as f64);
                acc += v.get(r, c, t) * expi(angle);
            }
        }
        acc * scale
    })
}

/// Orthonormal DFT along the slice axis of per-slice 2D spectra, by direct
/// summation: `Y_k = M^-1/2 sum_i exp(-2 pi j i k / M) F2(x_i)`.
pub fn naive_f3d(x: &ImageStack) -> KSpaceVolume {
    let m = x.shape().slices;
    let spectra: Vec<ComplexVolume> = x.slices().iter().map(|v| naive_dft2(v, -1.0)).collect();
    let d = x.shape().dims();
    let bands = (0..m)
        .map(|k| {
            ComplexVolume::from_fn(d, Domain::KSpace, |r, c, t| {
                let mut acc = Complex::new(0.0, 0.0);
                for (i, s) in spectra.iter().enumerate() {
                    acc += s.get(r, c, t) * expi(-2.0 * PI * (i * k) as f64 / m as f64);
                }
                acc / (m as f64).sqrt()
            })
        })
        .collect();
    KSpaceVolume::new(bands).unwrap()
}

/// Inverse of [`naive_f3d`].
pub fn naive_f3d_inverse(y: &KSpaceVolume) -> ImageStack {
    let m = y.shape().slices;
    let d = y.shape().dims();
    let slices = (0..m)
        .map(|i| {
            let mixed = ComplexVolume::from_fn(d, Domain::KSpace, |r, c, t| {
                let mut acc = Complex::new(0.0, 0.0);
                for (k, b) in y.bands().iter().enumerate() {
                    acc += b.get(r, c, t) * expi(2.0 * PI * (i * k) as f64 / m as f64);
                }
                acc / (m as f64).sqrt()
            });
            naive_dft2(&mixed, 1.0)
        })
        .collect();
    ImageStack::new(slices).unwrap()
}

/// Largest entrywise modulus of `a - b` divided by the largest modulus of `b`.
pub fn rel_max_err<S: Stack>(a: &S, b: &S) -> f64 {
    let peak = b.volumes().iter().flat_map(|v| v.data()).fold(0.0f64, |m, z| m.max(z.norm()));
    a.max_abs_diff(b) / peak.max(f64::MIN_POSITIVE)
}

/// `|a - b| / |b|` in the 2-norm.
pub fn rel_l2_err<S: Stack>(a: &S, b: &S) -> f64 {
    a.combine(Complex::new(1.0, 0.0), b, Complex::new(-1.0, 0.0)).norm() / b.norm()
}

/// Objective of the 1D TV prox.
pub fn tv_objective(x: &[f64], v: &[f64], w: f64) -> f64 {
    let fit: f64 = x.iter().zip(v).map(|(a, b)| 0.5 * (a - b) * (a - b)).sum();
    let tv: f64 = x.windows(2).map(|p| (p[1] - p[0]).abs()).sum();
    fit + w * tv
}

/// Exact minimiser of the 1D TV prox by enumeration. The solution is
/// piecewise constant; for every split of `v` into runs and every sign
/// pattern of the jumps between runs, the stationarity condition gives
/// closed-form run values `(S_j + w (s_j - s_{j-1})) / n_j`. Patterns whose
/// values contradict the assumed signs are still valid candidates for the
/// objective, so the minimum over all of them is the global optimum.
pub fn tv_prox_oracle(v: &[f64], w: f64) -> Vec<f64> {
    let n = v.len();
    if n <= 1 {
        return v.to_vec();
    }
    let mut best = v.to_vec();
    let mut best_obj = tv_objective(v, v, w);
    for cuts in 0u32..(1 << (n - 1)) {
        let mut runs = Vec::new();
        let mut start = 0;
        for i in 0..n - 1 {
            if cuts & (1 << i) != 0 {
                runs.push((start, i + 1));
                start = i + 1;
            }
        }
        runs.push((start, n));
        let jumps = runs.len() - 1;
        for signs in 0u32..(1 << jumps) {
            let s = |j: usize| -> f64 {
                if j == 0 || j > jumps {
                    0.0
                } else if signs & (1 << (j - 1)) != 0 {
                    1.0
                } else {
                    -1.0
                }
            };
            let mut x = vec![0.0; n];
            for (j, &(a, b)) in runs.iter().enumerate() {
                let sum: f64 = v[a..b].iter().sum();
                // s(j) is the sign of the jump entering run j, s(j + 1) of the
                // jump leaving it
                let value = (sum + w * (s(j + 1) - s(j))) / (b - a) as f64;
                x[a..b].iter_mut().for_each(|e| *e = value);
            }
            let obj = tv_objective(&x, v, w);
            if obj < best_obj {
                best_obj = obj;
                best = x;
            }
        }
    }
    best
}
