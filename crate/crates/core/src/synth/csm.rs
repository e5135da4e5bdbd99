//! Synthetic coil sensitivity maps, normalised to unit root-sum-of-squares.

use std::f64::consts::PI;

use rand::Rng;

use super::{seeded_rng, STREAM_CSM};
use crate::error::{invalid_config, Result};
use crate::transforms::twiddle;
use crate::volume::CsmSet;

fn check_dims(coils: usize, slices: usize, rows: usize, cols: usize) -> Result<()> {
    if coils == 0 || slices == 0 || rows == 0 || cols == 0 {
        return Err(invalid_config(format!(
            "coil map dimensions must be >= 1, got ({coils}, {slices}, {rows}, {cols})"
        )));
    }
    Ok(())
}

/// Divides each pixel by the coil RSS and replicates over slices. A pixel
/// where every coil is zero becomes `1/sqrt(C)` on all coils.
fn normalize_and_replicate(raw: Vec<Vec<f64>>, slices: usize, rows: usize, cols: usize) -> Result<CsmSet> {
    let coils = raw.len();
    let plane = rows * cols;
    let mut norm = vec![0.0; plane];
    for map in &raw {
        for (n, s) in norm.iter_mut().zip(map) {
            *n += s * s;
        }
    }
    let mut maps = Vec::with_capacity(coils * slices * plane);
    for map in &raw {
        let normalized: Vec<f64> = map
            .iter()
            .zip(&norm)
            .map(|(s, n)| if *n > 0.0 { s / n.sqrt() } else { 1.0 / (coils as f64).sqrt() })
            .collect();
        for _ in 0..slices {
            maps.extend_from_slice(&normalized);
        }
    }
    CsmSet::new(coils, slices, rows, cols, maps)
}

fn fov_center(rows: usize, cols: usize) -> (f64, f64) {
    ((rows as f64 - 1.0) / 2.0, (cols as f64 - 1.0) / 2.0)
}

/// Coils equally spaced on a ring of `ring_radius` pixels around the
/// field-of-view centre; raw sensitivity `1 / max(d, d_min)^3`.
pub fn csm_circular(
    coils: usize,
    slices: usize,
    rows: usize,
    cols: usize,
    ring_radius: f64,
    d_min: f64,
) -> Result<CsmSet> {
    check_dims(coils, slices, rows, cols)?;
    if !(ring_radius > 0.0) || !ring_radius.is_finite() {
        return Err(invalid_config(format!("ring radius must be > 0, got {ring_radius}")));
    }
    if !(d_min > 0.0) || !d_min.is_finite() {
        return Err(invalid_config(format!("d_min must be > 0, got {d_min}")));
    }
    let (cr, cc) = fov_center(rows, cols);
    let raw = (0..coils)
        .map(|c| {
            let dir = twiddle(c, coils, 1.0);
            let (pr, pc) = (cr + ring_radius * dir.re, cc + ring_radius * dir.im);
            let mut map = Vec::with_capacity(rows * cols);
            for r in 0..rows {
                for col in 0..cols {
                    let d = ((r as f64 - pr).powi(2) + (col as f64 - pc).powi(2)).sqrt();
                    map.push(1.0 / d.max(d_min).powi(3));
                }
            }
            map
        })
        .collect();
    normalize_and_replicate(raw, slices, rows, cols)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GaussianCsmRanges {
    /// Side of the box (in fields of view) the blob centre is drawn from.
    pub center_box: f64,
    /// Major-axis standard deviation, in fields of view.
    pub sigma: (f64, f64),
    /// Minor/major axis ratio.
    pub axis_ratio: (f64, f64),
}

impl Default for GaussianCsmRanges {
    fn default() -> Self {
        GaussianCsmRanges { center_box: 1.5, sigma: (0.3, 0.8), axis_ratio: (0.4, 1.0) }
    }
}

impl GaussianCsmRanges {
    pub fn validate(&self) -> Result<()> {
        let ok = self.center_box > 0.0
            && self.sigma.0 > 0.0
            && self.sigma.0 < self.sigma.1
            && self.axis_ratio.0 > 0.0
            && self.axis_ratio.0 < self.axis_ratio.1
            && self.axis_ratio.1 <= 1.0;
        if !ok {
            return Err(invalid_config(format!("invalid Gaussian coil-map ranges: {self:?}")));
        }
        Ok(())
    }
}

/// Anisotropic 2D Gaussian in pixel units.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GaussianBlob {
    pub center_row: f64,
    pub center_col: f64,
    pub sigma_major: f64,
    pub sigma_minor: f64,
    pub rotation: f64,
}

impl GaussianBlob {
    fn draw<R: Rng>(rng: &mut R, rows: usize, cols: usize, ranges: &GaussianCsmRanges) -> GaussianBlob {
        let (cr, cc) = fov_center(rows, cols);
        let fov = rows.max(cols) as f64;
        let half_r = 0.5 * ranges.center_box * rows as f64;
        let half_c = 0.5 * ranges.center_box * cols as f64;
        let center_row = cr + rng.random_range(-half_r..half_r);
        let center_col = cc + rng.random_range(-half_c..half_c);
        let sigma_major = fov * rng.random_range(ranges.sigma.0..ranges.sigma.1);
        let ratio = rng.random_range(ranges.axis_ratio.0..=ranges.axis_ratio.1);
        let rotation = rng.random_range(0.0..PI);
        GaussianBlob { center_row, center_col, sigma_major, sigma_minor: ratio * sigma_major, rotation }
    }

    pub fn evaluate(&self, row: f64, col: f64) -> f64 {
        let (dr, dc) = (row - self.center_row, col - self.center_col);
        let (s, c) = self.rotation.sin_cos();
        let u = c * dr + s * dc;
        let v = -s * dr + c * dc;
        (-0.5 * ((u / self.sigma_major).powi(2) + (v / self.sigma_minor).powi(2))).exp()
    }

    pub fn render(&self, rows: usize, cols: usize) -> Vec<f64> {
        let mut out = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                out.push(self.evaluate(r as f64, c as f64));
            }
        }
        out
    }
}

/// The blobs `csm_gaussian` draws for `seed`, before normalisation.
pub fn gaussian_blobs(
    coils: usize,
    rows: usize,
    cols: usize,
    seed: u64,
    ranges: &GaussianCsmRanges,
) -> Result<Vec<GaussianBlob>> {
    ranges.validate()?;
    let mut rng = seeded_rng(seed, STREAM_CSM);
    Ok((0..coils).map(|_| GaussianBlob::draw(&mut rng, rows, cols, ranges)).collect())
}

/// One random anisotropic Gaussian blob per coil, RSS-normalised.
pub fn csm_gaussian(
    coils: usize,
    slices: usize,
    rows: usize,
    cols: usize,
    seed: u64,
    ranges: &GaussianCsmRanges,
) -> Result<CsmSet> {
    check_dims(coils, slices, rows, cols)?;
    let raw = gaussian_blobs(coils, rows, cols, seed, ranges)?.iter().map(|b| b.render(rows, cols)).collect();
    normalize_and_replicate(raw, slices, rows, cols)
}
