//! Deterministic dynamic cardiac phantoms.
//!
//! Cine phantoms move: the blood pool of a ring-shaped ventricle wall
//! expands and contracts periodically. Perfusion (FPP) phantoms are static
//! and change contrast instead: right-ventricle, left-ventricle and
//! myocardium intensities follow delayed gamma-variate curves. Every slice
//! draws its own geometry so simultaneously excited slices look different.

use std::f64::consts::PI;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{invalid_config, Result};
use crate::synth::seeded_rng;
use crate::volume::{RealStack, StackShape};

const STREAM_GEOMETRY: u64 = 0x200;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CineParams {
    /// Peak change of the blood-pool radius as a fraction of its rest value.
    pub motion_amplitude: f64,
    /// Frames per cardiac cycle.
    pub period: usize,
}

impl Default for CineParams {
    fn default() -> Self {
        CineParams { motion_amplitude: 0.25, period: 8 }
    }
}

/// Gamma-variate enhancement `A ((τ-t0)/(αβ))^α exp(α - (τ-t0)/β)`,
/// which peaks at `A` when `τ = t0 + αβ`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Bolus {
    pub t0: f64,
    pub alpha: f64,
    pub beta: f64,
    pub peak: f64,
}

impl Bolus {
    pub fn enhancement(&self, tau: f64) -> f64 {
        let s = tau - self.t0;
        if s <= 0.0 || self.peak == 0.0 {
            return 0.0;
        }
        let x = s / (self.alpha * self.beta);
        self.peak * x.powf(self.alpha) * (self.alpha - s / self.beta).exp()
    }

    pub fn time_to_peak(&self) -> f64 {
        self.t0 + self.alpha * self.beta
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FppParams {
    pub rv: Bolus,
    pub lv: Bolus,
    pub myocardium: Bolus,
}

impl Default for FppParams {
    fn default() -> Self {
        FppParams {
            rv: Bolus { t0: 2.0, alpha: 2.0, beta: 1.5, peak: 0.7 },
            lv: Bolus { t0: 5.0, alpha: 2.0, beta: 1.5, peak: 0.65 },
            myocardium: Bolus { t0: 8.0, alpha: 2.0, beta: 2.5, peak: 0.25 },
        }
    }
}

impl FppParams {
    /// Moves the myocardial onset to `delay` frames after the left ventricle.
    pub fn with_myocardial_delay(mut self, delay: f64) -> FppParams {
        self.myocardium.t0 = self.lv.t0 + delay;
        self
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum PhantomKind {
    Cine(CineParams),
    Fpp(FppParams),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PhantomSpec {
    pub kind: PhantomKind,
    pub slices: usize,
    pub rows: usize,
    pub cols: usize,
    pub frames: usize,
    pub seed: u64,
}

impl PhantomSpec {
    pub fn cine(slices: usize, rows: usize, cols: usize, frames: usize, seed: u64) -> PhantomSpec {
        PhantomSpec { kind: PhantomKind::Cine(CineParams::default()), slices, rows, cols, frames, seed }
    }

    pub fn fpp(slices: usize, rows: usize, cols: usize, frames: usize, seed: u64) -> PhantomSpec {
        PhantomSpec { kind: PhantomKind::Fpp(FppParams::default()), slices, rows, cols, frames, seed }
    }

    pub fn shape(&self) -> StackShape {
        StackShape { slices: self.slices, rows: self.rows, cols: self.cols, frames: self.frames }
    }

    pub fn validate(&self) -> Result<()> {
        if self.frames < 2 {
            return Err(invalid_config(format!("phantom needs at least 2 frames, got {}", self.frames)));
        }
        if self.slices == 0 || self.rows < 4 || self.cols < 4 {
            return Err(invalid_config(format!(
                "phantom needs >= 1 slice and >= 4x4 pixels, got {} slices of {}x{}",
                self.slices, self.rows, self.cols
            )));
        }
        match &self.kind {
            PhantomKind::Cine(p) => {
                if !(0.0..=0.5).contains(&p.motion_amplitude) {
                    return Err(invalid_config(format!(
                        "motion amplitude must be in [0, 0.5], got {}",
                        p.motion_amplitude
                    )));
                }
                if p.period == 0 {
                    return Err(invalid_config("motion period must be >= 1 frame"));
                }
            }
            PhantomKind::Fpp(p) => {
                for (name, b) in [("rv", p.rv), ("lv", p.lv), ("myocardium", p.myocardium)] {
                    let ok = b.alpha > 0.0
                        && b.beta > 0.0
                        && b.peak >= 0.0
                        && b.t0.is_finite()
                        && b.alpha.is_finite()
                        && b.beta.is_finite()
                        && b.peak.is_finite();
                    if !ok {
                        return Err(invalid_config(format!("{name} bolus needs alpha, beta > 0 and peak >= 0: {b:?}")));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Fraction of a pixel inside a disc of radius `r` at distance `d`.
fn coverage(d: f64, r: f64) -> f64 {
    (r - d + 0.5).clamp(0.0, 1.0)
}

fn paint(img: &mut [f64], cover: &[f64], value: f64) {
    for (v, c) in img.iter_mut().zip(cover) {
        *v = *v * (1.0 - c) + value * c;
    }
}

/// Shared anatomy: a body ellipse, a heart with chamber and wall, and a few
/// static bright structures.
#[derive(Clone, Debug)]
struct Geometry {
    rows: usize,
    cols: usize,
    body: (f64, f64, f64, f64),
    body_value: f64,
    heart: (f64, f64),
    outer_radius: f64,
    inner_radius: f64,
    rv: (f64, f64, f64),
    blobs: Vec<(f64, f64, f64, f64)>,
    wall_value: f64,
    blood_value: f64,
}

impl Geometry {
    fn draw(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Geometry {
        let (cr, cc) = ((rows as f64 - 1.0) / 2.0, (cols as f64 - 1.0) / 2.0);
        let (a, b) = (rows as f64, cols as f64);
        let small = a.min(b);
        let body = (
            cr + rng.random_range(-0.04..0.04) * a,
            cc + rng.random_range(-0.04..0.04) * b,
            rng.random_range(0.38..0.46) * a,
            rng.random_range(0.34..0.44) * b,
        );
        let heart = (cr + rng.random_range(-0.08..0.08) * a, cc + rng.random_range(-0.08..0.08) * b);
        let outer_radius = rng.random_range(0.16..0.22) * small;
        let inner_radius = rng.random_range(0.55..0.7) * outer_radius;
        let rv_angle = rng.random_range(0.0..2.0 * PI);
        let rv_radius = rng.random_range(0.6..0.8) * outer_radius;
        let rv_dist = outer_radius + 0.6 * rv_radius;
        let rv = (heart.0 + rv_dist * rv_angle.cos(), heart.1 + rv_dist * rv_angle.sin(), rv_radius);
        let n_blobs = rng.random_range(2..=4);
        let blobs = (0..n_blobs)
            .map(|_| {
                let ang = rng.random_range(0.0..2.0 * PI);
                let rad = rng.random_range(0.45..0.85);
                (
                    body.0 + rad * body.2 * ang.cos(),
                    body.1 + rad * body.3 * ang.sin(),
                    rng.random_range(0.025..0.06) * small,
                    rng.random_range(0.45..0.8),
                )
            })
            .collect();
        Geometry {
            rows,
            cols,
            body,
            body_value: rng.random_range(0.22..0.34),
            heart,
            outer_radius,
            inner_radius,
            rv,
            blobs,
            wall_value: rng.random_range(0.45..0.58),
            blood_value: rng.random_range(0.85..0.95),
        }
    }

    fn disc(&self, center: (f64, f64), radius: f64) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.rows * self.cols);
        for r in 0..self.rows {
            for c in 0..self.cols {
                let d = ((r as f64 - center.0).powi(2) + (c as f64 - center.1).powi(2)).sqrt();
                out.push(coverage(d, radius));
            }
        }
        out
    }

    fn body_cover(&self) -> Vec<f64> {
        let (r0, c0, ra, rb) = self.body;
        let mut out = Vec::with_capacity(self.rows * self.cols);
        for r in 0..self.rows {
            for c in 0..self.cols {
                let (dr, dc) = ((r as f64 - r0) / ra, (c as f64 - c0) / rb);
                let rho = (dr * dr + dc * dc).sqrt();
                // approximate signed distance to the boundary, in pixels
                out.push(coverage((rho - 1.0) * ra.min(rb), 0.0));
            }
        }
        out
    }

    fn background(&self) -> Vec<f64> {
        let mut img = vec![0.0; self.rows * self.cols];
        paint(&mut img, &self.body_cover(), self.body_value);
        for &(r, c, rad, v) in &self.blobs {
            paint(&mut img, &self.disc((r, c), rad), v);
        }
        img
    }
}

fn place_frames(out: &mut [f64], frame_image: &[f64], frames: usize, t: usize) {
    for (p, v) in frame_image.iter().enumerate() {
        out[p * frames + t] = *v;
    }
}

/// Cine phantom: per slice a body, static structures and a ventricle whose
/// blood-pool radius follows `r0 (1 + amplitude sin(2 pi t / period))`.
pub fn gen_cine_phantom(spec: &PhantomSpec) -> Result<RealStack> {
    spec.validate()?;
    let PhantomKind::Cine(params) = spec.kind else {
        return Err(invalid_config("cine generator called with a non-cine spec"));
    };
    let shape = spec.shape();
    let mut data = Vec::with_capacity(shape.len());
    for s in 0..spec.slices {
        let mut rng = seeded_rng(spec.seed, STREAM_GEOMETRY + s as u64);
        let g = Geometry::draw(&mut rng, spec.rows, spec.cols);
        let base = g.background();
        let mut vol = vec![0.0; shape.dims().len()];
        for t in 0..spec.frames {
            let phase = (t % params.period) as f64 / params.period as f64;
            let inner = (g.inner_radius * (1.0 + params.motion_amplitude * (2.0 * PI * phase).sin()))
                .min(0.95 * g.outer_radius);
            let mut img = base.clone();
            paint(&mut img, &g.disc((g.rv.0, g.rv.1), g.rv.2), g.blood_value * 0.9);
            paint(&mut img, &g.disc(g.heart, g.outer_radius), g.wall_value);
            paint(&mut img, &g.disc(g.heart, inner), g.blood_value);
            place_frames(&mut vol, &img, spec.frames, t);
        }
        data.extend(vol);
    }
    RealStack::new(shape, data)
}

/// Perfusion phantom: static anatomy with region intensities
/// `baseline + enhancement(t)` clipped to `[0, 1]`.
pub fn gen_fpp_phantom(spec: &PhantomSpec) -> Result<RealStack> {
    spec.validate()?;
    let PhantomKind::Fpp(params) = spec.kind else {
        return Err(invalid_config("perfusion generator called with a non-perfusion spec"));
    };
    let shape = spec.shape();
    let mut data = Vec::with_capacity(shape.len());
    for s in 0..spec.slices {
        let mut rng = seeded_rng(spec.seed, STREAM_GEOMETRY + s as u64);
        let g = Geometry::draw(&mut rng, spec.rows, spec.cols);
        let base = g.background();
        let rv_cover = g.disc((g.rv.0, g.rv.1), g.rv.2);
        let wall_cover = g.disc(g.heart, g.outer_radius);
        let lv_cover = g.disc(g.heart, g.inner_radius);
        let (blood_base, myo_base) = (0.12, 0.2);
        let mut vol = vec![0.0; shape.dims().len()];
        for t in 0..spec.frames {
            let tau = t as f64;
            let mut img = base.clone();
            paint(&mut img, &rv_cover, (blood_base + params.rv.enhancement(tau)).min(1.0));
            paint(&mut img, &wall_cover, (myo_base + params.myocardium.enhancement(tau)).min(1.0));
            paint(&mut img, &lv_cover, (blood_base + params.lv.enhancement(tau)).min(1.0));
            place_frames(&mut vol, &img, spec.frames, t);
        }
        data.extend(vol);
    }
    RealStack::new(shape, data)
}

/// Dispatches on the phantom kind.
pub fn gen_phantom(spec: &PhantomSpec) -> Result<RealStack> {
    match spec.kind {
        PhantomKind::Cine(_) => gen_cine_phantom(spec),
        PhantomKind::Fpp(_) => gen_fpp_phantom(spec),
    }
}
