//! Image-quality metrics, the composite evaluation loss and the paired
//! t-test used to compare reconstruction methods.
//!
//! NMSE, PSNR and SSIM operate on real stacks; reconstructions are compared
//! through their magnitudes (see [`MetricReport::push_sequence`]).

use std::io::Write;

use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{invalid_config, invalid_input, Error, Result};
use crate::volume::{ImageStack, RealStack, Stack};

fn check_pair(x_hat: &RealStack, x_ref: &RealStack) -> Result<()> {
    if x_hat.shape() != x_ref.shape() {
        return Err(invalid_input(format!("metric inputs differ in shape: {} vs {}", x_hat.shape(), x_ref.shape())));
    }
    if x_ref.data().iter().all(|&v| v == 0.0) {
        return Err(invalid_input("reference image is identically zero"));
    }
    Ok(())
}

fn sum_sq_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum()
}

/// `|x_hat - x_ref|^2 / |x_ref|^2`.
pub fn nmse(x_hat: &RealStack, x_ref: &RealStack) -> Result<f64> {
    check_pair(x_hat, x_ref)?;
    let den: f64 = x_ref.data().iter().map(|v| v * v).sum();
    Ok(sum_sq_diff(x_hat.data(), x_ref.data()) / den)
}

pub fn mse(x_hat: &RealStack, x_ref: &RealStack) -> Result<f64> {
    if x_hat.shape() != x_ref.shape() {
        return Err(invalid_input(format!("metric inputs differ in shape: {} vs {}", x_hat.shape(), x_ref.shape())));
    }
    Ok(sum_sq_diff(x_hat.data(), x_ref.data()) / x_ref.data().len() as f64)
}

/// `10 log10(max|x_ref|^2 / MSE)` in dB; `f64::INFINITY` when the inputs are
/// identical.
pub fn psnr(x_hat: &RealStack, x_ref: &RealStack) -> Result<f64> {
    check_pair(x_hat, x_ref)?;
    let err = mse(x_hat, x_ref)?;
    if err == 0.0 {
        return Ok(f64::INFINITY);
    }
    let peak = x_ref.max_abs();
    Ok(10.0 * (peak * peak / err).log10())
}

const SSIM_K1: f64 = 0.01;
const SSIM_K2: f64 = 0.03;
const SSIM_RADIUS: usize = 5;
const SSIM_SIGMA: f64 = 1.5;

fn gaussian_kernel() -> [f64; 2 * SSIM_RADIUS + 1] {
    let mut k = [0.0; 2 * SSIM_RADIUS + 1];
    for (i, w) in k.iter_mut().enumerate() {
        let d = i as f64 - SSIM_RADIUS as f64;
        *w = (-d * d / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp();
    }
    k
}

/// Separable Gaussian mean with the window truncated at the borders and
/// renormalised over in-bounds pixels.
fn local_mean(img: &[f64], rows: usize, cols: usize, kernel: &[f64]) -> Vec<f64> {
    let r = SSIM_RADIUS as isize;
    let pass = |src: &[f64], along_rows: bool| -> Vec<f64> {
        let mut out = vec![0.0; src.len()];
        for i in 0..rows {
            for j in 0..cols {
                let (mut acc, mut norm) = (0.0, 0.0);
                for o in -r..=r {
                    let (ii, jj) = if along_rows { (i as isize + o, j as isize) } else { (i as isize, j as isize + o) };
                    if ii < 0 || jj < 0 || ii >= rows as isize || jj >= cols as isize {
                        continue;
                    }
                    let w = kernel[(o + r) as usize];
                    acc += w * src[ii as usize * cols + jj as usize];
                    norm += w;
                }
                out[i * cols + j] = acc / norm;
            }
        }
        out
    };
    pass(&pass(img, false), true)
}

/// Mean SSIM of two single images with dynamic range `peak`.
pub fn ssim_image(x: &[f64], y: &[f64], rows: usize, cols: usize, peak: f64) -> f64 {
    let kernel = gaussian_kernel();
    let c1 = (SSIM_K1 * peak).powi(2);
    let c2 = (SSIM_K2 * peak).powi(2);
    let xx: Vec<f64> = x.iter().map(|v| v * v).collect();
    let yy: Vec<f64> = y.iter().map(|v| v * v).collect();
    let xy: Vec<f64> = x.iter().zip(y).map(|(a, b)| a * b).collect();
    let mx = local_mean(x, rows, cols, &kernel);
    let my = local_mean(y, rows, cols, &kernel);
    let mxx = local_mean(&xx, rows, cols, &kernel);
    let myy = local_mean(&yy, rows, cols, &kernel);
    let mxy = local_mean(&xy, rows, cols, &kernel);
    let mut total = 0.0;
    for i in 0..rows * cols {
        let (ux, uy) = (mx[i], my[i]);
        let vx = mxx[i] - ux * ux;
        let vy = myy[i] - uy * uy;
        let cov = mxy[i] - ux * uy;
        total += ((2.0 * ux * uy + c1) * (2.0 * cov + c2)) / ((ux * ux + uy * uy + c1) * (vx + vy + c2));
    }
    total / (rows * cols) as f64
}

/// SSIM (11x11 Gaussian window, sigma 1.5, k1 = 0.01, k2 = 0.03,
/// `L = max|x_ref|`) per slice and frame, averaged.
pub fn ssim(x_hat: &RealStack, x_ref: &RealStack) -> Result<f64> {
    check_pair(x_hat, x_ref)?;
    let s = x_ref.shape();
    let peak = x_ref.max_abs();
    let mut total = 0.0;
    for slice in 0..s.slices {
        for t in 0..s.frames {
            total += ssim_image(&x_hat.frame_image(slice, t), &x_ref.frame_image(slice, t), s.rows, s.cols, peak);
        }
    }
    Ok(total / (s.slices * s.frames) as f64)
}

/// Sum over voxels and frames of `|x(s+1) - x(s)|` (complex modulus).
pub fn temporal_tv(x: &ImageStack) -> Result<f64> {
    let frames = x.shape().frames;
    if frames < 2 {
        return Err(invalid_input("temporal TV needs at least two frames"));
    }
    Ok(x.slices()
        .iter()
        .flat_map(|v| v.data().chunks(frames))
        .map(|series| series.windows(2).map(|w| (w[1] - w[0]).norm()).sum::<f64>())
        .sum())
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossWeights {
    pub w_mse: f64,
    pub w_ssim: f64,
    pub w_tv: f64,
}

impl LossWeights {
    pub fn new(w_mse: f64, w_ssim: f64, w_tv: f64) -> Result<LossWeights> {
        let w = LossWeights { w_mse, w_ssim, w_tv };
        w.validate()?;
        Ok(w)
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.w_mse, self.w_ssim, self.w_tv];
        if all.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(invalid_config(format!("loss weights must be finite and >= 0: {self:?}")));
        }
        if all.iter().all(|&w| w == 0.0) {
            return Err(invalid_config("loss weights are all zero"));
        }
        Ok(())
    }
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights { w_mse: 1.0, w_ssim: 0.1, w_tv: 0.0 }
    }
}

/// `w_mse * MSE + w_ssim * (1 - SSIM) + w_tv * TV_t(x_hat)`, with MSE and
/// SSIM on magnitudes. Lower is better.
pub fn loss_eval(x_hat: &ImageStack, x_ref: &ImageStack, w: &LossWeights) -> Result<f64> {
    w.validate()?;
    if x_hat.shape() != x_ref.shape() {
        return Err(invalid_input(format!("loss inputs differ in shape: {} vs {}", x_hat.shape(), x_ref.shape())));
    }
    let (mh, mr) = (x_hat.magnitude(), x_ref.magnitude());
    let mut loss = 0.0;
    if w.w_mse != 0.0 {
        loss += w.w_mse * mse(&mh, &mr)?;
    }
    if w.w_ssim != 0.0 {
        loss += w.w_ssim * (1.0 - ssim(&mh, &mr)?);
    }
    if w.w_tv != 0.0 {
        loss += w.w_tv * temporal_tv(x_hat)?;
    }
    Ok(loss)
}

/// Failure when NMSE in ×10⁻³ units exceeds 1000, i.e. raw ratio > 1.
pub fn fail_flag(nmse_ratio: f64) -> bool {
    nmse_ratio * 1e3 > 1000.0
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TTest {
    pub t: f64,
    /// Two-sided p-value.
    pub p: f64,
}

/// Paired Student's t-test on `a - b`.
pub fn paired_ttest(a: &[f64], b: &[f64]) -> Result<TTest> {
    if a.len() != b.len() {
        return Err(invalid_input(format!("paired samples differ in length: {} vs {}", a.len(), b.len())));
    }
    let n = a.len();
    if n < 2 {
        return Err(invalid_input("paired t-test needs at least two pairs"));
    }
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let mean = d.iter().sum::<f64>() / n as f64;
    let var = d.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    if var == 0.0 {
        return Ok(if mean == 0.0 {
            TTest { t: 0.0, p: 1.0 }
        } else {
            TTest { t: mean.signum() * f64::INFINITY, p: 0.0 }
        });
    }
    let t = mean / (var.sqrt() / (n as f64).sqrt());
    let dist =
        StudentsT::new(0.0, 1.0, (n - 1) as f64).map_err(|e| Error::InvalidInput(format!("t distribution: {e}")))?;
    let p = (2.0 * (1.0 - dist.cdf(t.abs()))).clamp(0.0, 1.0);
    Ok(TTest { t, p })
}

#[derive(Clone, Debug, PartialEq)]
pub struct SequenceMetrics {
    pub sequence_id: String,
    pub nmse: f64,
    pub psnr: f64,
    pub ssim: f64,
    pub fail: bool,
}

impl SequenceMetrics {
    pub fn compute(sequence_id: impl Into<String>, x_hat: &RealStack, x_ref: &RealStack) -> Result<Self> {
        let nmse = nmse(x_hat, x_ref)?;
        Ok(SequenceMetrics {
            sequence_id: sequence_id.into(),
            nmse,
            psnr: psnr(x_hat, x_ref)?,
            ssim: ssim(x_hat, x_ref)?,
            fail: fail_flag(nmse),
        })
    }
}

/// Mean and sample standard deviation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Summary {
    pub mean: f64,
    pub std: f64,
}

impl Summary {
    pub fn of(values: &[f64]) -> Summary {
        let n = values.len();
        if n == 0 {
            return Summary { mean: f64::NAN, std: f64::NAN };
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let std =
            if n > 1 { (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt() } else { 0.0 };
        Summary { mean, std }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct MetricReport {
    pub sequences: Vec<SequenceMetrics>,
}

fn fmt_value(v: f64) -> String {
    if v.is_infinite() && v > 0.0 {
        "inf".to_string()
    } else {
        format!("{v:.6}")
    }
}

impl MetricReport {
    /// Adds a sequence compared on magnitudes.
    pub fn push_sequence(&mut self, id: impl Into<String>, x_hat: &RealStack, x_ref: &RealStack) -> Result<()> {
        self.sequences.push(SequenceMetrics::compute(id, x_hat, x_ref)?);
        Ok(())
    }

    pub fn nmse_values(&self) -> Vec<f64> {
        self.sequences.iter().map(|s| s.nmse).collect()
    }

    pub fn psnr_values(&self) -> Vec<f64> {
        self.sequences.iter().map(|s| s.psnr).collect()
    }

    pub fn ssim_values(&self) -> Vec<f64> {
        self.sequences.iter().map(|s| s.ssim).collect()
    }

    pub fn fail_percent(&self) -> f64 {
        if self.sequences.is_empty() {
            return 0.0;
        }
        100.0 * self.sequences.iter().filter(|s| s.fail).count() as f64 / self.sequences.len() as f64
    }

    /// One row per sequence: `sequence_id,nmse_x1e3,psnr_db,ssim,fail`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let csv_err = |e: csv::Error| Error::Io(std::io::Error::other(e));
        w.write_record(["sequence_id", "nmse_x1e3", "psnr_db", "ssim", "fail"]).map_err(csv_err)?;
        for s in &self.sequences {
            w.write_record([
                s.sequence_id.clone(),
                fmt_value(s.nmse * 1e3),
                fmt_value(s.psnr),
                fmt_value(s.ssim),
                s.fail.to_string(),
            ])
            .map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }

    /// `key = value` summary with mean ± std per metric.
    pub fn summary_text(&self, label: &str) -> String {
        let nmse: Vec<f64> = self.nmse_values().iter().map(|v| v * 1e3).collect();
        let line = |name: &str, v: &[f64]| {
            let s = Summary::of(v);
            format!("{label}.{name} = {} +/- {}\n", fmt_value(s.mean), fmt_value(s.std))
        };
        let mut out = format!("{label}.sequences = {}\n", self.sequences.len());
        out += &line("nmse_x1e3", &nmse);
        out += &line("psnr_db", &self.psnr_values());
        out += &line("ssim", &self.ssim_values());
        out += &format!("{label}.fail_percent = {:.1}\n", self.fail_percent());
        out
    }
}
