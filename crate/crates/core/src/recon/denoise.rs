//! Non-learned denoisers behind the cascade's `G` slot.
//!
//! Complex samples are smoothed channel-wise: the TV prox runs on the real
//! and imaginary parts separately. Multi-axis TV is applied as one sweep of
//! 1D proxes (time, then rows, then columns, then slices for `Joint3d`).

use rayon::prelude::*;

use super::config::{DenoiserSpec, SliceMode};
use super::tv::tv_prox_1d_into;
use crate::error::Result;
use crate::volume::{Complex, ComplexVolume, Dims, ImageStack, Stack};

pub fn denoise(x: &ImageStack, spec: &DenoiserSpec, mode: SliceMode) -> Result<ImageStack> {
    denoise_scaled(x, spec, mode, 1.0)
}

/// Denoises with every weight multiplied by `scale` (the prox step).
pub(crate) fn denoise_scaled(x: &ImageStack, spec: &DenoiserSpec, mode: SliceMode, scale: f64) -> Result<ImageStack> {
    spec.validate()?;
    let (w_s, w_t) = match *spec {
        DenoiserSpec::Identity => return Ok(x.clone()),
        DenoiserSpec::TvTemporal { w_t } => (0.0, w_t * scale),
        DenoiserSpec::TvSpatiotemporal { w_s, w_t } => (w_s * scale, w_t * scale),
    };

    let slices: Vec<ComplexVolume> = x
        .slices()
        .par_iter()
        .map(|v| {
            let mut data = v.data().to_vec();
            let d = v.dims();
            prox_along(&mut data, d, Axis::Frames, w_t);
            prox_along(&mut data, d, Axis::Rows, w_s);
            prox_along(&mut data, d, Axis::Cols, w_s);
            ComplexVolume::new(d, v.domain(), data)
        })
        .collect::<Result<_>>()?;
    let mut out = ImageStack::new(slices)?;

    if mode == SliceMode::Joint3d {
        let w_slice = match *spec {
            DenoiserSpec::TvSpatiotemporal { .. } => w_s,
            _ => w_t,
        };
        prox_across_slices(&mut out, w_slice);
    }
    Ok(out)
}

#[derive(Clone, Copy)]
enum Axis {
    Rows,
    Cols,
    Frames,
}

fn prox_along(data: &mut [Complex], d: Dims, axis: Axis, weight: f64) {
    if weight == 0.0 {
        return;
    }
    let (len, stride, starts): (usize, usize, Vec<usize>) = match axis {
        Axis::Frames => (d.frames, 1, (0..d.plane_len()).map(|p| p * d.frames).collect()),
        Axis::Rows => (
            d.rows,
            d.cols * d.frames,
            (0..d.cols).flat_map(|c| (0..d.frames).map(move |t| c * d.frames + t)).collect(),
        ),
        Axis::Cols => (
            d.cols,
            d.frames,
            (0..d.rows).flat_map(|r| (0..d.frames).map(move |t| r * d.cols * d.frames + t)).collect(),
        ),
    };
    if len < 2 {
        return;
    }
    let mut re = vec![0.0; len];
    let mut im = vec![0.0; len];
    let mut re_out = vec![0.0; len];
    let mut im_out = vec![0.0; len];
    for start in starts {
        for s in 0..len {
            let z = data[start + s * stride];
            re[s] = z.re;
            im[s] = z.im;
        }
        tv_prox_1d_into(&re, weight, &mut re_out);
        tv_prox_1d_into(&im, weight, &mut im_out);
        for s in 0..len {
            data[start + s * stride] = Complex::new(re_out[s], im_out[s]);
        }
    }
}

fn prox_across_slices(x: &mut ImageStack, weight: f64) {
    let m = x.shape().slices;
    if weight == 0.0 || m < 2 {
        return;
    }
    let n = x.shape().dims().len();
    let mut re = vec![0.0; m];
    let mut im = vec![0.0; m];
    let mut re_out = vec![0.0; m];
    let mut im_out = vec![0.0; m];
    let vols = x.volumes_mut();
    for i in 0..n {
        for s in 0..m {
            let z = vols[s].data()[i];
            re[s] = z.re;
            im[s] = z.im;
        }
        tv_prox_1d_into(&re, weight, &mut re_out);
        tv_prox_1d_into(&im, weight, &mut im_out);
        for s in 0..m {
            vols[s].data_mut()[i] = Complex::new(re_out[s], im_out[s]);
        }
    }
}
