//! Undersampling masks: interleaved in-plane row skipping and its helical
//! embedding into the 3D SMS k-space grid.

use crate::error::{invalid_config, invalid_input, Result};
use crate::volume::{KSpaceVolume, Stack, StackShape};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct MaskSpec {
    /// In-plane acceleration (keep every `r_inplane`-th row).
    pub r_inplane: usize,
    /// Number of simultaneously excited slices `M`.
    pub sms: usize,
    pub frames: usize,
    pub rows: usize,
    pub cols: usize,
    /// Row offset added per frame.
    pub interleave_step: usize,
    /// Fully sampled low-frequency rows around DC.
    pub acs_rows: usize,
}

impl MaskSpec {
    /// Uniform interleaved sampling without calibration rows.
    pub fn new(r_inplane: usize, sms: usize, rows: usize, cols: usize, frames: usize) -> MaskSpec {
        MaskSpec { r_inplane, sms, frames, rows, cols, interleave_step: 1, acs_rows: 0 }
    }

    pub fn validate(&self) -> Result<()> {
        if self.r_inplane == 0 || self.sms == 0 {
            return Err(invalid_config("r_inplane and sms must be >= 1"));
        }
        if self.rows == 0 || self.cols == 0 || self.frames == 0 {
            return Err(invalid_config("mask grid dimensions must be >= 1"));
        }
        if self.r_inplane > self.rows {
            return Err(invalid_config(format!("r_inplane {} exceeds row count {}", self.r_inplane, self.rows)));
        }
        if self.acs_rows > self.rows {
            return Err(invalid_config(format!("acs_rows {} exceeds row count {}", self.acs_rows, self.rows)));
        }
        Ok(())
    }

    pub fn shape(&self) -> StackShape {
        StackShape { slices: self.sms, rows: self.rows, cols: self.cols, frames: self.frames }
    }

    /// Nominal acceleration `r_inplane * M`.
    pub fn total_acceleration(&self) -> usize {
        self.r_inplane * self.sms
    }
}

/// Rows acquired in `frame`: `ky` with `(ky - frame*step) mod R == 0`, plus
/// `acs_rows` rows centred on DC (`ky` near 0 modulo `rows`). Sorted.
pub fn make_inplane_rows(spec: &MaskSpec, frame: usize) -> Result<Vec<usize>> {
    spec.validate()?;
    if frame >= spec.frames {
        return Err(invalid_input(format!("frame {frame} >= {}", spec.frames)));
    }
    let r = spec.r_inplane as i64;
    let offset = (frame as i64 * spec.interleave_step as i64).rem_euclid(r);
    let mut acquired = vec![false; spec.rows];
    for (ky, a) in acquired.iter_mut().enumerate() {
        *a = (ky as i64 - offset).rem_euclid(r) == 0;
    }
    let half = (spec.acs_rows / 2) as i64;
    for j in -half..(spec.acs_rows as i64 - half) {
        acquired[j.rem_euclid(spec.rows as i64) as usize] = true;
    }
    Ok(acquired.iter().enumerate().filter(|(_, &a)| a).map(|(ky, _)| ky).collect())
}

/// All acquired `(ky, frame)` readout lines of a spec.
pub fn acquired_lines(spec: &MaskSpec) -> Result<Vec<(usize, usize)>> {
    let mut lines = Vec::new();
    for t in 0..spec.frames {
        lines.extend(make_inplane_rows(spec, t)?.into_iter().map(|ky| (ky, t)));
    }
    Ok(lines)
}

/// Binary mask `U` on the `(band, row, col, frame)` grid.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SamplingMask {
    shape: StackShape,
    values: Vec<u8>,
}

impl SamplingMask {
    pub fn new(shape: StackShape, values: Vec<u8>) -> Result<SamplingMask> {
        StackShape::new(shape.slices, shape.rows, shape.cols, shape.frames)?;
        if values.len() != shape.len() {
            return Err(invalid_input(format!(
                "mask of shape {shape} needs {} values, got {}",
                shape.len(),
                values.len()
            )));
        }
        if let Some(pos) = values.iter().position(|&v| v > 1) {
            return Err(invalid_input(format!("mask value at flat index {pos} is not 0 or 1")));
        }
        Ok(SamplingMask { shape, values })
    }

    pub fn full(shape: StackShape) -> SamplingMask {
        SamplingMask { shape, values: vec![1; shape.len()] }
    }

    pub fn empty(shape: StackShape) -> SamplingMask {
        SamplingMask { shape, values: vec![0; shape.len()] }
    }

    pub fn shape(&self) -> StackShape {
        self.shape
    }

    pub fn values(&self) -> &[u8] {
        &self.values
    }

    pub fn get(&self, band: usize, row: usize, col: usize, frame: usize) -> bool {
        self.values[self.shape.index(band, row, col, frame)] == 1
    }

    pub fn count(&self) -> usize {
        self.values.iter().map(|&v| v as usize).sum()
    }

    pub fn acquired_fraction(&self) -> f64 {
        self.count() as f64 / self.values.len() as f64
    }

    /// True when every `(row, frame)` with any sample set has exactly one
    /// band set, namely `row mod M`.
    pub fn is_helical(&self) -> bool {
        let s = self.shape;
        for row in 0..s.rows {
            for t in 0..s.frames {
                let bands: Vec<usize> =
                    (0..s.slices).filter(|&k| (0..s.cols).any(|c| self.get(k, row, c, t))).collect();
                match bands.as_slice() {
                    [] => {}
                    [k] if *k == row % s.slices => {}
                    _ => return false,
                }
            }
        }
        true
    }
}

/// Sets band `ky mod M` of every acquired row to one across the full readout.
pub fn embed_sms_mask(spec: &MaskSpec) -> Result<SamplingMask> {
    spec.validate()?;
    let shape = spec.shape();
    let mut values = vec![0u8; shape.len()];
    for t in 0..spec.frames {
        for ky in make_inplane_rows(spec, t)? {
            let band = ky % spec.sms;
            for col in 0..spec.cols {
                values[shape.index(band, ky, col, t)] = 1;
            }
        }
    }
    Ok(SamplingMask { shape, values })
}

/// `U ⊙ Y`.
pub fn apply_mask(y: &KSpaceVolume, u: &SamplingMask) -> Result<KSpaceVolume> {
    if y.shape() != u.shape() {
        return Err(invalid_input(format!("mask shape {} does not match k-space shape {}", u.shape(), y.shape())));
    }
    let mut out = y.clone();
    let mut offset = 0;
    for band in out.volumes_mut() {
        let n = band.data().len();
        for (z, &m) in band.data_mut().iter_mut().zip(&u.values[offset..offset + n]) {
            if m == 0 {
                *z = Default::default();
            }
        }
        offset += n;
    }
    Ok(out)
}
