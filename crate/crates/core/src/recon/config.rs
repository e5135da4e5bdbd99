use crate::error::{invalid_config, Result};

/// Plug-in denoiser `G` for the cascade.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum DenoiserSpec {
    Identity,
    /// TV prox along time for every voxel.
    TvTemporal {
        w_t: f64,
    },
    /// TV prox along time plus along each in-plane axis.
    TvSpatiotemporal {
        w_s: f64,
        w_t: f64,
    },
}

impl DenoiserSpec {
    pub fn validate(&self) -> Result<()> {
        let weights: &[f64] = match self {
            DenoiserSpec::Identity => &[],
            DenoiserSpec::TvTemporal { w_t } => &[*w_t],
            DenoiserSpec::TvSpatiotemporal { w_s, w_t } => &[*w_s, *w_t],
        };
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(invalid_config(format!("denoiser weights must be finite and >= 0: {self:?}")));
        }
        Ok(())
    }
}

/// How the denoiser treats the slice axis.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SliceMode {
    /// Same operator on each slice's 2D+t volume, data consistency enabled.
    SharedPerSlice,
    /// Operator also couples neighbouring slices, data consistency enabled.
    Joint3d,
    /// Per-slice denoising with data consistency skipped.
    IndependentNoDc,
}

impl SliceMode {
    pub fn uses_dc(self) -> bool {
        !matches!(self, SliceMode::IndependentNoDc)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ReconConfig {
    pub n_iter: usize,
    pub lambda: f64,
    pub step: f64,
    pub denoiser: DenoiserSpec,
    pub mode: SliceMode,
}

impl Default for ReconConfig {
    fn default() -> Self {
        ReconConfig {
            n_iter: 5,
            lambda: 1.0,
            step: 1.0,
            denoiser: DenoiserSpec::TvTemporal { w_t: 0.05 },
            mode: SliceMode::SharedPerSlice,
        }
    }
}

impl ReconConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0) || !self.lambda.is_finite() {
            return Err(invalid_config(format!("lambda must be > 0, got {}", self.lambda)));
        }
        if !(self.step > 0.0) || !self.step.is_finite() {
            return Err(invalid_config(format!("step must be > 0, got {}", self.step)));
        }
        self.denoiser.validate()
    }
}
