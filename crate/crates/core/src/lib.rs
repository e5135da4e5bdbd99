//! Simulation, synthesis and reconstruction of undersampled dynamic
//! simultaneous multi-slice (SMS) MRI.
//!
//! An SMS acquisition with per-line phase modulation is a sampled 3D
//! Fourier transform over `(slice, row, col)`, so reconstruction works on
//! the 3D-formatted k-space [`KSpaceVolume`] with the unitary operator
//! [`transforms::f3d`]. The crate provides:
//!
//! * [`transforms`]: orthonormal 2D/slice/3D Fourier operators, the
//!   line-by-line SMS acquisition model, coil weighting and RSS combination.
//! * [`sampling`]: interleaved in-plane masks and their helical SMS embedding.
//! * [`recon`]: zero-filled and data-consistency operators, the unrolled
//!   denoise/DC cascade, a proximal-gradient reference solver and grid search.
//! * [`synth`]: synthetic phase and coil sensitivities for magnitude-only data.
//! * [`phantom`] and [`io`]: deterministic cine/perfusion phantoms and the
//!   CXV1 container.
//! * [`metrics`]: NMSE, PSNR, SSIM, temporal TV, evaluation loss and the
//!   paired t-test.

pub mod error;
pub mod io;
pub mod metrics;
pub mod phantom;
pub mod recon;
pub mod sampling;
pub mod synth;
pub mod transforms;
pub mod volume;

pub use error::{Error, Result};
pub use volume::{
    Complex, ComplexVolume, CsmSet, Dims, Domain, ImageStack, KSpaceVolume, MultiCoilStack, RealStack, Stack,
    StackShape,
};
