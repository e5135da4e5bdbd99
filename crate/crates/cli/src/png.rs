//! 8-bit PNG dumps of magnitude frames and error maps.

use std::path::Path;

use image::GrayImage;
use smslab::RealStack;

use crate::config::{CliError, CliResult};

fn to_u8(v: f64, window: f64) -> u8 {
    if window <= 0.0 {
        return 0;
    }
    (255.0 * v / window).round().clamp(0.0, 255.0) as u8
}

fn save(path: &Path, rows: usize, cols: usize, pixels: Vec<u8>) -> CliResult<()> {
    let img = GrayImage::from_raw(cols as u32, rows as u32, pixels)
        .ok_or_else(|| CliError::Runtime("PNG buffer size mismatch".into()))?;
    img.save(path).map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", path.display())))
}

/// One PNG per slice and frame, intensities mapped from `[0, window]`.
pub fn write_frames(dir: &Path, prefix: &str, x: &RealStack, window: f64) -> CliResult<()> {
    let s = x.shape();
    for slice in 0..s.slices {
        for frame in 0..s.frames {
            let pixels = x.frame_image(slice, frame).iter().map(|&v| to_u8(v, window)).collect();
            save(&dir.join(format!("{prefix}_s{slice}_t{frame:03}.png")), s.rows, s.cols, pixels)?;
        }
    }
    Ok(())
}

/// `|x - reference|` amplified by `scale`, on the reference window.
pub fn write_error_maps(dir: &Path, x: &RealStack, reference: &RealStack, window: f64, scale: f64) -> CliResult<()> {
    let s = x.shape();
    for slice in 0..s.slices {
        for frame in 0..s.frames {
            let a = x.frame_image(slice, frame);
            let b = reference.frame_image(slice, frame);
            let pixels = a.iter().zip(&b).map(|(p, q)| to_u8(scale * (p - q).abs(), window)).collect();
            let name = format!("error_x{scale}_s{slice}_t{frame:03}.png");
            save(&dir.join(name), s.rows, s.cols, pixels)?;
        }
    }
    Ok(())
}
