//! CXV1 volume container and `key = value` sidecar metadata.
//!
//! Layout (little-endian):
//!
//! ```text
//! offset 0   magic      b"CXV1"
//! offset 4   version    u16 (= 1)
//! offset 6   kind       u8  (1 = complex64, 2 = real32, 3 = u8 mask)
//! offset 7   ndim       u8
//! offset 8   dims       ndim x u32, ordered (coil, slice/band, row, col, frame)
//! then       payload    row-major; complex as interleaved f32 (re, im)
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use num_complex::Complex32;

use crate::error::{invalid_input, Error, Result};
use crate::sampling::SamplingMask;
use crate::synth::PhaseMap;
use crate::volume::{Complex, CsmSet, Domain, MultiCoilStack, RealStack, Stack, StackShape};

pub const MAGIC: &[u8; 4] = b"CXV1";
pub const VERSION: u16 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Kind {
    Complex64 = 1,
    Real32 = 2,
    Mask = 3,
}

impl Kind {
    fn from_code(code: u8) -> Option<Kind> {
        match code {
            1 => Some(Kind::Complex64),
            2 => Some(Kind::Real32),
            3 => Some(Kind::Mask),
            _ => None,
        }
    }

    pub fn element_size(self) -> usize {
        match self {
            Kind::Complex64 => 8,
            Kind::Real32 => 4,
            Kind::Mask => 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Payload {
    Complex64(Vec<Complex32>),
    Real32(Vec<f32>),
    Mask(Vec<u8>),
}

impl Payload {
    pub fn kind(&self) -> Kind {
        match self {
            Payload::Complex64(_) => Kind::Complex64,
            Payload::Real32(_) => Kind::Real32,
            Payload::Mask(_) => Kind::Mask,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            Payload::Complex64(v) => v.len(),
            Payload::Real32(v) => v.len(),
            Payload::Mask(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct VolumeFile {
    pub dims: Vec<u32>,
    pub payload: Payload,
}

fn corrupt(offset: usize, reason: impl Into<String>) -> Error {
    Error::CorruptFile { offset: offset as u64, reason: reason.into() }
}

impl VolumeFile {
    pub fn new(dims: Vec<u32>, payload: Payload) -> Result<VolumeFile> {
        if dims.is_empty() || dims.len() > u8::MAX as usize {
            return Err(invalid_input(format!("volume needs 1..=255 dims, got {}", dims.len())));
        }
        let count: usize = dims.iter().map(|&d| d as usize).product();
        if count != payload.len() {
            return Err(invalid_input(format!(
                "dims {dims:?} describe {count} elements, payload has {}",
                payload.len()
            )));
        }
        Ok(VolumeFile { dims, payload })
    }

    pub fn kind(&self) -> Kind {
        self.payload.kind()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(8 + 4 * self.dims.len() + self.payload.len() * self.kind().element_size());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.push(self.kind() as u8);
        out.push(self.dims.len() as u8);
        for d in &self.dims {
            out.extend_from_slice(&d.to_le_bytes());
        }
        match &self.payload {
            Payload::Complex64(v) => {
                for z in v {
                    out.extend_from_slice(&z.re.to_le_bytes());
                    out.extend_from_slice(&z.im.to_le_bytes());
                }
            }
            Payload::Real32(v) => {
                for x in v {
                    out.extend_from_slice(&x.to_le_bytes());
                }
            }
            Payload::Mask(v) => out.extend_from_slice(v),
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<VolumeFile> {
        if bytes.len() < 8 {
            return Err(corrupt(bytes.len(), format!("truncated header: {} of 8 fixed bytes", bytes.len())));
        }
        if &bytes[0..4] != MAGIC {
            return Err(corrupt(0, format!("magic check failed: expected \"CXV1\", found {:?}", &bytes[0..4])));
        }
        let version = u16::from_le_bytes([bytes[4], bytes[5]]);
        if version != VERSION {
            return Err(corrupt(4, format!("unsupported version {version}")));
        }
        let kind = Kind::from_code(bytes[6]).ok_or_else(|| corrupt(6, format!("unknown kind code {}", bytes[6])))?;
        let ndim = bytes[7] as usize;
        if ndim == 0 {
            return Err(corrupt(7, "zero dimensions"));
        }
        let header = 8 + 4 * ndim;
        if bytes.len() < header {
            return Err(corrupt(bytes.len(), format!("truncated header: dims need {header} bytes")));
        }
        let dims: Vec<u32> =
            bytes[8..header].chunks_exact(4).map(|c| u32::from_le_bytes([c[0], c[1], c[2], c[3]])).collect();
        let count = dims
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d as usize))
            .ok_or_else(|| corrupt(8, "dimension product overflows"))?;
        let expected = count.checked_mul(kind.element_size()).ok_or_else(|| corrupt(8, "payload size overflows"))?;
        let payload = &bytes[header..];
        if payload.len() != expected {
            return Err(corrupt(
                header + payload.len().min(expected),
                format!("payload has {} bytes, expected {expected}", payload.len()),
            ));
        }
        let payload = match kind {
            Kind::Complex64 => Payload::Complex64(
                payload
                    .chunks_exact(8)
                    .map(|c| {
                        Complex32::new(
                            f32::from_le_bytes([c[0], c[1], c[2], c[3]]),
                            f32::from_le_bytes([c[4], c[5], c[6], c[7]]),
                        )
                    })
                    .collect(),
            ),
            Kind::Real32 => {
                Payload::Real32(payload.chunks_exact(4).map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]])).collect())
            }
            Kind::Mask => Payload::Mask(payload.to_vec()),
        };
        Ok(VolumeFile { dims, payload })
    }

    /// Complex volume `(coil, slice/band, row, col, frame)` from a
    /// multi-coil stack.
    pub fn from_multicoil<S: Stack>(m: &MultiCoilStack<S>) -> VolumeFile {
        let s = m.shape();
        let data =
            m.coils().iter().flat_map(|c| c.to_flat()).map(|z| Complex32::new(z.re as f32, z.im as f32)).collect();
        VolumeFile { dims: dims5(m.num_coils(), s), payload: Payload::Complex64(data) }
    }

    pub fn from_stack<S: Stack>(x: &S) -> VolumeFile {
        let data = x.to_flat().into_iter().map(|z| Complex32::new(z.re as f32, z.im as f32)).collect();
        VolumeFile { dims: dims5(1, x.shape()), payload: Payload::Complex64(data) }
    }

    pub fn from_real(x: &RealStack) -> VolumeFile {
        VolumeFile { dims: dims5(1, x.shape()), payload: Payload::Real32(x.data().iter().map(|&v| v as f32).collect()) }
    }

    pub fn from_mask(u: &SamplingMask) -> VolumeFile {
        VolumeFile { dims: dims5(1, u.shape()), payload: Payload::Mask(u.values().to_vec()) }
    }

    /// `(coil, slice, row, col)` real volume.
    pub fn from_csm(csm: &CsmSet) -> VolumeFile {
        VolumeFile {
            dims: vec![csm.num_coils() as u32, csm.num_slices() as u32, csm.rows() as u32, csm.cols() as u32],
            payload: Payload::Real32(csm.data().iter().map(|&v| v as f32).collect()),
        }
    }

    pub fn from_phase(phase: &PhaseMap) -> VolumeFile {
        VolumeFile {
            dims: dims5(phase.num_coils(), phase.shape()),
            payload: Payload::Real32(phase.data().iter().map(|&v| v as f32).collect()),
        }
    }

    /// `(coils, shape)` of a five-dimensional volume.
    pub fn shape5(&self) -> Result<(usize, StackShape)> {
        let [c, m, a, b, t] = self.dims[..] else {
            return Err(invalid_input(format!("expected 5 dims (coil, slice, row, col, frame), got {:?}", self.dims)));
        };
        if c == 0 {
            return Err(invalid_input("coil dimension is zero"));
        }
        Ok((c as usize, StackShape::new(m as usize, a as usize, b as usize, t as usize)?))
    }

    pub fn to_multicoil<S: Stack>(&self, domain: Domain) -> Result<MultiCoilStack<S>> {
        let (coils, shape) = self.shape5()?;
        let Payload::Complex64(data) = &self.payload else {
            return Err(invalid_input(format!("expected complex64 payload, found {:?}", self.kind())));
        };
        let per = shape.len();
        let stacks = (0..coils)
            .map(|c| {
                let chunk =
                    data[c * per..(c + 1) * per].iter().map(|z| Complex::new(z.re as f64, z.im as f64)).collect();
                S::from_flat(shape, domain, chunk)
            })
            .collect::<Result<Vec<_>>>()?;
        MultiCoilStack::new(stacks)
    }

    /// Real stack; accepts a single-coil real32 volume.
    pub fn to_real(&self) -> Result<RealStack> {
        let (coils, shape) = self.shape5()?;
        let Payload::Real32(data) = &self.payload else {
            return Err(invalid_input(format!("expected real32 payload, found {:?}", self.kind())));
        };
        if coils != 1 {
            return Err(invalid_input(format!("expected a single-coil real volume, got {coils} coils")));
        }
        RealStack::new(shape, data.iter().map(|&v| v as f64).collect())
    }

    pub fn to_mask(&self) -> Result<SamplingMask> {
        let (coils, shape) = self.shape5()?;
        let Payload::Mask(values) = &self.payload else {
            return Err(invalid_input(format!("expected u8 mask payload, found {:?}", self.kind())));
        };
        if coils != 1 {
            return Err(invalid_input(format!("mask volume has {coils} coils, expected 1")));
        }
        SamplingMask::new(shape, values.clone())
    }
}

fn dims5(coils: usize, s: StackShape) -> Vec<u32> {
    [coils, s.slices, s.rows, s.cols, s.frames].iter().map(|&d| d as u32).collect()
}

pub fn write_volume(path: impl AsRef<Path>, v: &VolumeFile) -> Result<()> {
    fs::write(path, v.to_bytes())?;
    Ok(())
}

pub fn read_volume(path: impl AsRef<Path>) -> Result<VolumeFile> {
    VolumeFile::from_bytes(&fs::read(path)?)
}

/// `<volume path>.meta`.
pub fn sidecar_path(path: impl AsRef<Path>) -> PathBuf {
    let mut p = path.as_ref().as_os_str().to_owned();
    p.push(".meta");
    PathBuf::from(p)
}

/// One `key = value` line per entry, in key order.
pub fn format_metadata(entries: &BTreeMap<String, String>) -> String {
    entries.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
}

/// Parses `key = value` lines; blank lines and `#` comments are skipped.
pub fn parse_metadata(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) =
            line.split_once('=').ok_or_else(|| invalid_input(format!("line {}: expected `key = value`", n + 1)))?;
        out.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(out)
}

pub fn write_sidecar(volume_path: impl AsRef<Path>, entries: &BTreeMap<String, String>) -> Result<()> {
    fs::write(sidecar_path(volume_path), format_metadata(entries))?;
    Ok(())
}

pub fn read_sidecar(volume_path: impl AsRef<Path>) -> Result<BTreeMap<String, String>> {
    parse_metadata(&fs::read_to_string(sidecar_path(volume_path))?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> VolumeFile {
        let data = (0..24).map(|i| Complex32::new(i as f32 * 0.5, -(i as f32) / 3.0)).collect();
        VolumeFile::new(vec![1, 2, 3, 2, 2], Payload::Complex64(data)).unwrap()
    }

    #[test]
    fn header_layout() {
        let bytes = sample().to_bytes();
        assert_eq!(&bytes[0..4], b"CXV1");
        assert_eq!(&bytes[4..6], &[1, 0]);
        assert_eq!(bytes[6], 1);
        assert_eq!(bytes[7], 5);
        assert_eq!(&bytes[8..12], &[1, 0, 0, 0]);
        assert_eq!(bytes.len(), 8 + 20 + 24 * 8);
    }

    #[test]
    fn truncation_and_bad_magic() {
        let mut bytes = sample().to_bytes();
        bytes.pop();
        assert!(matches!(VolumeFile::from_bytes(&bytes), Err(Error::CorruptFile { .. })));
        let mut bytes = sample().to_bytes();
        bytes[0..4].copy_from_slice(b"XXXX");
        match VolumeFile::from_bytes(&bytes) {
            Err(Error::CorruptFile { offset, reason }) => {
                assert_eq!(offset, 0);
                assert!(reason.contains("magic"));
            }
            other => panic!("expected corrupt file, got {other:?}"),
        }
        let mut bytes = sample().to_bytes();
        bytes[6] = 9;
        assert!(matches!(VolumeFile::from_bytes(&bytes), Err(Error::CorruptFile { offset: 6, .. })));
        assert!(VolumeFile::from_bytes(b"CXV").is_err());
    }

    #[test]
    fn metadata_roundtrip() {
        let mut m = BTreeMap::new();
        m.insert("seed".to_string(), "42".to_string());
        m.insert("mode".to_string(), "cine".to_string());
        let text = format_metadata(&m);
        assert_eq!(text, "mode = cine\nseed = 42\n");
        assert_eq!(parse_metadata(&text).unwrap(), m);
        assert!(parse_metadata("novalue").is_err());
    }
}
