//! Containers for complex dynamic volumes, slice stacks, k-space bands and
//! multi-coil data.
//!
//! Every container stores samples row-major over `(row, col, frame)` with the
//! frame index fastest. Stacks add a leading slice (or band) axis, multi-coil
//! containers a leading coil axis, giving the canonical order
//! `(coil, slice/band, row, col, frame)` that the file container also uses.

use num_complex::Complex64;

use crate::error::{invalid_input, Result};

pub type Complex = Complex64;

/// Whether the in-plane axes of a volume hold image samples or spatial
/// frequencies. Index `(0, 0)` of a k-space volume is the DC term.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Domain {
    Image,
    KSpace,
}

impl Domain {
    pub fn flipped(self) -> Domain {
        match self {
            Domain::Image => Domain::KSpace,
            Domain::KSpace => Domain::Image,
        }
    }
}

/// In-plane and temporal extent of a single-slice volume: `rows` (phase
/// encode, `a`), `cols` (frequency encode, `b`) and `frames` (`t`).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Dims {
    pub rows: usize,
    pub cols: usize,
    pub frames: usize,
}

impl Dims {
    pub fn new(rows: usize, cols: usize, frames: usize) -> Result<Dims> {
        if rows == 0 || cols == 0 || frames == 0 {
            return Err(invalid_input(format!("volume dimensions must be >= 1, got {rows}x{cols}x{frames}")));
        }
        Ok(Dims { rows, cols, frames })
    }

    pub fn len(&self) -> usize {
        self.rows * self.cols * self.frames
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, row: usize, col: usize, frame: usize) -> usize {
        (row * self.cols + col) * self.frames + frame
    }

    /// Number of samples in one in-plane image.
    pub fn plane_len(&self) -> usize {
        self.rows * self.cols
    }
}

/// Shape of a stack: `slices` volumes of identical [`Dims`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct StackShape {
    pub slices: usize,
    pub rows: usize,
    pub cols: usize,
    pub frames: usize,
}

impl StackShape {
    pub fn new(slices: usize, rows: usize, cols: usize, frames: usize) -> Result<StackShape> {
        if slices == 0 {
            return Err(invalid_input("stack needs at least one slice"));
        }
        Dims::new(rows, cols, frames)?;
        Ok(StackShape { slices, rows, cols, frames })
    }

    pub fn dims(&self) -> Dims {
        Dims { rows: self.rows, cols: self.cols, frames: self.frames }
    }

    pub fn len(&self) -> usize {
        self.slices * self.dims().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, slice: usize, row: usize, col: usize, frame: usize) -> usize {
        slice * self.dims().len() + self.dims().index(row, col, frame)
    }
}

impl std::fmt::Display for StackShape {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({}, {}, {}, {})", self.slices, self.rows, self.cols, self.frames)
    }
}

/// A complex `rows x cols x frames` volume tagged with its domain.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexVolume {
    dims: Dims,
    domain: Domain,
    data: Vec<Complex>,
}

impl ComplexVolume {
    pub fn new(dims: Dims, domain: Domain, data: Vec<Complex>) -> Result<ComplexVolume> {
        Dims::new(dims.rows, dims.cols, dims.frames)?;
        if data.len() != dims.len() {
            return Err(invalid_input(format!(
                "expected {} samples for {}x{}x{}, got {}",
                dims.len(),
                dims.rows,
                dims.cols,
                dims.frames,
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|z| !z.is_finite()) {
            return Err(invalid_input(format!("non-finite sample at flat index {pos}")));
        }
        Ok(ComplexVolume { dims, domain, data })
    }

    pub fn zeros(dims: Dims, domain: Domain) -> ComplexVolume {
        ComplexVolume { dims, domain, data: vec![Complex::new(0.0, 0.0); dims.len()] }
    }

    pub fn from_fn(dims: Dims, domain: Domain, mut f: impl FnMut(usize, usize, usize) -> Complex) -> ComplexVolume {
        let mut data = Vec::with_capacity(dims.len());
        for r in 0..dims.rows {
            for c in 0..dims.cols {
                for t in 0..dims.frames {
                    data.push(f(r, c, t));
                }
            }
        }
        ComplexVolume { dims, domain, data }
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn data(&self) -> &[Complex] {
        &self.data
    }

    /// Mutable access to the samples. Callers that write non-finite values
    /// break the container invariant; transforms re-check it.
    pub fn data_mut(&mut self) -> &mut [Complex] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<Complex> {
        self.data
    }

    pub fn get(&self, row: usize, col: usize, frame: usize) -> Complex {
        self.data[self.dims.index(row, col, frame)]
    }

    pub fn set(&mut self, row: usize, col: usize, frame: usize, value: Complex) {
        let i = self.dims.index(row, col, frame);
        self.data[i] = value;
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.is_finite())
    }

    pub fn norm_sqr(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum()
    }

    pub(crate) fn with_data(&self, domain: Domain, data: Vec<Complex>) -> ComplexVolume {
        debug_assert_eq!(data.len(), self.dims.len());
        ComplexVolume { dims: self.dims, domain, data }
    }
}

/// Operations shared by [`ImageStack`] and [`KSpaceVolume`]: both are a
/// non-empty sequence of identically shaped [`ComplexVolume`]s.
pub trait Stack: Sized + Clone {
    fn volumes(&self) -> &[ComplexVolume];

    fn volumes_mut(&mut self) -> &mut [ComplexVolume];

    fn from_volumes(volumes: Vec<ComplexVolume>) -> Result<Self>;

    fn into_volumes(self) -> Vec<ComplexVolume>;

    fn shape(&self) -> StackShape {
        let v = self.volumes();
        let d = v[0].dims();
        StackShape { slices: v.len(), rows: d.rows, cols: d.cols, frames: d.frames }
    }

    fn zeros(shape: StackShape, domain: Domain) -> Self {
        let vols = (0..shape.slices).map(|_| ComplexVolume::zeros(shape.dims(), domain)).collect();
        Self::from_volumes(vols).expect("zero stack is well formed")
    }

    fn domain(&self) -> Domain {
        self.volumes()[0].domain()
    }

    fn norm_sqr(&self) -> f64 {
        self.volumes().iter().map(|v| v.norm_sqr()).sum()
    }

    fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    /// `<self, other> = sum(self * conj(other))`.
    fn inner(&self, other: &Self) -> Complex {
        let mut acc = Complex::new(0.0, 0.0);
        for (a, b) in self.volumes().iter().zip(other.volumes()) {
            for (x, y) in a.data().iter().zip(b.data()) {
                acc += x * y.conj();
            }
        }
        acc
    }

    /// Samples of all volumes concatenated in canonical order.
    fn to_flat(&self) -> Vec<Complex> {
        self.volumes().iter().flat_map(|v| v.data().iter().copied()).collect()
    }

    fn from_flat(shape: StackShape, domain: Domain, data: Vec<Complex>) -> Result<Self> {
        if data.len() != shape.len() {
            return Err(invalid_input(format!(
                "expected {} samples for shape {shape}, got {}",
                shape.len(),
                data.len()
            )));
        }
        let per = shape.dims().len();
        let vols = data
            .chunks(per)
            .map(|c| ComplexVolume::new(shape.dims(), domain, c.to_vec()))
            .collect::<Result<Vec<_>>>()?;
        Self::from_volumes(vols)
    }

    /// Largest elementwise modulus of `self - other`.
    fn max_abs_diff(&self, other: &Self) -> f64 {
        self.volumes()
            .iter()
            .zip(other.volumes())
            .flat_map(|(a, b)| a.data().iter().zip(b.data()).map(|(x, y)| (x - y).norm()))
            .fold(0.0, f64::max)
    }

    fn scaled(&self, factor: Complex) -> Self {
        let mut out = self.clone();
        for v in out.volumes_mut() {
            for z in v.data_mut() {
                *z *= factor;
            }
        }
        out
    }

    /// Elementwise `alpha * self + beta * other`.
    fn combine(&self, alpha: Complex, other: &Self, beta: Complex) -> Self {
        let mut out = self.clone();
        for (v, w) in out.volumes_mut().iter_mut().zip(other.volumes()) {
            for (z, y) in v.data_mut().iter_mut().zip(w.data()) {
                *z = alpha * *z + beta * y;
            }
        }
        out
    }
}

fn check_volumes(volumes: &[ComplexVolume], what: &str) -> Result<()> {
    let first = volumes.first().ok_or_else(|| invalid_input(format!("{what} needs at least one volume")))?;
    for (i, v) in volumes.iter().enumerate().skip(1) {
        if v.dims() != first.dims() {
            return Err(invalid_input(format!(
                "{what} member {i} has dims {:?}, expected {:?}",
                v.dims(),
                first.dims()
            )));
        }
        if v.domain() != first.domain() {
            return Err(invalid_input(format!("{what} members mix image and k-space domains")));
        }
    }
    Ok(())
}

/// The multi-slice dynamic image `X`: one volume per simultaneously excited
/// slice `i`.
#[derive(Clone, Debug, PartialEq)]
pub struct ImageStack {
    slices: Vec<ComplexVolume>,
}

impl ImageStack {
    pub fn new(slices: Vec<ComplexVolume>) -> Result<ImageStack> {
        check_volumes(&slices, "image stack")?;
        Ok(ImageStack { slices })
    }

    pub fn slices(&self) -> &[ComplexVolume] {
        &self.slices
    }

    pub fn slice(&self, i: usize) -> &ComplexVolume {
        &self.slices[i]
    }

    /// Lifts a real stack to complex samples with zero imaginary part.
    pub fn from_real(real: &RealStack) -> ImageStack {
        let shape = real.shape();
        let data = real.data().iter().map(|&r| Complex::new(r, 0.0)).collect();
        ImageStack::from_flat(shape, Domain::Image, data).expect("finite real stack")
    }

    pub fn magnitude(&self) -> RealStack {
        let data = self.slices.iter().flat_map(|v| v.data().iter().map(|z| z.norm())).collect();
        RealStack { shape: self.shape(), data }
    }
}

impl Stack for ImageStack {
    fn volumes(&self) -> &[ComplexVolume] {
        &self.slices
    }

    fn volumes_mut(&mut self) -> &mut [ComplexVolume] {
        &mut self.slices
    }

    fn from_volumes(volumes: Vec<ComplexVolume>) -> Result<Self> {
        ImageStack::new(volumes)
    }

    fn into_volumes(self) -> Vec<ComplexVolume> {
        self.slices
    }
}

/// SMS k-space in the 3D format `Y`: band `k` is the `k`-th slice-frequency
/// plane.
#[derive(Clone, Debug, PartialEq)]
pub struct KSpaceVolume {
    bands: Vec<ComplexVolume>,
}

impl KSpaceVolume {
    pub fn new(bands: Vec<ComplexVolume>) -> Result<KSpaceVolume> {
        check_volumes(&bands, "k-space volume")?;
        Ok(KSpaceVolume { bands })
    }

    pub fn bands(&self) -> &[ComplexVolume] {
        &self.bands
    }

    pub fn band(&self, k: usize) -> &ComplexVolume {
        &self.bands[k]
    }
}

impl Stack for KSpaceVolume {
    fn volumes(&self) -> &[ComplexVolume] {
        &self.bands
    }

    fn volumes_mut(&mut self) -> &mut [ComplexVolume] {
        &mut self.bands
    }

    fn from_volumes(volumes: Vec<ComplexVolume>) -> Result<Self> {
        KSpaceVolume::new(volumes)
    }

    fn into_volumes(self) -> Vec<ComplexVolume> {
        self.bands
    }
}

/// `C` coils of identically shaped stacks.
#[derive(Clone, Debug, PartialEq)]
pub struct MultiCoilStack<S> {
    coils: Vec<S>,
}

impl<S: Stack> MultiCoilStack<S> {
    pub fn new(coils: Vec<S>) -> Result<MultiCoilStack<S>> {
        let first = coils.first().ok_or_else(|| invalid_input("need at least one coil"))?;
        let shape = first.shape();
        if let Some(c) = coils.iter().position(|s| s.shape() != shape) {
            return Err(invalid_input(format!("coil {c} has shape {}, expected {shape}", coils[c].shape())));
        }
        Ok(MultiCoilStack { coils })
    }

    pub fn coils(&self) -> &[S] {
        &self.coils
    }

    pub fn coil(&self, c: usize) -> &S {
        &self.coils[c]
    }

    pub fn into_coils(self) -> Vec<S> {
        self.coils
    }

    pub fn num_coils(&self) -> usize {
        self.coils.len()
    }

    pub fn shape(&self) -> StackShape {
        self.coils[0].shape()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.coils.iter().map(|s| s.norm_sqr()).sum()
    }
}

/// A real-valued stack in canonical `(slice, row, col, frame)` order.
/// Used for magnitude images, phantoms and coil-combined results.
#[derive(Clone, Debug, PartialEq)]
pub struct RealStack {
    shape: StackShape,
    data: Vec<f64>,
}

impl RealStack {
    pub fn new(shape: StackShape, data: Vec<f64>) -> Result<RealStack> {
        StackShape::new(shape.slices, shape.rows, shape.cols, shape.frames)?;
        if data.len() != shape.len() {
            return Err(invalid_input(format!(
                "expected {} samples for shape {shape}, got {}",
                shape.len(),
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|x| !x.is_finite()) {
            return Err(invalid_input(format!("non-finite sample at flat index {pos}")));
        }
        Ok(RealStack { shape, data })
    }

    pub fn zeros(shape: StackShape) -> RealStack {
        RealStack { shape, data: vec![0.0; shape.len()] }
    }

    pub fn from_slices(slices: Vec<Vec<f64>>, dims: Dims) -> Result<RealStack> {
        let shape = StackShape::new(slices.len(), dims.rows, dims.cols, dims.frames)?;
        RealStack::new(shape, slices.concat())
    }

    pub fn shape(&self) -> StackShape {
        self.shape
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    /// Samples of slice `i` as a `(row, col, frame)` volume.
    pub fn slice(&self, i: usize) -> &[f64] {
        let n = self.shape.dims().len();
        &self.data[i * n..(i + 1) * n]
    }

    pub fn get(&self, slice: usize, row: usize, col: usize, frame: usize) -> f64 {
        self.data[self.shape.index(slice, row, col, frame)]
    }

    /// In-plane image of one slice at one frame, row-major.
    pub fn frame_image(&self, slice: usize, frame: usize) -> Vec<f64> {
        let d = self.shape.dims();
        let vol = self.slice(slice);
        (0..d.plane_len()).map(|p| vol[p * d.frames + frame]).collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, x| m.max(x.abs()))
    }
}

/// Real nonnegative coil sensitivities, shape `(coils, slices, rows, cols)`.
#[derive(Clone, Debug, PartialEq)]
pub struct CsmSet {
    coils: usize,
    slices: usize,
    rows: usize,
    cols: usize,
    maps: Vec<f64>,
}

impl CsmSet {
    pub fn new(coils: usize, slices: usize, rows: usize, cols: usize, maps: Vec<f64>) -> Result<CsmSet> {
        if coils == 0 || slices == 0 || rows == 0 || cols == 0 {
            return Err(invalid_input("coil sensitivity dimensions must be >= 1"));
        }
        if maps.len() != coils * slices * rows * cols {
            return Err(invalid_input(format!(
                "expected {} sensitivity samples, got {}",
                coils * slices * rows * cols,
                maps.len()
            )));
        }
        if let Some(pos) = maps.iter().position(|s| !s.is_finite() || *s < 0.0) {
            return Err(invalid_input(format!("sensitivity at flat index {pos} is negative or non-finite")));
        }
        Ok(CsmSet { coils, slices, rows, cols, maps })
    }

    /// A single coil with unit sensitivity everywhere.
    pub fn uniform(slices: usize, rows: usize, cols: usize) -> CsmSet {
        CsmSet { coils: 1, slices, rows, cols, maps: vec![1.0; slices * rows * cols] }
    }

    pub fn num_coils(&self) -> usize {
        self.coils
    }

    pub fn num_slices(&self) -> usize {
        self.slices
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.maps
    }

    /// In-plane map (row-major) of `coil` for `slice`.
    pub fn map(&self, coil: usize, slice: usize) -> &[f64] {
        let plane = self.rows * self.cols;
        let start = (coil * self.slices + slice) * plane;
        &self.maps[start..start + plane]
    }

    /// Root-sum-of-squares over coils at one pixel.
    pub fn rss_at(&self, slice: usize, pixel: usize) -> f64 {
        (0..self.coils).map(|c| self.map(c, slice)[pixel].powi(2)).sum::<f64>().sqrt()
    }

    /// Largest `|rss - 1|` over all pixels and slices.
    pub fn max_rss_deviation(&self) -> f64 {
        let plane = self.rows * self.cols;
        (0..self.slices)
            .flat_map(|s| (0..plane).map(move |p| (s, p)))
            .map(|(s, p)| (self.rss_at(s, p) - 1.0).abs())
            .fold(0.0, f64::max)
    }
}
