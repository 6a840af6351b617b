//! Complex-field storage and the unitary 2-D discrete Fourier transform pair.
//!
//! Both transform directions carry the symmetric `1/sqrt(Nx*Ny)`
//! normalisation, so [`dft2`]/[`idft2`] form a unitary pair: total energy is
//! preserved (Parseval) and `idft2(dft2(f))` recovers `f` to round-off.
//! Layout is row-major with x growing right and y growing down; the DC bin
//! sits at `[0, 0]` after a forward transform. Display-oriented centring is a
//! presentation concern and lives in the CLI.

use std::cell::RefCell;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftDirection, FftPlanner};

use crate::error::{Error, Result};

/// Row-major 2-D array of complex amplitudes, indexed `data[y * width + x]`.
///
/// Validated on construction: non-zero dimensions, matching buffer length,
/// every element finite.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexField {
    width: usize,
    height: usize,
    data: Vec<Complex64>,
}

impl ComplexField {
    pub fn new(width: usize, height: usize, data: Vec<Complex64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidField(format!(
                "dimensions must be non-zero, got {width}x{height}"
            )));
        }
        if data.len() != width * height {
            return Err(Error::InvalidField(format!(
                "buffer length {} does not match {width}x{height}",
                data.len()
            )));
        }
        if let Some(i) = data
            .iter()
            .position(|c| !c.re.is_finite() || !c.im.is_finite())
        {
            return Err(Error::InvalidField(format!(
                "non-finite element at index {i}"
            )));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn zeros(width: usize, height: usize) -> Result<Self> {
        Self::new(width, height, vec![Complex64::default(); width * height])
    }

    /// Build a field element-wise from `(x, y)` pixel coordinates.
    pub fn from_fn(
        width: usize,
        height: usize,
        mut f: impl FnMut(usize, usize) -> Complex64,
    ) -> Result<Self> {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self::new(width, height, data)
    }

    /// Constructor for internal ops whose output is finite by construction.
    pub(crate) fn from_parts_unchecked(width: usize, height: usize, data: Vec<Complex64>) -> Self {
        debug_assert_eq!(data.len(), width * height);
        Self {
            width,
            height,
            data,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn get(&self, x: usize, y: usize) -> Complex64 {
        self.data[y * self.width + x]
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }
}

/// Row-major 2-D array of real amplitudes normalised to `[0, 1]`.
///
/// Targets and loaded test images live here; reconstructed intensities do
/// not (they are unbounded, see [`RealField`]).
#[derive(Debug, Clone, PartialEq)]
pub struct RealImage {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl RealImage {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidImage(format!(
                "dimensions must be non-zero, got {width}x{height}"
            )));
        }
        if data.len() != width * height {
            return Err(Error::InvalidImage(format!(
                "buffer length {} does not match {width}x{height}",
                data.len()
            )));
        }
        if let Some(i) = data
            .iter()
            .position(|v| !v.is_finite() || *v < 0.0 || *v > 1.0)
        {
            return Err(Error::InvalidImage(format!(
                "value {} at index {i} outside [0, 1]",
                data[i]
            )));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn zeros(width: usize, height: usize) -> Result<Self> {
        Self::new(width, height, vec![0.0; width * height])
    }

    pub fn from_fn(
        width: usize,
        height: usize,
        mut f: impl FnMut(usize, usize) -> f64,
    ) -> Result<Self> {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self::new(width, height, data)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }
}

/// Row-major 2-D array of non-negative reals with no upper bound.
///
/// Holds reconstructed intensities and other derived real planes.
#[derive(Debug, Clone, PartialEq)]
pub struct RealField {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl RealField {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 || data.len() != width * height {
            return Err(Error::InvalidField(format!(
                "bad real field shape {width}x{height} with buffer length {}",
                data.len()
            )));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::InvalidField(format!(
                "value {} at index {i} is negative or non-finite",
                data[i]
            )));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub(crate) fn from_parts_unchecked(width: usize, height: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), width * height);
        Self {
            width,
            height,
            data,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }
}

thread_local! {
    // rustfft reuses plan instances per size; one planner per thread keeps
    // sweep loops from re-planning on every transform.
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn plans(
    width: usize,
    height: usize,
    direction: FftDirection,
) -> (Arc<dyn Fft<f64>>, Arc<dyn Fft<f64>>) {
    PLANNER.with(|p| {
        let mut planner = p.borrow_mut();
        (
            planner.plan_fft(width, direction),
            planner.plan_fft(height, direction),
        )
    })
}

fn transpose(width: usize, height: usize, src: &[Complex64]) -> Vec<Complex64> {
    let mut out = vec![Complex64::default(); src.len()];
    for y in 0..height {
        for x in 0..width {
            out[x * height + y] = src[y * width + x];
        }
    }
    out
}

fn transform(f: &ComplexField, direction: FftDirection) -> ComplexField {
    let (w, h) = (f.width, f.height);
    let (row_fft, col_fft) = plans(w, h, direction);

    let mut data = f.data.clone();
    row_fft.process(&mut data);

    // Columns are transformed as rows of the transposed buffer.
    let mut t = transpose(w, h, &data);
    col_fft.process(&mut t);
    for y in 0..h {
        for x in 0..w {
            data[y * w + x] = t[x * h + y];
        }
    }

    let scale = 1.0 / (w as f64 * h as f64).sqrt();
    for v in &mut data {
        *v *= scale;
    }
    ComplexField::from_parts_unchecked(w, h, data)
}

/// Forward unitary transform (hologram plane to replay plane).
///
/// `F[u,v] = 1/sqrt(Nx*Ny) * sum_xy f[x,y] exp(-2*pi*i*(u*x/Nx + v*y/Ny))`
pub fn dft2(f: &ComplexField) -> ComplexField {
    transform(f, FftDirection::Forward)
}

/// Inverse unitary transform; exact inverse of [`dft2`] up to round-off.
pub fn idft2(f: &ComplexField) -> ComplexField {
    transform(f, FftDirection::Inverse)
}

/// Element-wise `|F|^2`, not clamped to `[0, 1]`.
pub fn intensity(f: &ComplexField) -> RealField {
    let data = f.data.iter().map(|c| c.norm_sqr()).collect();
    RealField::from_parts_unchecked(f.width, f.height, data)
}

/// Sum of `|f|^2` over the whole field.
pub fn total_energy(f: &ComplexField) -> f64 {
    f.data.iter().map(|c| c.norm_sqr()).sum()
}
