//! Python bindings for the hologram generation library.
//!
//! Exposes the main types (images, fields, phase sources, target specs,
//! sub-frame sets) and operations (transforms, OSPR, Gerchberg-Saxton,
//! quantisation, error metrics, sweep execution) as a `holo_py` extension
//! module. Complex values cross the boundary as `(re, im)` tuples.

use num_complex::Complex64;
use pyo3::exceptions::{PyIndexError, PyIOError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyBytes;

use holo_core::cgh;
use holo_core::experiments;
use holo_core::field;
use holo_core::image_io;
use holo_core::metrics;
use holo_core::phase;

fn to_py_err(e: holo_core::Error) -> PyErr {
    if e.exit_code() == 3 {
        PyIOError::new_err(e.to_string())
    } else {
        PyValueError::new_err(e.to_string())
    }
}

fn pairs(data: &[Complex64]) -> Vec<(f64, f64)> {
    data.iter().map(|c| (c.re, c.im)).collect()
}

/// Real amplitude image with values in [0, 1].
#[pyclass(name = "RealImage", from_py_object)]
#[derive(Clone)]
struct PyRealImage {
    inner: field::RealImage,
}

#[pymethods]
impl PyRealImage {
    #[new]
    fn new(width: usize, height: usize, data: Vec<f64>) -> PyResult<Self> {
        Ok(Self {
            inner: field::RealImage::new(width, height, data).map_err(to_py_err)?,
        })
    }

    /// Built-in target: "rectangle", "checkerboard" or "radial-ramp".
    #[staticmethod]
    fn synthetic(kind: &str, width: usize, height: usize) -> PyResult<Self> {
        let kind: image_io::SyntheticKind = kind.parse().map_err(to_py_err)?;
        Ok(Self {
            inner: image_io::synthetic(kind, width, height).map_err(to_py_err)?,
        })
    }

    /// Load an 8-bit grayscale PNG or binary PGM.
    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        Ok(Self {
            inner: image_io::load_image(path).map_err(to_py_err)?,
        })
    }

    #[getter]
    fn width(&self) -> usize {
        self.inner.width()
    }

    #[getter]
    fn height(&self) -> usize {
        self.inner.height()
    }

    fn get(&self, x: usize, y: usize) -> PyResult<f64> {
        if x >= self.inner.width() || y >= self.inner.height() {
            return Err(PyIndexError::new_err("pixel out of range"));
        }
        Ok(self.inner.get(x, y))
    }

    fn to_list(&self) -> Vec<f64> {
        self.inner.as_slice().to_vec()
    }

    fn __repr__(&self) -> String {
        format!("RealImage({}x{})", self.inner.width(), self.inner.height())
    }
}

/// Complex field as a row-major array of (re, im) pairs.
#[pyclass(name = "ComplexField", from_py_object)]
#[derive(Clone)]
struct PyComplexField {
    inner: field::ComplexField,
}

#[pymethods]
impl PyComplexField {
    #[new]
    fn new(width: usize, height: usize, data: Vec<(f64, f64)>) -> PyResult<Self> {
        let data = data.into_iter().map(|(re, im)| Complex64::new(re, im)).collect();
        Ok(Self {
            inner: field::ComplexField::new(width, height, data).map_err(to_py_err)?,
        })
    }

    #[getter]
    fn width(&self) -> usize {
        self.inner.width()
    }

    #[getter]
    fn height(&self) -> usize {
        self.inner.height()
    }

    fn get(&self, x: usize, y: usize) -> PyResult<(f64, f64)> {
        if x >= self.inner.width() || y >= self.inner.height() {
            return Err(PyIndexError::new_err("pixel out of range"));
        }
        let v = self.inner.get(x, y);
        Ok((v.re, v.im))
    }

    fn to_list(&self) -> Vec<(f64, f64)> {
        pairs(self.inner.as_slice())
    }

    fn __repr__(&self) -> String {
        format!(
            "ComplexField({}x{})",
            self.inner.width(),
            self.inner.height()
        )
    }
}

/// Non-negative real plane (reconstructed intensities).
#[pyclass(name = "RealField", from_py_object)]
#[derive(Clone)]
struct PyRealField {
    inner: field::RealField,
}

#[pymethods]
impl PyRealField {
    #[getter]
    fn width(&self) -> usize {
        self.inner.width()
    }

    #[getter]
    fn height(&self) -> usize {
        self.inner.height()
    }

    fn get(&self, x: usize, y: usize) -> PyResult<f64> {
        if x >= self.inner.width() || y >= self.inner.height() {
            return Err(PyIndexError::new_err("pixel out of range"));
        }
        Ok(self.inner.get(x, y))
    }

    fn to_list(&self) -> Vec<f64> {
        self.inner.as_slice().to_vec()
    }

    fn __repr__(&self) -> String {
        format!("RealField({}x{})", self.inner.width(), self.inner.height())
    }
}

/// Stream of unit-modulus phase factors.
#[pyclass(name = "PhaseSource", from_py_object)]
#[derive(Clone)]
struct PyPhaseSource {
    inner: phase::PhaseSource,
}

#[pymethods]
impl PyPhaseSource {
    /// Unbounded pseudo-random stream with a deterministic seed.
    #[staticmethod]
    fn independent(seed: u64) -> Self {
        Self {
            inner: phase::PhaseSource::independent(seed),
        }
    }

    /// Cyclic lookup table of `n_lut` precomputed factors.
    #[staticmethod]
    fn lut(seed: u64, n_lut: usize) -> PyResult<Self> {
        Ok(Self {
            inner: phase::PhaseSource::cyclic(phase::PhaseLut::build(seed, n_lut).map_err(to_py_err)?),
        })
    }

    /// The degenerate no-randomisation source (every factor is 1).
    #[staticmethod]
    fn flat() -> Self {
        Self {
            inner: phase::PhaseSource::flat(),
        }
    }

    fn next_phase(&mut self) -> (f64, f64) {
        let v = self.inner.next_phase();
        (v.re, v.im)
    }

    #[getter]
    fn consumed(&self) -> u64 {
        self.inner.consumed()
    }

    #[getter]
    fn lut_len(&self) -> Option<usize> {
        self.inner.lut_len()
    }
}

/// Permitted SLM pixel values.
#[pyclass(name = "QuantisationScheme", from_py_object)]
#[derive(Clone)]
struct PyScheme {
    inner: cgh::QuantisationScheme,
}

#[pymethods]
impl PyScheme {
    /// The binary phase scheme {+1, -1}.
    #[staticmethod]
    fn binary_phase() -> Self {
        Self {
            inner: cgh::QuantisationScheme::binary_phase(),
        }
    }

    #[new]
    fn new(levels: Vec<(f64, f64)>) -> PyResult<Self> {
        let levels = levels
            .into_iter()
            .map(|(re, im)| Complex64::new(re, im))
            .collect();
        Ok(Self {
            inner: cgh::QuantisationScheme::new(levels).map_err(to_py_err)?,
        })
    }

    fn levels(&self) -> Vec<(f64, f64)> {
        pairs(self.inner.levels())
    }
}

/// Target image plus its placement and measurement region in the replay
/// plane.
#[pyclass(name = "TargetSpec", from_py_object)]
#[derive(Clone)]
struct PyTargetSpec {
    inner: cgh::TargetSpec,
}

#[pymethods]
impl PyTargetSpec {
    /// Default geometry: target in the upper half-plane, horizontally
    /// centred, error measured over the placement minus the DC pixel.
    #[staticmethod]
    fn upper_half(image: PyRealImage, plane_width: usize, plane_height: usize) -> PyResult<Self> {
        Ok(Self {
            inner: cgh::TargetSpec::upper_half(image.inner, plane_width, plane_height)
                .map_err(to_py_err)?,
        })
    }

    #[getter]
    fn plane_width(&self) -> usize {
        self.inner.plane_width()
    }

    #[getter]
    fn plane_height(&self) -> usize {
        self.inner.plane_height()
    }

    /// Full-plane amplitude image with the target embedded.
    fn embed(&self) -> PyRealImage {
        PyRealImage {
            inner: self.inner.embed(),
        }
    }

    /// Sorted linear indices of the measurement region.
    fn measurement_region(&self) -> Vec<usize> {
        self.inner.measurement_region().to_vec()
    }
}

/// Ordered set of quantised hologram sub-frames.
#[pyclass(name = "SubFrameSet", from_py_object)]
#[derive(Clone)]
struct PySubFrameSet {
    inner: cgh::SubFrameSet,
}

#[pymethods]
impl PySubFrameSet {
    fn __len__(&self) -> usize {
        self.inner.len()
    }

    #[getter]
    fn width(&self) -> usize {
        self.inner.width()
    }

    #[getter]
    fn height(&self) -> usize {
        self.inner.height()
    }

    fn frame(&self, index: usize) -> PyResult<PyComplexField> {
        self.inner
            .frames()
            .get(index)
            .map(|f| PyComplexField { inner: f.clone() })
            .ok_or_else(|| PyIndexError::new_err("frame index out of range"))
    }

    /// Packed payload: 1 bit per pixel, MSB first, rows padded to bytes.
    fn pack<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyBytes>> {
        let bytes = cgh::pack_binary_frames(&self.inner).map_err(to_py_err)?;
        Ok(PyBytes::new(py, &bytes))
    }

    /// One sub-frame as 8-bit grayscale bytes (+1 -> 255, -1 -> 0).
    fn frame_gray<'py>(&self, py: Python<'py>, index: usize) -> PyResult<Bound<'py, PyBytes>> {
        let frame = self
            .inner
            .frames()
            .get(index)
            .ok_or_else(|| PyIndexError::new_err("frame index out of range"))?;
        let bytes = cgh::frame_to_gray(frame).map_err(to_py_err)?;
        Ok(PyBytes::new(py, &bytes))
    }

    /// Write the framed container to disk.
    fn save(&self, path: &str) -> PyResult<()> {
        cgh::save_frames(&self.inner, path).map_err(to_py_err)
    }
}

/// Forward unitary transform.
#[pyfunction]
fn dft2(f: &PyComplexField) -> PyComplexField {
    PyComplexField {
        inner: field::dft2(&f.inner),
    }
}

/// Inverse unitary transform.
#[pyfunction]
fn idft2(f: &PyComplexField) -> PyComplexField {
    PyComplexField {
        inner: field::idft2(&f.inner),
    }
}

/// Element-wise |F|^2.
#[pyfunction]
fn intensity(f: &PyComplexField) -> PyRealField {
    PyRealField {
        inner: field::intensity(&f.inner),
    }
}

/// Sum of |f|^2.
#[pyfunction]
fn total_energy(f: &PyComplexField) -> f64 {
    field::total_energy(&f.inner)
}

/// Multiply image amplitudes by consecutive phase factors in raster order.
#[pyfunction]
fn apply_phase(image: &PyRealImage, source: &mut PyPhaseSource) -> PyComplexField {
    PyComplexField {
        inner: phase::apply_phase(&image.inner, &mut source.inner),
    }
}

/// Map every pixel to the nearest scheme level.
#[pyfunction]
fn quantise(f: &PyComplexField, scheme: &PyScheme) -> PyComplexField {
    PyComplexField {
        inner: cgh::quantise(&f.inner, &scheme.inner),
    }
}

/// One-step phase retrieval over `n_sf` sub-frames.
#[pyfunction]
fn ospr_generate(
    spec: &PyTargetSpec,
    n_sf: usize,
    source: &mut PyPhaseSource,
    scheme: &PyScheme,
) -> PyResult<PySubFrameSet> {
    Ok(PySubFrameSet {
        inner: cgh::ospr_generate(&spec.inner, n_sf, &mut source.inner, &scheme.inner)
            .map_err(to_py_err)?,
    })
}

/// Time-averaged replay intensity of a sub-frame set.
#[pyfunction]
fn reconstruct_average(frames: &PySubFrameSet) -> PyRealField {
    PyRealField {
        inner: cgh::reconstruct_average(&frames.inner),
    }
}

/// Iterative Gerchberg-Saxton; returns the quantised hologram and the
/// per-iteration replay amplitude error trace.
#[pyfunction]
fn gs_generate(
    spec: &PyTargetSpec,
    iterations: usize,
    source: &mut PyPhaseSource,
    scheme: &PyScheme,
) -> PyResult<(PyComplexField, Vec<f64>)> {
    let (hologram, trace) =
        cgh::gs_generate_with_trace(&spec.inner, iterations, &mut source.inner, &scheme.inner)
            .map_err(to_py_err)?;
    Ok((PyComplexField { inner: hologram }, trace))
}

/// Amplitude-domain MSE with optimal scaling over a measurement region.
#[pyfunction]
fn mse(recon: &PyRealField, target: &PyRealImage, region: Vec<usize>) -> PyResult<f64> {
    metrics::mse(&recon.inner, &target.inner, &region).map_err(to_py_err)
}

/// Mean, sample std and the mean +/- 2 std band.
#[pyfunction]
fn aggregate(values: Vec<f64>) -> PyResult<(f64, f64, f64, f64)> {
    let a = metrics::aggregate(&values).map_err(to_py_err)?;
    Ok((a.mean, a.std, a.lower, a.upper))
}

/// Minimum table lengths: (sub-frame independence, exact equivalence,
/// row period).
#[pyfunction]
fn hard_limits(n_x: u64, n_y: u64, n_sf: u64) -> (u64, u64, u64) {
    let l = phase::hard_limits(n_x, n_y, n_sf);
    (
        l.subframe_independence_min,
        l.exact_equivalence_min,
        l.row_period_min,
    )
}

#[pyfunction]
fn is_prime(n: u64) -> bool {
    phase::is_prime(n)
}

#[pyfunction]
fn next_prime_above(n: u64) -> u64 {
    phase::next_prime_above(n)
}

#[pyfunction]
fn primes_up_to(n: u64) -> Vec<u64> {
    phase::primes_up_to(n)
}

/// Stable per-cell seed hash used by the sweep harness.
#[pyfunction]
fn derive_seed(base_seed: u64, image_id: &str, n_lut: u64, run_index: u64) -> u64 {
    experiments::derive_seed(base_seed, image_id, n_lut, run_index)
}

/// Run a sweep config file and write its CSV; returns the record count.
#[pyfunction]
fn run_sweep_csv(config_path: &str, out_csv: &str) -> PyResult<usize> {
    let config = experiments::SweepConfig::from_file(config_path).map_err(to_py_err)?;
    let result = experiments::run_sweep(&config).map_err(to_py_err)?;
    experiments::emit_csv(&result, out_csv).map_err(to_py_err)?;
    Ok(result.records.len())
}

#[pymodule]
fn holo_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyRealImage>()?;
    m.add_class::<PyComplexField>()?;
    m.add_class::<PyRealField>()?;
    m.add_class::<PyPhaseSource>()?;
    m.add_class::<PyScheme>()?;
    m.add_class::<PyTargetSpec>()?;
    m.add_class::<PySubFrameSet>()?;
    m.add_function(wrap_pyfunction!(dft2, m)?)?;
    m.add_function(wrap_pyfunction!(idft2, m)?)?;
    m.add_function(wrap_pyfunction!(intensity, m)?)?;
    m.add_function(wrap_pyfunction!(total_energy, m)?)?;
    m.add_function(wrap_pyfunction!(apply_phase, m)?)?;
    m.add_function(wrap_pyfunction!(quantise, m)?)?;
    m.add_function(wrap_pyfunction!(ospr_generate, m)?)?;
    m.add_function(wrap_pyfunction!(reconstruct_average, m)?)?;
    m.add_function(wrap_pyfunction!(gs_generate, m)?)?;
    m.add_function(wrap_pyfunction!(mse, m)?)?;
    m.add_function(wrap_pyfunction!(aggregate, m)?)?;
    m.add_function(wrap_pyfunction!(hard_limits, m)?)?;
    m.add_function(wrap_pyfunction!(is_prime, m)?)?;
    m.add_function(wrap_pyfunction!(next_prime_above, m)?)?;
    m.add_function(wrap_pyfunction!(primes_up_to, m)?)?;
    m.add_function(wrap_pyfunction!(derive_seed, m)?)?;
    m.add_function(wrap_pyfunction!(run_sweep_csv, m)?)?;
    Ok(())
}
