//! Hologram generation: pixel quantisation, one-step phase retrieval with
//! time-multiplexed sub-frames, and iterative Gerchberg-Saxton refinement.
//!
//! A binary phase hologram is real-valued, so its replay field carries a
//! conjugate twin in the lower half-plane. Targets therefore occupy the upper
//! half-plane by default and error is measured there only, with the DC pixel
//! excluded (the undiffracted order dominates it).

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::field::{dft2, idft2, intensity, ComplexField, RealField, RealImage};
use crate::phase::{apply_phase, PhaseSource};

/// Finite set of permitted SLM pixel values.
///
/// Quantisation maps each pixel to the level nearest in the complex plane;
/// ties resolve to the earliest level in the set, so the order of `levels`
/// is part of the scheme definition.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantisationScheme {
    levels: Vec<Complex64>,
}

impl QuantisationScheme {
    pub fn new(levels: Vec<Complex64>) -> Result<Self> {
        if levels.is_empty() {
            return Err(Error::Config("quantisation scheme has no levels".into()));
        }
        if levels.iter().any(|l| !l.re.is_finite() || !l.im.is_finite()) {
            return Err(Error::Config(
                "quantisation scheme contains a non-finite level".into(),
            ));
        }
        Ok(Self { levels })
    }

    /// The binary phase scheme `{+1, -1}`. With levels in this order the
    /// `Re = 0` tie resolves to `+1`.
    pub fn binary_phase() -> Self {
        Self {
            levels: vec![Complex64::new(1.0, 0.0), Complex64::new(-1.0, 0.0)],
        }
    }

    pub fn levels(&self) -> &[Complex64] {
        &self.levels
    }

    pub fn is_binary_phase(&self) -> bool {
        self.levels == [Complex64::new(1.0, 0.0), Complex64::new(-1.0, 0.0)]
    }

    /// Nearest level by Euclidean distance in the complex plane; first
    /// minimal level wins on ties.
    pub fn quantise_value(&self, v: Complex64) -> Complex64 {
        let mut best = self.levels[0];
        let mut best_d = (v - best).norm_sqr();
        for &l in &self.levels[1..] {
            let d = (v - l).norm_sqr();
            if d < best_d {
                best = l;
                best_d = d;
            }
        }
        best
    }
}

/// Map every pixel of `h` to the nearest scheme level.
pub fn quantise(h: &ComplexField, scheme: &QuantisationScheme) -> ComplexField {
    let data = h
        .as_slice()
        .iter()
        .map(|&v| scheme.quantise_value(v))
        .collect();
    ComplexField::from_parts_unchecked(h.width(), h.height(), data)
}

/// Axis-aligned pixel rectangle, `x`/`y` top-left, half-open extent.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Rect {
    pub x: usize,
    pub y: usize,
    pub width: usize,
    pub height: usize,
}

impl Rect {
    pub fn contains(&self, x: usize, y: usize) -> bool {
        x >= self.x && x < self.x + self.width && y >= self.y && y < self.y + self.height
    }
}

/// A target image, where it sits in the replay plane, and the pixel set over
/// which reconstruction error is measured.
#[derive(Debug, Clone)]
pub struct TargetSpec {
    image: RealImage,
    plane_width: usize,
    plane_height: usize,
    placement: Rect,
    /// Sorted linear indices into the replay plane.
    measurement: Vec<usize>,
}

impl TargetSpec {
    /// Default geometry: the placement region is the upper half-plane
    /// (rows `0 .. plane_height/2`), the image sits flush to row 0 and
    /// horizontally centred, and error is measured over the placement minus
    /// the DC pixel `[0, 0]`.
    pub fn upper_half(image: RealImage, plane_width: usize, plane_height: usize) -> Result<Self> {
        let placement = Rect {
            x: 0,
            y: 0,
            width: plane_width,
            height: plane_height / 2,
        };
        Self::with_placement(image, plane_width, plane_height, placement)
    }

    /// Explicit placement region; the measurement region defaults to the
    /// placement minus the DC pixel.
    pub fn with_placement(
        image: RealImage,
        plane_width: usize,
        plane_height: usize,
        placement: Rect,
    ) -> Result<Self> {
        if placement.x + placement.width > plane_width
            || placement.y + placement.height > plane_height
        {
            return Err(Error::Dimension(format!(
                "placement {placement:?} does not fit a {plane_width}x{plane_height} plane"
            )));
        }
        if image.width() > placement.width || image.height() > placement.height {
            return Err(Error::Dimension(format!(
                "{}x{} image is larger than its {}x{} placement",
                image.width(),
                image.height(),
                placement.width,
                placement.height
            )));
        }
        let mut measurement = Vec::with_capacity(placement.width * placement.height);
        for y in placement.y..placement.y + placement.height {
            for x in placement.x..placement.x + placement.width {
                if x == 0 && y == 0 {
                    continue;
                }
                measurement.push(y * plane_width + x);
            }
        }
        if measurement.is_empty() {
            return Err(Error::Dimension("measurement region is empty".into()));
        }
        Ok(Self {
            image,
            plane_width,
            plane_height,
            placement,
            measurement,
        })
    }

    /// Override the measurement region with explicit linear indices.
    pub fn with_measurement(mut self, mut indices: Vec<usize>) -> Result<Self> {
        let plane = self.plane_width * self.plane_height;
        if indices.is_empty() {
            return Err(Error::Dimension("measurement region is empty".into()));
        }
        if indices.iter().any(|&i| i >= plane) {
            return Err(Error::Dimension(
                "measurement region outside the replay plane".into(),
            ));
        }
        indices.sort_unstable();
        indices.dedup();
        self.measurement = indices;
        Ok(self)
    }

    pub fn image(&self) -> &RealImage {
        &self.image
    }

    pub fn plane_width(&self) -> usize {
        self.plane_width
    }

    pub fn plane_height(&self) -> usize {
        self.plane_height
    }

    pub fn placement(&self) -> Rect {
        self.placement
    }

    pub fn measurement_region(&self) -> &[usize] {
        &self.measurement
    }

    /// Where the image lands inside the placement: flush to the placement
    /// top, horizontally centred.
    pub fn image_origin(&self) -> (usize, usize) {
        let x = self.placement.x + (self.placement.width - self.image.width()) / 2;
        (x, self.placement.y)
    }

    /// Full-replay-plane amplitude image: the target copied into its
    /// placement, zero elsewhere.
    pub fn embed(&self) -> RealImage {
        let (ox, oy) = self.image_origin();
        RealImage::from_fn(self.plane_width, self.plane_height, |x, y| {
            if x >= ox && x < ox + self.image.width() && y >= oy && y < oy + self.image.height() {
                self.image.get(x - ox, y - oy)
            } else {
                0.0
            }
        })
        .expect("embedding preserves [0,1] amplitudes")
    }
}

/// Alias for [`TargetSpec::embed`] matching the operation name.
pub fn embed_target(spec: &TargetSpec) -> RealImage {
    spec.embed()
}

/// An ordered set of quantised hologram sub-frames, all the same size.
#[derive(Debug, Clone, PartialEq)]
pub struct SubFrameSet {
    frames: Vec<ComplexField>,
}

impl SubFrameSet {
    pub fn new(frames: Vec<ComplexField>) -> Result<Self> {
        if frames.is_empty() {
            return Err(Error::Dimension("sub-frame set is empty".into()));
        }
        let (w, h) = (frames[0].width(), frames[0].height());
        if frames.iter().any(|f| f.width() != w || f.height() != h) {
            return Err(Error::Dimension("sub-frames differ in size".into()));
        }
        Ok(Self { frames })
    }

    pub fn frames(&self) -> &[ComplexField] {
        &self.frames
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn width(&self) -> usize {
        self.frames[0].width()
    }

    pub fn height(&self) -> usize {
        self.frames[0].height()
    }
}

/// One-step phase retrieval: for each sub-frame, randomise the embedded
/// target's phases, back-propagate to the hologram plane and quantise.
///
/// Phase factors are consumed continuously across sub-frames from the single
/// source, so a cyclic table carries its cursor from one sub-frame into the
/// next.
pub fn ospr_generate(
    spec: &TargetSpec,
    n_sf: usize,
    source: &mut PhaseSource,
    scheme: &QuantisationScheme,
) -> Result<SubFrameSet> {
    if n_sf == 0 {
        return Err(Error::Config("sub-frame count must be at least 1".into()));
    }
    let embedded = spec.embed();
    let mut frames = Vec::with_capacity(n_sf);
    for _ in 0..n_sf {
        let replay = apply_phase(&embedded, source);
        let hologram = idft2(&replay);
        frames.push(quantise(&hologram, scheme));
    }
    SubFrameSet::new(frames)
}

/// Time-averaged replay intensity `(1/N) * sum_n |dft2(H'_n)|^2`.
pub fn reconstruct_average(frames: &SubFrameSet) -> RealField {
    let (w, h) = (frames.width(), frames.height());
    let mut acc = vec![0.0f64; w * h];
    for frame in frames.frames() {
        let replay = intensity(&dft2(frame));
        for (a, v) in acc.iter_mut().zip(replay.as_slice()) {
            *a += v;
        }
    }
    let n = frames.len() as f64;
    for a in &mut acc {
        *a /= n;
    }
    RealField::from_parts_unchecked(w, h, acc)
}

/// Constrain a hologram-plane field to unit modulus. Pixels that are exactly
/// zero map to `+1`.
fn unit_modulus(h: &ComplexField) -> ComplexField {
    let data = h
        .as_slice()
        .iter()
        .map(|&v| {
            let n = v.norm();
            if n == 0.0 {
                Complex64::new(1.0, 0.0)
            } else {
                v / n
            }
        })
        .collect();
    ComplexField::from_parts_unchecked(h.width(), h.height(), data)
}

/// Keep the phase of `field` but impose the embedded target amplitudes.
/// Zero-modulus pixels take phase `+1`.
fn replace_amplitude(field: &ComplexField, target: &RealImage) -> ComplexField {
    let data = field
        .as_slice()
        .iter()
        .zip(target.as_slice())
        .map(|(&v, &t)| {
            let n = v.norm();
            if n == 0.0 {
                Complex64::new(t, 0.0)
            } else {
                v / n * t
            }
        })
        .collect();
    ComplexField::from_parts_unchecked(field.width(), field.height(), data)
}

/// Iterative Gerchberg-Saxton. Alternates between imposing the target
/// amplitudes in the replay plane and unit modulus in the hologram plane;
/// the phase-only hologram is quantised once, after the final iteration.
///
/// Returns the quantised hologram together with the per-iteration
/// continuous-domain replay amplitude error, `mean((|R_k| - T)^2)` over the
/// full plane. Alternating projections make this trace non-increasing.
pub fn gs_generate_with_trace(
    spec: &TargetSpec,
    iterations: usize,
    source: &mut PhaseSource,
    scheme: &QuantisationScheme,
) -> Result<(ComplexField, Vec<f64>)> {
    if iterations == 0 {
        return Err(Error::Config("iteration count must be at least 1".into()));
    }
    let target = spec.embed();
    let mut replay = apply_phase(&target, source);
    let mut trace = Vec::with_capacity(iterations);
    let mut constrained = None;
    for _ in 0..iterations {
        let hologram = idft2(&replay);
        let phase_only = unit_modulus(&hologram);
        let propagated = dft2(&phase_only);

        let err = propagated
            .as_slice()
            .iter()
            .zip(target.as_slice())
            .map(|(v, &t)| {
                let d = v.norm() - t;
                d * d
            })
            .sum::<f64>()
            / propagated.as_slice().len() as f64;
        trace.push(err);

        replay = replace_amplitude(&propagated, &target);
        constrained = Some(phase_only);
    }
    let hologram = quantise(&constrained.expect("at least one iteration"), scheme);
    Ok((hologram, trace))
}

/// [`gs_generate_with_trace`] without the error trace.
pub fn gs_generate(
    spec: &TargetSpec,
    iterations: usize,
    source: &mut PhaseSource,
    scheme: &QuantisationScheme,
) -> Result<ComplexField> {
    gs_generate_with_trace(spec, iterations, source, scheme).map(|(h, _)| h)
}

const PLUS_ONE: Complex64 = Complex64 { re: 1.0, im: 0.0 };
const MINUS_ONE: Complex64 = Complex64 { re: -1.0, im: 0.0 };

/// Bytes per packed row: one bit per pixel, rows padded to byte boundaries.
pub fn packed_row_bytes(width: usize) -> usize {
    width.div_ceil(8)
}

/// Pack binary sub-frames at one bit per pixel, row-major, MSB first within
/// each byte: `+1` packs as bit 1, `-1` as bit 0, row padding bits are zero,
/// frames concatenated in order.
pub fn pack_binary_frames(frames: &SubFrameSet) -> Result<Vec<u8>> {
    let (w, h) = (frames.width(), frames.height());
    let row_bytes = packed_row_bytes(w);
    let mut out = Vec::with_capacity(frames.len() * h * row_bytes);
    for (fi, frame) in frames.frames().iter().enumerate() {
        for y in 0..h {
            let mut byte = 0u8;
            for x in 0..w {
                let v = frame.get(x, y);
                let bit = if v == PLUS_ONE {
                    1u8
                } else if v == MINUS_ONE {
                    0u8
                } else {
                    return Err(Error::SchemeMismatch(format!(
                        "frame {fi} pixel ({x}, {y}) = {v} is not a binary phase level"
                    )));
                };
                byte |= bit << (7 - (x % 8));
                if x % 8 == 7 {
                    out.push(byte);
                    byte = 0;
                }
            }
            if w % 8 != 0 {
                out.push(byte);
            }
        }
    }
    Ok(out)
}

/// Inverse of [`pack_binary_frames`] for known dimensions.
pub fn unpack_binary_frames(
    bytes: &[u8],
    width: usize,
    height: usize,
    n_frames: usize,
) -> Result<SubFrameSet> {
    let row_bytes = packed_row_bytes(width);
    let expected = n_frames * height * row_bytes;
    if bytes.len() != expected {
        return Err(Error::Format {
            offset: bytes.len().min(expected) as u64,
            message: format!(
                "packed payload is {} bytes, expected {expected} for {n_frames} frames of {width}x{height}",
                bytes.len()
            ),
        });
    }
    let mut frames = Vec::with_capacity(n_frames);
    for fi in 0..n_frames {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            let row = &bytes[(fi * height + y) * row_bytes..(fi * height + y + 1) * row_bytes];
            for x in 0..width {
                let bit = (row[x / 8] >> (7 - (x % 8))) & 1;
                data.push(if bit == 1 { PLUS_ONE } else { MINUS_ONE });
            }
        }
        frames.push(ComplexField::from_parts_unchecked(width, height, data));
    }
    SubFrameSet::new(frames)
}

const FRAMES_MAGIC: &[u8; 4] = b"HFRM";
const FRAMES_VERSION: u32 = 1;

/// Write a sub-frame set as an `HFRM` v1 container: magic `HFRM`, version
/// u32, width u32, height u32, frame count u32 (all little-endian), then the
/// [`pack_binary_frames`] payload.
pub fn write_frames<W: Write>(frames: &SubFrameSet, mut w: W) -> Result<Vec<u8>> {
    let payload = pack_binary_frames(frames)?;
    let io_err = |e: std::io::Error| Error::Format {
        offset: 0,
        message: format!("write failed: {e}"),
    };
    w.write_all(FRAMES_MAGIC).map_err(io_err)?;
    w.write_all(&FRAMES_VERSION.to_le_bytes()).map_err(io_err)?;
    w.write_all(&(frames.width() as u32).to_le_bytes())
        .map_err(io_err)?;
    w.write_all(&(frames.height() as u32).to_le_bytes())
        .map_err(io_err)?;
    w.write_all(&(frames.len() as u32).to_le_bytes())
        .map_err(io_err)?;
    w.write_all(&payload).map_err(io_err)?;
    Ok(payload)
}

/// Parse an `HFRM` v1 container.
pub fn read_frames<R: Read>(mut r: R) -> Result<SubFrameSet> {
    let fmt = |offset: u64, message: String| Error::Format { offset, message };
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)
        .map_err(|e| fmt(0, format!("missing magic: {e}")))?;
    if &magic != FRAMES_MAGIC {
        return Err(fmt(0, format!("bad magic {magic:?}, expected \"HFRM\"")));
    }
    let mut buf = [0u8; 4];
    r.read_exact(&mut buf)
        .map_err(|e| fmt(4, format!("missing version: {e}")))?;
    let version = u32::from_le_bytes(buf);
    if version != FRAMES_VERSION {
        return Err(fmt(4, format!("unsupported version {version}")));
    }
    r.read_exact(&mut buf)
        .map_err(|e| fmt(8, format!("missing width: {e}")))?;
    let width = u32::from_le_bytes(buf) as usize;
    r.read_exact(&mut buf)
        .map_err(|e| fmt(12, format!("missing height: {e}")))?;
    let height = u32::from_le_bytes(buf) as usize;
    r.read_exact(&mut buf)
        .map_err(|e| fmt(16, format!("missing frame count: {e}")))?;
    let n_frames = u32::from_le_bytes(buf) as usize;
    if width == 0 || height == 0 || n_frames == 0 {
        return Err(fmt(8, format!("bad geometry {width}x{height}x{n_frames}")));
    }
    let expected = n_frames * height * packed_row_bytes(width);
    let mut payload = Vec::with_capacity(expected);
    r.read_to_end(&mut payload)
        .map_err(|e| fmt(20, format!("truncated payload: {e}")))?;
    if payload.len() != expected {
        return Err(fmt(
            20 + payload.len().min(expected) as u64,
            format!(
                "payload is {} bytes, expected {expected} for {n_frames} frames of {width}x{height}",
                payload.len()
            ),
        ));
    }
    unpack_binary_frames(&payload, width, height, n_frames)
}

pub fn save_frames(frames: &SubFrameSet, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    write_frames(frames, &mut w)?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn load_frames(path: impl AsRef<Path>) -> Result<SubFrameSet> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_frames(BufReader::new(file))
}

/// One binary sub-frame as 8-bit grayscale: `+1` maps to 255, `-1` to 0.
pub fn frame_to_gray(frame: &ComplexField) -> Result<Vec<u8>> {
    frame
        .as_slice()
        .iter()
        .map(|&v| {
            if v == PLUS_ONE {
                Ok(255u8)
            } else if v == MINUS_ONE {
                Ok(0u8)
            } else {
                Err(Error::SchemeMismatch(format!(
                    "pixel {v} is not a binary phase level"
                )))
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::total_energy;
    use crate::phase::{flat_phase_source, PhaseLut};
    use proptest::prelude::*;

    fn small_target() -> TargetSpec {
        let image = RealImage::from_fn(8, 8, |x, y| {
            if (2..6).contains(&x) && (2..6).contains(&y) {
                1.0
            } else {
                0.0
            }
        })
        .unwrap();
        TargetSpec::upper_half(image, 16, 16).unwrap()
    }

    #[test]
    fn binary_quantisation_follows_sign_of_re() {
        let scheme = QuantisationScheme::binary_phase();
        assert_eq!(
            scheme.quantise_value(Complex64::new(0.3, -0.9)),
            Complex64::new(1.0, 0.0)
        );
        assert_eq!(
            scheme.quantise_value(Complex64::new(-0.01, 2.0)),
            Complex64::new(-1.0, 0.0)
        );
        // Documented tie-break: Re = 0 goes to +1.
        assert_eq!(
            scheme.quantise_value(Complex64::new(0.0, 1.0)),
            Complex64::new(1.0, 0.0)
        );
    }

    #[test]
    fn empty_scheme_rejected() {
        assert!(QuantisationScheme::new(vec![]).is_err());
    }

    #[test]
    fn quantised_pixels_belong_to_level_set() {
        let scheme = QuantisationScheme::new(vec![
            Complex64::new(1.0, 0.0),
            Complex64::new(0.0, 1.0),
            Complex64::new(-1.0, 0.0),
            Complex64::new(0.0, -1.0),
        ])
        .unwrap();
        let field = ComplexField::from_fn(6, 6, |x, y| {
            Complex64::new(x as f64 - 2.5, y as f64 - 2.5)
        })
        .unwrap();
        let q = quantise(&field, &scheme);
        for v in q.as_slice() {
            assert!(scheme.levels().contains(v));
        }
    }

    #[test]
    fn embed_centres_horizontally_and_flushes_to_top() {
        let image = RealImage::new(4, 4, vec![1.0; 16]).unwrap();
        let spec = TargetSpec::upper_half(image, 8, 8).unwrap();
        assert_eq!(spec.image_origin(), (2, 0));
        let embedded = spec.embed();
        for y in 0..8 {
            for x in 0..8 {
                let inside = (2..6).contains(&x) && y < 4;
                assert_eq!(embedded.get(x, y), if inside { 1.0 } else { 0.0 });
            }
        }
    }

    #[test]
    fn embed_preserves_energy() {
        let image = RealImage::from_fn(5, 3, |x, y| ((x + y) % 3) as f64 / 2.0).unwrap();
        let spec = TargetSpec::upper_half(image.clone(), 12, 10).unwrap();
        let embedded = spec.embed();
        let e_image: f64 = image.as_slice().iter().map(|v| v * v).sum();
        let e_embedded: f64 = embedded.as_slice().iter().map(|v| v * v).sum();
        assert!((e_image - e_embedded).abs() < 1e-12);
    }

    #[test]
    fn full_plane_placement_is_identity() {
        let image = RealImage::from_fn(6, 4, |x, y| ((x * y) % 5) as f64 / 4.0).unwrap();
        let spec = TargetSpec::with_placement(
            image.clone(),
            6,
            4,
            Rect {
                x: 0,
                y: 0,
                width: 6,
                height: 4,
            },
        )
        .unwrap();
        assert_eq!(spec.embed(), image);
    }

    #[test]
    fn oversized_image_rejected() {
        let image = RealImage::new(8, 8, vec![0.0; 64]).unwrap();
        // Upper half of a 8x8 plane is 8x4; an 8x8 image cannot fit.
        assert!(TargetSpec::upper_half(image, 8, 8).is_err());
    }

    #[test]
    fn measurement_region_excludes_dc() {
        let spec = small_target();
        assert!(!spec.measurement_region().contains(&0));
        // Upper half of 16x16 is 128 pixels; minus DC leaves 127.
        assert_eq!(spec.measurement_region().len(), 127);
    }

    #[test]
    fn ospr_flat_source_is_deterministic() {
        let spec = small_target();
        let scheme = QuantisationScheme::binary_phase();
        let a = ospr_generate(&spec, 1, &mut flat_phase_source(), &scheme).unwrap();
        let b = ospr_generate(&spec, 1, &mut flat_phase_source(), &scheme).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn ospr_flat_source_subframes_identical() {
        let spec = small_target();
        let scheme = QuantisationScheme::binary_phase();
        let frames = ospr_generate(&spec, 3, &mut flat_phase_source(), &scheme).unwrap();
        assert_eq!(frames.frames()[0], frames.frames()[1]);
        assert_eq!(frames.frames()[1], frames.frames()[2]);
    }

    #[test]
    fn ospr_consumes_exactly_nsf_times_plane_pixels() {
        let spec = small_target();
        let scheme = QuantisationScheme::binary_phase();
        let mut source = PhaseSource::independent(5);
        ospr_generate(&spec, 6, &mut source, &scheme).unwrap();
        assert_eq!(source.consumed(), 6 * 16 * 16);
    }

    #[test]
    fn ospr_pixels_stay_in_level_set() {
        let spec = small_target();
        let scheme = QuantisationScheme::binary_phase();
        let mut source = PhaseSource::independent(11);
        let frames = ospr_generate(&spec, 4, &mut source, &scheme).unwrap();
        for frame in frames.frames() {
            for v in frame.as_slice() {
                assert!(*v == PLUS_ONE || *v == MINUS_ONE);
            }
        }
    }

    #[test]
    fn lut_of_exact_equivalence_length_is_bit_identical_to_independent() {
        let spec = small_target();
        let scheme = QuantisationScheme::binary_phase();
        let n_sf = 3;
        let needed = 16 * 16 * n_sf;

        let mut stream = PhaseSource::independent(31);
        let entries: Vec<Complex64> = (0..needed).map(|_| stream.next_phase()).collect();
        let lut = PhaseLut::from_entries(entries).unwrap();

        let mut indep = PhaseSource::independent(31);
        let mut cyclic = PhaseSource::cyclic(lut);
        let a = ospr_generate(&spec, n_sf, &mut indep, &scheme).unwrap();
        let b = ospr_generate(&spec, n_sf, &mut cyclic, &scheme).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn reconstruct_average_single_frame_matches_intensity() {
        let spec = small_target();
        let scheme = QuantisationScheme::binary_phase();
        let frames = ospr_generate(&spec, 1, &mut PhaseSource::independent(1), &scheme).unwrap();
        let avg = reconstruct_average(&frames);
        let direct = intensity(&dft2(&frames.frames()[0]));
        assert_eq!(avg, direct);
    }

    #[test]
    fn reconstruct_average_idempotent_on_equal_frames() {
        let spec = small_target();
        let scheme = QuantisationScheme::binary_phase();
        let one = ospr_generate(&spec, 1, &mut flat_phase_source(), &scheme).unwrap();
        let two = SubFrameSet::new(vec![
            one.frames()[0].clone(),
            one.frames()[0].clone(),
        ])
        .unwrap();
        let a = reconstruct_average(&one);
        let b = reconstruct_average(&two);
        for (x, y) in a.as_slice().iter().zip(b.as_slice()) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn average_replay_energy_equals_mean_of_frame_energies() {
        let spec = small_target();
        let scheme = QuantisationScheme::binary_phase();
        let mut source = PhaseSource::independent(8);
        let frames = ospr_generate(&spec, 4, &mut source, &scheme).unwrap();
        let avg = reconstruct_average(&frames);
        let mean_energy: f64 = frames
            .frames()
            .iter()
            .map(|f| total_energy(&dft2(f)))
            .sum::<f64>()
            / 4.0;
        let avg_energy: f64 = avg.as_slice().iter().sum();
        assert!((mean_energy - avg_energy).abs() < 1e-9 * mean_energy);
    }

    #[test]
    fn gs_trace_is_non_increasing() {
        let spec = small_target();
        let scheme = QuantisationScheme::binary_phase();
        let mut source = PhaseSource::independent(3);
        let (_, trace) = gs_generate_with_trace(&spec, 30, &mut source, &scheme).unwrap();
        for w in trace.windows(2) {
            assert!(
                w[1] <= w[0] * (1.0 + 1e-12),
                "error increased: {} -> {}",
                w[0],
                w[1]
            );
        }
    }

    #[test]
    fn gs_fixed_point_is_preserved() {
        // A target that already is the replay amplitude of a phase-only
        // hologram, driven by a source that reproduces that hologram's
        // replay phases, is a fixed point: the amplitude replacement is a
        // no-op and the error trace stays constant across iterations.
        let phase_only = ComplexField::from_fn(8, 8, |x, y| {
            let phi = 0.7 * x as f64 + 1.3 * y as f64 + 0.29 * (x * y) as f64;
            Complex64::new(phi.cos(), phi.sin())
        })
        .unwrap();
        let replay = dft2(&phase_only);
        let max_amp = replay
            .as_slice()
            .iter()
            .map(|c| c.norm())
            .fold(0.0, f64::max);
        let image = RealImage::new(
            8,
            8,
            replay.as_slice().iter().map(|c| c.norm() / max_amp).collect(),
        )
        .unwrap();
        let spec = TargetSpec::with_placement(
            image,
            8,
            8,
            Rect {
                x: 0,
                y: 0,
                width: 8,
                height: 8,
            },
        )
        .unwrap();

        // Phase factors of the replay field in raster order.
        let phases: Vec<Complex64> = replay
            .as_slice()
            .iter()
            .map(|&v| {
                if v.norm() == 0.0 {
                    Complex64::new(1.0, 0.0)
                } else {
                    v / v.norm()
                }
            })
            .collect();
        let mut src = PhaseSource::cyclic(PhaseLut::from_entries(phases).unwrap());

        let scheme = QuantisationScheme::binary_phase();
        let (hologram, trace) = gs_generate_with_trace(&spec, 5, &mut src, &scheme).unwrap();
        for v in &trace {
            assert!(
                (v - trace[0]).abs() <= 1e-10 * trace[0].max(1e-300),
                "trace not stationary at a fixed point: {trace:?}"
            );
        }
        // The recovered hologram is the original phase pattern, quantised.
        assert_eq!(hologram, quantise(&phase_only, &scheme));
    }

    #[test]
    fn gs_zero_pixel_maps_to_plus_one() {
        let zeros = ComplexField::zeros(4, 4).unwrap();
        let u = unit_modulus(&zeros);
        for v in u.as_slice() {
            assert_eq!(*v, PLUS_ONE);
        }
    }

    #[test]
    fn pack_examples() {
        let all_plus = ComplexField::new(8, 1, vec![PLUS_ONE; 8]).unwrap();
        let set = SubFrameSet::new(vec![all_plus]).unwrap();
        assert_eq!(pack_binary_frames(&set).unwrap(), vec![0xFF]);

        let all_minus = ComplexField::new(8, 1, vec![MINUS_ONE; 8]).unwrap();
        let set = SubFrameSet::new(vec![all_minus]).unwrap();
        assert_eq!(pack_binary_frames(&set).unwrap(), vec![0x00]);

        let alternating =
            ComplexField::new(4, 1, vec![PLUS_ONE, MINUS_ONE, PLUS_ONE, MINUS_ONE]).unwrap();
        let set = SubFrameSet::new(vec![alternating]).unwrap();
        assert_eq!(pack_binary_frames(&set).unwrap(), vec![0xA0]);
    }

    #[test]
    fn pack_rejects_non_binary_frames() {
        let frame = ComplexField::new(2, 1, vec![PLUS_ONE, Complex64::new(0.5, 0.0)]).unwrap();
        let set = SubFrameSet::new(vec![frame]).unwrap();
        assert!(matches!(
            pack_binary_frames(&set),
            Err(Error::SchemeMismatch(_))
        ));
    }

    #[test]
    fn frames_container_round_trip() {
        let spec = small_target();
        let scheme = QuantisationScheme::binary_phase();
        let mut source = PhaseSource::independent(17);
        let frames = ospr_generate(&spec, 3, &mut source, &scheme).unwrap();
        let mut bytes = Vec::new();
        write_frames(&frames, &mut bytes).unwrap();
        let back = read_frames(bytes.as_slice()).unwrap();
        assert_eq!(frames, back);
    }

    #[test]
    fn frames_container_rejects_corruption() {
        let spec = small_target();
        let frames = ospr_generate(
            &spec,
            1,
            &mut flat_phase_source(),
            &QuantisationScheme::binary_phase(),
        )
        .unwrap();
        let mut bytes = Vec::new();
        write_frames(&frames, &mut bytes).unwrap();

        let mut bad = bytes.clone();
        bad[1] = b'Z';
        assert!(matches!(
            read_frames(bad.as_slice()),
            Err(Error::Format { offset: 0, .. })
        ));

        let truncated = read_frames(&bytes[..bytes.len() - 3]);
        assert!(truncated.is_err());
    }

    #[test]
    fn gray_export_maps_levels() {
        let frame = ComplexField::new(2, 1, vec![PLUS_ONE, MINUS_ONE]).unwrap();
        assert_eq!(frame_to_gray(&frame).unwrap(), vec![255, 0]);
    }

    proptest! {
        #[test]
        fn pack_unpack_round_trip(width in 1usize..20, height in 1usize..6, n in 1usize..4, seed in any::<u64>()) {
            let mut rng = crate::phase::Xoshiro256StarStar::new(seed);
            let frames: Vec<ComplexField> = (0..n)
                .map(|_| {
                    let data = (0..width * height)
                        .map(|_| if rng.next_u64() & 1 == 1 { PLUS_ONE } else { MINUS_ONE })
                        .collect();
                    ComplexField::from_parts_unchecked(width, height, data)
                })
                .collect();
            let set = SubFrameSet::new(frames).unwrap();
            let packed = pack_binary_frames(&set).unwrap();
            prop_assert_eq!(packed.len(), n * height * packed_row_bytes(width));
            let back = unpack_binary_frames(&packed, width, height, n).unwrap();
            prop_assert_eq!(set, back);
        }
    }
}
