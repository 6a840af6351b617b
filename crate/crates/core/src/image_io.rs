//! Grayscale image loading/saving and built-in synthetic targets.
//!
//! Inputs are 8-bit grayscale PNG or binary PGM (P5); pixel value `v` maps to
//! amplitude `v / 255`. Colour inputs are rejected rather than converted so
//! amplitude semantics stay unambiguous. The synthetic generators back the
//! automated tests and toy sweeps without shipping third-party imagery.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use image::{DynamicImage, ImageFormat};

use crate::error::{Error, Result};
use crate::field::RealImage;

/// Built-in synthetic target kinds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SyntheticKind {
    /// Centred filled rectangle covering half of each dimension.
    Rectangle,
    /// Alternating cells, one eighth of the short side each.
    Checkerboard,
    /// Radial ramp, bright at the centre fading linearly outward.
    RadialRamp,
    /// Deterministic per-pixel noise amplitudes in [0.5, 1]; stands in for
    /// natural photographic content, which has no zero-amplitude regions
    /// and no long-range structure.
    Texture,
}

impl SyntheticKind {
    pub const ALL: [SyntheticKind; 4] = [
        SyntheticKind::Rectangle,
        SyntheticKind::Checkerboard,
        SyntheticKind::RadialRamp,
        SyntheticKind::Texture,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            SyntheticKind::Rectangle => "rectangle",
            SyntheticKind::Checkerboard => "checkerboard",
            SyntheticKind::RadialRamp => "radial-ramp",
            SyntheticKind::Texture => "texture",
        }
    }
}

impl FromStr for SyntheticKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rectangle" => Ok(SyntheticKind::Rectangle),
            "checkerboard" => Ok(SyntheticKind::Checkerboard),
            "radial-ramp" | "radial" => Ok(SyntheticKind::RadialRamp),
            "texture" => Ok(SyntheticKind::Texture),
            other => Err(Error::Config(format!(
                "unknown synthetic target {other:?}; expected rectangle, checkerboard, radial-ramp or texture"
            ))),
        }
    }
}

impl fmt::Display for SyntheticKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Generate a synthetic target at the requested size.
pub fn synthetic(kind: SyntheticKind, width: usize, height: usize) -> Result<RealImage> {
    match kind {
        SyntheticKind::Rectangle => RealImage::from_fn(width, height, |x, y| {
            let inside = x >= width / 4 && x < width - width / 4 && y >= height / 4
                && y < height - height / 4;
            if inside {
                1.0
            } else {
                0.0
            }
        }),
        SyntheticKind::Checkerboard => {
            let cell = (width.min(height) / 8).max(1);
            RealImage::from_fn(width, height, |x, y| ((x / cell + y / cell) % 2) as f64)
        }
        SyntheticKind::RadialRamp => {
            let cx = (width as f64 - 1.0) / 2.0;
            let cy = (height as f64 - 1.0) / 2.0;
            let r_max = (width.min(height) as f64) / 2.0;
            RealImage::from_fn(width, height, |x, y| {
                let dx = x as f64 - cx;
                let dy = y as f64 - cy;
                (1.0 - (dx * dx + dy * dy).sqrt() / r_max).clamp(0.0, 1.0)
            })
        }
        SyntheticKind::Texture => {
            let mut rng = crate::phase::Xoshiro256StarStar::new(TEXTURE_SEED);
            RealImage::from_fn(width, height, |_, _| 0.5 + 0.5 * rng.next_f64())
        }
    }
}

/// Fixed generator seed for the texture target; a pure function of size.
const TEXTURE_SEED: u64 = 0x000A_11CE;

/// Where a target image comes from: a grayscale file or a synthetic
/// generator sized by the consumer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ImageSource {
    File(PathBuf),
    Synthetic(SyntheticKind),
}

impl ImageSource {
    /// Parse a source string: `synthetic:<kind>` or a file path.
    pub fn parse(s: &str) -> Result<Self> {
        if let Some(kind) = s.strip_prefix("synthetic:") {
            Ok(ImageSource::Synthetic(kind.parse()?))
        } else {
            Ok(ImageSource::File(PathBuf::from(s)))
        }
    }

    /// Load or generate at the given size. Synthetic targets are produced at
    /// exactly `width x height`; files keep their own dimensions and the
    /// caller checks fit.
    pub fn realise(&self, width: usize, height: usize) -> Result<RealImage> {
        match self {
            ImageSource::File(path) => load_image(path),
            ImageSource::Synthetic(kind) => synthetic(*kind, width, height),
        }
    }
}

impl fmt::Display for ImageSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ImageSource::File(p) => write!(f, "{}", p.display()),
            ImageSource::Synthetic(k) => write!(f, "synthetic:{k}"),
        }
    }
}

/// Load an 8-bit grayscale PNG or binary PGM as amplitudes `v / 255`.
pub fn load_image(path: impl AsRef<Path>) -> Result<RealImage> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let decoded = image::load_from_memory(&bytes).map_err(|e| {
        Error::Format {
            offset: 0,
            message: format!("{}: not a readable image: {e}", path.display()),
        }
    })?;
    let gray = match decoded {
        DynamicImage::ImageLuma8(img) => img,
        other => {
            return Err(Error::InvalidImage(format!(
                "{}: expected 8-bit grayscale, got {:?}",
                path.display(),
                other.color()
            )))
        }
    };
    let (w, h) = (gray.width() as usize, gray.height() as usize);
    let data = gray.into_raw().iter().map(|&v| v as f64 / 255.0).collect();
    RealImage::new(w, h, data)
}

/// Write 8-bit grayscale pixels as PNG or PGM, chosen by the file extension
/// (`.pgm` gives binary PGM, anything else PNG).
pub fn save_gray(path: impl AsRef<Path>, width: usize, height: usize, pixels: &[u8]) -> Result<()> {
    let path = path.as_ref();
    if pixels.len() != width * height {
        return Err(Error::Dimension(format!(
            "pixel buffer length {} does not match {width}x{height}",
            pixels.len()
        )));
    }
    let format = match path.extension().and_then(|e| e.to_str()) {
        Some("pgm") => ImageFormat::Pnm,
        _ => ImageFormat::Png,
    };
    image::save_buffer_with_format(
        path,
        pixels,
        width as u32,
        height as u32,
        image::ColorType::L8,
        format,
    )
    .map_err(|e| match e {
        image::ImageError::IoError(io) => Error::io(path, io),
        other => Error::Format {
            offset: 0,
            message: format!("{}: encode failed: {other}", path.display()),
        },
    })
}
