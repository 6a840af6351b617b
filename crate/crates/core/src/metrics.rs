//! Reconstruction error measures and run statistics.
//!
//! The MSE compares amplitudes (the square root of the reconstructed
//! intensity) against the target amplitudes over the measurement region,
//! after fitting a least-squares optimal scale to the reconstruction. The
//! optimal scale makes the metric invariant to overall illumination, so
//! holograms are judged on structure rather than brightness.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::field::{RealField, RealImage};

/// One sweep measurement: which image, which table length, which run.
///
/// `n_lut = 0` denotes the flat (no randomisation) source.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorRecord {
    pub image_id: String,
    pub resolution: (usize, usize),
    pub n_sf: usize,
    pub n_lut: u64,
    pub run_index: u64,
    pub seed: u64,
    pub mse: f64,
    /// Set once the sweep's calibration pass has run.
    pub nmse: Option<f64>,
}

/// Per-image reference errors used to normalise MSE across images.
///
/// The normalised error scales each image's MSE by
/// `reference_mse[reference_image] / reference_mse[image]`, so the reference
/// image's NMSE equals its MSE and all images agree at the reference table
/// length.
#[derive(Debug, Clone, PartialEq)]
pub struct NmseCalibration {
    reference_n_lut: u64,
    reference_image: String,
    reference_mse: BTreeMap<String, f64>,
}

impl NmseCalibration {
    pub fn new(
        reference_n_lut: u64,
        reference_image: impl Into<String>,
        reference_mse: BTreeMap<String, f64>,
    ) -> Result<Self> {
        let reference_image = reference_image.into();
        if !reference_mse.contains_key(&reference_image) {
            return Err(Error::UnknownImage(reference_image));
        }
        if let Some((id, v)) = reference_mse.iter().find(|(_, v)| **v <= 0.0) {
            return Err(Error::Config(format!(
                "reference error for {id} is {v}, must be positive"
            )));
        }
        Ok(Self {
            reference_n_lut,
            reference_image,
            reference_mse,
        })
    }

    pub fn reference_n_lut(&self) -> u64 {
        self.reference_n_lut
    }

    pub fn reference_image(&self) -> &str {
        &self.reference_image
    }

    pub fn reference_mse(&self, image_id: &str) -> Option<f64> {
        self.reference_mse.get(image_id).copied()
    }

    /// Multiplier turning an image's MSE into its NMSE.
    pub fn factor(&self, image_id: &str) -> Result<f64> {
        let image_ref = self
            .reference_mse
            .get(image_id)
            .ok_or_else(|| Error::UnknownImage(image_id.to_string()))?;
        let anchor = self.reference_mse[&self.reference_image];
        Ok(anchor / image_ref)
    }
}

/// Normalised MSE: `record.mse * ref[anchor] / ref[record.image_id]`.
pub fn nmse(record: &ErrorRecord, calibration: &NmseCalibration) -> Result<f64> {
    Ok(record.mse * calibration.factor(&record.image_id)?)
}

/// Amplitude-domain mean squared error with optimal scaling.
///
/// Over the region, let `A = sqrt(recon)` and `T = target`. The scale
/// `alpha = <A,T>/<A,A>` (zero when `A` vanishes) minimises the squared
/// error, and the result is `mean((alpha*A - T)^2)`.
pub fn mse(recon: &RealField, target: &RealImage, region: &[usize]) -> Result<f64> {
    if recon.width() != target.width() || recon.height() != target.height() {
        return Err(Error::Dimension(format!(
            "reconstruction {}x{} does not match target {}x{}",
            recon.width(),
            recon.height(),
            target.width(),
            target.height()
        )));
    }
    if region.is_empty() {
        return Err(Error::Dimension("measurement region is empty".into()));
    }
    let n = recon.as_slice().len();
    if region.iter().any(|&i| i >= n) {
        return Err(Error::Dimension(
            "measurement region outside the plane".into(),
        ));
    }

    let mut dot_at = 0.0;
    let mut dot_aa = 0.0;
    for &i in region {
        let a = recon.as_slice()[i].sqrt();
        let t = target.as_slice()[i];
        dot_at += a * t;
        dot_aa += a * a;
    }
    let alpha = if dot_aa == 0.0 { 0.0 } else { dot_at / dot_aa };

    let sum: f64 = region
        .iter()
        .map(|&i| {
            let a = recon.as_slice()[i].sqrt();
            let t = target.as_slice()[i];
            let d = alpha * a - t;
            d * d
        })
        .sum();
    Ok(sum / region.len() as f64)
}

/// Mean, sample standard deviation and the two-standard-deviation band.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aggregate {
    pub mean: f64,
    /// Unbiased sample standard deviation; 0 for a single value.
    pub std: f64,
    pub lower: f64,
    pub upper: f64,
}

/// Standard unbiased sample statistics with a `mean +/- 2*std` band.
pub fn aggregate(values: &[f64]) -> Result<Aggregate> {
    if values.is_empty() {
        return Err(Error::Config("cannot aggregate an empty list".into()));
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let std = if values.len() < 2 {
        0.0
    } else {
        (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)).sqrt()
    };
    Ok(Aggregate {
        mean,
        std,
        lower: mean - 2.0 * std,
        upper: mean + 2.0 * std,
    })
}
