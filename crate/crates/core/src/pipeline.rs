//! The preprocessing chain: outlier gate, smoothing, region extraction.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::preprocess::{reject_outliers_grouped, smooth, SgConfig, SurfaceFit};
use crate::spectra::{RegionSpec, SpectraSet};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PreprocessConfig {
    /// Width of the outlier band in standard deviations; `None` skips the gate.
    pub outlier_k: Option<f64>,
    pub surface_fit: SurfaceFit,
    /// `None` skips smoothing.
    pub smoothing: Option<SgConfig>,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        Self {
            outlier_k: Some(3.0),
            surface_fit: SurfaceFit::PerLabel,
            smoothing: Some(SgConfig::default()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Preprocessed {
    pub spectra: SpectraSet,
    /// Rows of the input removed by the outlier gate.
    pub rejected: Vec<usize>,
}

/// Rejects outliers and smooths on the full axis.
pub fn preprocess(s: &SpectraSet, cfg: &PreprocessConfig) -> Result<Preprocessed> {
    let (kept, rejected) = match cfg.outlier_k {
        Some(k) => reject_outliers_grouped(s, k, cfg.surface_fit)?,
        None => (s.clone(), Vec::new()),
    };
    let spectra = match &cfg.smoothing {
        Some(sg) => smooth(&kept, sg)?,
        None => kept,
    };
    Ok(Preprocessed { spectra, rejected })
}

/// [`preprocess`] followed by region extraction.
pub fn preprocess_region(s: &SpectraSet, cfg: &PreprocessConfig, region: &RegionSpec) -> Result<Preprocessed> {
    let out = preprocess(s, cfg)?;
    Ok(Preprocessed {
        spectra: out.spectra.extract_region(region)?,
        rejected: out.rejected,
    })
}
