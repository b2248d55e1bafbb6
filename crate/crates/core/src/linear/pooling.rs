//! Global-mean and average-pooled spectral features.

use serde::{Deserialize, Serialize};

use super::FeatureMatrix;
use crate::error::{Error, Result};
use crate::spectra::{RegionSpec, SpectraSet, WavenumberAxis};

/// Interior cut points splitting a region into contiguous sub-bands.
/// A point at wavenumber `w` belongs to band `#{cuts ≤ w}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoolingSpec {
    pub cuts: Vec<f64>,
}

/// Column range of one pooled sub-band. `lo`/`hi` are the nominal limits:
/// the cuts, or the axis ends for the outer bands.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Band {
    pub start: usize,
    pub end: usize,
    pub lo: f64,
    pub hi: f64,
}

impl Band {
    pub fn label(&self) -> String {
        format!("{:.0}-{:.0}", self.lo, self.hi)
    }

    pub fn contains(&self, wavenumber: f64) -> bool {
        (self.lo..=self.hi).contains(&wavenumber)
    }
}

impl PoolingSpec {
    pub fn new(cuts: Vec<f64>) -> Result<Self> {
        if cuts.iter().any(|c| !c.is_finite()) || cuts.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidArgument(format!(
                "pooling cuts must be finite and strictly increasing: {cuts:?}"
            )));
        }
        Ok(Self { cuts })
    }

    /// Four LW sub-bands: 125–230, 230–330, 330–480, 480–549 cm⁻¹.
    pub fn lw_default() -> Self {
        Self {
            cuts: vec![230.0, 330.0, 480.0],
        }
    }

    /// Three HW sub-bands: 2303–2700, 2700–3200, 3200–3400 cm⁻¹.
    pub fn hw_default() -> Self {
        Self {
            cuts: vec![2700.0, 3200.0],
        }
    }

    /// Default cuts for a declared region; a single full-region pool otherwise.
    pub fn for_region(region: &RegionSpec) -> Self {
        match region.name.to_ascii_uppercase().as_str() {
            "LW" => Self::lw_default(),
            "HW" => Self::hw_default(),
            _ => Self { cuts: Vec::new() },
        }
    }

    /// Resolves the sub-bands on `axis`; every band must hold at least one point.
    pub fn bands(&self, axis: &WavenumberAxis) -> Result<Vec<Band>> {
        let w = axis.values();
        let mut bounds = vec![0];
        bounds.extend(self.cuts.iter().map(|&c| w.partition_point(|&v| v < c)));
        bounds.push(w.len());
        bounds
            .windows(2)
            .enumerate()
            .map(|(j, b)| {
                if b[1] <= b[0] {
                    let lo = if j == 0 { f64::NEG_INFINITY } else { self.cuts[j - 1] };
                    let hi = self.cuts.get(j).copied().unwrap_or(f64::INFINITY);
                    return Err(Error::InvalidArgument(format!(
                        "pooling sub-band {j} [{lo}, {hi}) holds no grid points"
                    )));
                }
                Ok(Band {
                    start: b[0],
                    end: b[1],
                    lo: if j == 0 { w[0] } else { self.cuts[j - 1] },
                    hi: self.cuts.get(j).copied().unwrap_or(w[w.len() - 1]),
                })
            })
            .collect()
    }
}

fn band_mean(row: &[f64]) -> f64 {
    row.iter().sum::<f64>() / row.len() as f64
}

/// One column per sub-band: the mean intensity over that band.
pub fn pool_features(s: &SpectraSet, spec: &PoolingSpec) -> Result<FeatureMatrix> {
    let bands = spec.bands(s.axis())?;
    let mut data = Vec::with_capacity(s.n_spectra() * bands.len());
    for row in s.rows() {
        data.extend(bands.iter().map(|b| band_mean(&row[b.start..b.end])));
    }
    FeatureMatrix::new(s.n_spectra(), bands.len(), data)
}

/// One column: the mean intensity of each spectrum.
pub fn lra_features(s: &SpectraSet) -> FeatureMatrix {
    let data = s.rows().map(band_mean).collect();
    FeatureMatrix::new(s.n_spectra(), 1, data).expect("one value per row")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reference_region(region: &RegionSpec, value: f64) -> SpectraSet {
        let axis = WavenumberAxis::reference();
        let p = axis.len();
        SpectraSet::from_flat(axis, vec![value; p], vec![1])
            .unwrap()
            .extract_region(region)
            .unwrap()
    }

    #[test]
    fn default_feature_counts() {
        let lw = reference_region(&RegionSpec::lw(), 1.0);
        let hw = reference_region(&RegionSpec::hw(), 1.0);
        assert_eq!(pool_features(&lw, &PoolingSpec::lw_default()).unwrap().n_cols(), 4);
        assert_eq!(pool_features(&hw, &PoolingSpec::hw_default()).unwrap().n_cols(), 3);
    }

    #[test]
    fn default_band_labels() {
        let lw = reference_region(&RegionSpec::lw(), 0.0);
        let labels: Vec<String> = PoolingSpec::lw_default()
            .bands(lw.axis())
            .unwrap()
            .iter()
            .map(Band::label)
            .collect();
        assert_eq!(labels.last().unwrap(), "480-549");
        let hw = reference_region(&RegionSpec::hw(), 0.0);
        let bands = PoolingSpec::hw_default().bands(hw.axis()).unwrap();
        assert!(bands[1].contains(2934.0));
    }

    #[test]
    fn constant_spectrum_pools_to_constant() {
        let lw = reference_region(&RegionSpec::lw(), 3.5);
        let f = pool_features(&lw, &PoolingSpec::lw_default()).unwrap();
        assert!(f.row(0).iter().all(|&v| (v - 3.5).abs() < 1e-12));
    }

    #[test]
    fn empty_band_is_an_error() {
        let lw = reference_region(&RegionSpec::lw(), 1.0);
        let spec = PoolingSpec::new(vec![230.0, 230.5]).unwrap();
        assert!(pool_features(&lw, &spec).is_err());
        // Cuts from the other region leave the trailing bands empty.
        assert!(pool_features(&lw, &PoolingSpec::hw_default()).is_err());
    }

    #[test]
    fn lra_is_row_mean() {
        let axis = WavenumberAxis::new(vec![1.0, 2.0, 3.0]).unwrap();
        let s = SpectraSet::new(axis, vec![vec![1.0, 2.0, 3.0], vec![4.0, 4.0, 4.0]], vec![1, 0]).unwrap();
        let f = lra_features(&s);
        assert_eq!(f.column(0), vec![2.0, 4.0]);
    }

    #[test]
    fn single_pool_equals_lra() {
        let lw = reference_region(&RegionSpec::lw(), 0.0).map_values(|j, _| (j as f64 * 0.37).sin());
        let pooled = pool_features(&lw, &PoolingSpec { cuts: vec![] }).unwrap();
        assert_eq!(pooled, lra_features(&lw));
    }

    #[test]
    fn unordered_cuts_rejected() {
        assert!(PoolingSpec::new(vec![300.0, 200.0]).is_err());
    }
}
