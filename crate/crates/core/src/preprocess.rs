//! Outlier rejection against a pointwise ±k·σ band and Savitzky–Golay smoothing.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectra::SpectraSet;

/// Pointwise band `[mean − k·std, mean + k·std]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionSurface {
    pub mean: Vec<f64>,
    /// Sample standard deviation (N − 1 denominator).
    pub std: Vec<f64>,
    pub k: f64,
}

impl DecisionSurface {
    pub fn lower(&self, j: usize) -> f64 {
        self.mean[j] - self.k * self.std[j]
    }

    pub fn upper(&self, j: usize) -> f64 {
        self.mean[j] + self.k * self.std[j]
    }

    /// Points on the band boundary count as inside.
    pub fn contains(&self, spectrum: &[f64]) -> bool {
        spectrum
            .iter()
            .enumerate()
            .all(|(j, &x)| x >= self.lower(j) && x <= self.upper(j))
    }
}

pub fn fit_surface(s: &SpectraSet, k: f64) -> Result<DecisionSurface> {
    let n = s.n_spectra();
    if n < 2 {
        return Err(Error::InvalidArgument(format!(
            "decision surface needs at least 2 spectra, found {n}"
        )));
    }
    if !(k >= 0.0) {
        return Err(Error::InvalidArgument(format!("band multiplier must be >= 0, got {k}")));
    }
    let p = s.n_points();
    let mut mean = vec![0.0; p];
    for row in s.rows() {
        for (m, &x) in mean.iter_mut().zip(row) {
            *m += x;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    let mut var = vec![0.0; p];
    for row in s.rows() {
        for ((v, &m), &x) in var.iter_mut().zip(&mean).zip(row) {
            *v += (x - m) * (x - m);
        }
    }
    let std = var.into_iter().map(|v| (v / (n - 1) as f64).sqrt()).collect();
    Ok(DecisionSurface { mean, std, k })
}

/// Drops every spectrum with at least one point strictly outside the band.
/// Returns the kept set and the indices (into `s`) of the rejected rows.
pub fn reject_outliers(s: &SpectraSet, surface: &DecisionSurface) -> Result<(SpectraSet, Vec<usize>)> {
    if surface.mean.len() != s.n_points() || surface.std.len() != s.n_points() {
        return Err(Error::DimensionMismatch {
            expected: s.n_points(),
            found: surface.mean.len(),
        });
    }
    let (kept, rejected): (Vec<usize>, Vec<usize>) =
        (0..s.n_spectra()).partition(|&i| surface.contains(s.row(i)));
    Ok((s.subset(&kept), rejected))
}

/// How the outlier band is estimated for a two-sample set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SurfaceFit {
    /// One band per label, each from that sample's spectra only.
    #[default]
    PerLabel,
    /// A single band over all spectra.
    Pooled,
}

impl SurfaceFit {
    pub fn name(self) -> &'static str {
        match self {
            SurfaceFit::PerLabel => "per_label",
            SurfaceFit::Pooled => "pooled",
        }
    }
}

impl fmt::Display for SurfaceFit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SurfaceFit {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [SurfaceFit::PerLabel, SurfaceFit::Pooled]
            .into_iter()
            .find(|v| v.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::Unknown {
                kind: "surface fit",
                name: s.to_string(),
            })
    }
}

/// Outlier rejection over a labelled set, fitting the band per label or pooled.
/// Rejected indices refer to rows of `s` and are returned in increasing order.
pub fn reject_outliers_grouped(
    s: &SpectraSet,
    k: f64,
    fit: SurfaceFit,
) -> Result<(SpectraSet, Vec<usize>)> {
    match fit {
        SurfaceFit::Pooled => {
            let surface = fit_surface(s, k)?;
            reject_outliers(s, &surface)
        }
        SurfaceFit::PerLabel => {
            let mut surfaces = Vec::with_capacity(2);
            for label in 0..2u8 {
                let group = s.class_subset(label);
                surfaces.push(if group.is_empty() {
                    None
                } else {
                    Some(fit_surface(&group, k)?)
                });
            }
            let (kept, rejected): (Vec<usize>, Vec<usize>) = (0..s.n_spectra()).partition(|&i| {
                let surface = surfaces[s.labels()[i] as usize]
                    .as_ref()
                    .expect("row's own group is non-empty");
                surface.contains(s.row(i))
            });
            Ok((s.subset(&kept), rejected))
        }
    }
}

/// Treatment of the first and last `window / 2` points when smoothing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeMode {
    /// Reflect about the end samples (`x[-k] = x[k]`) and apply the centred filter.
    #[default]
    Mirror,
    /// Evaluate the polynomial fitted to the first/last full window off-centre.
    Fit,
}

impl EdgeMode {
    pub fn name(self) -> &'static str {
        match self {
            EdgeMode::Mirror => "mirror",
            EdgeMode::Fit => "fit",
        }
    }
}

impl fmt::Display for EdgeMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EdgeMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [EdgeMode::Mirror, EdgeMode::Fit]
            .into_iter()
            .find(|v| v.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::Unknown {
                kind: "edge mode",
                name: s.to_string(),
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SgConfig {
    pub window: usize,
    pub poly_order: usize,
    #[serde(default)]
    pub edge: EdgeMode,
}

impl Default for SgConfig {
    fn default() -> Self {
        Self {
            window: 91,
            poly_order: 3,
            edge: EdgeMode::Mirror,
        }
    }
}

impl SgConfig {
    pub fn new(window: usize, poly_order: usize) -> Result<Self> {
        let cfg = Self {
            window,
            poly_order,
            edge: EdgeMode::Mirror,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.window == 0 || self.window % 2 == 0 {
            return Err(Error::InvalidArgument(format!(
                "Savitzky-Golay window must be odd and positive, got {}",
                self.window
            )));
        }
        if self.poly_order >= self.window {
            return Err(Error::InvalidArgument(format!(
                "polynomial order {} must be below the window length {}",
                self.poly_order, self.window
            )));
        }
        Ok(())
    }

    pub fn half_window(&self) -> usize {
        self.window / 2
    }
}

/// Least-squares weights that evaluate the polynomial fitted over the window
/// at `offset` samples from the window centre.
fn fit_weights(window: usize, order: usize, offset: f64) -> Vec<f64> {
    let half = (window / 2) as f64;
    let scale = if half > 0.0 { half } else { 1.0 };
    let cols = order + 1;
    // Abscissae scaled to [-1, 1] keep the normal equations well conditioned.
    let design = DMatrix::from_fn(window, cols, |i, j| ((i as f64 - half) / scale).powi(j as i32));
    let gram = design.transpose() * &design;
    let at = offset / scale;
    let basis = DVector::from_fn(cols, |j, _| at.powi(j as i32));
    let solved = gram
        .cholesky()
        .expect("Savitzky-Golay normal equations are positive definite when order < window")
        .solve(&basis);
    (design * solved).iter().copied().collect()
}

/// Centred smoothing coefficients; they sum to 1.
pub fn sg_coefficients(cfg: &SgConfig) -> Result<Vec<f64>> {
    cfg.validate()?;
    Ok(fit_weights(cfg.window, cfg.poly_order, 0.0))
}

/// Filters one spectrum with precomputed centred coefficients.
fn smooth_row(row: &[f64], coeffs: &[f64], cfg: &SgConfig, edge_weights: &[Vec<f64>], out: &mut [f64]) {
    let p = row.len() as isize;
    let h = cfg.half_window() as isize;
    let w = cfg.window;
    for i in 0..p {
        let interior = i >= h && i < p - h;
        out[i as usize] = if interior || cfg.edge == EdgeMode::Mirror {
            coeffs
                .iter()
                .enumerate()
                .map(|(j, &c)| {
                    let mut k = i + j as isize - h;
                    if k < 0 {
                        k = -k;
                    } else if k >= p {
                        k = 2 * (p - 1) - k;
                    }
                    c * row[k as usize]
                })
                .sum()
        } else if i < h {
            let weights = &edge_weights[i as usize];
            weights.iter().zip(&row[..w]).map(|(c, x)| c * x).sum()
        } else {
            // Mirror image of the leading-edge weights.
            let weights = &edge_weights[(p - 1 - i) as usize];
            weights
                .iter()
                .rev()
                .zip(&row[row.len() - w..])
                .map(|(c, x)| c * x)
                .sum()
        };
    }
}

pub fn smooth(s: &SpectraSet, cfg: &SgConfig) -> Result<SpectraSet> {
    let coeffs = sg_coefficients(cfg)?;
    let p = s.n_points();
    if p < cfg.window {
        return Err(Error::InvalidArgument(format!(
            "spectra have {p} points, fewer than the smoothing window {}",
            cfg.window
        )));
    }
    let h = cfg.half_window();
    let edge_weights: Vec<Vec<f64>> = match cfg.edge {
        EdgeMode::Mirror => Vec::new(),
        EdgeMode::Fit => (0..h)
            .map(|i| fit_weights(cfg.window, cfg.poly_order, i as f64 - h as f64))
            .collect(),
    };
    let mut data = vec![0.0; s.data().len()];
    for (row, out) in s.rows().zip(data.chunks_exact_mut(p)) {
        smooth_row(row, &coeffs, cfg, &edge_weights, out);
    }
    Ok(s.replace_data(data))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectra::WavenumberAxis;

    fn set(rows: Vec<Vec<f64>>) -> SpectraSet {
        let p = rows[0].len();
        let axis = WavenumberAxis::uniform(0.0, (p - 1) as f64, p).unwrap();
        let labels = vec![1; rows.len()];
        SpectraSet::new(axis, rows, labels).unwrap()
    }

    #[test]
    fn surface_of_identical_rows() {
        let s = set(vec![vec![1.0, 2.0], vec![1.0, 2.0]]);
        let surf = fit_surface(&s, 3.0).unwrap();
        assert_eq!(surf.mean, vec![1.0, 2.0]);
        assert_eq!(surf.std, vec![0.0, 0.0]);
    }

    #[test]
    fn surface_uses_sample_std() {
        let s = set(vec![vec![0.0, 0.0], vec![2.0, 2.0]]);
        let surf = fit_surface(&s, 3.0).unwrap();
        assert_eq!(surf.mean, vec![1.0, 1.0]);
        for sd in surf.std {
            assert!((sd - 2f64.sqrt()).abs() < 1e-15);
        }
    }

    #[test]
    fn surface_needs_two_rows() {
        assert!(fit_surface(&set(vec![vec![1.0, 2.0]]), 3.0).is_err());
    }

    #[test]
    fn mean_spectrum_is_kept_and_spike_rejected() {
        let surf = DecisionSurface {
            mean: vec![0.0, 0.0, 0.0],
            std: vec![1.0, 1.0, 1.0],
            k: 3.0,
        };
        let s = set(vec![vec![0.0, 0.0, 0.0], vec![0.0, 4.0, 0.0], vec![3.0, -3.0, 0.0]]);
        let (kept, rejected) = reject_outliers(&s, &surf).unwrap();
        assert_eq!(rejected, vec![1]);
        assert_eq!(kept.n_spectra(), 2);
    }

    #[test]
    fn zero_variance_set_keeps_everything() {
        let s = set(vec![vec![5.0, 5.0]; 4]);
        let surf = fit_surface(&s, 3.0).unwrap();
        let (kept, rejected) = reject_outliers(&s, &surf).unwrap();
        assert!(rejected.is_empty());
        assert_eq!(kept.n_spectra(), 4);
    }

    #[test]
    fn surface_dimension_mismatch() {
        let surf = DecisionSurface {
            mean: vec![0.0],
            std: vec![1.0],
            k: 3.0,
        };
        assert!(reject_outliers(&set(vec![vec![0.0, 0.0]]), &surf).is_err());
    }

    #[test]
    fn per_label_rejection_uses_each_group_band() {
        // Label 1 sits near 0, label 0 near 100; a pooled band would be wide
        // enough to keep the spike, the per-label band is not.
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for i in 0..20 {
            let d = (i % 5) as f64 * 0.1;
            rows.push(vec![d, d]);
            labels.push(1);
            rows.push(vec![100.0 + d, 100.0 + d]);
            labels.push(0);
        }
        rows.push(vec![3.0, 0.2]);
        labels.push(1);
        let axis = WavenumberAxis::new(vec![0.0, 1.0]).unwrap();
        let s = SpectraSet::new(axis, rows, labels).unwrap();
        let (_, grouped) = reject_outliers_grouped(&s, 3.0, SurfaceFit::PerLabel).unwrap();
        assert_eq!(grouped, vec![40]);
        let (_, pooled) = reject_outliers_grouped(&s, 3.0, SurfaceFit::Pooled).unwrap();
        assert!(pooled.is_empty());
    }

    #[test]
    fn classic_five_point_quadratic_table() {
        let c = sg_coefficients(&SgConfig::new(5, 2).unwrap()).unwrap();
        let expected = [-3.0, 12.0, 17.0, 12.0, -3.0].map(|v| v / 35.0);
        for (a, b) in c.iter().zip(expected) {
            assert!((a - b).abs() < 1e-14, "{c:?}");
        }
    }

    #[test]
    fn coefficients_sum_to_one() {
        for (w, o) in [(5, 2), (7, 3), (91, 3), (11, 0), (21, 6)] {
            let c = sg_coefficients(&SgConfig::new(w, o).unwrap()).unwrap();
            assert_eq!(c.len(), w);
            assert!((c.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn invalid_configs() {
        assert!(SgConfig::new(5, 5).is_err());
        assert!(SgConfig::new(4, 2).is_err());
        assert!(SgConfig::new(0, 0).is_err());
    }

    #[test]
    fn window_three_order_two_reproduces_quadratic() {
        let cfg = SgConfig::new(3, 2).unwrap();
        let row: Vec<f64> = (0..10).map(|i| (i * i) as f64 - 3.0 * i as f64).collect();
        let out = smooth(&set(vec![row.clone()]), &cfg).unwrap();
        for i in 1..9 {
            assert!((out.row(0)[i] - row[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn constant_spectrum_is_unchanged() {
        let s = set(vec![vec![2.5; 120]]);
        for edge in [EdgeMode::Mirror, EdgeMode::Fit] {
            let cfg = SgConfig { edge, ..SgConfig::default() };
            let out = smooth(&s, &cfg).unwrap();
            for &v in out.row(0) {
                assert!((v - 2.5).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn fit_edges_reproduce_polynomials_everywhere() {
        let cfg = SgConfig {
            window: 11,
            poly_order: 3,
            edge: EdgeMode::Fit,
        };
        let row: Vec<f64> = (0..40)
            .map(|i| {
                let t = i as f64 / 10.0;
                1.0 - 2.0 * t + 0.5 * t * t * t
            })
            .collect();
        let out = smooth(&set(vec![row.clone()]), &cfg).unwrap();
        for (a, b) in out.row(0).iter().zip(&row) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn too_short_for_window() {
        assert!(smooth(&set(vec![vec![0.0; 50]]), &SgConfig::default()).is_err());
    }
}
