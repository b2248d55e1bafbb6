//! Permutation importance for pooled-band logistic models and vanilla
//! gradient saliency maps for the CNN.

use std::fmt::Write as _;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::cnn::CnnModel;
use crate::error::{Error, Result};
use crate::eval::roc_auc;
use crate::linear::{FeatureMatrix, LogisticModel};
use crate::math::{mean, sample_std};
use crate::rng;
use crate::spectra::SpectraSet;

/// z-value of the two-sided 95% normal interval.
pub const Z95: f64 = 1.96;

pub const DEFAULT_PERMUTATIONS: usize = 30;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureImportance {
    pub label: String,
    /// Baseline AUC minus the mean AUC after shuffling this column.
    pub importance: f64,
    /// 95% half-width, `1.96 · sd / √n_permutations`.
    pub half_width: f64,
    pub permuted_auc: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceReport {
    pub baseline_auc: f64,
    pub n_permutations: usize,
    pub seed: u64,
    pub features: Vec<FeatureImportance>,
}

impl ImportanceReport {
    /// Index of the feature with the largest importance score.
    pub fn top(&self) -> usize {
        let mut best = 0;
        for (i, f) in self.features.iter().enumerate() {
            if f.importance > self.features[best].importance {
                best = i;
            }
        }
        best
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("feature,importance,half_width\n");
        for f in &self.features {
            let _ = writeln!(out, "{},{},{}", f.label, f.importance, f.half_width);
        }
        out
    }

    /// Bar chart with error bars for gnuplot, reading `csv_name`.
    pub fn gnuplot_script(&self, csv_name: &str) -> String {
        format!(
            "set datafile separator ','\n\
             set style fill solid 0.5\n\
             set boxwidth 0.6\n\
             set ylabel 'importance score'\n\
             set xtics rotate by -45\n\
             plot '{csv_name}' every ::1 using 0:2:xtic(1) with boxes notitle, \\\n\
             \x20    '' every ::1 using 0:2:3 with yerrorbars lc rgb 'black' pt -1 notitle\n"
        )
    }
}

/// Drop in ROC-AUC when each feature column is shuffled, `n_perm` times per
/// column. Column `j` is shuffled with RNG stream `PERMUTATION_BASE + j`, so
/// a feature's scores do not depend on the other columns.
pub fn permutation_importance(
    model: &LogisticModel,
    features: &FeatureMatrix,
    labels: &[u8],
    feature_labels: &[String],
    n_perm: usize,
    seed: u64,
) -> Result<ImportanceReport> {
    let n_cols = features.n_cols();
    if n_cols == 0 {
        return Err(Error::InvalidArgument("no features to permute".into()));
    }
    if n_perm < 2 {
        return Err(Error::InvalidArgument("need at least 2 permutations".into()));
    }
    if model.coefficients.len() != n_cols {
        return Err(Error::DimensionMismatch {
            expected: model.coefficients.len(),
            found: n_cols,
        });
    }
    if feature_labels.len() != n_cols {
        return Err(Error::DimensionMismatch {
            expected: n_cols,
            found: feature_labels.len(),
        });
    }
    let baseline_auc = roc_auc(&model.score_all(features), labels)?.0;

    let mut out = Vec::with_capacity(n_cols);
    let mut shuffled = features.clone();
    for j in 0..n_cols {
        let original = features.column(j);
        let mut column = original.clone();
        let mut rng = rng::stream(seed, rng::PERMUTATION_BASE + j as u64);
        let mut permuted_auc = Vec::with_capacity(n_perm);
        for _ in 0..n_perm {
            column.shuffle(&mut rng);
            shuffled.set_column(j, &column);
            permuted_auc.push(roc_auc(&model.score_all(&shuffled), labels)?.0);
        }
        shuffled.set_column(j, &original);
        // Averaging the drops keeps an untouched score exactly at zero.
        let drops: Vec<f64> = permuted_auc.iter().map(|a| baseline_auc - a).collect();
        out.push(FeatureImportance {
            label: feature_labels[j].clone(),
            importance: mean(&drops),
            half_width: Z95 * sample_std(&drops) / (n_perm as f64).sqrt(),
            permuted_auc,
        });
    }
    Ok(ImportanceReport {
        baseline_auc,
        n_permutations: n_perm,
        seed,
        features: out,
    })
}

/// How score derivatives are turned into ECDF values.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EcdfMode {
    /// One ECDF over every derivative of every test spectrum.
    #[default]
    Pooled,
    /// A separate ECDF for each wavenumber, across test spectra.
    PerWavenumber,
}

impl std::fmt::Display for EcdfMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            EcdfMode::Pooled => "pooled",
            EcdfMode::PerWavenumber => "per_wavenumber",
        })
    }
}

impl std::str::FromStr for EcdfMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "pooled" => Ok(EcdfMode::Pooled),
            "per_wavenumber" => Ok(EcdfMode::PerWavenumber),
            _ => Err(Error::Unknown {
                kind: "ECDF mode",
                name: s.to_string(),
            }),
        }
    }
}

/// ECDF value of every entry: its rank among `values` (ties averaged)
/// divided by the count. The maximum maps to 1 unless tied.
pub fn ecdf_values(values: &[f64]) -> Vec<f64> {
    let m = values.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut out = vec![0.0; m];
    let mut start = 0;
    while start < m {
        let mut end = start + 1;
        while end < m && values[order[end]] == values[order[start]] {
            end += 1;
        }
        let rank = (start + 1 + end) as f64 / 2.0;
        for &i in &order[start..end] {
            out[i] = rank / m as f64;
        }
        start = end;
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SaliencyMap {
    pub wavenumbers: Vec<f64>,
    pub mean: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub n_spectra: usize,
    pub mode: EcdfMode,
}

impl SaliencyMap {
    pub fn len(&self) -> usize {
        self.mean.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mean.is_empty()
    }

    /// Mean saliency inside and outside `[lo, hi]`.
    pub fn inside_outside(&self, lo: f64, hi: f64) -> (f64, f64) {
        let (mut inside, mut outside) = (Vec::new(), Vec::new());
        for (&w, &v) in self.wavenumbers.iter().zip(&self.mean) {
            if (lo..=hi).contains(&w) {
                inside.push(v);
            } else {
                outside.push(v);
            }
        }
        (mean(&inside), mean(&outside))
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("wavenumber,mean,lower,upper\n");
        for i in 0..self.len() {
            let _ = writeln!(
                out,
                "{},{},{},{}",
                self.wavenumbers[i], self.mean[i], self.lower[i], self.upper[i]
            );
        }
        out
    }

    pub fn gnuplot_script(&self, csv_name: &str) -> String {
        format!(
            "set datafile separator ','\n\
             set xlabel 'Raman shift (cm^-1)'\n\
             set ylabel 'saliency'\n\
             set yrange [0:1]\n\
             plot '{csv_name}' every ::1 using 1:3:4 with filledcurves fs transparent solid 0.3 title '95% band', \\\n\
             \x20    '' every ::1 using 1:2 with lines lw 2 title 'mean saliency'\n"
        )
    }
}

/// Vanilla gradient saliency: `∂o/∂x` for every test spectrum, mapped
/// through the empirical distribution function, then averaged per
/// wavenumber with a `mean ± 1.96·sd/√N` band clipped to `[0, 1]`.
pub fn saliency_map(model: &CnnModel, test: &SpectraSet, mode: EcdfMode) -> Result<SaliencyMap> {
    if test.is_empty() {
        return Err(Error::InvalidArgument("saliency needs at least one test spectrum".into()));
    }
    let n = test.n_spectra();
    let p = test.n_points();
    let mut grads = Vec::with_capacity(n * p);
    for row in test.rows() {
        grads.extend(model.input_gradient(row)?);
    }
    let ecdf = match mode {
        EcdfMode::Pooled => ecdf_values(&grads),
        EcdfMode::PerWavenumber => {
            let mut out = vec![0.0; n * p];
            for j in 0..p {
                let column: Vec<f64> = (0..n).map(|i| grads[i * p + j]).collect();
                for (i, v) in ecdf_values(&column).into_iter().enumerate() {
                    out[i * p + j] = v;
                }
            }
            out
        }
    };

    let mut map = SaliencyMap {
        wavenumbers: test.axis().values().to_vec(),
        mean: Vec::with_capacity(p),
        lower: Vec::with_capacity(p),
        upper: Vec::with_capacity(p),
        n_spectra: n,
        mode,
    };
    for j in 0..p {
        let column: Vec<f64> = (0..n).map(|i| ecdf[i * p + j]).collect();
        let m = mean(&column);
        let half = if n > 1 {
            Z95 * sample_std(&column) / (n as f64).sqrt()
        } else {
            0.0
        };
        map.mean.push(m);
        map.lower.push((m - half).clamp(0.0, 1.0));
        map.upper.push((m + half).clamp(0.0, 1.0));
    }
    Ok(map)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cnn::CnnArch;
    use crate::linear::SolverDiagnostics;
    use crate::spectra::WavenumberAxis;

    fn model(coefficients: Vec<f64>) -> LogisticModel {
        LogisticModel {
            intercept: 0.0,
            coefficients,
            shrinkage: 1.0,
            diagnostics: SolverDiagnostics {
                iterations: 0,
                gradient_norm: 0.0,
                objective: 0.0,
                converged: true,
            },
        }
    }

    #[test]
    fn ecdf_rank_grid() {
        assert_eq!(ecdf_values(&[3.0, 1.0, 2.0, 4.0]), vec![0.75, 0.25, 0.5, 1.0]);
        assert_eq!(ecdf_values(&[0.0; 4]), vec![0.625; 4]);
        assert_eq!(ecdf_values(&[1.0, 1.0, 2.0]), vec![0.5, 0.5, 1.0]);
    }

    #[test]
    fn zero_coefficient_feature_is_unimportant() {
        let x = FeatureMatrix::from_rows(&[
            vec![1.0, 5.0],
            vec![2.0, 3.0],
            vec![3.0, 1.0],
            vec![4.0, 2.0],
        ])
        .unwrap();
        let labels = [0, 0, 1, 1];
        let names = vec!["a".to_string(), "b".to_string()];
        let r = permutation_importance(&model(vec![1.0, 0.0]), &x, &labels, &names, 30, 7).unwrap();
        assert_eq!(r.baseline_auc, 1.0);
        assert_eq!(r.features[1].importance, 0.0);
        assert_eq!(r.features[1].half_width, 0.0);
        assert!(r.features[0].importance > 0.0);
        assert_eq!(r.top(), 0);
    }

    #[test]
    fn importance_rejects_bad_input() {
        let x = FeatureMatrix::zeros(4, 0);
        assert!(permutation_importance(&model(vec![]), &x, &[0, 0, 1, 1], &[], 30, 0).is_err());
        let x = FeatureMatrix::zeros(4, 1);
        let names = vec!["a".to_string()];
        assert!(permutation_importance(&model(vec![1.0]), &x, &[0, 0, 1, 1], &names, 1, 0).is_err());
    }

    #[test]
    fn zero_conv_weights_single_atom() {
        let arch = CnnArch {
            blocks: 1,
            filters: 2,
            kernel: 3,
            pool: 2,
            dropout: 0.0,
            hidden: 4,
        };
        let mut net = CnnModel::init(arch, 16, 1).unwrap();
        for w in net.convs.iter_mut() {
            w.weight.iter_mut().for_each(|v| *v = 0.0);
        }
        let axis = WavenumberAxis::uniform(0.0, 15.0, 16).unwrap();
        let rows = (0..3).map(|i| (0..16).map(|j| (i * j) as f64).collect()).collect();
        let test = SpectraSet::new(axis, rows, vec![0, 1, 0]).unwrap();
        let map = saliency_map(&net, &test, EcdfMode::Pooled).unwrap();
        assert_eq!(map.len(), 16);
        let first = map.mean[0];
        assert!(map.mean.iter().all(|&v| v == first));
        assert_eq!(map.lower, map.mean);
    }

    #[test]
    fn ecdf_mode_parses() {
        assert_eq!("pooled".parse::<EcdfMode>().unwrap(), EcdfMode::Pooled);
        assert_eq!("per-wavenumber".parse::<EcdfMode>().unwrap(), EcdfMode::PerWavenumber);
        assert!("median".parse::<EcdfMode>().is_err());
    }
}
