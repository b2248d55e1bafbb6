//! Principal components from the eigendecomposition of `YᵀY`, where `Y` is
//! the column-centred data matrix.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use super::FeatureMatrix;
use crate::error::{Error, Result};
use crate::spectra::SpectraSet;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaBasis {
    pub column_means: Vec<f64>,
    /// `m` unit loading vectors of length p, strongest first.
    pub components: Vec<Vec<f64>>,
    /// Eigenvalues of `YᵀY` for the retained components, non-increasing.
    pub eigenvalues: Vec<f64>,
    /// Sum of all p eigenvalues (numerically-zero ones clamped to 0).
    pub total_eigenvalue: f64,
    /// Number of rows the basis was fitted on.
    pub n_samples: usize,
}

impl PcaBasis {
    pub fn n_components(&self) -> usize {
        self.components.len()
    }

    pub fn variance_proportions(&self) -> Vec<f64> {
        self.eigenvalues.iter().map(|l| l / self.total_eigenvalue).collect()
    }

    pub fn cumulative_proportions(&self) -> Vec<f64> {
        self.variance_proportions()
            .iter()
            .scan(0.0, |acc, v| {
                *acc += v;
                Some(*acc)
            })
            .collect()
    }

    /// Standard deviation of each principal component, `sqrt(λ / (N − 1))`.
    pub fn standard_deviations(&self) -> Vec<f64> {
        let dof = (self.n_samples.max(2) - 1) as f64;
        self.eigenvalues.iter().map(|l| (l / dof).sqrt()).collect()
    }

    /// Maps component scores back to intensity space.
    pub fn reconstruct(&self, scores: &[f64]) -> Vec<f64> {
        let mut out = self.column_means.clone();
        for (v, &z) in self.components.iter().zip(scores) {
            for (o, &l) in out.iter_mut().zip(v) {
                *o += z * l;
            }
        }
        out
    }
}

pub fn fit_pca(s: &SpectraSet, m: usize) -> Result<PcaBasis> {
    let n = s.n_spectra();
    let p = s.n_points();
    if m == 0 || n <= m {
        return Err(Error::InvalidArgument(format!(
            "PCA needs N > m >= 1 (N = {n}, m = {m})"
        )));
    }
    let mut column_means = vec![0.0; p];
    for row in s.rows() {
        for (c, &x) in column_means.iter_mut().zip(row) {
            *c += x;
        }
    }
    column_means.iter_mut().for_each(|c| *c /= n as f64);

    let centred = DMatrix::from_fn(n, p, |i, j| s.row(i)[j] - column_means[j]);
    let gram = centred.tr_mul(&centred);
    let eig = SymmetricEigen::new(gram);

    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let largest = eig.eigenvalues[order[0]].max(0.0);
    let cutoff = largest * p as f64 * f64::EPSILON * 16.0;
    let clamp = |l: f64| if l > cutoff { l } else { 0.0 };
    let rank = order.iter().filter(|&&i| clamp(eig.eigenvalues[i]) > 0.0).count();
    if m > rank {
        return Err(Error::RankDeficient { requested: m, rank });
    }
    let total_eigenvalue: f64 = order.iter().map(|&i| clamp(eig.eigenvalues[i])).sum();

    let components = order[..m]
        .iter()
        .map(|&i| {
            let mut v: Vec<f64> = eig.eigenvectors.column(i).iter().copied().collect();
            // Sign convention: the largest-magnitude loading is positive.
            let pivot = v
                .iter()
                .enumerate()
                .fold((0, 0.0f64), |best, (j, &x)| if x.abs() > best.1 { (j, x.abs()) } else { best })
                .0;
            if v[pivot] < 0.0 {
                v.iter_mut().for_each(|x| *x = -*x);
            }
            v
        })
        .collect();
    let eigenvalues = order[..m].iter().map(|&i| clamp(eig.eigenvalues[i])).collect();

    Ok(PcaBasis {
        column_means,
        components,
        eigenvalues,
        total_eigenvalue,
        n_samples: n,
    })
}

/// Component scores `z = (x − mean)·V`, one row per spectrum.
pub fn project(s: &SpectraSet, basis: &PcaBasis) -> Result<FeatureMatrix> {
    if s.n_points() != basis.column_means.len() {
        return Err(Error::DimensionMismatch {
            expected: basis.column_means.len(),
            found: s.n_points(),
        });
    }
    let m = basis.n_components();
    let mut out = FeatureMatrix::zeros(s.n_spectra(), m);
    let mut centred = vec![0.0; s.n_points()];
    for (i, row) in s.rows().enumerate() {
        for ((c, &x), &mu) in centred.iter_mut().zip(row).zip(&basis.column_means) {
            *c = x - mu;
        }
        for (z, v) in out.row_mut(i).iter_mut().zip(&basis.components) {
            *z = v.iter().zip(&centred).map(|(a, b)| a * b).sum();
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectra::WavenumberAxis;

    fn set(rows: Vec<Vec<f64>>) -> SpectraSet {
        let p = rows[0].len();
        let labels = vec![0; rows.len()];
        SpectraSet::new(WavenumberAxis::uniform(0.0, 1.0, p).unwrap(), rows, labels).unwrap()
    }

    #[test]
    fn points_on_a_line() {
        let s = set((0..6).map(|i| vec![i as f64, i as f64]).collect());
        let basis = fit_pca(&s, 1).unwrap();
        let v = &basis.components[0];
        let r = 0.5f64.sqrt();
        assert!((v[0] - r).abs() < 1e-12 && (v[1] - r).abs() < 1e-12);
        assert_eq!(basis.variance_proportions(), vec![1.0]);
        assert!(matches!(fit_pca(&s, 2), Err(Error::RankDeficient { requested: 2, rank: 1 })));
    }

    #[test]
    fn needs_more_rows_than_components() {
        let s = set(vec![vec![1.0, 2.0], vec![2.0, 1.0]]);
        assert!(fit_pca(&s, 2).is_err());
        assert!(fit_pca(&s, 0).is_err());
    }

    #[test]
    fn mean_row_projects_to_zero() {
        let s = set(vec![vec![1.0, 0.0, 2.0], vec![3.0, 1.0, 0.0], vec![0.0, 4.0, 1.0], vec![2.0, 2.0, 2.0]]);
        let basis = fit_pca(&s, 2).unwrap();
        let mean = set(vec![basis.column_means.clone()]);
        let z = project(&mean, &basis).unwrap();
        assert!(z.row(0).iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn projection_dimension_mismatch() {
        let s = set(vec![vec![1.0, 0.0, 2.0], vec![3.0, 1.0, 0.0], vec![0.0, 4.0, 1.0]]);
        let basis = fit_pca(&s, 1).unwrap();
        assert!(project(&set(vec![vec![1.0, 2.0]]), &basis).is_err());
    }
}
