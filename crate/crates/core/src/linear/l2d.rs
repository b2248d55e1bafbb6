//! Nearest class-mean classification by weighted squared ℓ² distance.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectra::SpectraSet;

/// Class means plus the trade-off weight `tau ∈ [0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct L2dModel {
    /// Mean spectrum of label 1.
    pub mean_first: Vec<f64>,
    /// Mean spectrum of label 0.
    pub mean_second: Vec<f64>,
    pub tau: f64,
}

/// Columnwise means of the label-1 and label-0 rows.
pub fn fit_l2d(train: &SpectraSet) -> Result<(Vec<f64>, Vec<f64>)> {
    train.require_both_classes()?;
    let p = train.n_points();
    let mut sums = [vec![0.0; p], vec![0.0; p]];
    let counts = train.class_counts();
    for (row, &label) in train.rows().zip(train.labels()) {
        for (s, &x) in sums[label as usize].iter_mut().zip(row) {
            *s += x;
        }
    }
    let [mut second, mut first] = sums;
    first.iter_mut().for_each(|v| *v /= counts[1] as f64);
    second.iter_mut().for_each(|v| *v /= counts[0] as f64);
    Ok((first, second))
}

fn squared_distance(x: &[f64], h: &[f64]) -> f64 {
    x.iter().zip(h).map(|(a, b)| (a - b) * (a - b)).sum()
}

impl L2dModel {
    pub fn new(mean_first: Vec<f64>, mean_second: Vec<f64>, tau: f64) -> Result<Self> {
        if mean_first.len() != mean_second.len() {
            return Err(Error::DimensionMismatch {
                expected: mean_first.len(),
                found: mean_second.len(),
            });
        }
        if !(0.0..=1.0).contains(&tau) {
            return Err(Error::InvalidArgument(format!("tau must lie in [0, 1], got {tau}")));
        }
        Ok(Self {
            mean_first,
            mean_second,
            tau,
        })
    }

    /// `(d¹, d²)`: squared distances to the label-1 and label-0 means.
    pub fn distances(&self, x: &[f64]) -> (f64, f64) {
        debug_assert_eq!(x.len(), self.mean_first.len());
        (squared_distance(x, &self.mean_first), squared_distance(x, &self.mean_second))
    }

    /// 1 iff `τ·d¹ ≤ (1 − τ)·d²`.
    pub fn classify(&self, x: &[f64]) -> u8 {
        let (d1, d2) = self.distances(x);
        u8::from(self.tau * d1 <= (1.0 - self.tau) * d2)
    }

    /// `(1 − τ)·d² − τ·d¹`; non-negative exactly when [`classify`](Self::classify) returns 1.
    pub fn score(&self, x: &[f64]) -> f64 {
        let (d1, d2) = self.distances(x);
        score_from_distances(d1, d2, self.tau)
    }
}

pub(crate) fn score_from_distances(d1: f64, d2: f64, tau: f64) -> f64 {
    (1.0 - tau) * d2 - tau * d1
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectra::WavenumberAxis;

    fn model(h1: &[f64], h2: &[f64], tau: f64) -> L2dModel {
        L2dModel::new(h1.to_vec(), h2.to_vec(), tau).unwrap()
    }

    #[test]
    fn class_means() {
        let axis = WavenumberAxis::new(vec![1.0, 2.0]).unwrap();
        let s = SpectraSet::new(axis, vec![vec![0.0, 0.0], vec![2.0, 2.0], vec![5.0, 7.0]], vec![1, 1, 0]).unwrap();
        let (h1, h2) = fit_l2d(&s).unwrap();
        assert_eq!(h1, vec![1.0, 1.0]);
        assert_eq!(h2, vec![5.0, 7.0]);
    }

    #[test]
    fn missing_class() {
        let axis = WavenumberAxis::new(vec![1.0, 2.0]).unwrap();
        let s = SpectraSet::new(axis, vec![vec![0.0, 0.0]], vec![1]).unwrap();
        assert!(fit_l2d(&s).is_err());
    }

    #[test]
    fn on_first_mean_is_first_class() {
        let m = model(&[1.0, 2.0], &[3.0, 3.0], 0.5);
        assert_eq!(m.classify(&[1.0, 2.0]), 1);
        assert!((m.score(&[1.0, 2.0]) - 5.0 / 2.0).abs() < 1e-15);
    }

    #[test]
    fn tau_zero_always_first() {
        let m = model(&[0.0], &[10.0], 0.0);
        for x in [-5.0, 0.0, 10.0, 100.0] {
            assert_eq!(m.classify(&[x]), 1);
        }
    }

    #[test]
    fn hand_computed_distances() {
        let m = model(&[0.0, 0.0], &[2.0, 2.0], 0.5);
        assert_eq!(m.distances(&[1.0, 1.5]), (3.25, 1.25));
        assert_eq!(m.classify(&[1.0, 1.5]), 0);
    }

    #[test]
    fn tau_one_boundary_is_inclusive() {
        let m = model(&[1.0, 1.0], &[0.0, 0.0], 1.0);
        assert_eq!(m.score(&[1.0, 1.0]), 0.0);
        assert_eq!(m.classify(&[1.0, 1.0]), 1);
    }

    #[test]
    fn tau_out_of_range() {
        assert!(L2dModel::new(vec![0.0], vec![1.0], 1.5).is_err());
    }
}
