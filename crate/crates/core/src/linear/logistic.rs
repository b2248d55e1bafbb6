//! L2-penalized logistic regression.
//!
//! Objective over N rows:
//!
//! ```text
//! f(b0, b) = (1/N) Σ [log(1 + exp(η_i)) − y_i η_i] + shrinkage · ‖b‖² / (2N),
//! η_i = b0 + Σ_j b_j x_ij
//! ```
//!
//! The intercept is not penalized. The minimizer is found with damped Newton
//! steps under an Armijo backtracking line search.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::FeatureMatrix;
use crate::error::{Error, Result};
use crate::math::softplus;

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogisticConfig {
    pub shrinkage: f64,
    /// Stop once the Euclidean norm of the objective gradient drops below this.
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for LogisticConfig {
    fn default() -> Self {
        Self {
            shrinkage: 1.0,
            tolerance: 1e-6,
            max_iterations: 10_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverDiagnostics {
    pub iterations: usize,
    pub gradient_norm: f64,
    pub objective: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticModel {
    pub intercept: f64,
    pub coefficients: Vec<f64>,
    pub shrinkage: f64,
    pub diagnostics: SolverDiagnostics,
}

impl LogisticModel {
    pub fn linear_predictor(&self, z: &[f64]) -> f64 {
        debug_assert_eq!(z.len(), self.coefficients.len());
        self.intercept + self.coefficients.iter().zip(z).map(|(b, x)| b * x).sum::<f64>()
    }

    /// `Pr(W = 1 | z)`.
    pub fn score(&self, z: &[f64]) -> f64 {
        sigmoid(self.linear_predictor(z))
    }

    pub fn score_all(&self, features: &FeatureMatrix) -> Vec<f64> {
        features.rows().map(|r| self.score(r)).collect()
    }
}

/// 1 iff `Pr(W = 1 | z) ≥ λ`.
pub fn classify_with_threshold(model: &LogisticModel, z: &[f64], lambda: f64) -> Result<u8> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::InvalidArgument(format!(
            "decision threshold must lie in [0, 1], got {lambda}"
        )));
    }
    if z.len() != model.coefficients.len() {
        return Err(Error::DimensionMismatch {
            expected: model.coefficients.len(),
            found: z.len(),
        });
    }
    Ok(u8::from(model.score(z) >= lambda))
}

/// Penalized mean cross-entropy at `(intercept, coefficients)`.
pub fn objective(x: &FeatureMatrix, y: &[u8], intercept: f64, coefficients: &[f64], shrinkage: f64) -> f64 {
    let n = x.n_rows() as f64;
    let data: f64 = x
        .rows()
        .zip(y)
        .map(|(row, &yi)| {
            let eta = intercept + coefficients.iter().zip(row).map(|(b, v)| b * v).sum::<f64>();
            softplus(eta) - f64::from(yi) * eta
        })
        .sum();
    data / n + shrinkage * coefficients.iter().map(|b| b * b).sum::<f64>() / (2.0 * n)
}

/// Gradient of [`objective`], intercept first.
pub fn objective_gradient(
    x: &FeatureMatrix,
    y: &[u8],
    intercept: f64,
    coefficients: &[f64],
    shrinkage: f64,
) -> Vec<f64> {
    let n = x.n_rows() as f64;
    let m = coefficients.len();
    let mut g = vec![0.0; m + 1];
    for (row, &yi) in x.rows().zip(y) {
        let eta = intercept + coefficients.iter().zip(row).map(|(b, v)| b * v).sum::<f64>();
        let r = sigmoid(eta) - f64::from(yi);
        g[0] += r;
        for (gj, v) in g[1..].iter_mut().zip(row) {
            *gj += r * v;
        }
    }
    g.iter_mut().for_each(|v| *v /= n);
    for (gj, b) in g[1..].iter_mut().zip(coefficients) {
        *gj += shrinkage * b / n;
    }
    g
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn fit_logistic(x: &FeatureMatrix, y: &[u8], cfg: &LogisticConfig) -> Result<LogisticModel> {
    let n = x.n_rows();
    let m = x.n_cols();
    if y.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: y.len(),
        });
    }
    if n < 2 {
        return Err(Error::InvalidArgument(format!(
            "logistic regression needs at least 2 rows, found {n}"
        )));
    }
    let ones = y.iter().filter(|&&v| v == 1).count();
    if ones == 0 || ones == n {
        return Err(Error::SingleClass(format!("{ones} of {n} labels are 1")));
    }
    if x.rows().flatten().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("non-finite feature value".into()));
    }
    if !(cfg.shrinkage >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "shrinkage must be >= 0, got {}",
            cfg.shrinkage
        )));
    }

    let nf = n as f64;
    let mut theta = vec![0.0; m + 1];
    let f_at = |t: &[f64]| objective(x, y, t[0], &t[1..], cfg.shrinkage);
    let mut f = f_at(&theta);
    let mut grad = objective_gradient(x, y, theta[0], &theta[1..], cfg.shrinkage);
    let mut iterations = 0;

    while norm(&grad) >= cfg.tolerance && iterations < cfg.max_iterations {
        iterations += 1;

        let mut hess = DMatrix::<f64>::zeros(m + 1, m + 1);
        for row in x.rows() {
            let eta = theta[0] + theta[1..].iter().zip(row).map(|(b, v)| b * v).sum::<f64>();
            let p = sigmoid(eta);
            let w = p * (1.0 - p) / nf;
            for a in 0..=m {
                let xa = if a == 0 { 1.0 } else { row[a - 1] };
                for b in a..=m {
                    let xb = if b == 0 { 1.0 } else { row[b - 1] };
                    hess[(a, b)] += w * xa * xb;
                }
            }
        }
        for a in 1..=m {
            hess[(a, a)] += cfg.shrinkage / nf;
        }
        for a in 0..=m {
            for b in 0..a {
                hess[(a, b)] = hess[(b, a)];
            }
        }
        let g = DVector::from_column_slice(&grad);
        let direction: Vec<f64> = match hess.cholesky() {
            Some(ch) => (-ch.solve(&g)).iter().copied().collect(),
            None => grad.iter().map(|v| -v).collect(),
        };
        let slope: f64 = direction.iter().zip(&grad).map(|(d, g)| d * g).sum();
        let direction = if slope < 0.0 {
            direction
        } else {
            grad.iter().map(|v| -v).collect()
        };
        let slope: f64 = direction.iter().zip(&grad).map(|(d, g)| d * g).sum();

        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..60 {
            let trial: Vec<f64> = theta.iter().zip(&direction).map(|(t, d)| t + step * d).collect();
            let f_trial = f_at(&trial);
            if f_trial <= f + 1e-4 * step * slope {
                accepted = Some((trial, f_trial));
                break;
            }
            step *= 0.5;
        }
        match accepted {
            Some((trial, f_trial)) => {
                theta = trial;
                f = f_trial;
                grad = objective_gradient(x, y, theta[0], &theta[1..], cfg.shrinkage);
            }
            // No representable decrease left along a descent direction.
            None => break,
        }
    }

    let gradient_norm = norm(&grad);
    let converged = gradient_norm < cfg.tolerance;
    if !converged {
        log::warn!(
            "logistic solver stopped after {iterations} iterations with gradient norm {gradient_norm:.3e}"
        );
    }
    Ok(LogisticModel {
        intercept: theta[0],
        coefficients: theta[1..].to_vec(),
        shrinkage: cfg.shrinkage,
        diagnostics: SolverDiagnostics {
            iterations,
            gradient_norm,
            objective: f,
            converged,
        },
    })
}
