//! Numerical routines checked against independent reference computations.

use rand::Rng;
use raman_core::cnn::{train, CnnArch, TrainConfig};
use raman_core::linear::{fit_pca, project};
use raman_core::preprocess::{sg_coefficients, smooth, EdgeMode, SgConfig};
use raman_core::rng;
use raman_core::{SpectraSet, WavenumberAxis};

fn random_set(n: usize, p: usize, seed: u64) -> SpectraSet {
    let mut r = rng::stream(seed, 99);
    let axis = WavenumberAxis::uniform(100.0, 100.0 + p as f64, p).unwrap();
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..p).map(|j| r.random::<f64>() * (1.0 + (i % 3) as f64) + 0.1 * j as f64).collect())
        .collect();
    let labels = (0..n).map(|i| (i % 2) as u8).collect();
    SpectraSet::new(axis, rows, labels).unwrap()
}

/// Centred scatter matrix by explicit triple loop.
fn scatter(s: &SpectraSet) -> Vec<Vec<f64>> {
    let (n, p) = (s.n_spectra(), s.n_points());
    let means: Vec<f64> = (0..p).map(|j| s.rows().map(|r| r[j]).sum::<f64>() / n as f64).collect();
    let mut c = vec![vec![0.0; p]; p];
    for r in s.rows() {
        for a in 0..p {
            for b in 0..p {
                c[a][b] += (r[a] - means[a]) * (r[b] - means[b]);
            }
        }
    }
    c
}

fn power_iteration(c: &[Vec<f64>]) -> f64 {
    let p = c.len();
    let mut v = vec![1.0; p];
    let mut lambda = 0.0;
    for _ in 0..2000 {
        let w: Vec<f64> = (0..p).map(|a| (0..p).map(|b| c[a][b] * v[b]).sum()).collect();
        let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        lambda = norm;
        v = w.iter().map(|x| x / norm).collect();
    }
    lambda
}

#[test]
fn pca_matches_scatter_eigenproblem() {
    let s = random_set(60, 12, 1);
    let c = scatter(&s);
    let basis = fit_pca(&s, 4).unwrap();
    let trace: f64 = (0..12).map(|j| c[j][j]).sum();
    assert!((basis.total_eigenvalue - trace).abs() < 1e-9 * trace);
    assert!((basis.eigenvalues[0] - power_iteration(&c)).abs() < 1e-8 * trace);
    for (v, &lambda) in basis.components.iter().zip(&basis.eigenvalues) {
        for a in 0..12 {
            let cv: f64 = (0..12).map(|b| c[a][b] * v[b]).sum();
            assert!((cv - lambda * v[a]).abs() < 1e-9 * trace);
        }
    }
    // score variance equals the eigenvalue
    let scores = project(&s, &basis).unwrap();
    for k in 0..4 {
        let ss: f64 = (0..60).map(|i| scores.row(i)[k].powi(2)).sum();
        assert!((ss - basis.eigenvalues[k]).abs() < 1e-8 * trace);
    }
}

#[test]
fn savitzky_golay_reproduces_polynomials() {
    let p = 150;
    let axis = WavenumberAxis::uniform(0.0, (p - 1) as f64, p).unwrap();
    let cubic = |x: f64| 0.5 - 0.02 * x + 3e-4 * x * x - 1e-6 * x * x * x;
    let row: Vec<f64> = axis.values().iter().map(|&x| cubic(x)).collect();
    let s = SpectraSet::new(axis, vec![row.clone()], vec![1]).unwrap();
    let cfg = SgConfig {
        window: 21,
        poly_order: 3,
        edge: EdgeMode::Fit,
    };
    let out = smooth(&s, &cfg).unwrap();
    for (a, b) in out.row(0).iter().zip(&row) {
        assert!((a - b).abs() < 1e-9, "{a} vs {b}");
    }
    let coeffs = sg_coefficients(&SgConfig::new(7, 2).unwrap()).unwrap();
    // tabulated quadratic smoother, window 7
    let table = [-2.0, 3.0, 6.0, 7.0, 6.0, 3.0, -2.0].map(|v| v / 21.0);
    for (a, b) in coeffs.iter().zip(table) {
        assert!((a - b).abs() < 1e-12);
    }
}

#[test]
fn cnn_training_lowers_loss_and_is_reproducible() {
    let p = 40;
    let axis = WavenumberAxis::uniform(0.0, 39.0, p).unwrap();
    let mut r = rng::stream(3, 0);
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for i in 0..64 {
        let y = (i % 2) as u8;
        rows.push(
            (0..p)
                .map(|j| {
                    let bump = if (15..25).contains(&j) && y == 1 { 1.0 } else { 0.0 };
                    bump + 0.1 * r.random::<f64>()
                })
                .collect(),
        );
        labels.push(y);
    }
    let data = SpectraSet::new(axis, rows, labels).unwrap();
    let arch = CnnArch {
        blocks: 1,
        filters: 4,
        hidden: 4,
        ..CnnArch::default()
    };
    let cfg = TrainConfig {
        batch_size: 8,
        learning_rate: 1e-2,
        epochs: 40,
        patience: None,
        seed: 5,
        ..TrainConfig::default()
    };
    let model = train(arch, &data, &cfg).unwrap();
    let first = model.history.first().unwrap().train_loss;
    let last = model.history.last().unwrap().train_loss;
    assert!(last < 0.5 * first, "loss {first} -> {last}");
    assert_eq!(model, train(arch, &data, &cfg).unwrap());
}
