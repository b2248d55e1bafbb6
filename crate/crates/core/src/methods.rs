//! The five classifiers behind one interface: fit on a training set, score
//! held-out spectra (higher score = more likely label 1).

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::cnn::{self, CnnArch, CnnModel, TrainConfig};
use crate::error::{Error, Result};
use crate::eval::FoldPlan;
use crate::linear::{
    fit_l2d, fit_logistic, fit_pca, lra_features, pool_features, project, L2dModel,
    LogisticConfig, LogisticModel, PcaBasis, PoolingSpec,
};
use crate::rng;
use crate::spectra::SpectraSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MethodKind {
    Lra,
    L2d,
    Lrp,
    Pca,
    Cnn,
}

impl MethodKind {
    pub const ALL: [MethodKind; 5] = [
        MethodKind::Lra,
        MethodKind::L2d,
        MethodKind::Lrp,
        MethodKind::Pca,
        MethodKind::Cnn,
    ];

    /// Lower-case identifier used in file names and flags.
    pub fn id(self) -> &'static str {
        match self {
            MethodKind::Lra => "lra",
            MethodKind::L2d => "l2d",
            MethodKind::Lrp => "lrp",
            MethodKind::Pca => "pca",
            MethodKind::Cnn => "cnn",
        }
    }

    /// Whether the method looks at local spectral structure (pooled bands,
    /// principal components, convolutions) rather than global statistics.
    pub fn is_local(self) -> bool {
        matches!(self, MethodKind::Lrp | MethodKind::Pca | MethodKind::Cnn)
    }
}

impl fmt::Display for MethodKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.id().to_ascii_uppercase())
    }
}

impl FromStr for MethodKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        MethodKind::ALL
            .into_iter()
            .find(|m| m.id().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::Unknown {
                kind: "method",
                name: s.to_string(),
            })
    }
}

/// Hyper-parameters shared by all methods.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodConfig {
    pub logistic: LogisticConfig,
    /// Sub-band cuts for LRP; `None` picks a default that fits the axis.
    pub pooling: Option<PoolingSpec>,
    pub pca_components: usize,
    /// Folds of the inner search for τ (L2D) and λ (PCA).
    pub inner_folds: usize,
    pub cnn_arch: CnnArch,
    pub cnn_train: TrainConfig,
}

impl Default for MethodConfig {
    fn default() -> Self {
        Self {
            logistic: LogisticConfig::default(),
            pooling: None,
            pca_components: 5,
            inner_folds: 10,
            cnn_arch: CnnArch::default(),
            cnn_train: TrainConfig::default(),
        }
    }
}

impl MethodConfig {
    pub fn pooling_for(&self, s: &SpectraSet) -> Result<PoolingSpec> {
        if let Some(spec) = &self.pooling {
            return Ok(spec.clone());
        }
        [PoolingSpec::lw_default(), PoolingSpec::hw_default()]
            .into_iter()
            .find(|spec| spec.bands(s.axis()).is_ok())
            .ok_or_else(|| {
                Error::InvalidArgument(
                    "no default pooling fits this wavenumber range; pass explicit cuts".into(),
                )
            })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum TrainedModel {
    Lra {
        logistic: LogisticModel,
    },
    L2d(L2dModel),
    Lrp {
        pooling: PoolingSpec,
        logistic: LogisticModel,
    },
    Pca {
        basis: PcaBasis,
        logistic: LogisticModel,
        lambda: f64,
    },
    Cnn(CnnModel),
}

impl TrainedModel {
    pub fn kind(&self) -> MethodKind {
        match self {
            TrainedModel::Lra { .. } => MethodKind::Lra,
            TrainedModel::L2d(_) => MethodKind::L2d,
            TrainedModel::Lrp { .. } => MethodKind::Lrp,
            TrainedModel::Pca { .. } => MethodKind::Pca,
            TrainedModel::Cnn(_) => MethodKind::Cnn,
        }
    }

    /// Continuous scores for ROC analysis.
    pub fn score(&self, s: &SpectraSet) -> Result<Vec<f64>> {
        match self {
            TrainedModel::Lra { logistic } => Ok(logistic.score_all(&lra_features(s))),
            TrainedModel::L2d(model) => {
                check_len(model.mean_first.len(), s.n_points())?;
                Ok(s.rows().map(|r| model.score(r)).collect())
            }
            TrainedModel::Lrp { pooling, logistic } => Ok(logistic.score_all(&pool_features(s, pooling)?)),
            TrainedModel::Pca { basis, logistic, .. } => Ok(logistic.score_all(&project(s, basis)?)),
            TrainedModel::Cnn(model) => model.predict_many(&s.rows().collect::<Vec<_>>()),
        }
    }

    /// Hard decisions with each method's own rule.
    pub fn classify(&self, s: &SpectraSet) -> Result<Vec<u8>> {
        let scores = self.score(s)?;
        let threshold = match self {
            TrainedModel::L2d(_) => 0.0,
            TrainedModel::Pca { lambda, .. } => *lambda,
            _ => 0.5,
        };
        Ok(scores.into_iter().map(|v| u8::from(v >= threshold)).collect())
    }
}

fn check_len(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::DimensionMismatch { expected, found });
    }
    Ok(())
}

/// `{0, 0.01, …, 1}`.
pub fn tuning_grid() -> Vec<f64> {
    (0..=100).map(|i| i as f64 / 100.0).collect()
}

/// Index of the best mean accuracy; ties go to the value nearest 0.5, then
/// to the smaller value.
pub fn select_best(grid: &[f64], accuracy: &[f64]) -> usize {
    let mut best = 0;
    for i in 1..grid.len() {
        let better = accuracy[i] > accuracy[best]
            || (accuracy[i] == accuracy[best] && (grid[i] - 0.5).abs() < (grid[best] - 0.5).abs());
        if better {
            best = i;
        }
    }
    best
}

fn accuracy(predicted: impl Iterator<Item = u8>, labels: &[u8]) -> f64 {
    let hits = predicted.zip(labels).filter(|(p, l)| p == *l).count();
    hits as f64 / labels.len() as f64
}

/// Inner cross-validated choice of a decision parameter. For each inner
/// fold, `evaluate(train_rows, test_rows)` returns one statistic per test
/// row; a row is called 1 iff `decide(statistic, value)`. The grid value with
/// the best mean accuracy wins (see [`select_best`]).
fn grid_search(
    labels: &[u8],
    inner_folds: usize,
    seed: u64,
    mut evaluate: impl FnMut(&[usize], &[usize]) -> Result<Vec<[f64; 2]>>,
    decide: impl Fn(&[f64; 2], f64) -> bool,
) -> Result<f64> {
    let grid = tuning_grid();
    let ones = labels.iter().filter(|&&l| l == 1).count();
    let k = inner_folds.min(ones).min(labels.len() - ones);
    if k < 2 {
        return Ok(0.5);
    }
    let plan = FoldPlan::stratified(labels, k, seed)?;
    let mut totals = vec![0.0; grid.len()];
    for fold in 0..k {
        let (tr, te) = plan.split(fold);
        let stats = evaluate(&tr, &te)?;
        let truth: Vec<u8> = te.iter().map(|&i| labels[i]).collect();
        for (t, &value) in totals.iter_mut().zip(&grid) {
            *t += accuracy(stats.iter().map(|st| u8::from(decide(st, value))), &truth);
        }
    }
    let means: Vec<f64> = totals.iter().map(|t| t / k as f64).collect();
    Ok(grid[select_best(&grid, &means)])
}

/// Fits one method on `train`. `seed` drives inner folds and network training.
pub fn fit_method(kind: MethodKind, cfg: &MethodConfig, train: &SpectraSet, seed: u64) -> Result<TrainedModel> {
    train.require_both_classes()?;
    let labels = train.labels();
    match kind {
        MethodKind::Lra => Ok(TrainedModel::Lra {
            logistic: fit_logistic(&lra_features(train), labels, &cfg.logistic)?,
        }),
        MethodKind::L2d => {
            let tau = grid_search(
                labels,
                cfg.inner_folds,
                rng::derive_seed(seed, 1),
                |tr, te| {
                    let (h1, h2) = fit_l2d(&train.subset(tr))?;
                    let model = L2dModel::new(h1, h2, 0.5)?;
                    Ok(te
                        .iter()
                        .map(|&i| {
                            let (d1, d2) = model.distances(train.row(i));
                            [d1, d2]
                        })
                        .collect())
                },
                |&[d1, d2], tau| tau * d1 <= (1.0 - tau) * d2,
            )?;
            let (h1, h2) = fit_l2d(train)?;
            Ok(TrainedModel::L2d(L2dModel::new(h1, h2, tau)?))
        }
        MethodKind::Lrp => {
            let pooling = cfg.pooling_for(train)?;
            let features = pool_features(train, &pooling)?;
            Ok(TrainedModel::Lrp {
                pooling,
                logistic: fit_logistic(&features, labels, &cfg.logistic)?,
            })
        }
        MethodKind::Pca => {
            // The basis is label-free, so it is fitted once on the whole
            // training set and shared by the inner λ search.
            let basis = fit_pca(train, cfg.pca_components)?;
            let scores = project(train, &basis)?;
            let lambda = grid_search(
                labels,
                cfg.inner_folds,
                rng::derive_seed(seed, 2),
                |tr, te| {
                    let y: Vec<u8> = tr.iter().map(|&i| labels[i]).collect();
                    let model = fit_logistic(&scores.subset_rows(tr), &y, &cfg.logistic)?;
                    Ok(te.iter().map(|&i| [model.score(scores.row(i)), 0.0]).collect())
                },
                |&[p, _], lambda| p >= lambda,
            )?;
            Ok(TrainedModel::Pca {
                logistic: fit_logistic(&scores, labels, &cfg.logistic)?,
                basis,
                lambda,
            })
        }
        MethodKind::Cnn => {
            let tc = TrainConfig {
                seed: rng::derive_seed(seed, 3),
                ..cfg.cnn_train.clone()
            };
            Ok(TrainedModel::Cnn(cnn::train(cfg.cnn_arch, train, &tc)?))
        }
    }
}
