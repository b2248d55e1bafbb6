//! Cross-validation, ROC analysis and AUC summary tables.

use std::fmt::Write as _;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::{mean, sample_std};
use crate::methods::{fit_method, MethodConfig, MethodKind};
use crate::rng;
use crate::spectra::SpectraSet;

/// Assignment of every observation to one of `k` test folds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub k: usize,
    pub assignments: Vec<usize>,
    pub seed: u64,
}

impl FoldPlan {
    /// Seeded shuffle, then round-robin assignment.
    pub fn new(n: usize, k: usize, seed: u64) -> Result<Self> {
        check_fold_count(n, k)?;
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut rng::stream(seed, rng::FOLD_ASSIGNMENT));
        let mut assignments = vec![0; n];
        for (pos, &i) in order.iter().enumerate() {
            assignments[i] = pos % k;
        }
        Ok(Self { k, assignments, seed })
    }

    /// Like [`new`](Self::new) but each class is shuffled and dealt
    /// separately, the second class continuing the round-robin where the
    /// first stopped: class counts per fold differ by at most one, and so do
    /// fold sizes.
    pub fn stratified(labels: &[u8], k: usize, seed: u64) -> Result<Self> {
        check_fold_count(labels.len(), k)?;
        let mut rng = rng::stream(seed, rng::FOLD_ASSIGNMENT);
        let mut assignments = vec![0; labels.len()];
        let mut next = 0;
        for label in [1u8, 0] {
            let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == label).collect();
            idx.shuffle(&mut rng);
            for i in idx {
                assignments[i] = next % k;
                next += 1;
            }
        }
        Ok(Self { k, assignments, seed })
    }

    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &f in &self.assignments {
            sizes[f] += 1;
        }
        sizes
    }

    /// `(training rows, test rows)` for `fold`, each in increasing order.
    pub fn split(&self, fold: usize) -> (Vec<usize>, Vec<usize>) {
        (0..self.assignments.len()).partition(|&i| self.assignments[i] != fold)
    }
}

/// Stratified train/test split holding out about `test_fraction` of each
/// class (at least one row per class on each side).
pub fn holdout_split(labels: &[u8], test_fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "test fraction must lie in (0, 1), got {test_fraction}"
        )));
    }
    let mut rng = rng::stream(seed, rng::EXPLAIN_SPLIT);
    let mut train = Vec::new();
    let mut test = Vec::new();
    for label in [1u8, 0] {
        let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == label).collect();
        if idx.len() < 2 {
            return Err(Error::SingleClass(format!(
                "class {label} has {} spectra; a hold-out split needs 2",
                idx.len()
            )));
        }
        idx.shuffle(&mut rng);
        let n_test = ((idx.len() as f64 * test_fraction).round() as usize).clamp(1, idx.len() - 1);
        test.extend_from_slice(&idx[..n_test]);
        train.extend_from_slice(&idx[n_test..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

fn check_fold_count(n: usize, k: usize) -> Result<()> {
    if k < 2 || n < k {
        return Err(Error::InvalidArgument(format!(
            "need n >= k >= 2 for k-fold cross-validation (n = {n}, k = {k})"
        )));
    }
    Ok(())
}

fn class_totals(labels: &[u8]) -> Result<(usize, usize)> {
    let pos = labels.iter().filter(|&&l| l == 1).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::SingleClass(format!("{pos} positives, {neg} negatives")));
    }
    Ok((pos, neg))
}

/// Area under the ROC curve as the Mann–Whitney statistic (ties count ½),
/// together with the ROC curve itself.
pub fn roc_auc(scores: &[f64], labels: &[u8]) -> Result<(f64, Vec<(f64, f64)>)> {
    if scores.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            expected: labels.len(),
            found: scores.len(),
        });
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::InvalidArgument("NaN score".into()));
    }
    let (pos, neg) = class_totals(labels)?;

    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    // Twice the positive rank sum, so tied mid-ranks stay integral.
    let mut twice_rank_sum: u128 = 0;
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && scores[order[end]] == scores[order[start]] {
            end += 1;
        }
        // 1-based ranks start+1 ..= end share the mid-rank (start + 1 + end) / 2
        let tied_pos = order[start..end].iter().filter(|&&i| labels[i] == 1).count() as u128;
        twice_rank_sum += tied_pos * (start + 1 + end) as u128;
        start = end;
    }
    let twice_u = twice_rank_sum - (pos * (pos + 1)) as u128;
    let twice_pairs = 2 * (pos * neg) as u128;
    // Evaluate from whichever side is nearer, so that AUC(s) + AUC(-s) == 1.
    let auc = if 2 * twice_u <= twice_pairs {
        twice_u as f64 / twice_pairs as f64
    } else {
        1.0 - (twice_pairs - twice_u) as f64 / twice_pairs as f64
    };
    Ok((auc, roc_curve(scores, labels)?))
}

/// ROC points `(FPR, TPR)` from (0, 0) to (1, 1), one per distinct threshold.
pub fn roc_curve(scores: &[f64], labels: &[u8]) -> Result<Vec<(f64, f64)>> {
    let (pos, neg) = class_totals(labels)?;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut points = vec![(0.0, 0.0)];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = 0;
    while i < order.len() {
        let s = scores[order[i]];
        while i < order.len() && scores[order[i]] == s {
            if labels[order[i]] == 1 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        points.push((fp as f64 / neg as f64, tp as f64 / pos as f64));
    }
    Ok(points)
}

/// Trapezoidal area under a piecewise-linear curve.
pub fn trapezoid_area(points: &[(f64, f64)]) -> f64 {
    points
        .windows(2)
        .map(|w| (w[1].0 - w[0].0) * (w[0].1 + w[1].1) / 2.0)
        .sum()
}

/// Standard error of the mean with the sample standard deviation.
pub fn standard_error(values: &[f64]) -> f64 {
    sample_std(values) / (values.len() as f64).sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub method: String,
    pub region: String,
    /// Display name of the comparison, e.g. `"A vs. B"`.
    pub comparison: String,
    pub per_fold_auc: Vec<f64>,
    pub per_fold_accuracy: Vec<f64>,
    pub mean_auc: f64,
    pub sem: f64,
    pub roc_points: Vec<Vec<(f64, f64)>>,
    pub seed: u64,
}

impl EvalReport {
    fn from_folds(
        method: &str,
        region: &str,
        comparison: &str,
        seed: u64,
        folds: Vec<(f64, f64, Vec<(f64, f64)>)>,
    ) -> Self {
        let per_fold_auc: Vec<f64> = folds.iter().map(|f| f.0).collect();
        let per_fold_accuracy = folds.iter().map(|f| f.1).collect();
        let roc_points = folds.into_iter().map(|f| f.2).collect();
        Self {
            method: method.to_string(),
            region: region.to_string(),
            comparison: comparison.to_string(),
            mean_auc: mean(&per_fold_auc),
            sem: standard_error(&per_fold_auc),
            per_fold_auc,
            per_fold_accuracy,
            roc_points,
            seed,
        }
    }

    /// Whether `target` lies within `mean ± n_sem · SEM`.
    pub fn within(&self, target: f64, n_sem: f64) -> bool {
        (self.mean_auc - target).abs() <= n_sem * self.sem
    }

    /// `fold,fpr,tpr` rows.
    pub fn roc_csv(&self) -> String {
        let mut out = String::from("fold,fpr,tpr\n");
        for (fold, pts) in self.roc_points.iter().enumerate() {
            for (x, y) in pts {
                let _ = writeln!(out, "{fold},{x},{y}");
            }
        }
        out
    }
}

/// Scores and hard decisions produced for one held-out fold.
pub struct FoldOutput {
    pub scores: Vec<f64>,
    pub decisions: Vec<u8>,
}

/// Generic k-fold driver: `fit_score(train, test, fold)` trains on the
/// training rows and scores the test rows.
pub fn cross_validate_with(
    data: &SpectraSet,
    plan: &FoldPlan,
    method: &str,
    region: &str,
    mut fit_score: impl FnMut(&SpectraSet, &SpectraSet, usize) -> Result<FoldOutput>,
) -> Result<EvalReport> {
    if plan.assignments.len() != data.n_spectra() {
        return Err(Error::DimensionMismatch {
            expected: data.n_spectra(),
            found: plan.assignments.len(),
        });
    }
    let comparison = format!("{} vs. {}", data.sample_names[0], data.sample_names[1]);
    let mut folds = Vec::with_capacity(plan.k);
    for fold in 0..plan.k {
        let (tr, te) = plan.split(fold);
        let train = data.subset(&tr);
        let test = data.subset(&te);
        for (set, _) in [(&train, "train"), (&test, "test")] {
            let [zeros, ones] = set.class_counts();
            if zeros == 0 || ones == 0 {
                return Err(Error::FoldMissingClass {
                    fold,
                    missing: u8::from(ones == 0),
                });
            }
        }
        let out = fit_score(&train, &test, fold)?;
        let (auc, roc) = roc_auc(&out.scores, test.labels())?;
        let hits = out.decisions.iter().zip(test.labels()).filter(|(a, b)| a == b).count();
        folds.push((auc, hits as f64 / test.n_spectra() as f64, roc));
        log::info!("{method} {region} fold {}/{}: AUC {auc:.4}", fold + 1, plan.k);
    }
    Ok(EvalReport::from_folds(method, region, &comparison, plan.seed, folds))
}

/// k-fold ROC-AUC of one method. Inner tuning and network training in fold
/// `f` use the seed derived from stream `FOLD_MODEL_BASE + f`.
pub fn cross_validate(
    kind: MethodKind,
    cfg: &MethodConfig,
    data: &SpectraSet,
    plan: &FoldPlan,
    region: &str,
) -> Result<EvalReport> {
    cross_validate_with(data, plan, &kind.to_string(), region, |train, test, fold| {
        let seed = rng::derive_seed(plan.seed, rng::FOLD_MODEL_BASE + fold as u64);
        let model = fit_method(kind, cfg, train, seed)?;
        let scores = model.score(test)?;
        let decisions = model.classify(test)?;
        Ok(FoldOutput { scores, decisions })
    })
}

pub const SUMMARY_METHODS: [MethodKind; 5] = MethodKind::ALL;

/// Mean AUC per (comparison, region) row and method column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryTable {
    pub rows: Vec<SummaryRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub label: String,
    /// Indexed like [`SUMMARY_METHODS`].
    pub values: [Option<f64>; 5],
}

/// Two decimals, rounded from the exact binary value with exact ties going
/// to the even digit (so 0.995, stored just below, prints as `0.99`).
pub fn format_auc(v: f64) -> String {
    format!("{v:.2}")
}

pub fn summary_table(reports: &[EvalReport]) -> SummaryTable {
    let mut rows: Vec<SummaryRow> = Vec::new();
    for r in reports {
        let label = format!("{} {}", r.comparison, r.region);
        let col = SUMMARY_METHODS
            .iter()
            .position(|m| m.to_string().eq_ignore_ascii_case(&r.method));
        let Some(col) = col else { continue };
        let row = match rows.iter_mut().position(|row| row.label == label) {
            Some(i) => &mut rows[i],
            None => {
                rows.push(SummaryRow {
                    label,
                    values: [None; 5],
                });
                rows.last_mut().expect("just pushed")
            }
        };
        row.values[col] = Some(r.mean_auc);
    }
    SummaryTable { rows }
}

impl SummaryTable {
    fn cells(&self, row: &SummaryRow) -> Vec<String> {
        row.values
            .iter()
            .map(|v| v.map(format_auc).unwrap_or_default())
            .collect()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("comparison");
        for m in SUMMARY_METHODS {
            let _ = write!(out, ",{m}");
        }
        out.push('\n');
        for row in &self.rows {
            let label = if row.label.contains(',') {
                format!("\"{}\"", row.label.replace('"', "\"\""))
            } else {
                row.label.clone()
            };
            let _ = writeln!(out, "{label},{}", self.cells(row).join(","));
        }
        out
    }

    /// Aligned plain-text rendering.
    pub fn to_text(&self) -> String {
        let width = self.rows.iter().map(|r| r.label.chars().count()).max().unwrap_or(0);
        let mut out = format!("{:width$} |", "");
        for m in SUMMARY_METHODS {
            let _ = write!(out, " {:>4}", m.to_string());
        }
        out.push('\n');
        let _ = writeln!(out, "{}-+{}", "-".repeat(width), "-".repeat(5 * SUMMARY_METHODS.len()));
        for row in &self.rows {
            let _ = write!(out, "{:width$} |", row.label);
            for c in self.cells(row) {
                let _ = write!(out, " {c:>4}");
            }
            out.push('\n');
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn holdout_is_stratified_and_disjoint() {
        let labels: Vec<u8> = (0..50).map(|i| u8::from(i < 20)).collect();
        let (train, test) = holdout_split(&labels, 0.3, 9).unwrap();
        assert_eq!(train.len() + test.len(), 50);
        assert!(train.iter().all(|i| !test.contains(i)));
        assert_eq!(test.iter().filter(|&&i| labels[i] == 1).count(), 6);
        assert_eq!(test.len(), 15);
        assert_eq!(holdout_split(&labels, 0.3, 9).unwrap(), (train, test));
        assert!(holdout_split(&labels, 1.0, 9).is_err());
        assert!(holdout_split(&[1, 0, 0], 0.5, 9).is_err());
    }

    #[test]
    fn folds_of_one() {
        let plan = FoldPlan::new(10, 10, 3).unwrap();
        assert_eq!(plan.fold_sizes(), vec![1; 10]);
    }

    #[test]
    fn four_thousand_into_ten() {
        let labels: Vec<u8> = (0..4000).map(|i| u8::from(i < 2000)).collect();
        let plan = FoldPlan::stratified(&labels, 10, 1).unwrap();
        assert_eq!(plan.fold_sizes(), vec![400; 10]);
        assert_eq!(FoldPlan::new(4000, 10, 1).unwrap().fold_sizes(), vec![400; 10]);
    }

    #[test]
    fn folds_reproducible_and_validated() {
        assert_eq!(FoldPlan::new(50, 5, 9).unwrap(), FoldPlan::new(50, 5, 9).unwrap());
        assert_ne!(FoldPlan::new(50, 5, 9).unwrap(), FoldPlan::new(50, 5, 10).unwrap());
        assert!(FoldPlan::new(3, 10, 0).is_err());
        assert!(FoldPlan::new(3, 1, 0).is_err());
    }

    #[test]
    fn stratified_folds_balance_classes() {
        let labels: Vec<u8> = (0..23).map(|i| u8::from(i % 3 == 0)).collect();
        let plan = FoldPlan::stratified(&labels, 4, 5).unwrap();
        let sizes = plan.fold_sizes();
        assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
        for label in [0u8, 1] {
            let mut per = vec![0; 4];
            for (i, &f) in plan.assignments.iter().enumerate() {
                if labels[i] == label {
                    per[f] += 1;
                }
            }
            assert!(per.iter().max().unwrap() - per.iter().min().unwrap() <= 1, "{per:?}");
        }
    }

    #[test]
    fn auc_examples() {
        assert_eq!(roc_auc(&[0.9, 0.8, 0.2, 0.1], &[1, 1, 0, 0]).unwrap().0, 1.0);
        assert_eq!(roc_auc(&[0.4, 0.3, 0.2, 0.1], &[1, 0, 1, 0]).unwrap().0, 0.75);
        assert_eq!(roc_auc(&[0.3; 6], &[1, 0, 1, 0, 1, 1]).unwrap().0, 0.5);
        assert!(matches!(roc_auc(&[0.1, 0.2], &[1, 1]), Err(Error::SingleClass(_))));
    }

    #[test]
    fn roc_endpoints() {
        let pts = roc_curve(&[0.4, 0.3, 0.2, 0.1], &[1, 0, 1, 0]).unwrap();
        assert_eq!(pts.first(), Some(&(0.0, 0.0)));
        assert_eq!(pts.last(), Some(&(1.0, 1.0)));
        assert_eq!(trapezoid_area(&pts), 0.75);
    }

    #[test]
    fn sem_uses_sample_std() {
        assert_eq!(standard_error(&[0.5; 10]), 0.0);
        let v = [1.0, 3.0];
        assert!((standard_error(&v) - 2f64.sqrt() / 2f64.sqrt()).abs() < 1e-15);
    }

    fn report(method: &str, region: &str, auc: f64) -> EvalReport {
        EvalReport {
            method: method.into(),
            region: region.into(),
            comparison: "HaCaT vs. A375".into(),
            per_fold_auc: vec![auc],
            per_fold_accuracy: vec![auc],
            mean_auc: auc,
            sem: 0.0,
            roc_points: vec![],
            seed: 0,
        }
    }

    #[test]
    fn single_report_single_cell() {
        let t = summary_table(&[report("PCA", "LW", 0.93)]);
        assert_eq!(t.rows.len(), 1);
        assert_eq!(t.rows[0].values.iter().filter(|v| v.is_some()).count(), 1);
        assert_eq!(t.to_csv(), "comparison,LRA,L2D,LRP,PCA,CNN\nHaCaT vs. A375 LW,,,,0.93,\n");
    }

    #[test]
    fn table_layout() {
        let mut reports = Vec::new();
        for region in ["LW", "HW"] {
            for m in MethodKind::ALL {
                reports.push(report(&m.to_string(), region, 0.5));
            }
        }
        let t = summary_table(&reports);
        assert_eq!(t.rows.len(), 2);
        assert_eq!(t.rows[0].label, "HaCaT vs. A375 LW");
        assert!(t.rows.iter().all(|r| r.values.iter().all(Option::is_some)));
        let text = t.to_text();
        assert!(text.lines().next().unwrap().ends_with(" LRA  L2D  LRP  PCA  CNN"));
        assert_eq!(text.lines().count(), 4);
    }

    #[test]
    fn rounding_rule() {
        assert_eq!(format_auc(0.995), "0.99");
        assert_eq!(format_auc(0.125), "0.12");
        assert_eq!(format_auc(0.375), "0.38");
        assert_eq!(format_auc(1.0), "1.00");
    }
}
