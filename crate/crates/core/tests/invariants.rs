//! Property tests for the evaluation and explanation helpers.

use proptest::prelude::*;
use raman_core::eval::{roc_auc, FoldPlan};
use raman_core::explain::ecdf_values;

/// Scores drawn from a small grid so ties are common, labels with both classes.
fn scored_labels() -> impl Strategy<Value = (Vec<f64>, Vec<u8>)> {
    (4usize..60).prop_flat_map(|n| {
        (
            prop::collection::vec((0i32..12).prop_map(f64::from), n),
            prop::collection::vec(0u8..2, n),
        )
            .prop_filter("both classes", |(_, y)| y.contains(&0) && y.contains(&1))
    })
}

/// Pairwise definition: P(score_pos > score_neg) + ½ P(tie).
fn brute_auc(s: &[f64], y: &[u8]) -> f64 {
    let (mut num, mut pairs) = (0.0, 0.0);
    for i in 0..s.len() {
        for j in 0..s.len() {
            if y[i] == 1 && y[j] == 0 {
                pairs += 1.0;
                num += if s[i] > s[j] {
                    1.0
                } else if s[i] == s[j] {
                    0.5
                } else {
                    0.0
                };
            }
        }
    }
    num / pairs
}

proptest! {
    #[test]
    fn auc_matches_pair_count((s, y) in scored_labels()) {
        let (auc, _) = roc_auc(&s, &y).unwrap();
        prop_assert!((auc - brute_auc(&s, &y)).abs() < 1e-12);
    }

    #[test]
    fn negated_scores_complement((s, y) in scored_labels()) {
        let neg: Vec<f64> = s.iter().map(|v| -v).collect();
        let (a, _) = roc_auc(&s, &y).unwrap();
        let (b, _) = roc_auc(&neg, &y).unwrap();
        prop_assert_eq!(a + b, 1.0);
    }

    #[test]
    fn monotone_transform_keeps_auc((s, y) in scored_labels()) {
        let t: Vec<f64> = s.iter().map(|v| (0.3 * v).exp() * 7.0 - 2.0).collect();
        let (a, _) = roc_auc(&s, &y).unwrap();
        let (b, _) = roc_auc(&t, &y).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn roc_curve_is_a_staircase((s, y) in scored_labels()) {
        let (_, curve) = roc_auc(&s, &y).unwrap();
        prop_assert_eq!(curve[0], (0.0, 0.0));
        prop_assert_eq!(*curve.last().unwrap(), (1.0, 1.0));
        for w in curve.windows(2) {
            prop_assert!(w[1].0 >= w[0].0 && w[1].1 >= w[0].1);
        }
    }

    #[test]
    fn folds_partition_rows(n in 10usize..200, k in 2usize..10, seed in any::<u64>()) {
        let plan = FoldPlan::new(n, k, seed).unwrap();
        let sizes = plan.fold_sizes();
        prop_assert_eq!(sizes.iter().sum::<usize>(), n);
        prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
        let mut seen = vec![0; n];
        for f in 0..k {
            let (train, test) = plan.split(f);
            prop_assert_eq!(train.len() + test.len(), n);
            for i in test {
                seen[i] += 1;
            }
        }
        prop_assert!(seen.iter().all(|&c| c == 1));
        prop_assert_eq!(plan, FoldPlan::new(n, k, seed).unwrap());
    }

    #[test]
    fn stratified_folds_balance_classes(
        labels in prop::collection::vec(0u8..2, 20..200),
        k in 2usize..10,
        seed in any::<u64>(),
    ) {
        let plan = FoldPlan::stratified(&labels, k, seed).unwrap();
        for class in [0u8, 1] {
            let mut per_fold = vec![0usize; k];
            for (i, &f) in plan.assignments.iter().enumerate() {
                if labels[i] == class {
                    per_fold[f] += 1;
                }
            }
            prop_assert!(per_fold.iter().max().unwrap() - per_fold.iter().min().unwrap() <= 1);
        }
        let sizes = plan.fold_sizes();
        prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
    }

    #[test]
    fn ecdf_is_rank_over_count(values in prop::collection::vec((0i32..20).prop_map(f64::from), 1..80)) {
        let e = ecdf_values(&values);
        let m = values.len() as f64;
        for (i, &v) in values.iter().enumerate() {
            let below = values.iter().filter(|&&w| w < v).count() as f64;
            let equal = values.iter().filter(|&&w| w == v).count() as f64;
            // average of the tied ranks below+1 ..= below+equal
            let expected = (below + (equal + 1.0) / 2.0) / m;
            prop_assert!((e[i] - expected).abs() < 1e-12);
            prop_assert!(e[i] > 0.0 && e[i] <= 1.0);
        }
    }
}
