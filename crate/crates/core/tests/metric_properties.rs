mod common;

use chrono::NaiveDate;
use proptest::prelude::*;

use common::oracle::mu_double_sum;
use dibrm_core::compare::{mu_metric, Which};
use dibrm_core::model::UserId;
use dibrm_core::snapshot::SnapshotSeries;

fn days(d: usize) -> Vec<NaiveDate> {
    NaiveDate::from_ymd_opt(2018, 6, 1)
        .unwrap()
        .iter_days()
        .take(d)
        .collect()
}

fn users(n: usize) -> Vec<UserId> {
    (0..n as i64).map(|i| UserId(i * 3 + 1)).collect()
}

/// Random values, then ranked; rounded to integers to produce ties.
fn series_strategy(n: usize, d: usize) -> impl Strategy<Value = SnapshotSeries> {
    prop::collection::vec((-5.0f64..5.0).prop_map(|v| v.round()), n * d)
        .prop_map(move |values| SnapshotSeries::from_values(users(n), days(d), values).unwrap())
}

fn pair_strategy() -> impl Strategy<Value = (SnapshotSeries, SnapshotSeries)> {
    (1usize..12, 1usize..10).prop_flat_map(|(n, d)| (series_strategy(n, d), series_strategy(n, d)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn bounds_symmetry_and_decomposition((a, b) in pair_strategy()) {
        let n = a.n_users();
        let ab = mu_metric(&a, &b, Which::Reputation).unwrap();
        let ba = mu_metric(&b, &a, Which::Reputation).unwrap();
        prop_assert!(ab.mu >= 1.0 / n as f64 - 1e-12);
        prop_assert!(ab.mu <= 1.0);
        prop_assert_eq!(ab.mu, ba.mu);
        prop_assert_eq!(ab.mu == 1.0, a.ranks() == b.ranks());
        let double = mu_double_sum(a.ranks(), b.ranks(), n, a.n_days());
        prop_assert!((double - ab.mu).abs() <= 1e-12 * double.abs().max(1.0));
        let mean = ab.per_user_mu.iter().sum::<f64>() / n as f64;
        prop_assert_eq!(mean, ab.mu);
    }

    #[test]
    fn increasing_transform_of_a_column_keeps_mu(
        (a, b) in pair_strategy(),
        col in 0usize..10,
        scale in 0.1f64..10.0,
        shift in -100.0f64..100.0,
    ) {
        let (n, d) = (a.n_users(), a.n_days());
        let col = col % d;
        let mut values = a.values().to_vec();
        for i in 0..n {
            let v = values[i * d + col];
            values[i * d + col] = (scale * v + shift).exp().min(1e300);
        }
        let transformed = SnapshotSeries::from_values(a.users().to_vec(), a.days().to_vec(), values).unwrap();
        prop_assert_eq!(transformed.ranks(), a.ranks());
        let before = mu_metric(&a, &b, Which::Historical).unwrap();
        let after = mu_metric(&transformed, &b, Which::Historical).unwrap();
        prop_assert_eq!(before.mu, after.mu);
    }
}

#[test]
fn hand_built_matrices() {
    let one_day = days(1);
    let a = SnapshotSeries::from_parts(users(2), one_day.clone(), vec![2.0, 1.0], vec![1, 2]).unwrap();
    let b = SnapshotSeries::from_parts(users(2), one_day, vec![1.0, 2.0], vec![2, 1]).unwrap();
    assert_eq!(mu_metric(&a, &a, Which::Reputation).unwrap().mu, 1.0);
    assert_eq!(mu_metric(&a, &b, Which::Reputation).unwrap().mu, 0.5);
    assert_eq!(mu_double_sum(a.ranks(), b.ranks(), 2, 1), 0.5);
}
