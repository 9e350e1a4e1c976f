//! Pointwise parameter monotonicity of the trust trajectory.

mod common;

use proptest::prelude::*;

use common::streams::stream_strategy;
use dibrm_core::model::{InteractionEvent, ModelParams, StreakMode, UserId, UserTrustState};
use std::collections::BTreeMap;

fn params(alpha: f64, beta: f64, ta_days: f64, mode: StreakMode) -> ModelParams {
    ModelParams::new(
        alpha,
        beta,
        ta_days,
        [("comment".to_string(), 1.0), ("post".to_string(), 4.0)].into(),
        mode,
    )
    .unwrap()
}

fn trust_trajectory(events: &[InteractionEvent], p: &ModelParams) -> Vec<f64> {
    let mut states: BTreeMap<UserId, UserTrustState> = BTreeMap::new();
    events
        .iter()
        .map(|e| {
            let s = states
                .entry(e.user_id)
                .or_insert_with(|| UserTrustState::new(e.user_id));
            *s = s.process(e, p).unwrap();
            s.trust
        })
        .collect()
}

fn mode_strategy() -> impl Strategy<Value = StreakMode> {
    prop_oneof![Just(StreakMode::Reset), Just(StreakMode::Cumulative)]
}

fn ordered(a: f64, b: f64) -> (f64, f64) {
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn beta(events in stream_strategy(60, 3), b1 in 0.0f64..=1.0, b2 in 0.0f64..=1.0,
            alpha in 0.0f64..8.0, ta in 0.5f64..8.0, mode in mode_strategy()) {
        let (lo, hi) = ordered(b1, b2);
        let a = trust_trajectory(&events, &params(alpha, lo, ta, mode));
        let b = trust_trajectory(&events, &params(alpha, hi, ta, mode));
        prop_assert!(a.iter().zip(&b).all(|(x, y)| x <= y));
    }

    #[test]
    fn alpha(events in stream_strategy(60, 3), a1 in 0.0f64..8.0, a2 in 0.0f64..8.0,
             beta in 0.0f64..=1.0, ta in 0.5f64..8.0, mode in mode_strategy()) {
        let (lo, hi) = ordered(a1, a2);
        let a = trust_trajectory(&events, &params(lo, beta, ta, mode));
        let b = trust_trajectory(&events, &params(hi, beta, ta, mode));
        prop_assert!(a.iter().zip(&b).all(|(x, y)| x <= y));
    }

    #[test]
    fn activity_period(events in stream_strategy(60, 3), t1 in 0.1f64..10.0, t2 in 0.1f64..10.0,
                       alpha in 0.0f64..8.0, beta in 0.0f64..=1.0, mode in mode_strategy()) {
        let (lo, hi) = ordered(t1, t2);
        let a = trust_trajectory(&events, &params(alpha, beta, lo, mode));
        let b = trust_trajectory(&events, &params(alpha, beta, hi, mode));
        prop_assert!(a.iter().zip(&b).all(|(x, y)| x <= y));
    }
}
