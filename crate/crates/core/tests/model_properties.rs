mod common;

use std::collections::BTreeMap;

use chrono::{Duration, TimeZone, Utc};
use proptest::prelude::*;

use common::oracle::{relative_error, trajectories};
use common::streams::stream_strategy;
use dibrm_core::model::{InteractionEvent, ModelParams, StreakMode, UserId, UserTrustState};
use dibrm_core::synth::{generate, mixed_population};

fn params(alpha: f64, beta: f64, ta_days: f64, mode: StreakMode) -> ModelParams {
    ModelParams::new(
        alpha,
        beta,
        ta_days,
        [("comment".to_string(), 1.5), ("post".to_string(), 4.0)].into(),
        mode,
    )
    .unwrap()
}

/// Folds the state machine and returns `(trust, historical)` after every
/// event, grouped per user.
fn fold(events: &[InteractionEvent], p: &ModelParams) -> BTreeMap<UserId, Vec<(f64, f64)>> {
    let mut states: BTreeMap<UserId, UserTrustState> = BTreeMap::new();
    let mut out: BTreeMap<UserId, Vec<(f64, f64)>> = BTreeMap::new();
    for e in events {
        let state = states
            .entry(e.user_id)
            .or_insert_with(|| UserTrustState::new(e.user_id));
        *state = state.process(e, p).unwrap();
        out.entry(e.user_id).or_default().push((state.trust, state.historical));
    }
    out
}

fn mode_strategy() -> impl Strategy<Value = StreakMode> {
    prop_oneof![Just(StreakMode::Reset), Just(StreakMode::Cumulative)]
}

proptest! {
    #[test]
    fn incremental_matches_from_scratch(
        events in stream_strategy(120, 4),
        alpha in 0.0f64..8.0,
        beta in 0.0f64..=1.0,
        ta_days in 0.25f64..8.0,
        mode in mode_strategy(),
    ) {
        let p = params(alpha, beta, ta_days, mode);
        let oracle = trajectories(&events, &p);
        for (user, steps) in fold(&events, &p) {
            for ((trust, hist), expected) in steps.iter().zip(&oracle[&user]) {
                prop_assert!(relative_error(*trust, expected.trust) <= 1e-9);
                prop_assert!(relative_error(*hist, expected.historical) <= 1e-9);
            }
        }
    }

    #[test]
    fn interaction_and_trust_bounds(
        events in stream_strategy(80, 3),
        alpha in 0.0f64..8.0,
        beta in 0.0f64..=1.0,
        mode in mode_strategy(),
    ) {
        let p = params(alpha, beta, 1.0, mode);
        let mut states: BTreeMap<UserId, UserTrustState> = BTreeMap::new();
        for e in &events {
            let state = states.entry(e.user_id).or_insert_with(|| UserTrustState::new(e.user_id));
            let (next, trace) = state.step(e, &p).unwrap();
            let base = trace.base;
            prop_assert!(base <= trace.interaction);
            if alpha > 0.0 {
                prop_assert!(trace.interaction < base * (1.0 + alpha));
            }
            prop_assert!(next.trust >= trace.interaction);
            prop_assert!(next.historical >= state.historical);
            prop_assert!(next.historical >= next.trust);
            *state = next;
        }
    }

    #[test]
    fn processing_is_deterministic(events in stream_strategy(40, 2), beta in 0.0f64..=1.0) {
        let p = params(1.0, beta, 1.0, StreakMode::Reset);
        let a = fold(&events, &p);
        let b = fold(&events, &p);
        for (user, steps) in &a {
            for (x, y) in steps.iter().zip(&b[user]) {
                prop_assert_eq!(x.0.to_bits(), y.0.to_bits());
                prop_assert_eq!(x.1.to_bits(), y.1.to_bits());
            }
        }
    }
}

#[test]
fn oracle_agrees_on_generated_streams() {
    let mix = [("comment".to_string(), 0.6), ("post".to_string(), 0.4)].into();
    let start = Utc.with_ymd_and_hms(2017, 3, 1, 0, 0, 0).unwrap();
    for seed in 0..10u64 {
        let events = generate(&mixed_population(12, 3.0, 90.0, &mix, seed), start).unwrap();
        for mode in [StreakMode::Reset, StreakMode::Cumulative] {
            let p = params(1.4, 0.9, 2.0, mode);
            let oracle = trajectories(&events, &p);
            for (user, steps) in fold(&events, &p) {
                for ((trust, hist), expected) in steps.iter().zip(&oracle[&user]) {
                    assert!(relative_error(*trust, expected.trust) <= 1e-9);
                    assert!(relative_error(*hist, expected.historical) <= 1e-9);
                }
            }
        }
    }
}

#[test]
fn no_forgetting_single_kind_grows_strictly() {
    let p = ModelParams::new(0.5, 1.0, 1.0, [("post".to_string(), 2.0)].into(), StreakMode::Reset).unwrap();
    let t0 = Utc.with_ymd_and_hms(2018, 1, 1, 0, 0, 0).unwrap();
    let mut state = UserTrustState::new(UserId(1));
    let mut last = 0.0;
    let mut at = t0;
    for k in 0..200i64 {
        at += Duration::hours(k * k % 97);
        let e = InteractionEvent {
            event_id: dibrm_core::EventId::post(k),
            user_id: UserId(1),
            timestamp: at,
            kind: "post".into(),
            vote: 0,
        };
        state = state.process(&e, &p).unwrap();
        assert!(state.trust > last);
        last = state.trust;
    }
}
