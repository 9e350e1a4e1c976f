//! Random event streams for property tests.

use chrono::{Duration, TimeZone, Utc};
use proptest::prelude::*;

use dibrm_core::model::{sort_events, EventId, InteractionEvent, Timestamp, UserId};

pub fn origin() -> Timestamp {
    Utc.with_ymd_and_hms(2018, 1, 1, 0, 0, 0).unwrap()
}

/// `(gap_seconds, user, is_post, vote)` tuples folded into a sorted stream.
/// Gaps mix same-second bursts, sub-day gaps and multi-day silences.
pub fn stream_strategy(max_len: usize, users: i64) -> impl Strategy<Value = Vec<InteractionEvent>> {
    let gap = prop_oneof![
        Just(0i64),
        0i64..86_400,
        86_400i64..(10 * 86_400),
        (10 * 86_400i64)..(60 * 86_400),
    ];
    prop::collection::vec((gap, 1..=users, any::<bool>(), -3i64..10), 1..max_len).prop_map(|raw| {
        let mut at = origin();
        let mut events: Vec<InteractionEvent> = raw
            .into_iter()
            .enumerate()
            .map(|(k, (gap, user, is_post, vote))| {
                at += Duration::seconds(gap);
                InteractionEvent {
                    event_id: if is_post {
                        EventId::post(k as i64)
                    } else {
                        EventId::comment(k as i64)
                    },
                    user_id: UserId(user),
                    timestamp: at,
                    kind: if is_post { "post" } else { "comment" }.to_string(),
                    vote,
                }
            })
            .collect();
        sort_events(&mut events);
        events
    })
}
