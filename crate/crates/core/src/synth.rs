//! Seeded synthetic interaction streams.
//!
//! Randomness comes from ChaCha8 keyed by the profile seed (little-endian
//! u64 in the first 8 key bytes, the rest zero, stream 0). Uniform reals are
//! `(next_u64 >> 11) * 2^-53`. Each event consumes three draws in order:
//! jitter, kind, vote. Any ChaCha8 implementation reproduces the streams.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use chrono::Duration;
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::{CommentRecord, PostRecord, COMMENT_KIND, POST_KIND};
use crate::model::{sort_events, EventId, InteractionEvent, Timestamp, UserId, SECONDS_PER_DAY};

pub const RNG_ALGORITHM: &str = "chacha8";
pub const RNG_KEYING: &str = "key = seed as little-endian u64 followed by 24 zero bytes; stream 0";
pub const UNIFORM_RULE: &str = "(next_u64 >> 11) * 2^-53";

/// Length of an active burst.
pub const BURST_ACTIVE_DAYS: f64 = 6.0;
/// Silence between bursts; several activity periods for any t_a up to 8 days.
pub const BURST_DORMANT_DAYS: f64 = 24.0;
/// Votes are uniform integers in `VOTE_MIN..=VOTE_MAX`.
pub const VOTE_MIN: i64 = -1;
pub const VOTE_MAX: i64 = 5;

#[derive(Debug, Error, PartialEq)]
pub enum SynthError {
    #[error("invalid profile for user {user}: {reason}")]
    InvalidProfile { user: UserId, reason: String },
    #[error("event {0} cannot be written as a post or comment record")]
    NotRecordable(EventId),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Profile {
    /// Fixed inter-arrival time, jittered by up to 10%.
    Steady,
    /// Active bursts separated by long dormant stretches.
    Bursty,
    /// Steady activity for the first third of the duration, then silence.
    Churned,
}

impl Profile {
    pub const ALL: [Profile; 3] = [Profile::Steady, Profile::Bursty, Profile::Churned];

    pub fn as_str(self) -> &'static str {
        match self {
            Profile::Steady => "steady",
            Profile::Bursty => "bursty",
            Profile::Churned => "churned",
        }
    }
}

impl fmt::Display for Profile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Profile {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "steady" => Ok(Profile::Steady),
            "bursty" => Ok(Profile::Bursty),
            "churned" => Ok(Profile::Churned),
            other => Err(format!("unknown profile `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileSpec {
    pub profile: Profile,
    /// Events per active day.
    pub rate: f64,
    pub duration_days: f64,
    pub kinds_mix: BTreeMap<String, f64>,
    pub seed: u64,
}

impl ProfileSpec {
    pub fn validate(&self, user: UserId) -> Result<(), SynthError> {
        let bad = |reason: String| Err(SynthError::InvalidProfile { user, reason });
        if !(self.rate.is_finite() && self.rate > 0.0) {
            return bad(format!("rate must be positive, got {}", self.rate));
        }
        if !(self.duration_days.is_finite() && self.duration_days >= 1.0) {
            return bad(format!("duration must be at least one day, got {}", self.duration_days));
        }
        if self.kinds_mix.is_empty() {
            return bad("kinds_mix is empty".into());
        }
        if self.kinds_mix.values().any(|p| !(p.is_finite() && *p >= 0.0)) {
            return bad("kind probabilities must be finite and non-negative".into());
        }
        let total: f64 = self.kinds_mix.values().sum();
        if (total - 1.0).abs() > 1e-9 {
            return bad(format!("kind probabilities sum to {total}, not 1"));
        }
        Ok(())
    }
}

struct Draws(ChaCha8Rng);

impl Draws {
    fn new(seed: u64) -> Self {
        let mut key = [0u8; 32];
        key[..8].copy_from_slice(&seed.to_le_bytes());
        Draws(ChaCha8Rng::from_seed(key))
    }

    fn uniform(&mut self) -> f64 {
        (self.0.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }
}

/// Offsets (in days) of evenly spaced slots over `[from, to)`, each
/// jittered by up to 10% of the slot width around its center.
fn jittered_slots(from: f64, to: f64, rate: f64, out: &mut Vec<f64>, draws: &mut Draws, tail: &mut Vec<(f64, f64)>) {
    let n = ((to - from) * rate).round().max(1.0) as usize;
    let width = (to - from) / n as f64;
    for k in 0..n {
        let jitter = (draws.uniform() * 2.0 - 1.0) * 0.1;
        out.push(from + (k as f64 + 0.5 + jitter) * width);
        tail.push((draws.uniform(), draws.uniform()));
    }
}

struct RawEvent {
    timestamp: Timestamp,
    user_id: UserId,
    seq: usize,
    kind: String,
    vote: i64,
}

fn pick_kind(mix: &BTreeMap<String, f64>, u: f64) -> &str {
    let mut acc = 0.0;
    for (kind, p) in mix {
        acc += p;
        if u < acc {
            return kind;
        }
    }
    mix.iter()
        .rev()
        .find(|(_, p)| **p > 0.0)
        .map(|(k, _)| k.as_str())
        .unwrap_or_else(|| mix.keys().next_back().expect("non-empty mix"))
}

fn user_events(user: UserId, spec: &ProfileSpec, start: Timestamp) -> Vec<RawEvent> {
    let mut draws = Draws::new(spec.seed);
    let mut offsets = Vec::new();
    let mut tails = Vec::new();
    match spec.profile {
        Profile::Steady => jittered_slots(0.0, spec.duration_days, spec.rate, &mut offsets, &mut draws, &mut tails),
        Profile::Churned => jittered_slots(
            0.0,
            spec.duration_days / 3.0,
            spec.rate,
            &mut offsets,
            &mut draws,
            &mut tails,
        ),
        Profile::Bursty => {
            let mut cycle = 0.0;
            while cycle < spec.duration_days {
                let end = (cycle + BURST_ACTIVE_DAYS).min(spec.duration_days);
                jittered_slots(cycle, end, spec.rate, &mut offsets, &mut draws, &mut tails);
                cycle += BURST_ACTIVE_DAYS + BURST_DORMANT_DAYS;
            }
        }
    }
    let span = (VOTE_MAX - VOTE_MIN + 1) as f64;
    offsets
        .into_iter()
        .zip(tails)
        .enumerate()
        .map(|(seq, (offset, (u_kind, u_vote)))| RawEvent {
            timestamp: start + Duration::seconds((offset * SECONDS_PER_DAY as f64).round() as i64),
            user_id: user,
            seq,
            kind: pick_kind(&spec.kinds_mix, u_kind).to_string(),
            vote: VOTE_MIN + (u_vote * span).floor() as i64,
        })
        .collect()
}

fn event_id(kind: &str, n: u64) -> EventId {
    match kind {
        POST_KIND => EventId::post(n as i64),
        COMMENT_KIND => EventId::comment(n as i64),
        other => EventId::new(format!("{other}-{n}")),
    }
}

/// Generates a sorted stream for all users. Ids are numbered per kind in
/// time order (`p1, p2, ...` for posts, `c1, ...` for comments).
pub fn generate(users: &[(UserId, ProfileSpec)], start: Timestamp) -> Result<Vec<InteractionEvent>, SynthError> {
    for (user, spec) in users {
        spec.validate(*user)?;
    }
    let mut raw: Vec<RawEvent> = users
        .iter()
        .flat_map(|(user, spec)| user_events(*user, spec, start))
        .collect();
    raw.sort_by_key(|r| (r.timestamp, r.user_id, r.seq));

    let mut counters: BTreeMap<String, u64> = BTreeMap::new();
    let mut events: Vec<InteractionEvent> = raw
        .into_iter()
        .map(|r| {
            let n = counters.entry(r.kind.clone()).or_insert(0);
            *n += 1;
            InteractionEvent {
                event_id: event_id(&r.kind, *n),
                user_id: r.user_id,
                timestamp: r.timestamp,
                kind: r.kind,
                vote: r.vote,
            }
        })
        .collect();
    sort_events(&mut events);
    Ok(events)
}

/// Users `1..=n` cycling through steady, bursty and churned profiles, with
/// per-user seeds `seed + user_id`.
pub fn mixed_population(
    n_users: usize,
    rate: f64,
    duration_days: f64,
    kinds_mix: &BTreeMap<String, f64>,
    seed: u64,
) -> Vec<(UserId, ProfileSpec)> {
    (0..n_users)
        .map(|i| {
            let user = UserId(i as i64 + 1);
            let spec = ProfileSpec {
                profile: Profile::ALL[i % 3],
                rate,
                duration_days,
                kinds_mix: kinds_mix.clone(),
                seed: seed.wrapping_add(user.0 as u64),
            };
            (user, spec)
        })
        .collect()
}

fn numeric_id(id: &EventId, prefix: char) -> Option<i64> {
    id.as_str().strip_prefix(prefix)?.parse().ok()
}

/// Splits a post/comment stream back into CSV records. Each comment is
/// attached to the most recent earlier post (0 when there is none).
pub fn to_records(events: &[InteractionEvent]) -> Result<(Vec<PostRecord>, Vec<CommentRecord>), SynthError> {
    let mut posts = Vec::new();
    let mut comments = Vec::new();
    let mut last_post = 0;
    for e in events {
        match e.kind.as_str() {
            POST_KIND => {
                let post_id =
                    numeric_id(&e.event_id, 'p').ok_or_else(|| SynthError::NotRecordable(e.event_id.clone()))?;
                last_post = post_id;
                posts.push(PostRecord {
                    post_id,
                    user_id: e.user_id,
                    creation_date: e.timestamp,
                    vote: e.vote,
                });
            }
            COMMENT_KIND => {
                let comment_id =
                    numeric_id(&e.event_id, 'c').ok_or_else(|| SynthError::NotRecordable(e.event_id.clone()))?;
                comments.push(CommentRecord {
                    comment_id,
                    user_id: e.user_id,
                    creation_date: e.timestamp,
                    post_id: last_post,
                    vote: e.vote,
                    parent_id: last_post,
                });
            }
            _ => return Err(SynthError::NotRecordable(e.event_id.clone())),
        }
    }
    Ok((posts, comments))
}
