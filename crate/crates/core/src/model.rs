//! The interaction-frequency trust model.
//!
//! Every interaction contributes a basic value `I_b` (fixed per event kind)
//! plus a cumulative part that grows with the user's activity streak:
//!
//! ```text
//! I_c = I_b * alpha * (1 - 1 / (A + 1))
//! I   = I_b + I_c
//! Δ   = floor((t_n - t_{n-1}) / t_a)
//! T_n = T_{n-1} * beta^Δ + I
//! H_n = H_{n-1} + T_n
//! ```
//!
//! `T` is the current trust of a user and `H` the historical reputation
//! (running sum of every trust value the user has held).

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type Timestamp = DateTime<Utc>;

pub const SECONDS_PER_DAY: i64 = 86_400;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("non-monotonic timestamps: {current} precedes {previous}")]
    NonMonotonic { previous: Timestamp, current: Timestamp },
    #[error("unmapped event kind `{0}`")]
    UnmappedKind(String),
    #[error("invalid model parameter `{name}`: {reason}")]
    InvalidParam { name: String, reason: String },
    #[error("event of user {event_user} applied to state of user {state_user}")]
    UserMismatch { state_user: UserId, event_user: UserId },
}

fn invalid(name: &str, reason: impl Into<String>) -> ModelError {
    ModelError::InvalidParam {
        name: name.to_string(),
        reason: reason.into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct UserId(pub i64);

impl fmt::Display for UserId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

impl FromStr for UserId {
    type Err = std::num::ParseIntError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        s.trim().parse().map(UserId)
    }
}

/// Stream-unique event identifier. Ingested records are namespaced by their
/// source file (`p17` for post 17, `c17` for comment 17).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EventId(String);

impl EventId {
    pub fn new(id: impl Into<String>) -> Self {
        EventId(id.into())
    }

    pub fn post(id: i64) -> Self {
        EventId(format!("p{id}"))
    }

    pub fn comment(id: i64) -> Self {
        EventId(format!("c{id}"))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for EventId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// One timestamped user action.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InteractionEvent {
    pub event_id: EventId,
    pub user_id: UserId,
    pub timestamp: Timestamp,
    pub kind: String,
    /// Aggregate approval count of the entity. Only the reference scorers
    /// read it.
    pub vote: i64,
}

impl InteractionEvent {
    /// Canonical processing order: timestamp, then event id.
    pub fn order_key(&self) -> (Timestamp, &EventId) {
        (self.timestamp, &self.event_id)
    }
}

pub fn sort_events(events: &mut [InteractionEvent]) {
    events.sort_unstable_by(|a, b| a.order_key().cmp(&b.order_key()));
}

pub fn is_sorted(events: &[InteractionEvent]) -> bool {
    events.windows(2).all(|w| w[0].order_key() <= w[1].order_key())
}

/// What happens to the activity streak after a gap of one or more periods.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StreakMode {
    /// The streak restarts at 1.
    #[default]
    Reset,
    /// The streak counts every interaction and never restarts.
    Cumulative,
}

impl StreakMode {
    pub fn as_str(self) -> &'static str {
        match self {
            StreakMode::Reset => "reset",
            StreakMode::Cumulative => "cumulative",
        }
    }
}

impl fmt::Display for StreakMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for StreakMode {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "reset" => Ok(StreakMode::Reset),
            "cumulative" => Ok(StreakMode::Cumulative),
            other => Err(invalid(
                "streak_mode",
                format!("expected `reset` or `cumulative`, got `{other}`"),
            )),
        }
    }
}

/// Length of an activity period, held in whole seconds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ActivityPeriod(i64);

impl ActivityPeriod {
    pub fn from_seconds(seconds: i64) -> Result<Self, ModelError> {
        if seconds <= 0 {
            return Err(invalid("ta_days", "activity period must be positive"));
        }
        Ok(ActivityPeriod(seconds))
    }

    /// Fractional days are rounded to the nearest second.
    pub fn from_days(days: f64) -> Result<Self, ModelError> {
        if !days.is_finite() || days <= 0.0 {
            return Err(invalid(
                "ta_days",
                format!("must be a positive number of days, got {days}"),
            ));
        }
        let seconds = (days * SECONDS_PER_DAY as f64).round();
        if seconds < 1.0 || seconds > i64::MAX as f64 {
            return Err(invalid(
                "ta_days",
                format!("{days} days is not representable in whole seconds"),
            ));
        }
        Ok(ActivityPeriod(seconds as i64))
    }

    pub fn seconds(self) -> i64 {
        self.0
    }
}

/// Validated parameter set. Construct through [`ModelParams::new`] or the
/// `with_*` setters; deserialization goes through the same checks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawModelParams", into = "RawModelParams")]
pub struct ModelParams {
    alpha: f64,
    beta: f64,
    ta_days: f64,
    period: ActivityPeriod,
    base_values: BTreeMap<String, f64>,
    streak_mode: StreakMode,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawModelParams {
    #[serde(default = "default_alpha")]
    alpha: f64,
    #[serde(default = "default_beta")]
    beta: f64,
    #[serde(default = "default_ta_days")]
    ta_days: f64,
    #[serde(default = "default_base_values")]
    base_values: BTreeMap<String, f64>,
    #[serde(default)]
    streak_mode: StreakMode,
}

fn default_alpha() -> f64 {
    1.0
}

fn default_beta() -> f64 {
    0.9
}

fn default_ta_days() -> f64 {
    1.0
}

fn default_base_values() -> BTreeMap<String, f64> {
    [("comment".to_string(), 4.0), ("post".to_string(), 4.0)].into()
}

impl TryFrom<RawModelParams> for ModelParams {
    type Error = ModelError;

    fn try_from(raw: RawModelParams) -> Result<Self, Self::Error> {
        ModelParams::new(raw.alpha, raw.beta, raw.ta_days, raw.base_values, raw.streak_mode)
    }
}

impl From<ModelParams> for RawModelParams {
    fn from(p: ModelParams) -> Self {
        RawModelParams {
            alpha: p.alpha,
            beta: p.beta,
            ta_days: p.ta_days,
            base_values: p.base_values,
            streak_mode: p.streak_mode,
        }
    }
}

impl Default for ModelParams {
    /// alpha = 1, beta = 0.9, one-day period, `I_b = 4` for posts and
    /// comments, resetting streaks.
    fn default() -> Self {
        ModelParams::new(
            default_alpha(),
            default_beta(),
            default_ta_days(),
            default_base_values(),
            StreakMode::Reset,
        )
        .expect("defaults are valid")
    }
}

fn check_alpha(alpha: f64) -> Result<(), ModelError> {
    if alpha.is_finite() && alpha >= 0.0 {
        Ok(())
    } else {
        Err(invalid("alpha", format!("must be finite and >= 0, got {alpha}")))
    }
}

fn check_beta(beta: f64) -> Result<(), ModelError> {
    if (0.0..=1.0).contains(&beta) {
        Ok(())
    } else {
        Err(invalid("beta", format!("must lie in [0, 1], got {beta}")))
    }
}

fn check_base_value(kind: &str, value: f64) -> Result<(), ModelError> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(invalid(
            &format!("base_values.{kind}"),
            format!("must be finite and > 0, got {value}"),
        ))
    }
}

impl ModelParams {
    pub fn new(
        alpha: f64,
        beta: f64,
        ta_days: f64,
        base_values: BTreeMap<String, f64>,
        streak_mode: StreakMode,
    ) -> Result<Self, ModelError> {
        check_alpha(alpha)?;
        check_beta(beta)?;
        let period = ActivityPeriod::from_days(ta_days)?;
        if base_values.is_empty() {
            return Err(invalid("base_values", "at least one event kind is required"));
        }
        for (kind, &value) in &base_values {
            check_base_value(kind, value)?;
        }
        Ok(ModelParams {
            alpha,
            beta,
            ta_days,
            period,
            base_values,
            streak_mode,
        })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn ta_days(&self) -> f64 {
        self.ta_days
    }

    pub fn period(&self) -> ActivityPeriod {
        self.period
    }

    pub fn base_values(&self) -> &BTreeMap<String, f64> {
        &self.base_values
    }

    pub fn streak_mode(&self) -> StreakMode {
        self.streak_mode
    }

    pub fn base_value(&self, kind: &str) -> Result<f64, ModelError> {
        self.base_values
            .get(kind)
            .copied()
            .ok_or_else(|| ModelError::UnmappedKind(kind.to_string()))
    }

    pub fn with_alpha(mut self, alpha: f64) -> Result<Self, ModelError> {
        check_alpha(alpha)?;
        self.alpha = alpha;
        Ok(self)
    }

    pub fn with_beta(mut self, beta: f64) -> Result<Self, ModelError> {
        check_beta(beta)?;
        self.beta = beta;
        Ok(self)
    }

    pub fn with_ta_days(mut self, ta_days: f64) -> Result<Self, ModelError> {
        self.period = ActivityPeriod::from_days(ta_days)?;
        self.ta_days = ta_days;
        Ok(self)
    }

    pub fn with_base_value(mut self, kind: &str, value: f64) -> Result<Self, ModelError> {
        check_base_value(kind, value)?;
        self.base_values.insert(kind.to_string(), value);
        Ok(self)
    }

    /// Sets every configured kind to the same basic value.
    pub fn with_uniform_base_value(mut self, value: f64) -> Result<Self, ModelError> {
        for (kind, v) in self.base_values.iter_mut() {
            check_base_value(kind, value)?;
            *v = value;
        }
        Ok(self)
    }

    pub fn with_streak_mode(mut self, mode: StreakMode) -> Self {
        self.streak_mode = mode;
        self
    }

    /// `kind=value` pairs joined by `;`, in kind order.
    pub fn base_values_label(&self) -> String {
        self.base_values
            .iter()
            .map(|(k, v)| format!("{k}={v}"))
            .collect::<Vec<_>>()
            .join(";")
    }
}

/// Whole activity periods between two instants.
pub fn periods_elapsed(now: Timestamp, prev: Timestamp, period: ActivityPeriod) -> Result<u64, ModelError> {
    let elapsed = now.timestamp() - prev.timestamp();
    if elapsed < 0 {
        return Err(ModelError::NonMonotonic {
            previous: prev,
            current: now,
        });
    }
    Ok((elapsed / period.seconds()) as u64)
}

pub fn cumulative_value(base_value: f64, alpha: f64, streak: u64) -> f64 {
    base_value * alpha * (1.0 - 1.0 / (streak as f64 + 1.0))
}

/// `beta^delta`, saturating exponents beyond `i32::MAX` (where the result is
/// already 0 for `beta < 1` and 1 for `beta = 1`).
pub fn decay_factor(beta: f64, delta: u64) -> f64 {
    beta.powi(delta.min(i32::MAX as u64) as i32)
}

pub fn update_trust(prev_trust: f64, delta: u64, beta: f64, interaction: f64) -> f64 {
    prev_trust * decay_factor(beta, delta) + interaction
}

pub fn update_streak(prev: u64, delta: u64, mode: StreakMode) -> u64 {
    match mode {
        StreakMode::Reset if delta > 0 => 1,
        _ => prev + 1,
    }
}

/// Per-user incremental state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UserTrustState {
    pub user_id: UserId,
    pub last_timestamp: Option<Timestamp>,
    pub activity_streak: u64,
    pub trust: f64,
    pub historical: f64,
    pub event_count: u64,
}

/// Intermediate quantities of one update, for tracing and documentation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UpdateTrace {
    pub delta: u64,
    pub streak: u64,
    pub base: f64,
    pub cumulative: f64,
    pub interaction: f64,
    pub trust: f64,
    pub historical: f64,
}

impl UserTrustState {
    pub fn new(user_id: UserId) -> Self {
        UserTrustState {
            user_id,
            last_timestamp: None,
            activity_streak: 0,
            trust: 0.0,
            historical: 0.0,
            event_count: 0,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.event_count == 0
    }

    /// Applies one event and returns the new state together with the
    /// intermediate values of the update.
    pub fn step(
        &self,
        event: &InteractionEvent,
        params: &ModelParams,
    ) -> Result<(UserTrustState, UpdateTrace), ModelError> {
        if event.user_id != self.user_id {
            return Err(ModelError::UserMismatch {
                state_user: self.user_id,
                event_user: event.user_id,
            });
        }
        let base = params.base_value(&event.kind)?;
        let delta = match self.last_timestamp {
            Some(prev) => periods_elapsed(event.timestamp, prev, params.period())?,
            None => 0,
        };
        let streak = update_streak(self.activity_streak, delta, params.streak_mode());
        let cumulative = cumulative_value(base, params.alpha(), streak);
        let interaction = base + cumulative;
        let trust = update_trust(self.trust, delta, params.beta(), interaction);
        let historical = self.historical + trust;
        let next = UserTrustState {
            user_id: self.user_id,
            last_timestamp: Some(event.timestamp),
            activity_streak: streak,
            trust,
            historical,
            event_count: self.event_count + 1,
        };
        let trace = UpdateTrace {
            delta,
            streak,
            base,
            cumulative,
            interaction,
            trust,
            historical,
        };
        Ok((next, trace))
    }

    pub fn process(&self, event: &InteractionEvent, params: &ModelParams) -> Result<UserTrustState, ModelError> {
        self.step(event, params).map(|(state, _)| state)
    }

    /// Trust as seen at `at`, decayed over the whole periods since the last
    /// interaction. The state itself is untouched.
    pub fn decayed_trust_at(&self, at: Timestamp, params: &ModelParams) -> Result<f64, ModelError> {
        match self.last_timestamp {
            None => Ok(0.0),
            Some(last) => {
                let delta = periods_elapsed(at, last, params.period())?;
                Ok(self.trust * decay_factor(params.beta(), delta))
            }
        }
    }
}

pub fn process_event(
    state: &UserTrustState,
    event: &InteractionEvent,
    params: &ModelParams,
) -> Result<UserTrustState, ModelError> {
    state.process(event, params)
}

pub fn decayed_trust_at(state: &UserTrustState, at: Timestamp, params: &ModelParams) -> Result<f64, ModelError> {
    state.decayed_trust_at(at, params)
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::{Duration, TimeZone};

    fn t0() -> Timestamp {
        Utc.with_ymd_and_hms(2018, 6, 1, 0, 0, 0).unwrap()
    }

    fn days(d: f64) -> ActivityPeriod {
        ActivityPeriod::from_days(d).unwrap()
    }

    fn event(user: i64, id: &str, at: Timestamp, kind: &str) -> InteractionEvent {
        InteractionEvent {
            event_id: EventId::new(id),
            user_id: UserId(user),
            timestamp: at,
            kind: kind.into(),
            vote: 0,
        }
    }

    fn params(alpha: f64, beta: f64) -> ModelParams {
        ModelParams::new(alpha, beta, 1.0, [("post".into(), 4.0)].into(), StreakMode::Reset).unwrap()
    }

    #[test]
    fn periods_elapsed_examples() {
        assert_eq!(periods_elapsed(t0(), t0(), days(1.0)).unwrap(), 0);
        assert_eq!(periods_elapsed(t0() + Duration::days(5), t0(), days(2.0)).unwrap(), 2);
        assert_eq!(periods_elapsed(t0() + Duration::hours(23), t0(), days(1.0)).unwrap(), 0);
    }

    #[test]
    fn periods_elapsed_rejects_time_travel() {
        let err = periods_elapsed(t0(), t0() + Duration::seconds(1), days(1.0)).unwrap_err();
        assert!(err.to_string().contains("non-monotonic timestamps"));
    }

    #[test]
    fn fractional_period_rounds_to_seconds() {
        assert_eq!(days(0.5).seconds(), 43_200);
        assert!(ActivityPeriod::from_days(0.0).is_err());
        assert!(ActivityPeriod::from_days(f64::NAN).is_err());
        assert!(ActivityPeriod::from_days(1e-7).is_err());
    }

    #[test]
    fn cumulative_value_examples() {
        assert_eq!(cumulative_value(4.0, 2.0, 0), 0.0);
        assert_eq!(cumulative_value(4.0, 2.0, 1), 4.0);
        assert!((cumulative_value(10.0, 1.0, 999_999) - 10.0).abs() < 1e-4);
    }

    #[test]
    fn update_trust_examples() {
        assert_eq!(update_trust(0.0, 17, 0.9, 4.0), 4.0);
        assert_eq!(update_trust(10.0, 0, 0.9, 4.0), 14.0);
        assert_eq!(update_trust(10.0, 2, 0.5, 4.0), 6.5);
        assert_eq!(update_trust(10.0, 1_000, 1.0, 4.0), 14.0);
        assert_eq!(update_trust(10.0, u64::MAX, 0.5, 4.0), 4.0);
    }

    #[test]
    fn update_streak_examples() {
        assert_eq!(update_streak(0, 0, StreakMode::Reset), 1);
        assert_eq!(update_streak(5, 0, StreakMode::Reset), 6);
        assert_eq!(update_streak(5, 3, StreakMode::Reset), 1);
        assert_eq!(update_streak(5, 3, StreakMode::Cumulative), 6);
    }

    #[test]
    fn first_event_of_a_user() {
        let state = UserTrustState::new(UserId(1));
        let next = state.process(&event(1, "p1", t0(), "post"), &params(1.0, 0.3)).unwrap();
        assert_eq!(next.trust, 6.0);
        assert_eq!(next.historical, 6.0);
        assert_eq!(next.activity_streak, 1);
        assert_eq!(next.event_count, 1);
        assert_eq!(next.last_timestamp, Some(t0()));
    }

    #[test]
    fn alpha_zero_is_plain_decayed_accumulation() {
        let p = params(0.0, 0.5);
        let mut state = UserTrustState::new(UserId(1));
        let mut expected = 0.0;
        for (i, gap_days) in [0, 1, 0, 3, 2].iter().enumerate() {
            let at = t0() + Duration::days([0, 1, 1, 4, 6][i]);
            let (next, trace) = state.step(&event(1, &format!("p{i}"), at, "post"), &p).unwrap();
            assert_eq!(trace.cumulative, 0.0);
            expected = expected * 0.5f64.powi(if i == 0 { 0 } else { *gap_days }) + 4.0;
            assert_eq!(next.trust, expected);
            state = next;
        }
    }

    #[test]
    fn identical_timestamps_extend_the_streak() {
        let p = params(1.0, 0.5);
        let s1 = UserTrustState::new(UserId(1))
            .process(&event(1, "p1", t0(), "post"), &p)
            .unwrap();
        let (s2, trace) = s1.step(&event(1, "p2", t0(), "post"), &p).unwrap();
        assert_eq!(trace.delta, 0);
        assert_eq!(s2.activity_streak, 2);
    }

    #[test]
    fn errors_on_unknown_kind_and_disorder() {
        let p = params(1.0, 0.5);
        let s0 = UserTrustState::new(UserId(1));
        let err = s0.process(&event(1, "x", t0(), "edit"), &p).unwrap_err();
        assert!(err.to_string().contains("unmapped event kind"));

        let s1 = s0.process(&event(1, "p1", t0(), "post"), &p).unwrap();
        let err = s1
            .process(&event(1, "p0", t0() - Duration::seconds(1), "post"), &p)
            .unwrap_err();
        assert!(err.to_string().contains("non-monotonic timestamps"));

        assert!(matches!(
            s0.process(&event(2, "p1", t0(), "post"), &p),
            Err(ModelError::UserMismatch { .. })
        ));
    }

    #[test]
    fn decayed_trust_examples() {
        let p = ModelParams::new(1.0, 0.5, 2.0, [("post".into(), 4.0)].into(), StreakMode::Reset).unwrap();
        let empty = UserTrustState::new(UserId(1));
        assert_eq!(empty.decayed_trust_at(t0(), &p).unwrap(), 0.0);

        let state = UserTrustState {
            user_id: UserId(1),
            last_timestamp: Some(t0()),
            activity_streak: 1,
            trust: 8.0,
            historical: 8.0,
            event_count: 1,
        };
        assert_eq!(state.decayed_trust_at(t0() + Duration::days(4), &p).unwrap(), 2.0);
        let no_forgetting = p.clone().with_beta(1.0).unwrap();
        assert_eq!(
            state
                .decayed_trust_at(t0() + Duration::days(400), &no_forgetting)
                .unwrap(),
            8.0
        );
        assert!(state.decayed_trust_at(t0() - Duration::seconds(1), &p).is_err());
    }

    #[test]
    fn params_validation() {
        let base: BTreeMap<String, f64> = [("post".into(), 4.0)].into();
        assert!(ModelParams::new(-0.1, 0.5, 1.0, base.clone(), StreakMode::Reset).is_err());
        assert!(ModelParams::new(1.0, 1.01, 1.0, base.clone(), StreakMode::Reset).is_err());
        assert!(ModelParams::new(1.0, 1.0, 1.0, base.clone(), StreakMode::Reset).is_ok());
        assert!(ModelParams::new(1.0, 0.5, 0.0, base, StreakMode::Reset).is_err());
        assert!(ModelParams::new(1.0, 0.5, 1.0, [("post".into(), 0.0)].into(), StreakMode::Reset).is_err());
        assert!(ModelParams::new(1.0, 0.5, 1.0, BTreeMap::new(), StreakMode::Reset).is_err());
    }

    #[test]
    fn params_json_goes_through_validation() {
        let p: ModelParams = serde_json::from_str(r#"{"alpha": 1.4, "beta": 1.0, "ta_days": 2}"#).unwrap();
        assert_eq!(p.alpha(), 1.4);
        assert_eq!(p.period().seconds(), 2 * SECONDS_PER_DAY);
        assert_eq!(p.base_value("post").unwrap(), 4.0);
        assert!(serde_json::from_str::<ModelParams>(r#"{"beta": 2}"#).is_err());
        let back: ModelParams = serde_json::from_str(&serde_json::to_string(&p).unwrap()).unwrap();
        assert_eq!(back, p);
    }

    #[test]
    fn streak_mode_parses() {
        assert_eq!("Reset".parse::<StreakMode>().unwrap(), StreakMode::Reset);
        assert_eq!("cumulative".parse::<StreakMode>().unwrap(), StreakMode::Cumulative);
        assert!("sometimes".parse::<StreakMode>().is_err());
    }
}
