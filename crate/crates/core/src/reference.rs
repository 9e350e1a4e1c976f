//! Reference reputations that DIBRM rankings are compared against.
//!
//! The karma model sums the votes received by a user's posts and comments,
//! split into post karma and comment karma. The points model awards
//! configurable points per event and per vote, like Q&A sites that score
//! activity.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::{COMMENT_KIND, POST_KIND};
use crate::model::{InteractionEvent, UserId};
use crate::snapshot::{DayRange, SeriesError, SnapshotSeries};

#[derive(Debug, Error)]
pub enum ScoreError {
    #[error("unmapped event kind `{0}` in scoring rule")]
    UnmappedKind(String),
    #[error("invalid scoring rule: {0}")]
    InvalidRule(String),
    #[error(transparent)]
    Series(#[from] SeriesError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScoringRule {
    #[serde(default)]
    pub points_per_vote: BTreeMap<String, f64>,
    #[serde(default)]
    pub points_per_event: BTreeMap<String, f64>,
}

impl Default for ScoringRule {
    /// +5 per vote on a post, +1 per vote on a comment, nothing per event.
    fn default() -> Self {
        ScoringRule {
            points_per_vote: [(POST_KIND.to_string(), 5.0), (COMMENT_KIND.to_string(), 1.0)].into(),
            points_per_event: [(POST_KIND.to_string(), 0.0), (COMMENT_KIND.to_string(), 0.0)].into(),
        }
    }
}

impl ScoringRule {
    pub fn validate(&self) -> Result<(), ScoreError> {
        if self.points_per_vote.is_empty() && self.points_per_event.is_empty() {
            return Err(ScoreError::InvalidRule("no event kinds configured".into()));
        }
        for (kind, v) in self.points_per_vote.iter().chain(&self.points_per_event) {
            if !v.is_finite() {
                return Err(ScoreError::InvalidRule(format!("non-finite points for `{kind}`")));
            }
        }
        Ok(())
    }

    /// Points earned by one event. Kinds absent from one of the maps score
    /// zero there, but must appear in at least one.
    pub fn score(&self, event: &InteractionEvent) -> Result<f64, ScoreError> {
        let per_vote = self.points_per_vote.get(&event.kind);
        let per_event = self.points_per_event.get(&event.kind);
        if per_vote.is_none() && per_event.is_none() {
            return Err(ScoreError::UnmappedKind(event.kind.clone()));
        }
        Ok(per_event.copied().unwrap_or(0.0) + event.vote as f64 * per_vote.copied().unwrap_or(0.0))
    }
}

/// Which reference reputation to build.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReferenceModel {
    /// Post karma plus comment karma.
    #[default]
    Karma,
    PostKarma,
    CommentKarma,
    /// Activity points under a [`ScoringRule`].
    Points,
}

impl ReferenceModel {
    pub fn as_str(self) -> &'static str {
        match self {
            ReferenceModel::Karma => "karma",
            ReferenceModel::PostKarma => "post_karma",
            ReferenceModel::CommentKarma => "comment_karma",
            ReferenceModel::Points => "points",
        }
    }
}

impl fmt::Display for ReferenceModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ReferenceModel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "karma" => Ok(ReferenceModel::Karma),
            "post_karma" => Ok(ReferenceModel::PostKarma),
            "comment_karma" => Ok(ReferenceModel::CommentKarma),
            "points" => Ok(ReferenceModel::Points),
            other => Err(format!(
                "unknown reference model `{other}` (expected karma, post_karma, comment_karma or points)"
            )),
        }
    }
}

/// Per-day cumulative sums of `contribution` over each user's events.
/// Events before the range count towards its first day; events after it
/// and events of users outside the universe are ignored.
fn cumulative_series<F>(
    events: &[InteractionEvent],
    users: &[UserId],
    range: DayRange,
    mut contribution: F,
) -> Result<SnapshotSeries, ScoreError>
where
    F: FnMut(&InteractionEvent) -> Result<Option<f64>, ScoreError>,
{
    let days = range.days();
    let d = days.len();
    let index: HashMap<UserId, usize> = users.iter().enumerate().map(|(i, u)| (*u, i)).collect();
    let mut values = vec![0.0; users.len() * d];
    for event in events {
        let Some(&i) = index.get(&event.user_id) else {
            continue;
        };
        let date = event.timestamp.date_naive();
        if date > range.last() {
            continue;
        }
        let j = (date - range.first()).num_days().max(0) as usize;
        if let Some(points) = contribution(event)? {
            values[i * d + j] += points;
        }
    }
    for row in values.chunks_mut(d.max(1)) {
        for j in 1..row.len() {
            row[j] += row[j - 1];
        }
    }
    Ok(SnapshotSeries::from_values(users.to_vec(), days, values)?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct KarmaSeries {
    pub post: SnapshotSeries,
    pub comment: SnapshotSeries,
    pub total: SnapshotSeries,
}

fn votes_of(kind: &'static str) -> impl FnMut(&InteractionEvent) -> Result<Option<f64>, ScoreError> {
    move |e| Ok((e.kind == kind).then_some(e.vote as f64))
}

/// Post, comment and total karma. Events of other kinds carry no karma.
pub fn karma_components(
    events: &[InteractionEvent],
    users: &[UserId],
    range: DayRange,
) -> Result<KarmaSeries, ScoreError> {
    let post = cumulative_series(events, users, range, votes_of(POST_KIND))?;
    let comment = cumulative_series(events, users, range, votes_of(COMMENT_KIND))?;
    let total = cumulative_series(events, users, range, |e| {
        Ok((e.kind == POST_KIND || e.kind == COMMENT_KIND).then_some(e.vote as f64))
    })?;
    Ok(KarmaSeries { post, comment, total })
}

pub fn karma_series(
    events: &[InteractionEvent],
    users: &[UserId],
    range: DayRange,
) -> Result<SnapshotSeries, ScoreError> {
    cumulative_series(events, users, range, |e| {
        Ok((e.kind == POST_KIND || e.kind == COMMENT_KIND).then_some(e.vote as f64))
    })
}

pub fn points_series(
    events: &[InteractionEvent],
    rule: &ScoringRule,
    users: &[UserId],
    range: DayRange,
) -> Result<SnapshotSeries, ScoreError> {
    rule.validate()?;
    cumulative_series(events, users, range, |e| rule.score(e).map(Some))
}

pub fn reference_series(
    events: &[InteractionEvent],
    model: ReferenceModel,
    rule: &ScoringRule,
    users: &[UserId],
    range: DayRange,
) -> Result<SnapshotSeries, ScoreError> {
    match model {
        ReferenceModel::Karma => karma_series(events, users, range),
        ReferenceModel::PostKarma => cumulative_series(events, users, range, votes_of(POST_KIND)),
        ReferenceModel::CommentKarma => cumulative_series(events, users, range, votes_of(COMMENT_KIND)),
        ReferenceModel::Points => points_series(events, rule, users, range),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{EventId, Timestamp};
    use chrono::{NaiveDate, TimeZone, Utc};

    fn day(d: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(2018, 6, d).unwrap()
    }

    fn at(d: u32, h: u32) -> Timestamp {
        Utc.with_ymd_and_hms(2018, 6, d, h, 0, 0).unwrap()
    }

    fn ev(id: &str, user: i64, ts: Timestamp, kind: &str, vote: i64) -> InteractionEvent {
        InteractionEvent {
            event_id: EventId::new(id),
            user_id: UserId(user),
            timestamp: ts,
            kind: kind.into(),
            vote,
        }
    }

    fn range() -> DayRange {
        DayRange::new(day(1), day(3)).unwrap()
    }

    #[test]
    fn silent_user_has_zero_karma() {
        let events = [ev("p1", 1, at(1, 5), "post", 4)];
        let s = karma_series(&events, &[UserId(1), UserId(2)], range()).unwrap();
        assert_eq!(s.value_row(1), &[0.0, 0.0, 0.0]);
    }

    #[test]
    fn karma_sums_post_and_comment_votes() {
        let events = [ev("p1", 1, at(2, 5), "post", 5), ev("c1", 1, at(2, 9), "comment", 3)];
        let k = karma_components(&events, &[UserId(1)], range()).unwrap();
        assert_eq!(k.total.value_row(0), &[0.0, 8.0, 8.0]);
        assert_eq!(k.post.value_row(0), &[0.0, 5.0, 5.0]);
        assert_eq!(k.comment.value_row(0), &[0.0, 3.0, 3.0]);
    }

    #[test]
    fn negative_karma_passes_through() {
        let events = [ev("p1", 1, at(1, 5), "post", -2)];
        let s = karma_series(&events, &[UserId(1)], range()).unwrap();
        assert_eq!(s.value(0, 0), -2.0);
    }

    #[test]
    fn events_outside_the_range() {
        let before = Utc.with_ymd_and_hms(2018, 5, 20, 0, 0, 0).unwrap();
        let events = [ev("p1", 1, before, "post", 2), ev("p2", 1, at(4, 0), "post", 100)];
        let s = karma_series(&events, &[UserId(1)], range()).unwrap();
        assert_eq!(s.value_row(0), &[2.0, 2.0, 2.0]);
    }

    #[test]
    fn points_examples() {
        let events = [ev("p1", 1, at(1, 5), "post", 2)];
        let zero = ScoringRule {
            points_per_vote: [("post".into(), 0.0)].into(),
            points_per_event: [("post".into(), 0.0)].into(),
        };
        let s = points_series(&events, &zero, &[UserId(1)], range()).unwrap();
        assert!(s.values().iter().all(|v| *v == 0.0));

        let five = ScoringRule {
            points_per_vote: [("post".into(), 5.0)].into(),
            points_per_event: [("post".into(), 0.0)].into(),
        };
        let s = points_series(&events, &five, &[UserId(1)], range()).unwrap();
        assert_eq!(s.value(0, 0), 10.0);

        let s = points_series(&[], &ScoringRule::default(), &[UserId(1)], range()).unwrap();
        assert!(s.values().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn points_reject_unmapped_kinds() {
        let events = [ev("e1", 1, at(1, 5), "edit", 1)];
        assert!(matches!(
            points_series(&events, &ScoringRule::default(), &[UserId(1)], range()),
            Err(ScoreError::UnmappedKind(k)) if k == "edit"
        ));
    }

    #[test]
    fn rule_from_json() {
        let rule: ScoringRule =
            serde_json::from_str(r#"{"points_per_vote": {"answer": 10}, "points_per_event": {"edit": 2}}"#).unwrap();
        assert_eq!(rule.score(&ev("a", 1, at(1, 0), "answer", 3)).unwrap(), 30.0);
        assert_eq!(rule.score(&ev("e", 1, at(1, 0), "edit", 3)).unwrap(), 2.0);
        assert!(ScoringRule {
            points_per_vote: BTreeMap::new(),
            points_per_event: BTreeMap::new()
        }
        .validate()
        .is_err());
    }

    #[test]
    fn model_names_parse() {
        assert_eq!(
            "post-karma".parse::<ReferenceModel>().unwrap(),
            ReferenceModel::PostKarma
        );
        assert!("elo".parse::<ReferenceModel>().is_err());
    }
}
