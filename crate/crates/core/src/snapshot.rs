//! Per-user, per-day value matrices and their daily rank places.

use std::collections::{BTreeMap, HashSet};
use std::io::{Read, Write};

use chrono::{Days, NaiveDate, NaiveTime};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{InteractionEvent, Timestamp, UserId};

pub const SNAPSHOT_HEADERS: [&str; 4] = ["UserId", "Day", "Value", "Rank"];
pub const DAY_FORMAT: &str = "%Y-%m-%d";

#[derive(Debug, Error)]
pub enum SeriesError {
    #[error("empty user universe")]
    EmptyUniverse,
    #[error("day range is empty: {first} is after {last}")]
    EmptyDayRange { first: NaiveDate, last: NaiveDate },
    #[error("duplicate user {0} in universe")]
    DuplicateUser(UserId),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("non-finite value for user {user} on {day}")]
    NonFinite { user: UserId, day: NaiveDate },
    #[error("ranks on {day} are not a permutation of 1..={n}")]
    InvalidRanks { day: NaiveDate, n: usize },
    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// Inclusive range of UTC calendar days.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DayRange {
    first: NaiveDate,
    last: NaiveDate,
}

impl DayRange {
    pub fn new(first: NaiveDate, last: NaiveDate) -> Result<Self, SeriesError> {
        if first > last {
            return Err(SeriesError::EmptyDayRange { first, last });
        }
        Ok(DayRange { first, last })
    }

    /// First to last event date; `None` for an empty stream.
    pub fn spanning(events: &[InteractionEvent]) -> Option<Self> {
        let first = events.iter().map(|e| e.timestamp).min()?.date_naive();
        let last = events.iter().map(|e| e.timestamp).max()?.date_naive();
        Some(DayRange { first, last })
    }

    pub fn first(&self) -> NaiveDate {
        self.first
    }

    pub fn last(&self) -> NaiveDate {
        self.last
    }

    pub fn len(&self) -> usize {
        (self.last - self.first).num_days() as usize + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn days(&self) -> Vec<NaiveDate> {
        self.first.iter_days().take(self.len()).collect()
    }
}

/// Last second that still belongs to `day`. Snapshots are taken here.
pub fn end_of_day(day: NaiveDate) -> Timestamp {
    day.and_time(NaiveTime::from_hms_opt(23, 59, 59).expect("valid time"))
        .and_utc()
}

/// First instant of the following day.
pub fn next_midnight(day: NaiveDate) -> Timestamp {
    day.checked_add_days(Days::new(1))
        .expect("date in range")
        .and_time(NaiveTime::MIN)
        .and_utc()
}

/// Sorted, deduplicated user ids appearing in `events`.
pub fn user_universe(events: &[InteractionEvent]) -> Vec<UserId> {
    let mut users: Vec<UserId> = events.iter().map(|e| e.user_id).collect();
    users.sort_unstable();
    users.dedup();
    users
}

/// Rank places of one day-column: 1 for the highest value, ties broken by
/// ascending user id.
pub fn rank_column(values: &[f64], users: &[UserId]) -> Vec<u32> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_unstable_by(|&a, &b| {
        // -0.0 and 0.0 tie.
        let by_value = if values[a] == values[b] {
            std::cmp::Ordering::Equal
        } else {
            values[b].total_cmp(&values[a])
        };
        by_value.then_with(|| users[a].cmp(&users[b]))
    });
    let mut ranks = vec![0u32; values.len()];
    for (place, idx) in order.into_iter().enumerate() {
        ranks[idx] = place as u32 + 1;
    }
    ranks
}

/// N users by D days of values with their rank places. Storage is
/// row-major: user `i`, day `j` lives at `i * D + j`.
#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotSeries {
    users: Vec<UserId>,
    days: Vec<NaiveDate>,
    values: Vec<f64>,
    ranks: Vec<u32>,
}

impl SnapshotSeries {
    /// Builds a series and assigns ranks per day.
    pub fn from_values(users: Vec<UserId>, days: Vec<NaiveDate>, values: Vec<f64>) -> Result<Self, SeriesError> {
        check_shape(&users, &days, values.len())?;
        let (n, d) = (users.len(), days.len());
        for (k, v) in values.iter().enumerate() {
            if !v.is_finite() {
                return Err(SeriesError::NonFinite {
                    user: users[k / d],
                    day: days[k % d],
                });
            }
        }
        let mut ranks = vec![0u32; n * d];
        let mut column = vec![0.0; n];
        for j in 0..d {
            for i in 0..n {
                column[i] = values[i * d + j];
            }
            for (i, r) in rank_column(&column, &users).into_iter().enumerate() {
                ranks[i * d + j] = r;
            }
        }
        Ok(SnapshotSeries {
            users,
            days,
            values,
            ranks,
        })
    }

    /// Builds a series from externally supplied ranks, checking that every
    /// day-column is a permutation of `1..=N`.
    pub fn from_parts(
        users: Vec<UserId>,
        days: Vec<NaiveDate>,
        values: Vec<f64>,
        ranks: Vec<u32>,
    ) -> Result<Self, SeriesError> {
        check_shape(&users, &days, values.len())?;
        if ranks.len() != values.len() {
            return Err(SeriesError::DimensionMismatch(format!(
                "{} ranks for {} values",
                ranks.len(),
                values.len()
            )));
        }
        let series = SnapshotSeries {
            users,
            days,
            values,
            ranks,
        };
        series.validate_ranks()?;
        Ok(series)
    }

    fn validate_ranks(&self) -> Result<(), SeriesError> {
        let (n, d) = (self.n_users(), self.n_days());
        let mut seen = vec![false; n + 1];
        for j in 0..d {
            seen.iter_mut().for_each(|s| *s = false);
            for i in 0..n {
                let r = self.ranks[i * d + j] as usize;
                if r == 0 || r > n || seen[r] {
                    return Err(SeriesError::InvalidRanks { day: self.days[j], n });
                }
                seen[r] = true;
            }
        }
        Ok(())
    }

    pub fn users(&self) -> &[UserId] {
        &self.users
    }

    pub fn days(&self) -> &[NaiveDate] {
        &self.days
    }

    pub fn n_users(&self) -> usize {
        self.users.len()
    }

    pub fn n_days(&self) -> usize {
        self.days.len()
    }

    pub fn value(&self, user: usize, day: usize) -> f64 {
        self.values[user * self.n_days() + day]
    }

    pub fn rank(&self, user: usize, day: usize) -> u32 {
        self.ranks[user * self.n_days() + day]
    }

    pub fn value_row(&self, user: usize) -> &[f64] {
        let d = self.n_days();
        &self.values[user * d..(user + 1) * d]
    }

    pub fn rank_row(&self, user: usize) -> &[u32] {
        let d = self.n_days();
        &self.ranks[user * d..(user + 1) * d]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn ranks(&self) -> &[u32] {
        &self.ranks
    }

    pub fn user_index(&self, user: UserId) -> Option<usize> {
        self.users.iter().position(|&u| u == user)
    }

    /// Writes `UserId,Day,Value,Rank`, user-major in universe order.
    /// Values use the shortest representation that round-trips.
    pub fn write_csv<W: Write>(&self, sink: W) -> Result<(), csv::Error> {
        let mut writer = csv::Writer::from_writer(sink);
        writer.write_record(SNAPSHOT_HEADERS)?;
        for (i, user) in self.users.iter().enumerate() {
            for (j, day) in self.days.iter().enumerate() {
                writer.write_record([
                    user.to_string(),
                    day.format(DAY_FORMAT).to_string(),
                    self.value(i, j).to_string(),
                    self.rank(i, j).to_string(),
                ])?;
            }
        }
        writer.flush()?;
        Ok(())
    }

    /// Reads the format produced by [`SnapshotSeries::write_csv`]. Users
    /// and days may appear in any order but the grid must be complete.
    pub fn read_csv<R: Read>(source: R) -> Result<Self, SeriesError> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_reader(source);
        let header = reader.headers()?.clone();
        let header_ok = header.len() == SNAPSHOT_HEADERS.len()
            && header
                .iter()
                .zip(SNAPSHOT_HEADERS)
                .all(|(f, e)| f.eq_ignore_ascii_case(e));
        if !header_ok {
            return Err(SeriesError::Parse {
                line: 1,
                message: format!("expected header `{}`", SNAPSHOT_HEADERS.join(",")),
            });
        }

        let mut cells: BTreeMap<(UserId, NaiveDate), (f64, u32)> = BTreeMap::new();
        for row in reader.records() {
            let row = row?;
            let line = row.position().map_or(0, |p| p.line());
            let bad = |message: String| SeriesError::Parse { line, message };
            let user: UserId = row[0].parse().map_err(|_| bad(format!("bad UserId `{}`", &row[0])))?;
            let day =
                NaiveDate::parse_from_str(&row[1], DAY_FORMAT).map_err(|_| bad(format!("bad Day `{}`", &row[1])))?;
            let value: f64 = row[2].parse().map_err(|_| bad(format!("bad Value `{}`", &row[2])))?;
            let rank: u32 = row[3].parse().map_err(|_| bad(format!("bad Rank `{}`", &row[3])))?;
            if cells.insert((user, day), (value, rank)).is_some() {
                return Err(bad(format!("duplicate cell for user {user} on {day}")));
            }
        }

        let mut users: Vec<UserId> = cells.keys().map(|(u, _)| *u).collect();
        users.dedup();
        let mut days: Vec<NaiveDate> = cells.keys().map(|(_, d)| *d).collect();
        days.sort_unstable();
        days.dedup();
        if users.len() * days.len() != cells.len() {
            return Err(SeriesError::DimensionMismatch(format!(
                "{} cells do not cover {} users x {} days",
                cells.len(),
                users.len(),
                days.len()
            )));
        }
        let (values, ranks) = cells.into_values().unzip();
        SnapshotSeries::from_parts(users, days, values, ranks)
    }

    /// Ensures `other` covers the same users and days in the same order.
    pub fn check_aligned(&self, other: &SnapshotSeries) -> Result<(), SeriesError> {
        if self.users != other.users {
            return Err(SeriesError::DimensionMismatch(format!(
                "user universes differ ({} vs {} users)",
                self.n_users(),
                other.n_users()
            )));
        }
        if self.days != other.days {
            return Err(SeriesError::DimensionMismatch(format!(
                "day ranges differ ({} vs {} days)",
                self.n_days(),
                other.n_days()
            )));
        }
        Ok(())
    }
}

fn check_shape(users: &[UserId], days: &[NaiveDate], cells: usize) -> Result<(), SeriesError> {
    if users.is_empty() {
        return Err(SeriesError::EmptyUniverse);
    }
    let mut seen = HashSet::with_capacity(users.len());
    if let Some(dup) = users.iter().find(|u| !seen.insert(**u)) {
        return Err(SeriesError::DuplicateUser(*dup));
    }
    if days.is_empty() {
        return Err(SeriesError::DimensionMismatch("no days".into()));
    }
    if cells != users.len() * days.len() {
        return Err(SeriesError::DimensionMismatch(format!(
            "{} values for {} users x {} days",
            cells,
            users.len(),
            days.len()
        )));
    }
    Ok(())
}
