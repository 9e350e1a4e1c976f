//! Daily DIBRM snapshots and the rank-agreement metric.
//!
//! For N users over D days, with `R` and `C` the reference and candidate rank
//! places,
//!
//! ```text
//! mu = 1 - 1/N^2 * sum_i ( 1/D * sum_j |R_ij - C_ij| )
//! ```
//!
//! computed here as the mean over users of
//! `mu_i = 1 - (1/N) * (1/D) * sum_j |R_ij - C_ij|`. Sigma is the population
//! standard deviation of the `mu_i` (or, on request, of the per-day terms).

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{is_sorted, InteractionEvent, ModelError, ModelParams, UserId, UserTrustState};
use crate::snapshot::{end_of_day, next_midnight, DayRange, SeriesError, SnapshotSeries};

#[derive(Debug, Error)]
pub enum CompareError {
    #[error("event stream is not sorted by (timestamp, event id)")]
    Unsorted,
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Series(#[from] SeriesError),
}

/// Which DIBRM quantity is ranked.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Which {
    /// Current trust, decayed to the end of each day.
    Reputation,
    /// Running sum of trust values.
    Historical,
}

impl Which {
    pub fn as_str(self) -> &'static str {
        match self {
            Which::Reputation => "reputation",
            Which::Historical => "historical",
        }
    }
}

impl fmt::Display for Which {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Which {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "reputation" => Ok(Which::Reputation),
            "historical" => Ok(Which::Historical),
            other => Err(format!("expected `reputation` or `historical`, got `{other}`")),
        }
    }
}

/// Axis along which sigma is taken.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SigmaAxis {
    #[default]
    Users,
    Days,
}

impl SigmaAxis {
    fn is_users(&self) -> bool {
        *self == SigmaAxis::Users
    }
}

/// Both DIBRM snapshot series from a single pass over the stream.
#[derive(Debug, Clone, PartialEq)]
pub struct DibrmSnapshots {
    pub reputation: SnapshotSeries,
    pub historical: SnapshotSeries,
}

impl DibrmSnapshots {
    pub fn get(&self, which: Which) -> &SnapshotSeries {
        match which {
            Which::Reputation => &self.reputation,
            Which::Historical => &self.historical,
        }
    }
}

/// Runs the trust model over `events` (sorted) and samples every user at the
/// end of each day of `range`. Events before the range are replayed into
/// the first day; events after it are ignored.
pub fn dibrm_snapshot_pair(
    events: &[InteractionEvent],
    params: &ModelParams,
    users: &[UserId],
    range: DayRange,
) -> Result<DibrmSnapshots, CompareError> {
    if users.is_empty() {
        return Err(SeriesError::EmptyUniverse.into());
    }
    if !is_sorted(events) {
        return Err(CompareError::Unsorted);
    }
    let days = range.days();
    let d = days.len();

    let index: HashMap<UserId, usize> = users.iter().enumerate().map(|(i, u)| (*u, i)).collect();
    let mut per_user: Vec<Vec<&InteractionEvent>> = vec![Vec::new(); users.len()];
    for event in events {
        if let Some(&i) = index.get(&event.user_id) {
            per_user[i].push(event);
        }
    }

    let cutoffs: Vec<_> = days.iter().map(|day| (next_midnight(*day), end_of_day(*day))).collect();
    let mut reputation = vec![0.0; users.len() * d];
    let mut historical = vec![0.0; users.len() * d];
    reputation
        .par_chunks_mut(d)
        .zip(historical.par_chunks_mut(d))
        .zip(users.par_iter().zip(per_user.par_iter()))
        .try_for_each(|((rep_row, hist_row), (user, stream))| -> Result<(), ModelError> {
            let mut state = UserTrustState::new(*user);
            let mut next = 0;
            for (j, (cutoff, sample_at)) in cutoffs.iter().enumerate() {
                while next < stream.len() && stream[next].timestamp < *cutoff {
                    state = state.process(stream[next], params)?;
                    next += 1;
                }
                rep_row[j] = state.decayed_trust_at(*sample_at, params)?;
                hist_row[j] = state.historical;
            }
            Ok(())
        })?;

    Ok(DibrmSnapshots {
        reputation: SnapshotSeries::from_values(users.to_vec(), days.clone(), reputation)?,
        historical: SnapshotSeries::from_values(users.to_vec(), days, historical)?,
    })
}

pub fn dibrm_snapshots(
    events: &[InteractionEvent],
    params: &ModelParams,
    users: &[UserId],
    range: DayRange,
    which: Which,
) -> Result<SnapshotSeries, CompareError> {
    let pair = dibrm_snapshot_pair(events, params, users, range)?;
    Ok(match which {
        Which::Reputation => pair.reputation,
        Which::Historical => pair.historical,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgreementReport {
    pub which: Which,
    pub mu: f64,
    pub sigma: f64,
    pub n_users: usize,
    pub n_days: usize,
    pub per_user_mu: Vec<f64>,
    #[serde(default, skip_serializing_if = "SigmaAxis::is_users")]
    pub sigma_axis: SigmaAxis,
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn population_std(xs: &[f64], mean: f64) -> f64 {
    (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / xs.len() as f64).sqrt()
}

/// `1 - (1/N) * mean_j |R_ij - C_ij|` for each user `i`, over row-major
/// N x D rank matrices. No permutation check is made here.
pub fn per_user_agreement(reference: &[u32], candidate: &[u32], n_users: usize, n_days: usize) -> Vec<f64> {
    assert_eq!(reference.len(), n_users * n_days);
    assert_eq!(candidate.len(), n_users * n_days);
    let nf = n_users as f64;
    reference
        .chunks(n_days)
        .zip(candidate.chunks(n_days))
        .map(|(r, c)| {
            let total: u64 = r.iter().zip(c).map(|(a, b)| a.abs_diff(*b) as u64).sum();
            1.0 - (total as f64 / n_days as f64) / nf
        })
        .collect()
}

fn per_day_agreement(reference: &[u32], candidate: &[u32], n_users: usize, n_days: usize) -> Vec<f64> {
    let nf = n_users as f64;
    (0..n_days)
        .map(|j| {
            let total: u64 = (0..n_users)
                .map(|i| reference[i * n_days + j].abs_diff(candidate[i * n_days + j]) as u64)
                .sum();
            1.0 - total as f64 / (nf * nf)
        })
        .collect()
}

pub fn mu_metric(
    reference: &SnapshotSeries,
    candidate: &SnapshotSeries,
    which: Which,
) -> Result<AgreementReport, CompareError> {
    mu_metric_with(reference, candidate, which, SigmaAxis::Users)
}

pub fn mu_metric_with(
    reference: &SnapshotSeries,
    candidate: &SnapshotSeries,
    which: Which,
    axis: SigmaAxis,
) -> Result<AgreementReport, CompareError> {
    reference.check_aligned(candidate)?;
    let (n, d) = (reference.n_users(), reference.n_days());
    let per_user_mu = per_user_agreement(reference.ranks(), candidate.ranks(), n, d);
    let mu = mean(&per_user_mu);
    let sigma = match axis {
        SigmaAxis::Users => population_std(&per_user_mu, mu),
        SigmaAxis::Days => {
            let per_day = per_day_agreement(reference.ranks(), candidate.ranks(), n, d);
            population_std(&per_day, mean(&per_day))
        }
    };

    Ok(AgreementReport {
        which,
        mu,
        sigma,
        n_users: n,
        n_days: d,
        per_user_mu,
        sigma_axis: axis,
    })
}
