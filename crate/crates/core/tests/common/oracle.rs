//! From-scratch recomputation of trust and historical values.
//!
//! Nothing here reuses the incremental state machine: every quantity is
//! re-derived from the raw stream, and trust uses the unrolled sum
//! `T_n = sum_k I_k * beta^(S_n - S_k)` with `S` the running total of
//! elapsed periods, instead of the one-step recurrence.

use std::collections::BTreeMap;

use dibrm_core::model::{InteractionEvent, ModelParams, StreakMode, UserId};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleStep {
    pub trust: f64,
    pub historical: f64,
}

fn streak_at(deltas: &[u64], k: usize, mode: StreakMode) -> u64 {
    match mode {
        StreakMode::Cumulative => k as u64 + 1,
        StreakMode::Reset => {
            // Length of the run of zero gaps ending at k, counting the event
            // that opened it.
            let mut start = k;
            while start > 0 && deltas[start] == 0 {
                start -= 1;
            }
            (k - start) as u64 + 1
        }
    }
}

/// Values after each event of one user's (sorted) stream.
pub fn user_trajectory(stream: &[&InteractionEvent], params: &ModelParams) -> Vec<OracleStep> {
    let period = params.period().seconds();
    let deltas: Vec<u64> = (0..stream.len())
        .map(|k| {
            if k == 0 {
                0
            } else {
                ((stream[k].timestamp.timestamp() - stream[k - 1].timestamp.timestamp()) / period) as u64
            }
        })
        .collect();
    let interactions: Vec<f64> = (0..stream.len())
        .map(|k| {
            let base = params.base_values()[&stream[k].kind];
            let a = streak_at(&deltas, k, params.streak_mode()) as f64;
            base + base * params.alpha() * (1.0 - 1.0 / (a + 1.0))
        })
        .collect();
    let elapsed: Vec<f64> = deltas
        .iter()
        .scan(0.0, |acc, d| {
            *acc += *d as f64;
            Some(*acc)
        })
        .collect();

    let trust: Vec<f64> = (0..stream.len())
        .map(|n| {
            (0..=n)
                .map(|k| interactions[k] * params.beta().powf(elapsed[n] - elapsed[k]))
                .sum()
        })
        .collect();
    (0..stream.len())
        .map(|n| OracleStep {
            trust: trust[n],
            historical: trust[..=n].iter().sum(),
        })
        .collect()
}

pub fn trajectories(events: &[InteractionEvent], params: &ModelParams) -> BTreeMap<UserId, Vec<OracleStep>> {
    let mut by_user: BTreeMap<UserId, Vec<&InteractionEvent>> = BTreeMap::new();
    for e in events {
        by_user.entry(e.user_id).or_default().push(e);
    }
    by_user
        .into_iter()
        .map(|(u, stream)| (u, user_trajectory(&stream, params)))
        .collect()
}

/// Agreement in double-sum form: `1 - 1/N^2 * sum_i (1/D * sum_j |R_ij - C_ij|)`
/// over row-major rank matrices.
pub fn mu_double_sum(reference: &[u32], candidate: &[u32], n: usize, d: usize) -> f64 {
    let mut outer = 0.0;
    for i in 0..n {
        let mut inner = 0.0;
        for j in 0..d {
            inner += (reference[i * d + j] as f64 - candidate[i * d + j] as f64).abs();
        }
        outer += inner / d as f64;
    }
    1.0 - outer / (n * n) as f64
}

pub fn relative_error(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / a.abs().max(b.abs())
    }
}
