//! Reputation from interaction frequency alone.
//!
//! The crate computes DIBRM trust scores from timestamped interaction logs,
//! builds reference reputations (vote karma, activity points), and measures
//! how closely the daily rank places of two reputation systems agree.
//!
//! Pipeline: [`ingest`] parses post/comment CSV exports into a sorted event
//! stream; [`model`] holds the per-user trust state machine; [`compare`]
//! samples it per day and scores rank agreement against a [`reference`]
//! series; [`sweep`] repeats that over parameter grids; [`synth`] produces
//! seeded streams for testing without platform data.

pub mod compare;
pub mod ingest;
pub mod model;
pub mod reference;
pub mod snapshot;
pub mod sweep;
pub mod synth;

pub use compare::{
    dibrm_snapshot_pair, dibrm_snapshots, mu_metric, mu_metric_with, AgreementReport, CompareError, DibrmSnapshots,
    SigmaAxis, Which,
};
pub use ingest::{merge_streams, parse_comments, parse_posts, CommentRecord, IngestError, ParseOptions, PostRecord};
pub use model::{
    cumulative_value, decayed_trust_at, periods_elapsed, process_event, update_streak, update_trust, ActivityPeriod,
    EventId, InteractionEvent, ModelError, ModelParams, StreakMode, Timestamp, UserId, UserTrustState,
};
pub use reference::{karma_series, points_series, ReferenceModel, ScoreError, ScoringRule};
pub use snapshot::{DayRange, SeriesError, SnapshotSeries};
pub use sweep::{run_sweep, SweepAxis, SweepError, SweepRow, SweepSpec, SweepTable, WhichSet};
pub use synth::{generate, Profile, ProfileSpec, SynthError};
