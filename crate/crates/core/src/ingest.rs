//! CSV ingestion of post and comment exports.
//!
//! Expected headers (matched case-insensitively):
//!
//! ```text
//! PostId,UserId,CreationDate,Vote
//! CommentId,UserId,CreationDate,PostId,Vote,ParentId
//! ```
//!
//! Dates are ISO-8601. A zone designator is optional; zoneless values are
//! read as UTC, the convention of the StackExchange dumps. Sub-second
//! precision is truncated.

use std::collections::HashSet;
use std::fmt;
use std::fs::File;
use std::io::{self, Read, Write};
use std::path::Path;

use chrono::{DateTime, NaiveDate, NaiveDateTime, Timelike, Utc};
use csv::{ReaderBuilder, StringRecord, Trim};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{sort_events, EventId, InteractionEvent, Timestamp, UserId};

pub const POST_HEADERS: [&str; 4] = ["PostId", "UserId", "CreationDate", "Vote"];
pub const COMMENT_HEADERS: [&str; 6] = ["CommentId", "UserId", "CreationDate", "PostId", "Vote", "ParentId"];

pub const POST_KIND: &str = "post";
pub const COMMENT_KIND: &str = "comment";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RowError {
    pub line: u64,
    pub message: String,
}

impl fmt::Display for RowError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}: {}", self.line, self.message)
    }
}

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("schema error on line {line}: {message}")]
    Schema { line: u64, message: String },
    #[error("{} malformed row(s): {}", .0.len(), summarize(.0))]
    Rows(Vec<RowError>),
    #[error("{path}: {source}")]
    Open { path: String, source: io::Error },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("{path}: {source}")]
    InFile { path: String, source: Box<IngestError> },
}

impl IngestError {
    /// True for failures of the underlying reader rather than of the data.
    pub fn is_io(&self) -> bool {
        match self {
            IngestError::Open { .. } => true,
            IngestError::Csv(e) => e.is_io_error(),
            IngestError::InFile { source, .. } => source.is_io(),
            _ => false,
        }
    }

    /// The malformed rows behind this error, if that is what it is.
    pub fn row_errors(&self) -> Option<&[RowError]> {
        match self {
            IngestError::Rows(rows) => Some(rows),
            IngestError::InFile { source, .. } => source.row_errors(),
            _ => None,
        }
    }
}

fn summarize(rows: &[RowError]) -> String {
    const SHOWN: usize = 5;
    let mut out = rows
        .iter()
        .take(SHOWN)
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("; ");
    if rows.len() > SHOWN {
        out.push_str(&format!("; ... and {} more", rows.len() - SHOWN));
    }
    out
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ParseOptions {
    /// Drop malformed rows (reporting them in [`Parsed::skipped`]) instead of
    /// failing the whole file.
    pub skip_bad_rows: bool,
}

#[derive(Debug, Clone)]
pub struct Parsed<T> {
    pub records: Vec<T>,
    pub skipped: Vec<RowError>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PostRecord {
    pub post_id: i64,
    pub user_id: UserId,
    pub creation_date: Timestamp,
    pub vote: i64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommentRecord {
    pub comment_id: i64,
    pub user_id: UserId,
    pub creation_date: Timestamp,
    pub post_id: i64,
    pub vote: i64,
    pub parent_id: i64,
}

trait CsvRecord: Sized {
    const HEADERS: &'static [&'static str];
    fn from_row(row: &StringRecord) -> Result<Self, String>;
    fn id(&self) -> i64;
    fn to_row(&self) -> Vec<String>;
}

impl CsvRecord for PostRecord {
    const HEADERS: &'static [&'static str] = &POST_HEADERS;

    fn from_row(row: &StringRecord) -> Result<Self, String> {
        Ok(PostRecord {
            post_id: int_field(row, 0, "PostId")?,
            user_id: UserId(int_field(row, 1, "UserId")?),
            creation_date: date_field(row, 2, "CreationDate")?,
            vote: int_field(row, 3, "Vote")?,
        })
    }

    fn id(&self) -> i64 {
        self.post_id
    }

    fn to_row(&self) -> Vec<String> {
        vec![
            self.post_id.to_string(),
            self.user_id.to_string(),
            format_timestamp(self.creation_date),
            self.vote.to_string(),
        ]
    }
}

impl CsvRecord for CommentRecord {
    const HEADERS: &'static [&'static str] = &COMMENT_HEADERS;

    fn from_row(row: &StringRecord) -> Result<Self, String> {
        Ok(CommentRecord {
            comment_id: int_field(row, 0, "CommentId")?,
            user_id: UserId(int_field(row, 1, "UserId")?),
            creation_date: date_field(row, 2, "CreationDate")?,
            post_id: int_field(row, 3, "PostId")?,
            vote: int_field(row, 4, "Vote")?,
            parent_id: int_field(row, 5, "ParentId")?,
        })
    }

    fn id(&self) -> i64 {
        self.comment_id
    }

    fn to_row(&self) -> Vec<String> {
        vec![
            self.comment_id.to_string(),
            self.user_id.to_string(),
            format_timestamp(self.creation_date),
            self.post_id.to_string(),
            self.vote.to_string(),
            self.parent_id.to_string(),
        ]
    }
}

fn int_field(row: &StringRecord, idx: usize, name: &str) -> Result<i64, String> {
    let raw = &row[idx];
    raw.parse()
        .map_err(|_| format!("column {name}: `{raw}` is not an integer"))
}

fn date_field(row: &StringRecord, idx: usize, name: &str) -> Result<Timestamp, String> {
    let raw = &row[idx];
    parse_timestamp(raw).ok_or_else(|| format!("column {name}: `{raw}` is not an ISO-8601 date"))
}

/// Parses an ISO-8601 instant, normalizing to UTC at second precision.
pub fn parse_timestamp(raw: &str) -> Option<Timestamp> {
    let raw = raw.trim();
    let parsed = DateTime::parse_from_rfc3339(raw)
        .map(|dt| dt.with_timezone(&Utc))
        .ok()
        .or_else(|| {
            ["%Y-%m-%dT%H:%M:%S%.f", "%Y-%m-%d %H:%M:%S%.f", "%Y-%m-%dT%H:%M"]
                .iter()
                .find_map(|fmt| NaiveDateTime::parse_from_str(raw, fmt).ok())
                .map(|naive| naive.and_utc())
        })
        .or_else(|| {
            NaiveDate::parse_from_str(raw, "%Y-%m-%d")
                .ok()
                .and_then(|d| d.and_hms_opt(0, 0, 0))
                .map(|naive| naive.and_utc())
        })?;
    parsed.with_nanosecond(0)
}

pub fn format_timestamp(ts: Timestamp) -> String {
    ts.format("%Y-%m-%dT%H:%M:%SZ").to_string()
}

fn parse_csv<T: CsvRecord, R: Read>(source: R, opts: ParseOptions) -> Result<Parsed<T>, IngestError> {
    let mut reader = ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(Trim::All)
        .from_reader(source);
    let mut row = StringRecord::new();

    if !reader.read_record(&mut row)? {
        return Ok(Parsed {
            records: Vec::new(),
            skipped: Vec::new(),
        });
    }
    check_header(&row, T::HEADERS)?;

    let mut records = Vec::new();
    let mut bad = Vec::new();
    let mut seen = HashSet::new();
    while reader.read_record(&mut row)? {
        let line = row.position().map_or(0, |p| p.line());
        if row.len() == 1 && row[0].is_empty() {
            continue;
        }
        let parsed = if row.len() != T::HEADERS.len() {
            Err(format!(
                "schema mismatch: expected {} fields, found {}",
                T::HEADERS.len(),
                row.len()
            ))
        } else {
            T::from_row(&row).and_then(|rec| {
                if seen.insert(rec.id()) {
                    Ok(rec)
                } else {
                    Err(format!("duplicate {} {}", T::HEADERS[0], rec.id()))
                }
            })
        };
        match parsed {
            Ok(rec) => records.push(rec),
            Err(message) => bad.push(RowError { line, message }),
        }
    }

    if !bad.is_empty() && !opts.skip_bad_rows {
        return Err(IngestError::Rows(bad));
    }
    Ok(Parsed { records, skipped: bad })
}

fn check_header(row: &StringRecord, expected: &[&str]) -> Result<(), IngestError> {
    let line = row.position().map_or(1, |p| p.line());
    let found: Vec<&str> = row.iter().collect();
    let matches = found.len() == expected.len()
        && found
            .iter()
            .zip(expected)
            .all(|(f, e)| f.trim_start_matches('\u{feff}').eq_ignore_ascii_case(e));
    if matches {
        return Ok(());
    }
    let missing: Vec<&str> = expected
        .iter()
        .copied()
        .filter(|e| !found.iter().any(|f| f.eq_ignore_ascii_case(e)))
        .collect();
    let message = if missing.is_empty() {
        format!("expected header `{}`, found `{}`", expected.join(","), found.join(","))
    } else {
        format!(
            "missing column(s) {}; expected header `{}`, found `{}`",
            missing.join(", "),
            expected.join(","),
            found.join(",")
        )
    };
    Err(IngestError::Schema { line, message })
}

pub fn parse_posts<R: Read>(source: R, opts: ParseOptions) -> Result<Parsed<PostRecord>, IngestError> {
    parse_csv(source, opts)
}

pub fn parse_comments<R: Read>(source: R, opts: ParseOptions) -> Result<Parsed<CommentRecord>, IngestError> {
    parse_csv(source, opts)
}

fn open(path: &Path) -> Result<File, IngestError> {
    File::open(path).map_err(|source| IngestError::Open {
        path: path.display().to_string(),
        source,
    })
}

fn in_file(path: &Path) -> impl FnOnce(IngestError) -> IngestError + '_ {
    move |e| IngestError::InFile {
        path: path.display().to_string(),
        source: Box::new(e),
    }
}

pub fn read_posts(path: &Path, opts: ParseOptions) -> Result<Parsed<PostRecord>, IngestError> {
    parse_posts(io::BufReader::new(open(path)?), opts).map_err(in_file(path))
}

pub fn read_comments(path: &Path, opts: ParseOptions) -> Result<Parsed<CommentRecord>, IngestError> {
    parse_comments(io::BufReader::new(open(path)?), opts).map_err(in_file(path))
}

fn write_csv<T: CsvRecord, W: Write>(records: &[T], sink: W) -> Result<(), csv::Error> {
    let mut writer = csv::Writer::from_writer(sink);
    writer.write_record(T::HEADERS)?;
    for rec in records {
        writer.write_record(rec.to_row())?;
    }
    writer.flush()?;
    Ok(())
}

pub fn write_posts<W: Write>(records: &[PostRecord], sink: W) -> Result<(), csv::Error> {
    write_csv(records, sink)
}

pub fn write_comments<W: Write>(records: &[CommentRecord], sink: W) -> Result<(), csv::Error> {
    write_csv(records, sink)
}

/// One event per record, sorted by `(timestamp, event_id)`.
pub fn merge_streams(posts: &[PostRecord], comments: &[CommentRecord]) -> Vec<InteractionEvent> {
    let mut events: Vec<InteractionEvent> = posts
        .iter()
        .map(|p| InteractionEvent {
            event_id: EventId::post(p.post_id),
            user_id: p.user_id,
            timestamp: p.creation_date,
            kind: POST_KIND.to_string(),
            vote: p.vote,
        })
        .chain(comments.iter().map(|c| InteractionEvent {
            event_id: EventId::comment(c.comment_id),
            user_id: c.user_id,
            timestamp: c.creation_date,
            kind: COMMENT_KIND.to_string(),
            vote: c.vote,
        }))
        .collect();
    sort_events(&mut events);
    events
}

/// Parsed inputs of one run, with any rows dropped under `skip_bad_rows`.
#[derive(Debug, Clone)]
pub struct LoadedStream {
    pub events: Vec<InteractionEvent>,
    pub post_count: usize,
    pub comment_count: usize,
    pub skipped_posts: Vec<RowError>,
    pub skipped_comments: Vec<RowError>,
}

/// Parses both files concurrently and merges them. Either path may be
/// absent.
pub fn load_streams(
    posts: Option<&Path>,
    comments: Option<&Path>,
    opts: ParseOptions,
) -> Result<LoadedStream, IngestError> {
    let (posts, comments) = rayon::join(
        || posts.map(|p| read_posts(p, opts)).transpose(),
        || comments.map(|c| read_comments(c, opts)).transpose(),
    );
    let posts = posts?.unwrap_or(Parsed {
        records: Vec::new(),
        skipped: Vec::new(),
    });
    let comments = comments?.unwrap_or(Parsed {
        records: Vec::new(),
        skipped: Vec::new(),
    });
    Ok(LoadedStream {
        events: merge_streams(&posts.records, &comments.records),
        post_count: posts.records.len(),
        comment_count: comments.records.len(),
        skipped_posts: posts.skipped,
        skipped_comments: comments.skipped,
    })
}
