//! Run configuration: an optional JSON file overlaid by command-line flags.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use clap::Args;
use serde::Deserialize;
use serde_json::Value;

use dibrm_core::snapshot::DAY_FORMAT;
use dibrm_core::{ModelParams, ParseOptions, ReferenceModel, ScoringRule, SigmaAxis, StreakMode, WhichSet};

use crate::error::CliError;

pub const DEFAULT_OUT: &str = "out";

/// Keys accepted in `--config`. Relative paths resolve against the file's
/// directory.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub posts: Option<PathBuf>,
    pub comments: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub model: Option<ModelParams>,
    pub reference: Option<ReferenceModel>,
    pub scoring_rule: Option<ScoringRule>,
    pub from: Option<String>,
    pub to: Option<String>,
    pub which: Option<WhichSet>,
    pub sigma_axis: Option<SigmaAxis>,
    pub skip_bad_rows: Option<bool>,
    pub seed: Option<u64>,
    pub sweep: Option<Value>,
    pub synth: Option<SynthConfig>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthConfig {
    pub users: Option<usize>,
    pub profile: Option<String>,
    pub rate: Option<f64>,
    pub duration_days: Option<f64>,
    pub start: Option<String>,
    pub kinds: Option<BTreeMap<String, f64>>,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let Some(path) = path else {
            return Ok(FileConfig::default());
        };
        let text = fs::read_to_string(path).map_err(|e| CliError::io_at(path, e))?;
        let mut config: FileConfig =
            serde_json::from_str(&text).map_err(|e| CliError::invalid(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [&mut config.posts, &mut config.comments, &mut config.out]
            .into_iter()
            .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(config)
    }
}

/// Splits `key=value`.
pub fn parse_kv(raw: &str) -> Result<(String, f64), String> {
    let (k, v) = raw
        .split_once('=')
        .ok_or_else(|| format!("expected `kind=value`, got `{raw}`"))?;
    let v: f64 = v.trim().parse().map_err(|_| format!("`{v}` is not a number"))?;
    Ok((k.trim().to_string(), v))
}

pub fn parse_day(raw: &str) -> Result<NaiveDate, CliError> {
    NaiveDate::parse_from_str(raw.trim(), DAY_FORMAT)
        .map_err(|_| CliError::invalid(format!("`{raw}` is not a YYYY-MM-DD date")))
}

#[derive(Debug, Clone, Args)]
pub struct ModelArgs {
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub beta: Option<f64>,
    /// Activity period in days; fractions allowed.
    #[arg(long)]
    pub ta_days: Option<f64>,
    /// Per-kind basic value, e.g. `post=4`. Repeatable.
    #[arg(long = "base-value", value_name = "KIND=VALUE", value_parser = parse_kv)]
    pub base_values: Vec<(String, f64)>,
    #[arg(long, value_name = "reset|cumulative")]
    pub streak_mode: Option<String>,
}

impl ModelArgs {
    pub fn apply(&self, mut params: ModelParams) -> Result<ModelParams, CliError> {
        if let Some(a) = self.alpha {
            params = params.with_alpha(a)?;
        }
        if let Some(b) = self.beta {
            params = params.with_beta(b)?;
        }
        if let Some(t) = self.ta_days {
            params = params.with_ta_days(t)?;
        }
        for (kind, value) in &self.base_values {
            params = params.with_base_value(kind, *value)?;
        }
        if let Some(mode) = &self.streak_mode {
            params = params.with_streak_mode(mode.parse::<StreakMode>()?);
        }
        Ok(params)
    }
}

/// Flags shared by every command that reads an event stream.
#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    /// JSON run configuration; flags override its keys.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub posts: Option<PathBuf>,
    #[arg(long)]
    pub comments: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// First snapshot day (YYYY-MM-DD). Defaults to the first event's day.
    #[arg(long)]
    pub from: Option<String>,
    /// Last snapshot day (YYYY-MM-DD). Defaults to the last event's day.
    #[arg(long)]
    pub to: Option<String>,
    /// Drop malformed CSV rows instead of failing.
    #[arg(long)]
    pub skip_bad_rows: bool,
    /// karma, post_karma, comment_karma or points.
    #[arg(long)]
    pub reference: Option<ReferenceModel>,
    /// Points per vote for the points reference, e.g. `post=5`. Repeatable.
    #[arg(long = "points-per-vote", value_name = "KIND=VALUE", value_parser = parse_kv)]
    pub points_per_vote: Vec<(String, f64)>,
    /// Points per event for the points reference. Repeatable.
    #[arg(long = "points-per-event", value_name = "KIND=VALUE", value_parser = parse_kv)]
    pub points_per_event: Vec<(String, f64)>,
    /// reputation, historical or both.
    #[arg(long)]
    pub which: Option<WhichSet>,
    #[command(flatten)]
    pub model: ModelArgs,
}

/// Everything a stream-reading command needs, after merging file and flags.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub posts: Option<PathBuf>,
    pub comments: Option<PathBuf>,
    pub out: PathBuf,
    pub params: ModelParams,
    pub reference: ReferenceModel,
    pub rule: ScoringRule,
    pub from: Option<NaiveDate>,
    pub to: Option<NaiveDate>,
    pub which: WhichSet,
    pub sigma_axis: SigmaAxis,
    pub parse: ParseOptions,
    pub sweep: Option<Value>,
}

impl RunConfig {
    pub fn resolve(args: &RunArgs) -> Result<Self, CliError> {
        let file = FileConfig::load(args.config.as_deref())?;
        let params = args.model.apply(file.model.unwrap_or_default())?;

        let mut rule = file.scoring_rule.unwrap_or_default();
        rule.points_per_vote.extend(args.points_per_vote.iter().cloned());
        rule.points_per_event.extend(args.points_per_event.iter().cloned());

        let day = |flag: &Option<String>, key: Option<String>| -> Result<Option<NaiveDate>, CliError> {
            flag.clone().or(key).map(|s| parse_day(&s)).transpose()
        };
        let from = day(&args.from, file.from)?;
        let to = day(&args.to, file.to)?;
        if let (Some(f), Some(t)) = (from, to) {
            if f > t {
                return Err(CliError::invalid(format!("empty day range: {f} is after {t}")));
            }
        }

        Ok(RunConfig {
            posts: args.posts.clone().or(file.posts),
            comments: args.comments.clone().or(file.comments),
            out: args
                .out
                .clone()
                .or(file.out)
                .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT)),
            params,
            reference: args.reference.or(file.reference).unwrap_or_default(),
            rule,
            from,
            to,
            which: args.which.or(file.which).unwrap_or_default(),
            sigma_axis: file.sigma_axis.unwrap_or_default(),
            parse: ParseOptions {
                skip_bad_rows: args.skip_bad_rows || file.skip_bad_rows.unwrap_or(false),
            },
            sweep: file.sweep,
        })
    }
}
