//! `dibrm`: score interaction logs with the DIBRM trust model, compare the
//! rankings against a vote-based reference, and sweep model parameters.

mod commands;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use dibrm_core::{Profile, SigmaAxis, UserId};

use commands::{SeriesSource, SynthOptions};
use config::{parse_kv, RunArgs, RunConfig};
use error::CliError;

#[derive(Parser)]
#[command(name = "dibrm", version, about = "DIBRM reputation scoring and evaluation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write daily DIBRM reputation, historical and reference snapshots.
    Compute(RunArgs),
    /// Report rank agreement (mu, sigma) between the reference and DIBRM.
    Compare(CompareArgs),
    /// Evaluate mu and sigma over a grid of model parameters.
    Sweep(SweepArgs),
    /// Generate a seeded synthetic posts/comments log.
    Synth(SynthArgs),
    /// Write per-user time series in long format for plotting.
    Plotdata(PlotArgs),
}

#[derive(Args)]
struct SourceArgs {
    /// Read snapshots written by `compute` from this directory instead of
    /// scoring raw inputs.
    #[arg(long, value_name = "DIR")]
    from_snapshots: Option<PathBuf>,
}

#[derive(Args)]
struct CompareArgs {
    #[command(flatten)]
    run: RunArgs,
    #[command(flatten)]
    source: SourceArgs,
    /// Reference snapshot CSV; use with --candidate-csv.
    #[arg(long)]
    reference_csv: Option<PathBuf>,
    /// Candidate snapshot CSV; use with --reference-csv.
    #[arg(long)]
    candidate_csv: Option<PathBuf>,
    /// Compare each candidate series against itself.
    #[arg(long)]
    self_compare: bool,
    /// Take sigma over users (default) or over days.
    #[arg(long, value_name = "users|days", value_parser = parse_sigma_axis)]
    sigma_axis: Option<SigmaAxis>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Grid axis `name=v1,v2,...` (alpha, beta, ta_days, base_value,
    /// base_value.KIND, streak_mode). Repeatable; the first varies slowest.
    #[arg(long = "axis", value_name = "NAME=V1,V2")]
    axes: Vec<String>,
    /// JSON grid: {"axes": {"beta": [0.9, 0.99]}, "which": "both", "fixed": {...}}.
    #[arg(long)]
    sweep_spec: Option<PathBuf>,
}

#[derive(Args)]
struct PlotArgs {
    #[command(flatten)]
    run: RunArgs,
    #[command(flatten)]
    source: SourceArgs,
    /// Only these users. Repeatable; all users when absent.
    #[arg(long = "user", value_name = "ID")]
    users: Vec<i64>,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Number of users.
    #[arg(long = "users")]
    n_users: Option<usize>,
    /// steady, bursty, churned or mixed (cycles through all three).
    #[arg(long)]
    profile: Option<String>,
    /// Events per active day.
    #[arg(long)]
    rate: Option<f64>,
    #[arg(long)]
    duration_days: Option<f64>,
    /// Start instant or day (ISO-8601).
    #[arg(long)]
    start: Option<String>,
    /// Event kind mix, e.g. `post=0.3,comment=0.7`.
    #[arg(long)]
    kinds: Option<String>,
}

fn parse_sigma_axis(raw: &str) -> Result<SigmaAxis, String> {
    match raw.trim().to_ascii_lowercase().as_str() {
        "users" => Ok(SigmaAxis::Users),
        "days" => Ok(SigmaAxis::Days),
        other => Err(format!("expected `users` or `days`, got `{other}`")),
    }
}

fn parse_profile(raw: &str) -> Result<Option<Profile>, CliError> {
    if raw.trim().eq_ignore_ascii_case("mixed") {
        return Ok(None);
    }
    raw.parse().map(Some).map_err(CliError::invalid)
}

fn synth_options(args: &SynthArgs) -> Result<SynthOptions, CliError> {
    let (file, synth) = SynthOptions::from_file(&args.config)?;
    let kinds = match &args.kinds {
        Some(raw) => raw
            .split(',')
            .filter(|s| !s.trim().is_empty())
            .map(parse_kv)
            .collect::<Result<_, _>>()
            .map_err(CliError::invalid)?,
        None => synth.kinds.unwrap_or_else(SynthOptions::default_kinds),
    };
    let profile = match args.profile.as_deref().or(synth.profile.as_deref()) {
        Some(p) => parse_profile(p)?,
        None => None,
    };
    Ok(SynthOptions {
        out: args
            .out
            .clone()
            .or(file.out)
            .unwrap_or_else(|| PathBuf::from(config::DEFAULT_OUT)),
        users: args.n_users.or(synth.users).unwrap_or(SynthOptions::DEFAULT_USERS),
        profile,
        rate: args.rate.or(synth.rate).unwrap_or(SynthOptions::DEFAULT_RATE),
        duration_days: args
            .duration_days
            .or(synth.duration_days)
            .unwrap_or(SynthOptions::DEFAULT_DURATION_DAYS),
        start: args
            .start
            .clone()
            .or(synth.start)
            .unwrap_or_else(|| SynthOptions::DEFAULT_START.to_string()),
        kinds,
        seed: args.seed.or(file.seed).unwrap_or(0),
    })
}

fn source(args: &SourceArgs) -> SeriesSource {
    SeriesSource {
        from_snapshots: args.from_snapshots.clone(),
        ..SeriesSource::default()
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Compute(args) => commands::compute(&RunConfig::resolve(&args)?),
        Command::Compare(args) => {
            let cfg = RunConfig::resolve(&args.run)?;
            let src = SeriesSource {
                reference_csv: args.reference_csv,
                candidate_csv: args.candidate_csv,
                self_compare: args.self_compare,
                ..source(&args.source)
            };
            commands::compare(&cfg, &src, args.sigma_axis)
        }
        Command::Sweep(args) => {
            let cfg = RunConfig::resolve(&args.run)?;
            let spec = commands::sweep_spec(
                &cfg,
                &args.axes,
                args.sweep_spec.as_deref(),
                &args.run.model,
                args.run.which,
            )?;
            commands::sweep(&cfg, &spec)
        }
        Command::Synth(args) => commands::synth(&synth_options(&args)?),
        Command::Plotdata(args) => {
            let cfg = RunConfig::resolve(&args.run)?;
            let users: Vec<UserId> = args.users.into_iter().map(UserId).collect();
            commands::plotdata(&cfg, &source(&args.source), &users)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            // Usage errors are validation failures; help and version are not.
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
