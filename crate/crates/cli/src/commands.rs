use std::collections::BTreeMap;
use std::fs::{self, OpenOptions};
use std::io;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};

use dibrm_core::ingest::{format_timestamp, load_streams, parse_timestamp, write_comments, write_posts, LoadedStream};
use dibrm_core::reference::reference_series;
use dibrm_core::snapshot::{user_universe, SNAPSHOT_HEADERS};
use dibrm_core::sweep::write_sweep_csv;
use dibrm_core::synth::{mixed_population, to_records, RNG_ALGORITHM, RNG_KEYING, UNIFORM_RULE};
use dibrm_core::{
    dibrm_snapshot_pair, generate, mu_metric_with, run_sweep, DayRange, InteractionEvent, ModelParams, Profile,
    ProfileSpec, SigmaAxis, SnapshotSeries, SweepAxis, SweepSpec, SweepTable, UserId, Which, WhichSet,
};

use crate::config::{FileConfig, RunConfig};
use crate::error::CliError;

pub const REPUTATION_CSV: &str = "dibrm_reputation.csv";
pub const HISTORICAL_CSV: &str = "dibrm_historical.csv";
pub const REFERENCE_CSV: &str = "reference.csv";
pub const SWEEP_CSV: &str = "sweep.csv";
pub const SWEEP_TABLE: &str = "sweep_table.md";
pub const PLOTDATA_CSV: &str = "plotdata.csv";
pub const SYNTH_META: &str = "synth_meta.json";
pub const LOCK_FILE: &str = ".lock";

pub fn report_file(which: Which) -> String {
    format!("report_{which}.json")
}

/// Exclusive claim on an output directory, released on drop.
pub struct OutputLock {
    path: PathBuf,
}

impl OutputLock {
    pub fn acquire(dir: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(dir).map_err(|e| CliError::io_at(dir, e))?;
        let path = dir.join(LOCK_FILE);
        match OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(_) => Ok(OutputLock { path }),
            Err(e) if e.kind() == io::ErrorKind::AlreadyExists => Err(CliError::Io(format!(
                "{} is in use by another run (remove {} if it is stale)",
                dir.display(),
                path.display()
            ))),
            Err(e) => Err(CliError::io_at(&path, e)),
        }
    }
}

impl Drop for OutputLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.path);
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    fs::write(path, bytes).map_err(|e| CliError::io_at(path, e))
}

fn read_file(path: &Path) -> Result<Vec<u8>, CliError> {
    fs::read(path).map_err(|e| CliError::io_at(path, e))
}

fn series_csv(series: &SnapshotSeries) -> Vec<u8> {
    let mut buf = Vec::new();
    series.write_csv(&mut buf).expect("writing to memory");
    buf
}

fn load_series(path: &Path) -> Result<SnapshotSeries, CliError> {
    SnapshotSeries::read_csv(read_file(path)?.as_slice())
        .map_err(|e| CliError::invalid(format!("{}: {e}", path.display())))
}

fn pretty_json(value: &impl Serialize) -> Vec<u8> {
    let mut text = serde_json::to_string_pretty(value).expect("serializable");
    text.push('\n');
    text.into_bytes()
}

fn load_events(cfg: &RunConfig) -> Result<LoadedStream, CliError> {
    if cfg.posts.is_none() && cfg.comments.is_none() {
        return Err(CliError::invalid("no input: pass --posts and/or --comments"));
    }
    let loaded = load_streams(cfg.posts.as_deref(), cfg.comments.as_deref(), cfg.parse)?;
    for (label, skipped) in [("posts", &loaded.skipped_posts), ("comments", &loaded.skipped_comments)] {
        if !skipped.is_empty() {
            eprintln!("warning: skipped {} malformed {label} row(s)", skipped.len());
            for row in skipped {
                eprintln!("  {row}");
            }
        }
    }
    Ok(loaded)
}

fn day_range(cfg: &RunConfig, events: &[InteractionEvent]) -> Option<DayRange> {
    let span = DayRange::spanning(events);
    let from = cfg.from.or(span.map(|s| s.first())).or(cfg.to)?;
    let to = cfg.to.or(span.map(|s| s.last())).unwrap_or(from);
    // An explicit bound can fall on the wrong side of the data's span.
    DayRange::new(from, to.max(from)).ok()
}

/// Reference and both DIBRM series over the same users and days.
pub struct SeriesBundle {
    pub reputation: SnapshotSeries,
    pub historical: SnapshotSeries,
    pub reference: SnapshotSeries,
}

impl SeriesBundle {
    pub fn dibrm(&self, which: Which) -> &SnapshotSeries {
        match which {
            Which::Reputation => &self.reputation,
            Which::Historical => &self.historical,
        }
    }

    fn from_dir(dir: &Path) -> Result<Self, CliError> {
        let bundle = SeriesBundle {
            reputation: load_series(&dir.join(REPUTATION_CSV))?,
            historical: load_series(&dir.join(HISTORICAL_CSV))?,
            reference: load_series(&dir.join(REFERENCE_CSV))?,
        };
        bundle.reference.check_aligned(&bundle.reputation)?;
        bundle.reference.check_aligned(&bundle.historical)?;
        Ok(bundle)
    }
}

/// Scores the configured stream. `None` when no user has any event.
fn score(cfg: &RunConfig, events: &[InteractionEvent]) -> Result<Option<SeriesBundle>, CliError> {
    let users = user_universe(events);
    let Some(range) = day_range(cfg, events).filter(|_| !users.is_empty()) else {
        return Ok(None);
    };
    let pair = dibrm_snapshot_pair(events, &cfg.params, &users, range)?;
    let reference = reference_series(events, cfg.reference, &cfg.rule, &users, range)?;
    Ok(Some(SeriesBundle {
        reputation: pair.reputation,
        historical: pair.historical,
        reference,
    }))
}

pub fn compute(cfg: &RunConfig) -> Result<(), CliError> {
    let loaded = load_events(cfg)?;
    let bundle = score(cfg, &loaded.events)?;
    let _lock = OutputLock::acquire(&cfg.out)?;
    let files = [REPUTATION_CSV, HISTORICAL_CSV, REFERENCE_CSV];
    match &bundle {
        Some(b) => {
            for (name, series) in files.iter().zip([&b.reputation, &b.historical, &b.reference]) {
                write_file(&cfg.out.join(name), &series_csv(series))?;
            }
            println!(
                "{} events, {} users, {} days -> {}",
                loaded.events.len(),
                b.reputation.n_users(),
                b.reputation.n_days(),
                cfg.out.display()
            );
        }
        None => {
            let header = format!("{}\n", SNAPSHOT_HEADERS.join(","));
            for name in files {
                write_file(&cfg.out.join(name), header.as_bytes())?;
            }
            println!("no events; wrote empty snapshots -> {}", cfg.out.display());
        }
    }
    Ok(())
}

/// Where `compare` and `plotdata` get their series from.
#[derive(Debug, Clone, Default)]
pub struct SeriesSource {
    pub from_snapshots: Option<PathBuf>,
    pub reference_csv: Option<PathBuf>,
    pub candidate_csv: Option<PathBuf>,
    pub self_compare: bool,
}

fn bundle_for(cfg: &RunConfig, source: &SeriesSource) -> Result<SeriesBundle, CliError> {
    let bundle = match &source.from_snapshots {
        Some(dir) => SeriesBundle::from_dir(dir)?,
        None => {
            let loaded = load_events(cfg)?;
            score(cfg, &loaded.events)?.ok_or_else(|| CliError::invalid("no events: nothing to compare"))?
        }
    };
    Ok(bundle)
}

pub fn compare(cfg: &RunConfig, source: &SeriesSource, sigma_axis: Option<SigmaAxis>) -> Result<(), CliError> {
    let axis = sigma_axis.unwrap_or(cfg.sigma_axis);
    let mut pairs: Vec<(Which, SnapshotSeries, SnapshotSeries)> = Vec::new();
    match (&source.reference_csv, &source.candidate_csv) {
        (Some(r), Some(c)) => {
            let which = match cfg.which {
                WhichSet::Historical => Which::Historical,
                _ => Which::Reputation,
            };
            pairs.push((which, load_series(r)?, load_series(c)?));
        }
        (None, None) => {
            let bundle = bundle_for(cfg, source)?;
            for which in cfg.which.members() {
                pairs.push((which, bundle.reference.clone(), bundle.dibrm(which).clone()));
            }
        }
        _ => return Err(CliError::invalid("--reference-csv and --candidate-csv go together")),
    }

    let mut reports = Vec::new();
    for (which, reference, candidate) in &pairs {
        let reference = if source.self_compare { candidate } else { reference };
        reports.push(mu_metric_with(reference, candidate, *which, axis)?);
    }
    let _lock = OutputLock::acquire(&cfg.out)?;
    for report in &reports {
        write_file(&cfg.out.join(report_file(report.which)), &pretty_json(report))?;
        println!(
            "{}: mu = {:.6}, sigma = {:.6} ({} users x {} days)",
            report.which, report.mu, report.sigma, report.n_users, report.n_days
        );
    }
    Ok(())
}

/// Builds the grid from `--axis` flags, else from a spec file, else from the
/// config's `sweep` object. A `fixed` block in the spec replaces the
/// configured model before flags are applied.
pub fn sweep_spec(
    cfg: &RunConfig,
    axes: &[String],
    spec_file: Option<&Path>,
    model_flags: &crate::config::ModelArgs,
    which_flag: Option<WhichSet>,
) -> Result<SweepSpec, CliError> {
    if !axes.is_empty() {
        let axes = axes
            .iter()
            .map(|a| SweepAxis::parse(a))
            .collect::<Result<Vec<_>, _>>()?;
        return Ok(SweepSpec::new(axes, cfg.params.clone(), cfg.which)?);
    }
    let mut raw: Value = match spec_file {
        Some(path) => serde_json::from_slice(&read_file(path)?)
            .map_err(|e| CliError::invalid(format!("{}: {e}", path.display())))?,
        None => cfg
            .sweep
            .clone()
            .ok_or_else(|| CliError::invalid("no sweep axes: pass --axis, --sweep-spec or a `sweep` config key"))?,
    };
    let obj = raw
        .as_object_mut()
        .ok_or_else(|| CliError::invalid("sweep spec must be a JSON object"))?;
    let fixed = match obj.remove("fixed") {
        Some(v) => model_flags.apply(
            serde_json::from_value::<ModelParams>(v).map_err(|e| CliError::invalid(format!("sweep fixed: {e}")))?,
        )?,
        None => cfg.params.clone(),
    };
    let spec = SweepSpec::from_json(&raw, fixed)?;
    match which_flag {
        Some(which) => Ok(SweepSpec::new(spec.axes().to_vec(), spec.fixed().clone(), which)?),
        None => Ok(spec),
    }
}

pub fn sweep(cfg: &RunConfig, spec: &SweepSpec) -> Result<(), CliError> {
    let loaded = load_events(cfg)?;
    let users = user_universe(&loaded.events);
    let range = day_range(cfg, &loaded.events)
        .filter(|_| !users.is_empty())
        .ok_or_else(|| CliError::invalid("no events: nothing to sweep"))?;
    let reference = reference_series(&loaded.events, cfg.reference, &cfg.rule, &users, range)?;
    let rows = run_sweep(&loaded.events, &reference, spec)?;

    let mut csv = Vec::new();
    write_sweep_csv(&rows, &mut csv).expect("writing to memory");
    let table = SweepTable::build(spec, &rows).to_markdown();
    let _lock = OutputLock::acquire(&cfg.out)?;
    write_file(&cfg.out.join(SWEEP_CSV), &csv)?;
    write_file(&cfg.out.join(SWEEP_TABLE), table.as_bytes())?;
    print!("{table}");
    Ok(())
}

pub fn plotdata(cfg: &RunConfig, source: &SeriesSource, filter: &[UserId]) -> Result<(), CliError> {
    let bundle = bundle_for(cfg, source)?;
    let users = bundle.reference.users();
    let selected: Vec<usize> = if filter.is_empty() {
        (0..users.len()).collect()
    } else {
        filter
            .iter()
            .map(|u| {
                bundle
                    .reference
                    .user_index(*u)
                    .ok_or_else(|| CliError::invalid(format!("unknown user {u}")))
            })
            .collect::<Result<_, _>>()?
    };

    let mut out = String::from("UserId,Day,Series,Value\n");
    for &i in &selected {
        for (j, day) in bundle.reference.days().iter().enumerate() {
            for (name, series) in [
                ("dibrm", &bundle.reputation),
                ("dibrm_historical", &bundle.historical),
                ("reference", &bundle.reference),
            ] {
                out.push_str(&format!("{},{},{},{}\n", users[i], day, name, series.value(i, j)));
            }
        }
    }
    let _lock = OutputLock::acquire(&cfg.out)?;
    write_file(&cfg.out.join(PLOTDATA_CSV), out.as_bytes())?;
    println!(
        "{} users x {} days -> {}",
        selected.len(),
        bundle.reference.n_days(),
        cfg.out.display()
    );
    Ok(())
}

/// Options of the `synth` command after merging file and flags.
#[derive(Debug, Clone)]
pub struct SynthOptions {
    pub out: PathBuf,
    pub users: usize,
    /// `None` cycles through every profile.
    pub profile: Option<Profile>,
    pub rate: f64,
    pub duration_days: f64,
    pub start: String,
    pub kinds: BTreeMap<String, f64>,
    pub seed: u64,
}

impl SynthOptions {
    pub const DEFAULT_USERS: usize = 30;
    pub const DEFAULT_RATE: f64 = 1.0;
    pub const DEFAULT_DURATION_DAYS: f64 = 90.0;
    pub const DEFAULT_START: &'static str = "2018-01-01";

    pub fn default_kinds() -> BTreeMap<String, f64> {
        [("comment".to_string(), 0.7), ("post".to_string(), 0.3)].into()
    }

    pub fn from_file(config: &Option<PathBuf>) -> Result<(FileConfig, crate::config::SynthConfig), CliError> {
        let mut file = FileConfig::load(config.as_deref())?;
        let synth = file.synth.take().unwrap_or_default();
        Ok((file, synth))
    }
}

pub fn synth(opts: &SynthOptions) -> Result<(), CliError> {
    if opts.users == 0 {
        return Err(CliError::invalid("--users must be at least 1"));
    }
    let start = parse_timestamp(&opts.start)
        .ok_or_else(|| CliError::invalid(format!("`{}` is not an ISO-8601 date", opts.start)))?;
    let mut population = mixed_population(opts.users, opts.rate, opts.duration_days, &opts.kinds, opts.seed);
    if let Some(profile) = opts.profile {
        for (_, spec) in &mut population {
            spec.profile = profile;
        }
    }
    let events = generate(&population, start)?;
    let (posts, comments) = to_records(&events)?;

    let mut posts_csv = Vec::new();
    write_posts(&posts, &mut posts_csv).expect("writing to memory");
    let mut comments_csv = Vec::new();
    write_comments(&comments, &mut comments_csv).expect("writing to memory");
    let meta = json!({
        "rng": {
            "algorithm": RNG_ALGORITHM,
            "keying": RNG_KEYING,
            "uniform": UNIFORM_RULE,
            "seed": opts.seed,
            "per_user_seed": "seed + user_id",
        },
        "users": opts.users,
        "profile": opts.profile.map_or("mixed", Profile::as_str),
        "rate": opts.rate,
        "duration_days": opts.duration_days,
        "start": format_timestamp(start),
        "kinds": opts.kinds,
        "events": events.len(),
        "posts": posts.len(),
        "comments": comments.len(),
        "profiles": population
            .iter()
            .map(|(u, s): &(UserId, ProfileSpec)| json!({"user": u.0, "profile": s.profile, "seed": s.seed}))
            .collect::<Vec<_>>(),
    });

    let _lock = OutputLock::acquire(&opts.out)?;
    write_file(&opts.out.join("posts.csv"), &posts_csv)?;
    write_file(&opts.out.join("comments.csv"), &comments_csv)?;
    write_file(&opts.out.join(SYNTH_META), &pretty_json(&meta))?;
    println!(
        "{} events ({} posts, {} comments) for {} users -> {}",
        events.len(),
        posts.len(),
        comments.len(),
        opts.users,
        opts.out.display()
    );
    Ok(())
}
