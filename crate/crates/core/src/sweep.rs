//! Exhaustive parameter grids evaluated against a fixed reference series.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::compare::{dibrm_snapshot_pair, mu_metric, CompareError, Which};
use crate::model::{InteractionEvent, ModelParams, StreakMode};
use crate::snapshot::{DayRange, SnapshotSeries};

pub const SWEEP_HEADERS: [&str; 8] = [
    "alpha",
    "beta",
    "ta_days",
    "base_values",
    "streak_mode",
    "which",
    "mu",
    "sigma",
];

#[derive(Debug, Error)]
pub enum SweepError {
    #[error("sweep needs at least one axis")]
    NoAxes,
    #[error("unknown sweep axis `{0}` (expected alpha, beta, ta_days, base_value[.<kind>] or streak_mode)")]
    UnknownAxis(String),
    #[error("axis `{0}` has no values")]
    EmptyAxis(String),
    #[error("axis `{0}` is declared twice")]
    DuplicateAxis(String),
    #[error("invalid value for axis `{axis}`: {reason}")]
    InvalidAxisValue { axis: String, reason: String },
    #[error("invalid sweep spec: {0}")]
    Spec(String),
    #[error(transparent)]
    Compare(#[from] CompareError),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Axis {
    Alpha,
    Beta,
    TaDays,
    /// `None` sets every configured kind at once.
    BaseValue(Option<String>),
    StreakMode,
}

impl Axis {
    pub fn name(&self) -> String {
        match self {
            Axis::Alpha => "alpha".into(),
            Axis::Beta => "beta".into(),
            Axis::TaDays => "ta_days".into(),
            Axis::BaseValue(None) => "base_value".into(),
            Axis::BaseValue(Some(kind)) => format!("base_value.{kind}"),
            Axis::StreakMode => "streak_mode".into(),
        }
    }

    /// Column label in the compact table.
    pub fn label(&self) -> String {
        match self {
            Axis::Alpha => "alpha".into(),
            Axis::Beta => "beta".into(),
            Axis::TaDays => "t_a".into(),
            Axis::BaseValue(None) => "I_b".into(),
            Axis::BaseValue(Some(kind)) => format!("I_b({kind})"),
            Axis::StreakMode => "streak".into(),
        }
    }

    fn parse_value(&self, raw: &str) -> Result<AxisValue, SweepError> {
        let bad = |reason: String| SweepError::InvalidAxisValue {
            axis: self.name(),
            reason,
        };
        match self {
            Axis::StreakMode => raw
                .parse::<StreakMode>()
                .map(AxisValue::Mode)
                .map_err(|e| bad(e.to_string())),
            _ => raw
                .trim()
                .parse::<f64>()
                .map(AxisValue::Number)
                .map_err(|_| bad(format!("`{raw}` is not a number"))),
        }
    }

    fn value_from_json(&self, v: &Value) -> Result<AxisValue, SweepError> {
        match (self, v) {
            (Axis::StreakMode, Value::String(s)) => self.parse_value(s),
            (Axis::StreakMode, other) => Err(SweepError::InvalidAxisValue {
                axis: self.name(),
                reason: format!("expected a string, got {other}"),
            }),
            (_, Value::Number(n)) => Ok(AxisValue::Number(n.as_f64().unwrap_or(f64::NAN))),
            (_, other) => Err(SweepError::InvalidAxisValue {
                axis: self.name(),
                reason: format!("expected a number, got {other}"),
            }),
        }
    }

    fn apply(&self, params: ModelParams, value: &AxisValue) -> Result<ModelParams, SweepError> {
        let wrap = |e: crate::model::ModelError| SweepError::InvalidAxisValue {
            axis: self.name(),
            reason: e.to_string(),
        };
        match (self, value) {
            (Axis::Alpha, AxisValue::Number(x)) => params.with_alpha(*x).map_err(wrap),
            (Axis::Beta, AxisValue::Number(x)) => params.with_beta(*x).map_err(wrap),
            (Axis::TaDays, AxisValue::Number(x)) => params.with_ta_days(*x).map_err(wrap),
            (Axis::BaseValue(None), AxisValue::Number(x)) => params.with_uniform_base_value(*x).map_err(wrap),
            (Axis::BaseValue(Some(kind)), AxisValue::Number(x)) => params.with_base_value(kind, *x).map_err(wrap),
            (Axis::StreakMode, AxisValue::Mode(m)) => Ok(params.with_streak_mode(*m)),
            (axis, value) => Err(SweepError::InvalidAxisValue {
                axis: axis.name(),
                reason: format!("value {value} has the wrong type"),
            }),
        }
    }
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

impl FromStr for Axis {
    type Err = SweepError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        match s {
            "alpha" => Ok(Axis::Alpha),
            "beta" => Ok(Axis::Beta),
            "ta_days" | "ta" | "t_a" => Ok(Axis::TaDays),
            "base_value" | "base_values" => Ok(Axis::BaseValue(None)),
            "streak_mode" => Ok(Axis::StreakMode),
            _ => match s.strip_prefix("base_value.") {
                Some(kind) if !kind.is_empty() => Ok(Axis::BaseValue(Some(kind.to_string()))),
                _ => Err(SweepError::UnknownAxis(s.to_string())),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum AxisValue {
    Number(f64),
    Mode(StreakMode),
}

impl fmt::Display for AxisValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AxisValue::Number(x) => write!(f, "{x}"),
            AxisValue::Mode(m) => write!(f, "{m}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepAxis {
    pub axis: Axis,
    pub values: Vec<AxisValue>,
}

impl SweepAxis {
    /// Parses `name=v1,v2,...`.
    pub fn parse(spec: &str) -> Result<Self, SweepError> {
        let (name, values) = spec
            .split_once('=')
            .ok_or_else(|| SweepError::Spec(format!("expected `axis=v1,v2,...`, got `{spec}`")))?;
        let axis: Axis = name.parse()?;
        let values = values
            .split(',')
            .filter(|v| !v.trim().is_empty())
            .map(|v| axis.parse_value(v))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(SweepAxis { axis, values })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WhichSet {
    Reputation,
    Historical,
    #[default]
    Both,
}

impl WhichSet {
    pub fn members(self) -> Vec<Which> {
        match self {
            WhichSet::Reputation => vec![Which::Reputation],
            WhichSet::Historical => vec![Which::Historical],
            WhichSet::Both => vec![Which::Reputation, Which::Historical],
        }
    }
}

impl FromStr for WhichSet {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "reputation" => Ok(WhichSet::Reputation),
            "historical" => Ok(WhichSet::Historical),
            "both" => Ok(WhichSet::Both),
            other => Err(format!("expected reputation, historical or both, got `{other}`")),
        }
    }
}

/// A validated grid over model parameters.
#[derive(Debug, Clone)]
pub struct SweepSpec {
    axes: Vec<SweepAxis>,
    fixed: ModelParams,
    which: WhichSet,
}

impl SweepSpec {
    /// Every axis value is checked against `fixed` on its own, so an invalid
    /// value is reported with its axis name before anything runs.
    pub fn new(axes: Vec<SweepAxis>, fixed: ModelParams, which: WhichSet) -> Result<Self, SweepError> {
        if axes.is_empty() {
            return Err(SweepError::NoAxes);
        }
        for (k, axis) in axes.iter().enumerate() {
            if axis.values.is_empty() {
                return Err(SweepError::EmptyAxis(axis.axis.name()));
            }
            if axes[..k].iter().any(|a| a.axis == axis.axis) {
                return Err(SweepError::DuplicateAxis(axis.axis.name()));
            }
            for value in &axis.values {
                axis.axis.apply(fixed.clone(), value)?;
            }
        }
        Ok(SweepSpec { axes, fixed, which })
    }

    /// Reads `{"axes": {"beta": [0.9, 0.99], ...}, "which": "both"}`. Axis
    /// order follows the JSON object. A `"fixed"` object, when present,
    /// replaces `fixed`.
    pub fn from_json(value: &Value, fixed: ModelParams) -> Result<Self, SweepError> {
        let obj = value
            .as_object()
            .ok_or_else(|| SweepError::Spec("sweep spec must be a JSON object".into()))?;
        let fixed = match obj.get("fixed") {
            Some(v) => serde_json::from_value(v.clone()).map_err(|e| SweepError::Spec(format!("fixed: {e}")))?,
            None => fixed,
        };
        let which = match obj.get("which") {
            Some(Value::String(s)) => s.parse().map_err(SweepError::Spec)?,
            Some(other) => return Err(SweepError::Spec(format!("which: expected a string, got {other}"))),
            None => WhichSet::default(),
        };
        let mut axes = Vec::new();
        if let Some(raw_axes) = obj.get("axes") {
            let raw_axes = raw_axes
                .as_object()
                .ok_or_else(|| SweepError::Spec("axes must be an object of arrays".into()))?;
            for (name, values) in raw_axes {
                let axis: Axis = name.parse()?;
                let values = values
                    .as_array()
                    .ok_or_else(|| SweepError::Spec(format!("axis `{name}` must be an array")))?
                    .iter()
                    .map(|v| axis.value_from_json(v))
                    .collect::<Result<Vec<_>, _>>()?;
                axes.push(SweepAxis { axis, values });
            }
        }
        SweepSpec::new(axes, fixed, which)
    }

    pub fn axes(&self) -> &[SweepAxis] {
        &self.axes
    }

    pub fn fixed(&self) -> &ModelParams {
        &self.fixed
    }

    pub fn which(&self) -> WhichSet {
        self.which
    }

    pub fn n_points(&self) -> usize {
        self.axes.iter().map(|a| a.values.len()).product()
    }

    /// Grid points in lexicographic order of axis declaration (the first
    /// axis varies slowest).
    pub fn points(&self) -> Result<Vec<GridPoint>, SweepError> {
        let mut points = Vec::with_capacity(self.n_points());
        let mut idx = vec![0usize; self.axes.len()];
        loop {
            let mut params = self.fixed.clone();
            let mut coords = Vec::with_capacity(self.axes.len());
            for (axis, &k) in self.axes.iter().zip(&idx) {
                let value = &axis.values[k];
                params = axis.axis.apply(params, value)?;
                coords.push(value.clone());
            }
            points.push(GridPoint { params, coords });

            let mut pos = self.axes.len();
            loop {
                if pos == 0 {
                    return Ok(points);
                }
                pos -= 1;
                idx[pos] += 1;
                if idx[pos] < self.axes[pos].values.len() {
                    break;
                }
                idx[pos] = 0;
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridPoint {
    pub params: ModelParams,
    /// One value per axis, in declaration order.
    pub coords: Vec<AxisValue>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub point: usize,
    pub coords: Vec<AxisValue>,
    pub params: ModelParams,
    pub which: Which,
    pub mu: f64,
    pub sigma: f64,
}

/// Evaluates every grid point against `reference`. The reference fixes the
/// user universe and the day range; it is shared read-only by all points.
pub fn run_sweep(
    events: &[InteractionEvent],
    reference: &SnapshotSeries,
    spec: &SweepSpec,
) -> Result<Vec<SweepRow>, SweepError> {
    let points = spec.points()?;
    let days = reference.days();
    let range = DayRange::new(days[0], days[days.len() - 1]).map_err(CompareError::from)?;
    if range.len() != days.len() {
        return Err(SweepError::Spec("reference days are not a contiguous range".into()));
    }
    let members = spec.which().members();

    let per_point: Vec<Vec<SweepRow>> = points
        .into_par_iter()
        .enumerate()
        .map(|(point, gp)| -> Result<Vec<SweepRow>, SweepError> {
            let snapshots = dibrm_snapshot_pair(events, &gp.params, reference.users(), range)?;
            members
                .iter()
                .map(|&which| {
                    let report = mu_metric(reference, snapshots.get(which), which)?;
                    Ok(SweepRow {
                        point,
                        coords: gp.coords.clone(),
                        params: gp.params.clone(),
                        which,
                        mu: report.mu,
                        sigma: report.sigma,
                    })
                })
                .collect()
        })
        .collect::<Result<_, _>>()?;
    Ok(per_point.into_iter().flatten().collect())
}

pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], sink: W) -> Result<(), csv::Error> {
    let mut writer = csv::Writer::from_writer(sink);
    writer.write_record(SWEEP_HEADERS)?;
    for row in rows {
        writer.write_record([
            row.params.alpha().to_string(),
            row.params.beta().to_string(),
            row.params.ta_days().to_string(),
            row.params.base_values_label(),
            row.params.streak_mode().to_string(),
            row.which.to_string(),
            row.mu.to_string(),
            row.sigma.to_string(),
        ])?;
    }
    writer.flush()?;
    Ok(())
}

/// Compact grid table: a row number, one column per swept axis, then mu and
/// sigma for each evaluated quantity (`mu_D`/`sigma_D` for reputation,
/// `mu_H`/`sigma_H` for historical).
#[derive(Debug, Clone, PartialEq)]
pub struct SweepTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl SweepTable {
    pub fn build(spec: &SweepSpec, rows: &[SweepRow]) -> Self {
        let members = spec.which().members();
        let mut header = vec!["#".to_string()];
        header.extend(spec.axes().iter().map(|a| a.axis.label()));
        for which in &members {
            let tag = match which {
                Which::Reputation => "D",
                Which::Historical => "H",
            };
            header.push(format!("mu_{tag}"));
            header.push(format!("sigma_{tag}"));
        }

        let mut table_rows = Vec::new();
        for (n, chunk) in rows.chunks(members.len()).enumerate() {
            let mut cells = vec![(n + 1).to_string()];
            cells.extend(chunk[0].coords.iter().map(ToString::to_string));
            for row in chunk {
                cells.push(format!("{:.4}", row.mu));
                cells.push(format!("{:.4}", row.sigma));
            }
            table_rows.push(cells);
        }
        SweepTable {
            header,
            rows: table_rows,
        }
    }

    pub fn to_markdown(&self) -> String {
        let line = |cells: &[String]| format!("| {} |\n", cells.join(" | "));
        let mut out = line(&self.header);
        out.push_str(&line(&vec!["---".to_string(); self.header.len()]));
        for row in &self.rows {
            out.push_str(&line(row));
        }
        out
    }
}
