//! Scenario categories, record ingestion and exposure.
//!
//! A [`ScenarioCategory`] is the qualitative class (e.g. cut-in); each
//! [`ScenarioRecord`] is one observed scenario with its raw parameter vector.
//! Records are read from CSV where the header row lists the parameter names
//! in category order, optionally followed by `start,end` columns holding the
//! time span the scenario was mined from.

pub mod mining;

pub use mining::{
    mine_scenarios, read_tracks, read_tracks_from, MinedSpan, MiningOptions, TagTrack,
};

use serde::{Deserialize, Serialize};
use std::collections::HashSet;
use std::fmt;
use std::io::{Read, Write};
use std::path::Path;
use thiserror::Error;

use crate::density::{ParamTransform, ZeroRegion};

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("malformed scenario file: {0}")]
    Malformed(String),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("header {found:?} does not match category parameters {expected:?}")]
    HeaderMismatch {
        expected: Vec<String>,
        found: Vec<String>,
    },
    #[error("row {row}: expected {expected} values, found {found}")]
    DimensionMismatch {
        row: usize,
        expected: usize,
        found: usize,
    },
    #[error("row {row}: non-finite value in column {column}")]
    NonFinite { row: usize, column: String },
    #[error("{} invalid row(s): {}", .0.len(), summarize(.0))]
    Validation(Vec<RowDiagnostic>),
    #[error("invalid category {id}: {reason}")]
    InvalidCategory { id: String, reason: String },
    #[error("duplicate category id {0}")]
    DuplicateCategory(String),
    #[error("hours of driving must be positive, got {0}")]
    NonPositiveHours(f64),
}

fn summarize(diags: &[RowDiagnostic]) -> String {
    let shown: Vec<String> = diags.iter().take(5).map(ToString::to_string).collect();
    let more = if diags.len() > 5 { ", ..." } else { "" };
    format!("{}{more}", shown.join("; "))
}

/// One rejected CSV row. `row` counts data rows from 1.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RowDiagnostic {
    pub row: usize,
    pub reason: String,
}

impl fmt::Display for RowDiagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "row {}: {}", self.row, self.reason)
    }
}

/// The three scenario families with a known parameterization and simulator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScenarioFamily {
    /// Leading vehicle decelerating: `[v0_lead, dv/v0_lead, mean_decel]`.
    Lvd,
    /// Cut-in: `[gap0, v0_ego, v_lead/v0_ego]`.
    CutIn,
    /// Approaching slower vehicle: `[v0_ego, v_lead/v0_ego]`.
    Asv,
}

impl ScenarioFamily {
    pub fn parameter_count(self) -> usize {
        match self {
            ScenarioFamily::Lvd | ScenarioFamily::CutIn => 3,
            ScenarioFamily::Asv => 2,
        }
    }

    /// Family-specific physical validity of a raw parameter vector.
    pub fn validate(self, theta: &[f64]) -> Result<(), String> {
        if theta.len() != self.parameter_count() {
            return Err(format!(
                "expected {} parameters, found {}",
                self.parameter_count(),
                theta.len()
            ));
        }
        if let Some(v) = theta.iter().find(|v| !v.is_finite()) {
            return Err(format!("non-finite value {v}"));
        }
        let fail = |msg: &str| Err(msg.to_string());
        match self {
            ScenarioFamily::Lvd => {
                if theta[0] <= 0.0 {
                    return fail("initial lead speed must be > 0");
                }
                if !(theta[1] > 0.0 && theta[1] < 1.0) {
                    return fail("speed-difference ratio must be in (0, 1)");
                }
                if theta[2] <= 0.0 {
                    return fail("mean deceleration must be > 0");
                }
            }
            ScenarioFamily::CutIn => {
                if theta[0] <= 0.0 {
                    return fail("initial gap must be > 0");
                }
                if theta[1] <= 0.0 {
                    return fail("initial ego speed must be > 0");
                }
                if theta[2] <= 0.0 {
                    return fail("speed ratio must be > 0");
                }
            }
            ScenarioFamily::Asv => {
                if theta[0] <= 0.0 {
                    return fail("initial ego speed must be > 0");
                }
                if !(theta[1] >= 0.0 && theta[1] < 1.0) {
                    return fail("speed ratio must be in [0, 1)");
                }
            }
        }
        Ok(())
    }
}

impl fmt::Display for ScenarioFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ScenarioFamily::Lvd => "lvd",
            ScenarioFamily::CutIn => "cut-in",
            ScenarioFamily::Asv => "asv",
        })
    }
}

impl std::str::FromStr for ScenarioFamily {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "lvd" => Ok(ScenarioFamily::Lvd),
            "cut-in" => Ok(ScenarioFamily::CutIn),
            "asv" => Ok(ScenarioFamily::Asv),
            other => Err(format!(
                "unknown scenario family {other:?} (expected lvd, cut-in or asv)"
            )),
        }
    }
}

/// Schema of a scenario category.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioCategory {
    pub id: String,
    pub name: String,
    pub parameter_names: Vec<String>,
    #[serde(default)]
    pub units: Vec<String>,
    pub parameter_transforms: Vec<ParamTransform>,
    #[serde(default)]
    pub family: Option<ScenarioFamily>,
    #[serde(default)]
    pub zero_regions: Vec<ZeroRegion>,
}

impl ScenarioCategory {
    pub fn lvd() -> Self {
        ScenarioCategory {
            id: "lvd".into(),
            name: "Leading vehicle decelerating".into(),
            parameter_names: vec!["v0_lead".into(), "dv_ratio".into(), "mean_decel".into()],
            units: vec!["m/s".into(), "-".into(), "m/s^2".into()],
            parameter_transforms: vec![
                ParamTransform::Identity,
                ParamTransform::Logit,
                ParamTransform::Log,
            ],
            family: Some(ScenarioFamily::Lvd),
            zero_regions: vec![ZeroRegion::below(0, 0.0)],
        }
    }

    pub fn cut_in() -> Self {
        ScenarioCategory {
            id: "cut-in".into(),
            name: "Cut-in".into(),
            parameter_names: vec!["gap0".into(), "v0_ego".into(), "speed_ratio".into()],
            units: vec!["m".into(), "m/s".into(), "-".into()],
            parameter_transforms: vec![
                ParamTransform::Log,
                ParamTransform::Identity,
                ParamTransform::Identity,
            ],
            family: Some(ScenarioFamily::CutIn),
            zero_regions: vec![ZeroRegion::below(1, 0.0), ZeroRegion::below(2, 0.0)],
        }
    }

    pub fn asv() -> Self {
        ScenarioCategory {
            id: "asv".into(),
            name: "Approaching slower vehicle".into(),
            parameter_names: vec!["v0_ego".into(), "speed_ratio".into()],
            units: vec!["m/s".into(), "-".into()],
            parameter_transforms: vec![ParamTransform::Identity, ParamTransform::Identity],
            family: Some(ScenarioFamily::Asv),
            zero_regions: vec![
                ZeroRegion::below(0, 0.0),
                ZeroRegion::below(1, 0.0),
                ZeroRegion::above(1, 1.0),
            ],
        }
    }

    /// Preset schema by id: `lvd`, `cut-in` or `asv`.
    pub fn preset(id: &str) -> Option<Self> {
        match id {
            "lvd" => Some(Self::lvd()),
            "cut-in" => Some(Self::cut_in()),
            "asv" => Some(Self::asv()),
            _ => None,
        }
    }

    pub fn for_family(family: ScenarioFamily) -> Self {
        match family {
            ScenarioFamily::Lvd => Self::lvd(),
            ScenarioFamily::CutIn => Self::cut_in(),
            ScenarioFamily::Asv => Self::asv(),
        }
    }

    pub fn dim(&self) -> usize {
        self.parameter_names.len()
    }

    pub fn validate(&self) -> Result<(), StoreError> {
        let bad = |reason: String| StoreError::InvalidCategory {
            id: self.id.clone(),
            reason,
        };
        if self.parameter_names.is_empty() {
            return Err(bad("no parameters".into()));
        }
        if self.parameter_transforms.len() != self.dim() {
            return Err(bad(format!(
                "{} transforms for {} parameters",
                self.parameter_transforms.len(),
                self.dim()
            )));
        }
        if !self.units.is_empty() && self.units.len() != self.dim() {
            return Err(bad("units list length differs from parameter count".into()));
        }
        if let Some(f) = self.family {
            if f.parameter_count() != self.dim() {
                return Err(bad(format!(
                    "family {f} needs {} parameters",
                    f.parameter_count()
                )));
            }
        }
        if let Some(z) = self.zero_regions.iter().find(|z| z.dim >= self.dim()) {
            return Err(bad(format!("zero region on missing dimension {}", z.dim)));
        }
        Ok(())
    }

    /// Checks one raw parameter vector against the category invariants.
    pub fn validate_theta(&self, theta: &[f64]) -> Result<(), String> {
        if theta.len() != self.dim() {
            return Err(format!(
                "expected {} values, found {}",
                self.dim(),
                theta.len()
            ));
        }
        for (j, (x, t)) in theta.iter().zip(&self.parameter_transforms).enumerate() {
            if !x.is_finite() {
                return Err(format!("{} is not finite", self.parameter_names[j]));
            }
            if !t.accepts(*x) {
                return Err(format!(
                    "{} = {x} outside the {t:?} transform domain",
                    self.parameter_names[j]
                ));
            }
        }
        if let Some(f) = self.family {
            f.validate(theta)?;
        }
        Ok(())
    }
}

/// Checks a set of categories for unique ids and valid schemas.
pub fn validate_categories(categories: &[ScenarioCategory]) -> Result<(), StoreError> {
    let mut seen = HashSet::new();
    for c in categories {
        c.validate()?;
        if !seen.insert(c.id.as_str()) {
            return Err(StoreError::DuplicateCategory(c.id.clone()));
        }
    }
    Ok(())
}

/// One observed scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioRecord {
    pub category_id: String,
    pub theta: Vec<f64>,
    #[serde(default)]
    pub source_time_span: Option<(f64, f64)>,
}

/// Reads and validates scenario records for `category` from CSV.
pub fn read_records<R: Read>(
    reader: R,
    category: &ScenarioCategory,
) -> Result<Vec<ScenarioRecord>, StoreError> {
    category.validate()?;
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    let d = category.dim();
    let with_span = header.len() == d + 2 && header[d] == "start" && header[d + 1] == "end";
    if header.len() < d
        || header[..d] != category.parameter_names[..]
        || (header.len() != d && !with_span)
    {
        return Err(StoreError::HeaderMismatch {
            expected: category.parameter_names.clone(),
            found: header,
        });
    }
    let mut records = Vec::new();
    let mut diagnostics = Vec::new();
    for (k, row) in rdr.records().enumerate() {
        let row_no = k + 1;
        let row = row.map_err(|e| match e.kind() {
            csv::ErrorKind::UnequalLengths { len, .. } => StoreError::DimensionMismatch {
                row: row_no,
                expected: header.len(),
                found: *len as usize,
            },
            _ => StoreError::Csv(e),
        })?;
        let mut values = Vec::with_capacity(row.len());
        for (field, name) in row.iter().zip(&header) {
            let v: f64 = field.parse().map_err(|_| {
                StoreError::Malformed(format!("row {row_no}: cannot parse {name} = {field:?}"))
            })?;
            if !v.is_finite() {
                return Err(StoreError::NonFinite {
                    row: row_no,
                    column: name.clone(),
                });
            }
            values.push(v);
        }
        let span = if with_span {
            let (s, e) = (values[d], values[d + 1]);
            if s >= e {
                diagnostics.push(RowDiagnostic {
                    row: row_no,
                    reason: format!("start {s} not before end {e}"),
                });
                continue;
            }
            values.truncate(d);
            Some((s, e))
        } else {
            None
        };
        match category.validate_theta(&values) {
            Ok(()) => records.push(ScenarioRecord {
                category_id: category.id.clone(),
                theta: values,
                source_time_span: span,
            }),
            Err(reason) => diagnostics.push(RowDiagnostic {
                row: row_no,
                reason,
            }),
        }
    }
    if diagnostics.is_empty() {
        Ok(records)
    } else {
        Err(StoreError::Validation(diagnostics))
    }
}

pub fn load_records(
    path: impl AsRef<Path>,
    category: &ScenarioCategory,
) -> Result<Vec<ScenarioRecord>, StoreError> {
    let file = std::fs::File::open(path)?;
    read_records(file, category)
}

/// Writes records in the same CSV layout [`read_records`] accepts.
///
/// Span columns are written when any record carries a span; in that case all
/// records must carry one.
pub fn write_records<W: Write>(
    writer: W,
    category: &ScenarioCategory,
    records: &[ScenarioRecord],
) -> Result<(), StoreError> {
    let with_span = records.iter().any(|r| r.source_time_span.is_some());
    let mut w = csv::Writer::from_writer(writer);
    let mut header = category.parameter_names.clone();
    if with_span {
        header.extend(["start".to_string(), "end".to_string()]);
    }
    w.write_record(&header)?;
    for (k, r) in records.iter().enumerate() {
        if r.theta.len() != category.dim() {
            return Err(StoreError::DimensionMismatch {
                row: k + 1,
                expected: category.dim(),
                found: r.theta.len(),
            });
        }
        let mut fields: Vec<String> = r.theta.iter().map(|v| format_f64(*v)).collect();
        if with_span {
            let (s, e) = r.source_time_span.ok_or_else(|| {
                StoreError::Malformed(format!("row {}: missing time span", k + 1))
            })?;
            fields.push(format_f64(s));
            fields.push(format_f64(e));
        }
        w.write_record(&fields)?;
    }
    w.flush()?;
    Ok(())
}

pub fn save_records(
    path: impl AsRef<Path>,
    category: &ScenarioCategory,
    records: &[ScenarioRecord],
) -> Result<(), StoreError> {
    let file = std::fs::File::create(path)?;
    write_records(std::io::BufWriter::new(file), category, records)
}

// shortest representation that parses back to the same bits
fn format_f64(v: f64) -> String {
    format!("{v:?}")
}

/// Encounters per hour of driving for one category.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExposureEstimate {
    pub category_id: String,
    pub count: usize,
    pub hours: f64,
    pub rate_per_hour: f64,
}

impl ExposureEstimate {
    pub fn from_count(
        category_id: impl Into<String>,
        count: usize,
        hours: f64,
    ) -> Result<Self, StoreError> {
        if !(hours > 0.0 && hours.is_finite()) {
            return Err(StoreError::NonPositiveHours(hours));
        }
        Ok(ExposureEstimate {
            category_id: category_id.into(),
            count,
            hours,
            rate_per_hour: count as f64 / hours,
        })
    }
}

/// Empirical encounter rate: each record counts as one encounter.
pub fn exposure(
    category_id: &str,
    records: &[ScenarioRecord],
    hours: f64,
) -> Result<ExposureEstimate, StoreError> {
    ExposureEstimate::from_count(category_id, records.len(), hours)
}
