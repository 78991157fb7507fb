//! Execution records, feature schemas, and log file ingestion.
//!
//! A log is a CSV table of job (or task) executions plus a sidecar JSON
//! schema declaring each feature's kind, domain, and role. Missing values
//! are encoded as empty CSV cells. Every log has exactly one outcome
//! feature, named `duration`, which is stored on the record itself and is
//! also addressable like any other raw feature.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Diagnostic, Error, Result};

/// Name of the designated outcome feature.
pub const DURATION: &str = "duration";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureKind {
    Numeric,
    Nominal,
}

/// Informational tag describing where a feature comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureRole {
    Config,
    Metric,
    Data,
    App,
    Outcome,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSchema {
    pub name: String,
    pub kind: FeatureKind,
    pub role: FeatureRole,
    /// Finite value set; required for nominal features.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domain: Option<Vec<String>>,
    /// Optional `[min, max]` range for numeric features.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub range: Option<[f64; 2]>,
}

impl FeatureSchema {
    pub fn numeric(name: impl Into<String>, role: FeatureRole) -> Self {
        FeatureSchema {
            name: name.into(),
            kind: FeatureKind::Numeric,
            role,
            domain: None,
            range: None,
        }
    }

    pub fn nominal<S: Into<String>>(
        name: impl Into<String>,
        role: FeatureRole,
        domain: impl IntoIterator<Item = S>,
    ) -> Self {
        FeatureSchema {
            name: name.into(),
            kind: FeatureKind::Nominal,
            role,
            domain: Some(domain.into_iter().map(Into::into).collect()),
            range: None,
        }
    }

    pub fn outcome() -> Self {
        FeatureSchema::numeric(DURATION, FeatureRole::Outcome)
    }

    /// Checks one value against this feature's kind and declared domain.
    fn check_value(&self, value: &Value) -> std::result::Result<(), String> {
        match (self.kind, value) {
            (FeatureKind::Numeric, Value::Num(x)) => {
                if !x.is_finite() {
                    return Err(format!("feature {}: value is not finite", self.name));
                }
                if let Some([lo, hi]) = self.range {
                    if *x < lo || *x > hi {
                        return Err(format!(
                            "feature {}: value {x} outside declared range [{lo}, {hi}]",
                            self.name
                        ));
                    }
                }
                Ok(())
            }
            (FeatureKind::Nominal, Value::Str(s)) => match &self.domain {
                Some(dom) if !dom.iter().any(|d| d == s) => Err(format!(
                    "feature {}: value {s:?} not in declared domain",
                    self.name
                )),
                _ => Ok(()),
            },
            (FeatureKind::Numeric, Value::Str(s)) => Err(format!(
                "feature {}: expected a number, got {s:?}",
                self.name
            )),
            (FeatureKind::Nominal, Value::Num(x)) => Err(format!(
                "feature {}: expected a nominal value, got number {x}",
                self.name
            )),
        }
    }
}

/// A raw feature value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Value {
    Num(f64),
    Str(String),
}

impl Value {
    pub fn as_ref(&self) -> ValueRef<'_> {
        match self {
            Value::Num(x) => ValueRef::Num(*x),
            Value::Str(s) => ValueRef::Str(s),
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Num(x) => write!(f, "{x}"),
            Value::Str(s) => write!(f, "{s}"),
        }
    }
}

/// Borrowed view of a [`Value`]; lets `duration` be materialized without
/// cloning strings in pair-encoding loops.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ValueRef<'a> {
    Num(f64),
    Str(&'a str),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LogLevel {
    Job,
    Task,
}

impl fmt::Display for LogLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LogLevel::Job => write!(f, "job"),
            LogLevel::Task => write!(f, "task"),
        }
    }
}

/// The ordered set of feature declarations shared by all records of a log.
///
/// Construction enforces unique feature names and the presence of exactly
/// one outcome feature: numeric, named `duration`.
#[derive(Debug, Clone)]
pub struct LogSchema {
    features: Vec<FeatureSchema>,
    by_name: HashMap<String, usize>,
}

impl LogSchema {
    pub fn new(features: Vec<FeatureSchema>) -> Result<Self> {
        let mut by_name = HashMap::new();
        for (i, f) in features.iter().enumerate() {
            if by_name.insert(f.name.clone(), i).is_some() {
                return Err(Error::Schema(format!(
                    "duplicate feature name {:?}",
                    f.name
                )));
            }
            if f.kind == FeatureKind::Nominal && f.domain.is_none() {
                return Err(Error::Schema(format!(
                    "nominal feature {:?} must declare a domain",
                    f.name
                )));
            }
        }
        let outcomes: Vec<_> = features
            .iter()
            .filter(|f| f.role == FeatureRole::Outcome)
            .collect();
        match outcomes.as_slice() {
            [only] if only.name == DURATION && only.kind == FeatureKind::Numeric => {}
            [] => return Err(Error::Schema("no outcome feature declared".into())),
            _ => {
                return Err(Error::Schema(format!(
                    "exactly one outcome feature is allowed and it must be numeric and named {DURATION:?}"
                )))
            }
        }
        Ok(LogSchema { features, by_name })
    }

    pub fn features(&self) -> &[FeatureSchema] {
        &self.features
    }

    pub fn get(&self, name: &str) -> Option<&FeatureSchema> {
        self.by_name.get(name).map(|&i| &self.features[i])
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.by_name.get(name).copied()
    }
}

/// One job or task execution.
#[derive(Debug, Clone, PartialEq)]
pub struct ExecutionRecord {
    pub id: String,
    /// Set iff the record is a task.
    pub parent_job_id: Option<String>,
    /// Non-outcome raw feature values; an absent key means missing.
    pub values: BTreeMap<String, Value>,
    pub duration: f64,
}

impl ExecutionRecord {
    pub fn new(id: impl Into<String>, duration: f64) -> Self {
        ExecutionRecord {
            id: id.into(),
            parent_job_id: None,
            values: BTreeMap::new(),
            duration,
        }
    }

    pub fn with_parent(mut self, parent: impl Into<String>) -> Self {
        self.parent_job_id = Some(parent.into());
        self
    }

    pub fn set(mut self, feature: impl Into<String>, value: Value) -> Self {
        self.values.insert(feature.into(), value);
        self
    }

    /// Value of a raw feature, `duration` included; `None` means missing.
    pub fn raw_value(&self, feature: &str) -> Option<ValueRef<'_>> {
        if feature == DURATION {
            return Some(ValueRef::Num(self.duration));
        }
        self.values.get(feature).map(Value::as_ref)
    }
}

/// An immutable log of past executions. Safe to share across threads once
/// built; all downstream computation treats it as read-only.
#[derive(Debug, Clone)]
pub struct ExecutionLog {
    pub schema: LogSchema,
    pub records: Vec<ExecutionRecord>,
    pub level: LogLevel,
}

impl ExecutionLog {
    pub fn record(&self, id: &str) -> Option<&ExecutionRecord> {
        self.records.iter().find(|r| r.id == id)
    }
}

/// Sidecar schema file contents.
#[derive(Debug, Serialize, Deserialize)]
struct SchemaFile {
    level: LogLevel,
    features: Vec<FeatureSchema>,
}

const ID_COLUMN: &str = "id";
const PARENT_COLUMN: &str = "parent_job_id";

/// Loads and validates a log from a CSV file plus its JSON schema sidecar.
///
/// Any row that violates the schema is reported with its CSV line number;
/// the load fails if there is at least one violation.
pub fn load_log(schema_path: &Path, log_path: &Path) -> Result<ExecutionLog> {
    let schema_text =
        std::fs::read_to_string(schema_path).map_err(|e| Error::io(schema_path, e))?;
    let schema_file: SchemaFile =
        serde_json::from_str(&schema_text).map_err(|e| Error::SchemaFile {
            path: schema_path.to_owned(),
            message: e.to_string(),
        })?;
    let schema = LogSchema::new(schema_file.features)?;
    let level = schema_file.level;

    let mut reader = csv::ReaderBuilder::new()
        .flexible(false)
        .from_path(log_path)
        .map_err(|e| Error::SchemaFile {
            path: log_path.to_owned(),
            message: e.to_string(),
        })?;

    let headers = reader
        .headers()
        .map_err(|e| Error::SchemaFile {
            path: log_path.to_owned(),
            message: e.to_string(),
        })?
        .clone();

    let mut diagnostics = Vec::new();
    let mut columns: Vec<Option<usize>> = Vec::new(); // per CSV column: schema index
    let mut id_col = None;
    let mut parent_col = None;
    let mut seen = HashSet::new();
    for (c, name) in headers.iter().enumerate() {
        if !seen.insert(name.to_string()) {
            diagnostics.push(Diagnostic::new(
                "header",
                format!("duplicate column {name:?}"),
            ));
        }
        if name == ID_COLUMN {
            id_col = Some(c);
            columns.push(None);
        } else if name == PARENT_COLUMN {
            parent_col = Some(c);
            columns.push(None);
        } else if let Some(i) = schema.index_of(name) {
            columns.push(Some(i));
        } else {
            diagnostics.push(Diagnostic::new(
                "header",
                format!("unknown feature {name:?} not declared in the schema"),
            ));
            columns.push(None);
        }
    }
    if id_col.is_none() {
        diagnostics.push(Diagnostic::new("header", "missing required `id` column"));
    }
    if level == LogLevel::Task && parent_col.is_none() {
        diagnostics.push(Diagnostic::new(
            "header",
            "task-level log requires a `parent_job_id` column",
        ));
    }
    let mut covered: HashSet<usize> = columns.iter().flatten().copied().collect();
    for (i, f) in schema.features().iter().enumerate() {
        if !covered.remove(&i) {
            diagnostics.push(Diagnostic::new(
                "header",
                format!("declared feature {:?} has no column", f.name),
            ));
        }
    }
    if !diagnostics.is_empty() {
        return Err(Error::InvalidLog(diagnostics));
    }
    let id_col = id_col.unwrap();

    let mut records = Vec::new();
    let mut ids = HashSet::new();
    for row in reader.records() {
        let row = match row {
            Ok(r) => r,
            Err(e) => {
                diagnostics.push(Diagnostic::new("log", e.to_string()));
                continue;
            }
        };
        let line = row
            .position()
            .map(|p| p.line().to_string())
            .unwrap_or_else(|| "?".into());
        let loc = format!("row {line}");

        let id = row.get(id_col).unwrap_or("").trim().to_string();
        if id.is_empty() {
            diagnostics.push(Diagnostic::new(loc.clone(), "empty id"));
            continue;
        }
        if !ids.insert(id.clone()) {
            diagnostics.push(Diagnostic::new(loc.clone(), format!("duplicate id {id:?}")));
            continue;
        }

        let parent = parent_col
            .and_then(|c| row.get(c))
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(String::from);
        if level == LogLevel::Task && parent.is_none() {
            diagnostics.push(Diagnostic::new(
                loc.clone(),
                "task record lacks parent_job_id",
            ));
            continue;
        }

        let mut values = BTreeMap::new();
        let mut duration = None;
        let mut row_ok = true;
        for (c, cell) in row.iter().enumerate() {
            let Some(i) = columns[c] else { continue };
            let feature = &schema.features()[i];
            let cell = cell.trim();
            if cell.is_empty() {
                if feature.name == DURATION {
                    diagnostics.push(Diagnostic::new(loc.clone(), "missing duration"));
                    row_ok = false;
                }
                continue; // empty cell encodes a missing value
            }
            let value = match feature.kind {
                FeatureKind::Numeric => match cell.parse::<f64>() {
                    Ok(x) => Value::Num(x),
                    Err(_) => {
                        diagnostics.push(Diagnostic::new(
                            loc.clone(),
                            format!("feature {}: {cell:?} is not a number", feature.name),
                        ));
                        row_ok = false;
                        continue;
                    }
                },
                FeatureKind::Nominal => Value::Str(cell.to_string()),
            };
            if let Err(msg) = feature.check_value(&value) {
                diagnostics.push(Diagnostic::new(loc.clone(), msg));
                row_ok = false;
                continue;
            }
            if feature.name == DURATION {
                match value {
                    Value::Num(x) if x > 0.0 => duration = Some(x),
                    _ => {
                        diagnostics.push(Diagnostic::new(
                            loc.clone(),
                            "duration must be a positive number",
                        ));
                        row_ok = false;
                    }
                }
            } else {
                values.insert(feature.name.clone(), value);
            }
        }
        if !row_ok {
            continue;
        }
        let Some(duration) = duration else {
            diagnostics.push(Diagnostic::new(loc, "missing duration"));
            continue;
        };
        records.push(ExecutionRecord {
            id,
            parent_job_id: parent,
            values,
            duration,
        });
    }

    if !diagnostics.is_empty() {
        return Err(Error::InvalidLog(diagnostics));
    }
    Ok(ExecutionLog {
        schema,
        records,
        level,
    })
}

/// Checks every log invariant; returns one diagnostic per violation.
/// An empty result means the log is valid.
pub fn validate_log(log: &ExecutionLog) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    let mut ids = HashSet::new();
    for r in &log.records {
        if !ids.insert(r.id.as_str()) {
            out.push(Diagnostic::new(r.id.clone(), "duplicate id"));
        }
        match (log.level, &r.parent_job_id) {
            (LogLevel::Task, None) => out.push(Diagnostic::new(
                r.id.clone(),
                "task record lacks parent_job_id",
            )),
            (LogLevel::Job, Some(_)) => out.push(Diagnostic::new(
                r.id.clone(),
                "job record must not have parent_job_id",
            )),
            _ => {}
        }
        if r.duration <= 0.0 || r.duration.is_nan() {
            out.push(Diagnostic::new(r.id.clone(), "duration must be positive"));
        }
        for (name, value) in &r.values {
            match log.schema.get(name) {
                None => out.push(Diagnostic::new(
                    r.id.clone(),
                    format!("unknown feature {name:?}"),
                )),
                Some(f) if f.name == DURATION => out.push(Diagnostic::new(
                    r.id.clone(),
                    "duration must be stored on the record, not in values",
                )),
                Some(f) => {
                    if let Err(msg) = f.check_value(value) {
                        out.push(Diagnostic::new(r.id.clone(), msg));
                    }
                }
            }
        }
    }
    out
}

/// Writes a log back out in the same CSV + JSON schema format `load_log`
/// reads. Feature columns follow schema order; values round-trip exactly.
pub fn save_log(log: &ExecutionLog, schema_path: &Path, log_path: &Path) -> Result<()> {
    let schema_file = SchemaFile {
        level: log.level,
        features: log.schema.features().to_vec(),
    };
    let text = serde_json::to_string_pretty(&schema_file).expect("schema serializes");
    std::fs::write(schema_path, text).map_err(|e| Error::io(schema_path, e))?;

    let mut writer = csv::Writer::from_path(log_path).map_err(|e| Error::SchemaFile {
        path: log_path.to_owned(),
        message: e.to_string(),
    })?;
    let mut header = vec![ID_COLUMN.to_string()];
    if log.level == LogLevel::Task {
        header.push(PARENT_COLUMN.to_string());
    }
    header.extend(log.schema.features().iter().map(|f| f.name.clone()));
    writer
        .write_record(&header)
        .map_err(|e| Error::SchemaFile {
            path: log_path.to_owned(),
            message: e.to_string(),
        })?;
    for r in &log.records {
        let mut row = vec![r.id.clone()];
        if log.level == LogLevel::Task {
            row.push(r.parent_job_id.clone().unwrap_or_default());
        }
        for f in log.schema.features() {
            let cell = match r.raw_value(&f.name) {
                Some(ValueRef::Num(x)) => format!("{x}"),
                Some(ValueRef::Str(s)) => s.to_string(),
                None => String::new(),
            };
            row.push(cell);
        }
        writer.write_record(&row).map_err(|e| Error::SchemaFile {
            path: log_path.to_owned(),
            message: e.to_string(),
        })?;
    }
    writer.flush().map_err(|e| Error::io(log_path, e))?;
    Ok(())
}
