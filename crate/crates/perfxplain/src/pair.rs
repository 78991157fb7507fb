//! Pairwise feature encoding for ordered pairs of execution records.
//!
//! Every raw feature `f` contributes four derived features:
//!
//! - `f_isSame` in `{T, F}` — whether both records carry the same value;
//! - `f_compare` in `{LT, SIM, GT}` — direction of the numeric difference
//!   (numeric raw features only, missing otherwise);
//! - `f_diff` — the ordered `(left, right)` value pair (nominal only);
//! - `f` — the shared value when both sides agree, missing otherwise
//!   (the "base" feature).
//!
//! A missing raw value on either side makes all four derived features
//! missing for that raw feature: no comparison is defined.

use std::collections::HashMap;
use std::fmt;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::log_model::{
    ExecutionLog, ExecutionRecord, FeatureKind, FeatureRole, LogSchema, ValueRef,
};

/// Default relative-difference threshold under which two numbers compare
/// as similar.
pub const DEFAULT_SIMILARITY_THRESHOLD: f64 = 0.10;

/// Three-way outcome of comparing the left record's value to the right's.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Comparison {
    Lt,
    Sim,
    Gt,
}

impl Comparison {
    pub fn mirror(self) -> Comparison {
        match self {
            Comparison::Lt => Comparison::Gt,
            Comparison::Sim => Comparison::Sim,
            Comparison::Gt => Comparison::Lt,
        }
    }

    pub fn token(self) -> &'static str {
        match self {
            Comparison::Lt => "LT",
            Comparison::Sim => "SIM",
            Comparison::Gt => "GT",
        }
    }
}

impl fmt::Display for Comparison {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

/// Classifies `a` against `b`: similar when the absolute difference is
/// within `threshold` of the larger magnitude, otherwise LT/GT by sign.
/// The max-magnitude denominator makes the relation symmetric.
pub fn similarity(a: f64, b: f64, threshold: f64) -> Comparison {
    if (a - b).abs() <= threshold * a.abs().max(b.abs()) {
        Comparison::Sim
    } else if a < b {
        Comparison::Lt
    } else {
        Comparison::Gt
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    IsSame,
    Compare,
    Diff,
    Base,
}

impl Family {
    fn suffix(self) -> &'static str {
        match self {
            Family::IsSame => "_isSame",
            Family::Compare => "_compare",
            Family::Diff => "_diff",
            Family::Base => "",
        }
    }
}

/// Which derived-feature families an explainer may draw candidates from.
/// Level 1 keeps only `isSame`, level 2 adds `compare` and `diff`,
/// level 3 adds the base features.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum FeatureLevel {
    L1,
    L2,
    L3,
}

impl FeatureLevel {
    pub fn includes(self, family: Family) -> bool {
        match family {
            Family::IsSame => true,
            Family::Compare | Family::Diff => self >= FeatureLevel::L2,
            Family::Base => self >= FeatureLevel::L3,
        }
    }
}

impl TryFrom<u8> for FeatureLevel {
    type Error = Error;
    fn try_from(v: u8) -> Result<Self> {
        match v {
            1 => Ok(FeatureLevel::L1),
            2 => Ok(FeatureLevel::L2),
            3 => Ok(FeatureLevel::L3),
            other => Err(Error::Config(format!(
                "feature level must be 1..=3, got {other}"
            ))),
        }
    }
}

/// One derived feature of the pairwise catalog.
#[derive(Debug, Clone)]
pub struct DerivedFeature {
    /// Canonical derived name, e.g. `inputsize_compare` or `blocksize`.
    pub name: String,
    pub raw_name: String,
    pub raw_kind: FeatureKind,
    pub raw_role: FeatureRole,
    pub family: Family,
}

impl DerivedFeature {
    pub fn is_outcome(&self) -> bool {
        self.raw_role == FeatureRole::Outcome
    }
}

/// The full catalog of `4·k` derived features for a schema of `k` raw
/// features, in family-major order (all `isSame`, all `compare`, all
/// `diff`, all base). Also carries the similarity threshold that defines
/// the `compare` features.
#[derive(Debug, Clone)]
pub struct PairFeatureCatalog {
    schema: LogSchema,
    features: Vec<DerivedFeature>,
    by_name: HashMap<String, usize>,
    similarity_threshold: f64,
}

impl PairFeatureCatalog {
    pub fn new(schema: &LogSchema, similarity_threshold: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&similarity_threshold) {
            return Err(Error::Config(format!(
                "similarity threshold must be in [0, 1), got {similarity_threshold}"
            )));
        }
        let mut features = Vec::with_capacity(4 * schema.features().len());
        for family in [Family::IsSame, Family::Compare, Family::Diff, Family::Base] {
            for raw in schema.features() {
                features.push(DerivedFeature {
                    name: format!("{}{}", raw.name, family.suffix()),
                    raw_name: raw.name.clone(),
                    raw_kind: raw.kind,
                    raw_role: raw.role,
                    family,
                });
            }
        }
        let mut by_name = HashMap::new();
        for (i, f) in features.iter().enumerate() {
            if by_name.insert(f.name.clone(), i).is_some() {
                return Err(Error::Schema(format!(
                    "raw feature name {:?} collides with a derived feature name",
                    f.name
                )));
            }
        }
        Ok(PairFeatureCatalog {
            schema: schema.clone(),
            features,
            by_name,
            similarity_threshold,
        })
    }

    pub fn schema(&self) -> &LogSchema {
        &self.schema
    }

    pub fn similarity_threshold(&self) -> f64 {
        self.similarity_threshold
    }

    pub fn features(&self) -> &[DerivedFeature] {
        &self.features
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn get(&self, index: usize) -> &DerivedFeature {
        &self.features[index]
    }

    /// Resolves a derived-feature name. Accepts the `name.family` spelling
    /// as an alias for the canonical `name_family` form.
    pub fn resolve(&self, name: &str) -> Option<usize> {
        if let Some(&i) = self.by_name.get(name) {
            return Some(i);
        }
        for suffix in [".isSame", ".compare", ".diff"] {
            if let Some(stem) = name.strip_suffix(suffix) {
                let canonical = format!("{stem}_{}", &suffix[1..]);
                return self.by_name.get(&canonical).copied();
            }
        }
        None
    }

    /// Derived features visible at a feature level, in catalog order.
    pub fn features_at_level(
        &self,
        level: FeatureLevel,
    ) -> impl Iterator<Item = (usize, &DerivedFeature)> {
        self.features
            .iter()
            .enumerate()
            .filter(move |(_, f)| level.includes(f.family))
    }

    /// Builds the derived feature vector for an ordered pair of records.
    pub fn build_pair(
        &self,
        left: &ExecutionRecord,
        right: &ExecutionRecord,
    ) -> Result<PairExample> {
        let k = self.schema.features().len();
        let mut derived = vec![None; 4 * k];
        for (raw_index, raw) in self.schema.features().iter().enumerate() {
            let lv = left.raw_value(&raw.name);
            let rv = right.raw_value(&raw.name);
            let (Some(lv), Some(rv)) = (lv, rv) else {
                continue; // no comparison is defined against a missing value
            };
            match (raw.kind, lv, rv) {
                (FeatureKind::Numeric, ValueRef::Num(a), ValueRef::Num(b)) => {
                    derived[raw_index] = Some(DerivedValue::Flag(a == b));
                    derived[k + raw_index] = Some(DerivedValue::Cmp(similarity(
                        a,
                        b,
                        self.similarity_threshold,
                    )));
                    if a == b {
                        derived[3 * k + raw_index] = Some(DerivedValue::Num(a));
                    }
                }
                (FeatureKind::Nominal, ValueRef::Str(a), ValueRef::Str(b)) => {
                    derived[raw_index] = Some(DerivedValue::Flag(a == b));
                    derived[2 * k + raw_index] =
                        Some(DerivedValue::ValuePair(a.to_string(), b.to_string()));
                    if a == b {
                        derived[3 * k + raw_index] = Some(DerivedValue::Str(a.to_string()));
                    }
                }
                _ => {
                    return Err(Error::SchemaMismatch(format!(
                        "feature {:?} of records {:?}/{:?} does not match its declared kind",
                        raw.name, left.id, right.id
                    )))
                }
            }
        }
        Ok(PairExample {
            left_id: left.id.clone(),
            right_id: right.id.clone(),
            derived,
            label: PairLabel::Unlabeled,
        })
    }

    /// Streams all ordered pairs `(i, j)` with `i != j`: `n·(n-1)` pairs
    /// for `n` records. The full stream is never materialized here; the
    /// log is checked for schema conformance once up front so iteration
    /// itself cannot fail.
    pub fn enumerate_pairs<'a>(
        &'a self,
        log: &'a ExecutionLog,
    ) -> Result<impl Iterator<Item = PairExample> + 'a> {
        for record in &log.records {
            for raw in self.schema.features() {
                if let Some(v) = record.raw_value(&raw.name) {
                    let ok = matches!(
                        (raw.kind, v),
                        (FeatureKind::Numeric, ValueRef::Num(_))
                            | (FeatureKind::Nominal, ValueRef::Str(_))
                    );
                    if !ok {
                        return Err(Error::SchemaMismatch(format!(
                            "record {:?}: feature {:?} does not match its declared kind",
                            record.id, raw.name
                        )));
                    }
                }
            }
        }
        let n = log.records.len();
        Ok((0..n).flat_map(move |i| {
            (0..n).filter(move |&j| j != i).map(move |j| {
                self.build_pair(&log.records[i], &log.records[j])
                    .expect("records conform to the schema")
            })
        }))
    }
}

/// Value of a derived feature.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum DerivedValue {
    Flag(bool),
    Cmp(Comparison),
    ValuePair(String, String),
    Num(f64),
    Str(String),
}

impl fmt::Display for DerivedValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DerivedValue::Flag(true) => f.write_str("T"),
            DerivedValue::Flag(false) => f.write_str("F"),
            DerivedValue::Cmp(c) => f.write_str(c.token()),
            DerivedValue::ValuePair(a, b) => write!(f, "({a}, {b})"),
            DerivedValue::Num(x) => write!(f, "{x}"),
            DerivedValue::Str(s) => f.write_str(s),
        }
    }
}

/// How a pair relates to the query that labeled it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum PairLabel {
    Observed,
    Expected,
    Unlabeled,
}

/// An ordered pair of records encoded as derived features, indexed by
/// catalog position.
#[derive(Debug, Clone, PartialEq)]
pub struct PairExample {
    pub left_id: String,
    pub right_id: String,
    derived: Vec<Option<DerivedValue>>,
    pub label: PairLabel,
}

impl PairExample {
    pub fn value(&self, feature_index: usize) -> Option<&DerivedValue> {
        self.derived.get(feature_index).and_then(Option::as_ref)
    }

    pub fn values(&self) -> &[Option<DerivedValue>] {
        &self.derived
    }

    pub fn ids(&self) -> (&str, &str) {
        (&self.left_id, &self.right_id)
    }

    /// Test-and-construction helper: a pair with explicit derived values.
    pub fn from_values(
        left_id: impl Into<String>,
        right_id: impl Into<String>,
        derived: Vec<Option<DerivedValue>>,
        label: PairLabel,
    ) -> Self {
        PairExample {
            left_id: left_id.into(),
            right_id: right_id.into(),
            derived,
            label,
        }
    }

    /// Debug dump of the non-missing derived features as a JSON object.
    pub fn to_json(&self, catalog: &PairFeatureCatalog) -> serde_json::Value {
        let mut map = serde_json::Map::new();
        map.insert("left_id".into(), self.left_id.clone().into());
        map.insert("right_id".into(), self.right_id.clone().into());
        let mut features = serde_json::Map::new();
        for (i, v) in self.derived.iter().enumerate() {
            if let Some(v) = v {
                features.insert(
                    catalog.get(i).name.clone(),
                    serde_json::to_value(v).expect("derived value serializes"),
                );
            }
        }
        map.insert("features".into(), features.into());
        serde_json::Value::Object(map)
    }
}
