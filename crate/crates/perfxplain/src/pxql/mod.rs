//! The performance query language: parsing, validation, and evaluation
//! of `(despite, observed, expected)` queries over pair features.
//!
//! A query names an ordered pair of executions and three conjunctive
//! clauses. Atoms take the form `feature op constant` where `feature` is a
//! derived pair feature. The grammar (documented in `docs/pxql.md`) is:
//!
//! ```text
//! query    = [for] [despite] observed expected
//! for      = "FOR" ident "," ident [where]
//! where    = "WHERE" binding conj binding
//! binding  = ident "." idfield "=" (string | word)
//! despite  = "DESPITE" clause
//! observed = "OBSERVED" clause
//! expected = "EXPECTED" clause
//! clause   = atom (conj atom)*
//! conj     = "AND" | "^" | "∧"
//! atom     = feature op literal
//! op       = "=" | "!=" | "<" | "<=" | ">" | ">=" | "≠" | "≤" | "≥"
//! literal  = number | string | word | "(" element "," element ")"
//! ```
//!
//! Keywords are case-insensitive. `feature` accepts both the canonical
//! `name_family` spelling and the `name.family` alias. Omitting DESPITE
//! sets the despite clause to true. Task-level queries use variables
//! starting with `T` (for example `FOR T1, T2`).

mod eval;
mod parse;

pub use eval::validate_query;
pub use parse::parse_query;

use std::fmt;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::log_model::{FeatureKind, LogLevel};
use crate::pair::{Comparison, DerivedValue, Family, PairFeatureCatalog};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub enum CmpOp {
    #[serde(rename = "=")]
    Eq,
    #[serde(rename = "!=")]
    Ne,
    #[serde(rename = "<")]
    Lt,
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = ">")]
    Gt,
    #[serde(rename = ">=")]
    Ge,
}

impl CmpOp {
    pub fn token(self) -> &'static str {
        match self {
            CmpOp::Eq => "=",
            CmpOp::Ne => "!=",
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Gt => ">",
            CmpOp::Ge => ">=",
        }
    }

    pub fn is_order(self) -> bool {
        matches!(self, CmpOp::Lt | CmpOp::Le | CmpOp::Gt | CmpOp::Ge)
    }
}

impl fmt::Display for CmpOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

/// A typed constant in an atomic predicate.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Literal {
    Flag(bool),
    Cmp(Comparison),
    Num(f64),
    Str(String),
    ValuePair(String, String),
}

impl Literal {
    fn type_name(&self) -> &'static str {
        match self {
            Literal::Flag(_) => "T/F",
            Literal::Cmp(_) => "LT/SIM/GT",
            Literal::Num(_) => "number",
            Literal::Str(_) => "string",
            Literal::ValuePair(..) => "value pair",
        }
    }

    /// Total order used only for deterministic tie-breaking.
    pub(crate) fn sort_cmp(&self, other: &Literal) -> std::cmp::Ordering {
        fn rank(l: &Literal) -> u8 {
            match l {
                Literal::Flag(_) => 0,
                Literal::Cmp(_) => 1,
                Literal::Num(_) => 2,
                Literal::Str(_) => 3,
                Literal::ValuePair(..) => 4,
            }
        }
        match (self, other) {
            (Literal::Flag(a), Literal::Flag(b)) => a.cmp(b),
            (Literal::Cmp(a), Literal::Cmp(b)) => a.cmp(b),
            (Literal::Num(a), Literal::Num(b)) => a.total_cmp(b),
            (Literal::Str(a), Literal::Str(b)) => a.cmp(b),
            (Literal::ValuePair(a1, a2), Literal::ValuePair(b1, b2)) => {
                a1.cmp(b1).then_with(|| a2.cmp(b2))
            }
            _ => rank(self).cmp(&rank(other)),
        }
    }
}

fn quote(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        if c == '"' || c == '\\' {
            out.push('\\');
        }
        out.push(c);
    }
    out.push('"');
    out
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Literal::Flag(true) => f.write_str("T"),
            Literal::Flag(false) => f.write_str("F"),
            Literal::Cmp(c) => f.write_str(c.token()),
            Literal::Num(x) => write!(f, "{x}"),
            Literal::Str(s) => f.write_str(&quote(s)),
            Literal::ValuePair(a, b) => write!(f, "({}, {})", quote(a), quote(b)),
        }
    }
}

/// `feature op constant`, type-checked against the catalog at construction.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AtomicPredicate {
    /// Catalog index of the derived feature.
    #[serde(skip)]
    pub feature: usize,
    #[serde(rename = "feature")]
    pub feature_name: String,
    pub op: CmpOp,
    #[serde(rename = "value")]
    pub constant: Literal,
}

impl AtomicPredicate {
    /// Builds an atom, enforcing that the constant type-checks against the
    /// feature's domain and that order operators appear only on numeric
    /// base features.
    pub fn new(
        catalog: &PairFeatureCatalog,
        feature_name: &str,
        op: CmpOp,
        constant: Literal,
    ) -> Result<Self> {
        let index = catalog.resolve(feature_name).ok_or_else(|| {
            Error::InvalidQuery(vec![crate::error::Diagnostic::new(
                "query",
                format!("unknown feature {feature_name:?}"),
            )])
        })?;
        let feature = catalog.get(index);
        let type_err =
            |msg: String| Error::InvalidQuery(vec![crate::error::Diagnostic::new("query", msg)]);

        let numeric_base =
            feature.family == Family::Base && feature.raw_kind == FeatureKind::Numeric;
        if op.is_order() && !numeric_base {
            return Err(type_err(format!(
                "operator {op} requires a numeric base feature; {} is not one",
                feature.name
            )));
        }
        let ok = match (feature.family, feature.raw_kind, &constant) {
            (Family::IsSame, _, Literal::Flag(_)) => true,
            (Family::Compare, FeatureKind::Numeric, Literal::Cmp(_)) => true,
            (Family::Diff, FeatureKind::Nominal, Literal::ValuePair(..)) => true,
            (Family::Base, FeatureKind::Numeric, Literal::Num(x)) => x.is_finite(),
            (Family::Base, FeatureKind::Nominal, Literal::Str(_)) => true,
            _ => false,
        };
        if !ok {
            return Err(type_err(format!(
                "constant {constant} ({}) does not type-check against feature {}",
                constant.type_name(),
                feature.name
            )));
        }
        // Nominal constants must come from the declared domain.
        if let Some(raw) = catalog.schema().get(&feature.raw_name) {
            if let Some(dom) = &raw.domain {
                let in_dom = |v: &str| dom.iter().any(|d| d == v);
                let dom_ok = match &constant {
                    Literal::Str(s) => in_dom(s),
                    Literal::ValuePair(a, b) => in_dom(a) && in_dom(b),
                    _ => true,
                };
                if !dom_ok {
                    return Err(type_err(format!(
                        "constant {constant} is outside the declared domain of {}",
                        feature.raw_name
                    )));
                }
            }
        }
        Ok(AtomicPredicate {
            feature: index,
            feature_name: feature.name.clone(),
            op,
            constant,
        })
    }

    /// Atom truth on a pair; an atom over a missing feature value is false.
    pub fn eval(&self, pair: &crate::pair::PairExample) -> bool {
        match pair.value(self.feature) {
            Some(v) => value_satisfies(v, self.op, &self.constant),
            None => false,
        }
    }

    /// Deterministic tie-break key: (feature name, operator, constant).
    pub(crate) fn sort_cmp(&self, other: &AtomicPredicate) -> std::cmp::Ordering {
        self.feature_name
            .cmp(&other.feature_name)
            .then(self.op.cmp(&other.op))
            .then_with(|| self.constant.sort_cmp(&other.constant))
    }
}

impl fmt::Display for AtomicPredicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {}", self.feature_name, self.op, self.constant)
    }
}

/// Whether a concrete derived value satisfies `op constant`.
pub(crate) fn value_satisfies(v: &DerivedValue, op: CmpOp, c: &Literal) -> bool {
    let eq = match (v, c) {
        (DerivedValue::Flag(a), Literal::Flag(b)) => a == b,
        (DerivedValue::Cmp(a), Literal::Cmp(b)) => a == b,
        (DerivedValue::ValuePair(a1, a2), Literal::ValuePair(b1, b2)) => a1 == b1 && a2 == b2,
        (DerivedValue::Str(a), Literal::Str(b)) => a == b,
        (DerivedValue::Num(a), Literal::Num(b)) => {
            return match op {
                CmpOp::Eq => a == b,
                CmpOp::Ne => a != b,
                CmpOp::Lt => a < b,
                CmpOp::Le => a <= b,
                CmpOp::Gt => a > b,
                CmpOp::Ge => a >= b,
            }
        }
        _ => return false, // ill-typed comparison never holds
    };
    match op {
        CmpOp::Eq => eq,
        CmpOp::Ne => !eq,
        _ => false,
    }
}

/// A conjunction of atoms; the empty clause is `true`.
#[derive(Debug, Clone, PartialEq, Default, Serialize)]
#[serde(transparent)]
pub struct Clause {
    pub atoms: Vec<AtomicPredicate>,
}

impl Clause {
    pub fn empty() -> Self {
        Clause::default()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn eval(&self, pair: &crate::pair::PairExample) -> bool {
        self.atoms.iter().all(|a| a.eval(pair))
    }

    pub fn and(&self, other: &Clause) -> Clause {
        let mut atoms = self.atoms.clone();
        atoms.extend(other.atoms.iter().cloned());
        Clause { atoms }
    }
}

impl fmt::Display for Clause {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.atoms.is_empty() {
            return f.write_str("true");
        }
        for (i, atom) in self.atoms.iter().enumerate() {
            if i > 0 {
                f.write_str(" AND ")?;
            }
            write!(f, "{atom}")?;
        }
        Ok(())
    }
}

/// A parsed query: the pair of interest and the three clauses.
///
/// The pair ids are optional at parse time (the WHERE clause may be
/// omitted and the ids supplied externally, e.g. by CLI flags); every
/// engine entry point requires them to be present.
#[derive(Debug, Clone, PartialEq)]
pub struct Query {
    pub left_var: String,
    pub right_var: String,
    pub left_id: Option<String>,
    pub right_id: Option<String>,
    pub level: LogLevel,
    pub des: Clause,
    pub obs: Clause,
    pub exp: Clause,
}

impl Query {
    pub fn pair_ids(&self) -> Result<(&str, &str)> {
        match (&self.left_id, &self.right_id) {
            (Some(l), Some(r)) => Ok((l, r)),
            _ => Err(Error::InvalidQuery(vec![crate::error::Diagnostic::new(
                "query",
                "the pair of interest is unbound: add a WHERE clause or pass ids explicitly",
            )])),
        }
    }

    pub fn with_ids(mut self, left: impl Into<String>, right: impl Into<String>) -> Query {
        self.left_id = Some(left.into());
        self.right_id = Some(right.into());
        self
    }

    /// The same query with `extension` conjoined onto the despite clause.
    pub fn with_des_extension(&self, extension: &Clause) -> Query {
        let mut q = self.clone();
        q.des = q.des.and(extension);
        q
    }

    fn id_field(&self) -> &'static str {
        match self.level {
            LogLevel::Job => "JobID",
            LogLevel::Task => "TaskID",
        }
    }
}

impl fmt::Display for Query {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "FOR {}, {}", self.left_var, self.right_var)?;
        if let (Some(l), Some(r)) = (&self.left_id, &self.right_id) {
            write!(
                f,
                " WHERE {}.{} = {} AND {}.{} = {}",
                self.left_var,
                self.id_field(),
                quote(l),
                self.right_var,
                self.id_field(),
                quote(r)
            )?;
        }
        if !self.des.is_empty() {
            write!(f, "\nDESPITE {}", self.des)?;
        }
        write!(f, "\nOBSERVED {}", self.obs)?;
        write!(f, "\nEXPECTED {}", self.exp)
    }
}
