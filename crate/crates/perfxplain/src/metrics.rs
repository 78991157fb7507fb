//! Pair classification against a query and the three explanation-quality
//! metrics — relevance, precision, generality — computed as empirical
//! conditional probabilities over the related pairs of a log.
//!
//! The probability space is the set of *related* pairs: those satisfying
//! the despite clause and at least one of observed/expected. Unrelated
//! pairs satisfy neither outcome clause and contribute to no metric.

use std::fmt;

use serde::Serialize;

use crate::pair::{PairExample, PairLabel};
use crate::pxql::{Clause, Query};

/// Which explanation generator produced an explanation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Method {
    #[serde(rename = "perfxplain")]
    PerfXplain,
    #[serde(rename = "ruleofthumb")]
    RuleOfThumb,
    #[serde(rename = "simbutdiff")]
    SimButDiff,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::PerfXplain => "perfxplain",
            Method::RuleOfThumb => "ruleofthumb",
            Method::SimButDiff => "simbutdiff",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Method {
    type Err = crate::error::Error;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "perfxplain" => Ok(Method::PerfXplain),
            "ruleofthumb" => Ok(Method::RuleOfThumb),
            "simbutdiff" => Ok(Method::SimButDiff),
            other => Err(crate::error::Error::Config(format!(
                "unknown method {other:?} (expected perfxplain, ruleofthumb, or simbutdiff)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ClauseKind {
    Despite,
    Because,
}

/// One step of an explanation's construction, in emission order.
#[derive(Debug, Clone, Serialize)]
pub struct TraceStep {
    pub clause: ClauseKind,
    pub step: usize,
    pub atom: crate::pxql::AtomicPredicate,
    /// Information gain of the atom at selection time (0 for baselines
    /// that do not use it).
    pub info_gain: f64,
    /// Marginal precision (because) or relevance (despite) on the
    /// surviving sample; baselines put their own per-feature score here.
    pub marginal: Option<f64>,
    pub generality: Option<f64>,
    /// Combined selection score.
    pub score: f64,
    /// Pairs still surviving after this atom was applied.
    pub surviving: usize,
}

/// A `(despite', because)` explanation with its quality metrics over the
/// full related-pair population and its construction trace.
///
/// Applicability is a hard invariant: both clauses hold on the pair of
/// interest for every explanation the generators emit.
#[derive(Debug, Clone, Serialize)]
pub struct Explanation {
    pub method: Method,
    #[serde(rename = "despite")]
    pub des_prime: Clause,
    #[serde(rename = "because")]
    pub bec: Clause,
    pub scores: ExplanationScores,
    pub trace: Vec<TraceStep>,
}

impl Explanation {
    pub fn is_applicable_to(&self, pair: &PairExample) -> bool {
        self.des_prime.eval(pair) && self.bec.eval(pair)
    }

    /// Per-atom marginal scores in emission order.
    pub fn per_atom_marginals(&self) -> Vec<(&crate::pxql::AtomicPredicate, Option<f64>)> {
        self.trace.iter().map(|s| (&s.atom, s.marginal)).collect()
    }

    /// The reply form: `DESPITE des' BECAUSE bec`.
    pub fn text(&self) -> String {
        format!("DESPITE {}\nBECAUSE {}", self.des_prime, self.bec)
    }
}

/// How a pair relates to a query.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PairClass {
    Observed,
    Expected,
    Unrelated,
}

impl PairClass {
    pub fn label(self) -> PairLabel {
        match self {
            PairClass::Observed => PairLabel::Observed,
            PairClass::Expected => PairLabel::Expected,
            PairClass::Unrelated => PairLabel::Unlabeled,
        }
    }
}

/// Observed iff despite ∧ observed hold on the pair; expected iff
/// despite ∧ expected hold; unrelated otherwise. Query validation
/// guarantees the first two cases are exclusive.
pub fn classify_pair(pair: &PairExample, query: &Query) -> PairClass {
    if !query.des.eval(pair) {
        return PairClass::Unrelated;
    }
    if query.obs.eval(pair) {
        PairClass::Observed
    } else if query.exp.eval(pair) {
        PairClass::Expected
    } else {
        PairClass::Unrelated
    }
}

/// An empirical conditional probability as an integer ratio. A zero
/// denominator means the metric is undefined, which is reported
/// distinctly from 0.0.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct MetricValue {
    pub num: usize,
    pub den: usize,
}

impl MetricValue {
    pub fn new(num: usize, den: usize) -> Self {
        MetricValue { num, den }
    }

    pub fn value(&self) -> Option<f64> {
        if self.den == 0 {
            None
        } else {
            Some(self.num as f64 / self.den as f64)
        }
    }
}

impl fmt::Display for MetricValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.value() {
            Some(v) => write!(f, "{v:.4} ({}/{})", self.num, self.den),
            None => write!(f, "undefined (0 conditioning pairs)"),
        }
    }
}

/// The three quality metrics of one explanation over one pair population.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExplanationScores {
    pub relevance: MetricValue,
    pub precision: MetricValue,
    pub generality: MetricValue,
}

/// Counts all three metrics in one pass over a pair stream.
///
/// With `R` the related pairs satisfying `des ∧ des'`:
/// relevance = P(exp | R), generality = P(bec | R), and
/// precision = P(obs | R ∧ bec).
pub fn score_explanation<'a>(
    query: &Query,
    des_prime: &Clause,
    bec: &Clause,
    pairs: impl IntoIterator<Item = &'a PairExample>,
) -> ExplanationScores {
    let mut related = 0usize; // des ∧ des' ∧ (obs ∨ exp)
    let mut expected = 0usize; // … ∧ exp
    let mut because = 0usize; // … ∧ bec
    let mut because_observed = 0usize; // … ∧ bec ∧ obs
    for pair in pairs {
        let class = classify_pair(pair, query);
        if class == PairClass::Unrelated || !des_prime.eval(pair) {
            continue;
        }
        related += 1;
        if class == PairClass::Expected {
            expected += 1;
        }
        if bec.eval(pair) {
            because += 1;
            if class == PairClass::Observed {
                because_observed += 1;
            }
        }
    }
    ExplanationScores {
        relevance: MetricValue::new(expected, related),
        precision: MetricValue::new(because_observed, because),
        generality: MetricValue::new(because, related),
    }
}

pub fn relevance<'a>(
    query: &Query,
    des_prime: &Clause,
    pairs: impl IntoIterator<Item = &'a PairExample>,
) -> MetricValue {
    score_explanation(query, des_prime, &Clause::empty(), pairs).relevance
}

pub fn precision<'a>(
    query: &Query,
    des_prime: &Clause,
    bec: &Clause,
    pairs: impl IntoIterator<Item = &'a PairExample>,
) -> MetricValue {
    score_explanation(query, des_prime, bec, pairs).precision
}

pub fn generality<'a>(
    query: &Query,
    des_prime: &Clause,
    bec: &Clause,
    pairs: impl IntoIterator<Item = &'a PairExample>,
) -> MetricValue {
    score_explanation(query, des_prime, bec, pairs).generality
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::log_model::{
        ExecutionLog, ExecutionRecord, FeatureRole, FeatureSchema, LogLevel, LogSchema, Value,
    };
    use crate::pair::PairFeatureCatalog;
    use crate::pxql::parse_query;

    fn setup() -> (PairFeatureCatalog, ExecutionLog) {
        let schema = LogSchema::new(vec![
            FeatureSchema::numeric("inputsize", FeatureRole::Data),
            FeatureSchema::nominal("script", FeatureRole::App, ["a.pig", "b.pig"]),
            FeatureSchema::outcome(),
        ])
        .unwrap();
        let catalog = PairFeatureCatalog::new(&schema, 0.10).unwrap();
        let mut records = Vec::new();
        // five records with varied sizes/scripts/durations
        for (id, size, script, dur) in [
            ("r0", 1.0e9, "a.pig", 100.0),
            ("r1", 2.0e9, "a.pig", 210.0),
            ("r2", 2.0e9, "b.pig", 100.0),
            ("r3", 4.0e9, "a.pig", 400.0),
            ("r4", 1.0e9, "b.pig", 105.0),
        ] {
            records.push(
                ExecutionRecord::new(id, dur)
                    .set("inputsize", Value::Num(size))
                    .set("script", Value::Str(script.into())),
            );
        }
        let log = ExecutionLog {
            schema,
            records,
            level: LogLevel::Job,
        };
        (catalog, log)
    }

    #[test]
    fn classification_matches_definitions() {
        let (catalog, log) = setup();
        let q = parse_query(
            "DESPITE inputsize_compare = GT OBSERVED duration_compare = GT EXPECTED duration_compare = SIM",
            &catalog,
        )
        .unwrap();
        // brute-force re-evaluation of the definitions, clause by clause
        for pair in catalog.enumerate_pairs(&log).unwrap() {
            let des = q.des.eval(&pair);
            let obs = q.obs.eval(&pair);
            let exp = q.exp.eval(&pair);
            let want = if des && obs {
                PairClass::Observed
            } else if des && exp {
                PairClass::Expected
            } else {
                PairClass::Unrelated
            };
            assert_eq!(classify_pair(&pair, &q), want, "{:?}", pair.ids());
        }
    }

    #[test]
    fn pair_satisfying_des_only_is_unrelated() {
        let (catalog, log) = setup();
        let q = parse_query(
            "DESPITE inputsize_compare = GT OBSERVED duration_compare = SIM EXPECTED duration_compare = GT",
            &catalog,
        )
        .unwrap();
        // r1 -> r0: inputsize GT, durations 210 vs 100: GT (expected)
        let p = catalog
            .build_pair(log.record("r1").unwrap(), log.record("r0").unwrap())
            .unwrap();
        assert_eq!(classify_pair(&p, &q), PairClass::Expected);
        // r1 -> r4: 2e9 vs 1e9 GT, durations 210 vs 105 GT: expected too;
        // r0 -> r1 fails des entirely
        let p = catalog
            .build_pair(log.record("r0").unwrap(), log.record("r1").unwrap())
            .unwrap();
        assert_eq!(classify_pair(&p, &q), PairClass::Unrelated);
    }

    #[test]
    fn metrics_equal_exhaustive_counts() {
        let (catalog, log) = setup();
        let q = parse_query(
            "OBSERVED duration_compare = GT EXPECTED duration_compare = SIM",
            &catalog,
        )
        .unwrap();
        let bec = parse_query(
            "OBSERVED inputsize_compare = GT EXPECTED duration_compare = SIM",
            &catalog,
        )
        .unwrap()
        .obs;
        let pairs: Vec<_> = catalog.enumerate_pairs(&log).unwrap().collect();
        let scores = score_explanation(&q, &Clause::empty(), &bec, &pairs);

        // independent counting oracle, directly from the definitions
        let mut related = 0;
        let mut exp = 0;
        let mut b = 0;
        let mut bo = 0;
        for p in &pairs {
            let is_obs = q.des.eval(p) && q.obs.eval(p);
            let is_exp = q.des.eval(p) && !is_obs && q.exp.eval(p);
            if !(is_obs || is_exp) {
                continue;
            }
            related += 1;
            if is_exp {
                exp += 1;
            }
            if bec.eval(p) {
                b += 1;
                if is_obs {
                    bo += 1;
                }
            }
        }
        assert_eq!(scores.relevance, MetricValue::new(exp, related));
        assert_eq!(scores.generality, MetricValue::new(b, related));
        assert_eq!(scores.precision, MetricValue::new(bo, b));
        assert!(related > 0);
    }

    #[test]
    fn empty_because_clause_has_generality_one() {
        let (catalog, log) = setup();
        let q = parse_query(
            "OBSERVED duration_compare = GT EXPECTED duration_compare = SIM",
            &catalog,
        )
        .unwrap();
        let pairs: Vec<_> = catalog.enumerate_pairs(&log).unwrap().collect();
        let scores = score_explanation(&q, &Clause::empty(), &Clause::empty(), &pairs);
        assert_eq!(scores.generality.value(), Some(1.0));
        // width-0 precision is the base rate P(obs | des)
        assert_eq!(scores.precision.den, scores.relevance.den);
    }

    #[test]
    fn undefined_metric_reported_distinctly() {
        let (catalog, log) = setup();
        let q = parse_query(
            "DESPITE script_diff = (\"a.pig\", \"a.pig\") AND script_isSame = F \
             OBSERVED duration_compare = GT EXPECTED duration_compare = SIM",
            &catalog,
        )
        .unwrap();
        // despite is unsatisfiable, so no pair is related at all
        let pairs: Vec<_> = catalog.enumerate_pairs(&log).unwrap().collect();
        let scores = score_explanation(&q, &Clause::empty(), &Clause::empty(), &pairs);
        assert_eq!(scores.relevance.value(), None);
        assert_eq!(scores.precision.value(), None);
    }

    #[test]
    fn constructed_expected_share_is_the_empty_clause_relevance() {
        // a population built so that 49 of 100 related pairs performed as
        // expected: the empty-despite relevance is exactly 0.49
        use crate::pair::{Comparison, DerivedValue, PairLabel};
        let (catalog, _) = setup();
        let idx = catalog.resolve("duration_compare").unwrap();
        let mut pairs = Vec::new();
        for i in 0..100 {
            let mut derived = vec![None; catalog.len()];
            derived[idx] = Some(DerivedValue::Cmp(if i < 49 {
                Comparison::Sim
            } else {
                Comparison::Gt
            }));
            pairs.push(crate::pair::PairExample::from_values(
                format!("l{i}"),
                format!("r{i}"),
                derived,
                PairLabel::Unlabeled,
            ));
        }
        let q = parse_query(
            "OBSERVED duration_compare = GT EXPECTED duration_compare = SIM",
            &catalog,
        )
        .unwrap();
        let rel = relevance(&q, &Clause::empty(), pairs.iter());
        assert_eq!(rel, MetricValue::new(49, 100));
        assert_eq!(rel.value(), Some(0.49));
    }

    #[test]
    fn constructed_half_ratio() {
        let (catalog, log) = setup();
        let q = parse_query(
            "OBSERVED duration_compare = GT EXPECTED duration_compare = SIM",
            &catalog,
        )
        .unwrap();
        let pairs: Vec<_> = catalog.enumerate_pairs(&log).unwrap().collect();
        let bec = Clause {
            atoms: vec![crate::pxql::AtomicPredicate::new(
                &catalog,
                "script_isSame",
                crate::pxql::CmpOp::Eq,
                crate::pxql::Literal::Flag(true),
            )
            .unwrap()],
        };
        let scores = score_explanation(&q, &Clause::empty(), &bec, &pairs);
        let direct: Vec<_> = pairs
            .iter()
            .filter(|p| classify_pair(p, &q) != PairClass::Unrelated)
            .collect();
        let sat = direct.iter().filter(|p| bec.eval(p)).count();
        assert_eq!(scores.generality, MetricValue::new(sat, direct.len()));
    }
}
