//! The two comparison explainers: RuleOfThumb, which ranks raw features
//! once by Relief importance and explains via the top disagreeing
//! features, and SimButDiff, which scores each `isSame` feature by how
//! often flipping it among similar pairs coincides with expected behavior.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};
use crate::log_model::{ExecutionLog, FeatureKind, FeatureRole, ValueRef};
use crate::metrics::{score_explanation, ClauseKind, Explanation, Method, TraceStep};
use crate::pair::{DerivedValue, Family, PairExample, PairFeatureCatalog, PairLabel};
use crate::pxql::{AtomicPredicate, Clause, CmpOp, Literal, Query};

/// Per-feature importance weights for predicting duration, computed once
/// per log (never per query).
#[derive(Debug, Clone)]
pub struct FeatureWeightTable {
    /// (raw feature name, weight) for every non-outcome raw feature, in
    /// schema order.
    pub weights: Vec<(String, f64)>,
}

impl FeatureWeightTable {
    /// Features sorted by importance: weight descending, name ascending on
    /// ties.
    pub fn ranked(&self) -> Vec<(&str, f64)> {
        let mut out: Vec<(&str, f64)> =
            self.weights.iter().map(|(n, w)| (n.as_str(), *w)).collect();
        out.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(b.0)));
        out
    }

    pub fn weight(&self, feature: &str) -> Option<f64> {
        self.weights
            .iter()
            .find(|(n, _)| n == feature)
            .map(|(_, w)| *w)
    }
}

/// Normalized per-feature difference between two records: `|a-b| / range`
/// for numeric features, 0/1 for nominal, and 0.5 when either side is
/// missing.
fn feature_diff(a: Option<ValueRef<'_>>, b: Option<ValueRef<'_>>, range: f64) -> f64 {
    match (a, b) {
        (Some(ValueRef::Num(x)), Some(ValueRef::Num(y))) => {
            if range > 0.0 {
                (x - y).abs() / range
            } else {
                0.0
            }
        }
        (Some(ValueRef::Str(x)), Some(ValueRef::Str(y))) => {
            if x == y {
                0.0
            } else {
                1.0
            }
        }
        (Some(_), Some(_)) => 1.0, // kind mismatch counts as fully different
        _ => 0.5,
    }
}

/// Relief weights for regression with duration as the target.
///
/// Each iteration picks a record (a random visiting order, without
/// replacement within a pass over the log) and updates the accumulators
/// from its `k` nearest neighbors, weighting every contribution by the
/// normalized difference of the target values. The final weight is
///
/// ```text
/// W[f] = N_dt&df[f] / N_dt  -  (N_df[f] - N_dt&df[f]) / (N - N_dt)
/// ```
///
/// where `N_dt` accumulates target differences, `N_df[f]` feature
/// differences, `N_dt&df[f]` their products, and `N` counts updates.
pub fn relief_weights(
    log: &ExecutionLog,
    k_neighbors: usize,
    iterations: usize,
    rng: &mut impl Rng,
) -> Result<FeatureWeightTable> {
    let n = log.records.len();
    if k_neighbors == 0 || iterations == 0 {
        return Err(Error::Config(
            "relief needs positive k_neighbors and iterations".into(),
        ));
    }
    if n < k_neighbors + 1 {
        return Err(Error::Config(format!(
            "relief with k={k_neighbors} needs at least {} records, log has {n}",
            k_neighbors + 1
        )));
    }

    let features: Vec<_> = log
        .schema
        .features()
        .iter()
        .filter(|f| f.role != FeatureRole::Outcome)
        .cloned()
        .collect();

    // per-feature value ranges over the log, for diff normalization
    let mut ranges = Vec::with_capacity(features.len());
    for f in &features {
        let range = if f.kind == FeatureKind::Numeric {
            let mut lo = f64::INFINITY;
            let mut hi = f64::NEG_INFINITY;
            for r in &log.records {
                if let Some(ValueRef::Num(x)) = r.raw_value(&f.name) {
                    lo = lo.min(x);
                    hi = hi.max(x);
                }
            }
            if hi > lo {
                hi - lo
            } else {
                0.0
            }
        } else {
            1.0
        };
        ranges.push(range);
    }
    let dur_lo = log
        .records
        .iter()
        .map(|r| r.duration)
        .fold(f64::INFINITY, f64::min);
    let dur_hi = log
        .records
        .iter()
        .map(|r| r.duration)
        .fold(f64::NEG_INFINITY, f64::max);
    let dur_range = dur_hi - dur_lo;
    if dur_range <= 0.0 || dur_range.is_nan() {
        return Err(Error::DegenerateLog(
            "all durations are identical; relief has no target variation".into(),
        ));
    }

    let diff = |i: usize, j: usize, f: usize| {
        feature_diff(
            log.records[i].raw_value(&features[f].name),
            log.records[j].raw_value(&features[f].name),
            ranges[f],
        )
    };
    let distance = |i: usize, j: usize| (0..features.len()).map(|f| diff(i, j, f)).sum::<f64>();
    let target_diff =
        |i: usize, j: usize| (log.records[i].duration - log.records[j].duration).abs() / dur_range;

    let mut visit: Vec<usize> = (0..n).collect();
    visit.shuffle(rng);

    let mut n_dt = 0.0f64;
    let mut n_df = vec![0.0f64; features.len()];
    let mut n_dt_df = vec![0.0f64; features.len()];
    let mut updates = 0.0f64;

    for it in 0..iterations {
        if it > 0 && it % n == 0 {
            visit.shuffle(rng); // next pass over the log
        }
        let i = visit[it % n];
        let mut neighbors: Vec<usize> = (0..n).filter(|&j| j != i).collect();
        neighbors.sort_by(|&a, &b| distance(i, a).total_cmp(&distance(i, b)).then(a.cmp(&b)));
        for &j in neighbors.iter().take(k_neighbors) {
            let dt = target_diff(i, j);
            n_dt += dt;
            updates += 1.0;
            for f in 0..features.len() {
                let df = diff(i, j, f);
                n_df[f] += df;
                n_dt_df[f] += dt * df;
            }
        }
    }

    if n_dt == 0.0 {
        return Err(Error::DegenerateLog(
            "no target variation among sampled neighbors".into(),
        ));
    }
    let same_mass = updates - n_dt;
    let weights = features
        .iter()
        .enumerate()
        .map(|(f, schema)| {
            let hit = n_dt_df[f] / n_dt;
            let miss = if same_mass > 0.0 {
                (n_df[f] - n_dt_df[f]) / same_mass
            } else {
                0.0
            };
            (schema.name.clone(), hit - miss)
        })
        .collect();
    Ok(FeatureWeightTable { weights })
}

/// Explains by pointing at the `width` most important raw features on
/// which the pair of interest disagrees: `f_isSame = F` for each. Ignores
/// the query's observed/expected clauses entirely; the importance table
/// is computed once per log, not per query.
pub fn rule_of_thumb_explain(
    query: &Query,
    table: &FeatureWeightTable,
    pair_of_interest: &PairExample,
    width: usize,
    catalog: &PairFeatureCatalog,
    related: &[PairExample],
) -> Explanation {
    let mut atoms = Vec::new();
    let mut trace = Vec::new();
    for (name, weight) in table.ranked() {
        if atoms.len() == width {
            break;
        }
        let derived_name = format!("{name}_isSame");
        let Some(index) = catalog.resolve(&derived_name) else {
            continue;
        };
        // "disagrees" means the isSame feature is an explicit F; a missing
        // value is not a disagreement and could not yield an applicable atom
        if pair_of_interest.value(index) != Some(&DerivedValue::Flag(false)) {
            continue;
        }
        let atom = AtomicPredicate {
            feature: index,
            feature_name: derived_name,
            op: CmpOp::Eq,
            constant: Literal::Flag(false),
        };
        trace.push(TraceStep {
            clause: ClauseKind::Because,
            step: atoms.len() + 1,
            atom: atom.clone(),
            info_gain: 0.0,
            marginal: Some(weight),
            generality: None,
            score: weight,
            surviving: related.len(),
        });
        atoms.push(atom);
    }
    let bec = Clause { atoms };
    let scores = score_explanation(query, &Clause::empty(), &bec, related);
    Explanation {
        method: Method::RuleOfThumb,
        des_prime: Clause::empty(),
        bec,
        scores,
        trace,
    }
}

/// What-if explanation over the `isSame` features only.
///
/// Keeps the training examples that agree with the pair of interest on at
/// least `ceil(s · dims)` of the `isSame` features, scores each feature by
/// the fraction of *disagreeing* similar pairs that performed as expected,
/// and pins the pair's own values for the top-`width` features. The pair
/// of interest itself is excluded from the evidence set.
pub fn sim_but_diff_explain(
    query: &Query,
    related: &[PairExample],
    catalog: &PairFeatureCatalog,
    pair_of_interest: &PairExample,
    width: usize,
    similarity_fraction: f64,
) -> Result<Explanation> {
    if !(0.0..=1.0).contains(&similarity_fraction) {
        return Err(Error::Config(format!(
            "similarity fraction must be in [0, 1], got {similarity_fraction}"
        )));
    }
    let is_same_features: Vec<(usize, &str)> = catalog
        .features()
        .iter()
        .enumerate()
        .filter(|(_, f)| f.family == Family::IsSame && !f.is_outcome())
        .map(|(i, f)| (i, f.name.as_str()))
        .collect();
    let dims = is_same_features.len();
    let needed = (similarity_fraction * dims as f64).ceil() as usize;

    let evidence: Vec<&PairExample> = related
        .iter()
        .filter(|p| p.ids() != pair_of_interest.ids())
        .filter(|p| {
            let agreements = is_same_features
                .iter()
                .filter(|(i, _)| {
                    matches!(
                        (p.value(*i), pair_of_interest.value(*i)),
                        (Some(a), Some(b)) if a == b
                    )
                })
                .count();
            agreements >= needed
        })
        .collect();
    if evidence.is_empty() {
        return Err(Error::NoSimilarPairs {
            threshold: similarity_fraction,
        });
    }

    // what-if score per feature: among similar pairs that disagree with
    // the pair of interest on f, the fraction that performed as expected
    let mut scored: Vec<(usize, &str, f64)> = Vec::new();
    for &(index, name) in &is_same_features {
        let Some(poi_value) = pair_of_interest.value(index) else {
            continue; // cannot pin a missing value
        };
        let disagreeing: Vec<_> = evidence
            .iter()
            .filter(|p| matches!(p.value(index), Some(v) if v != poi_value))
            .collect();
        let score = if disagreeing.is_empty() {
            0.0
        } else {
            let expected = disagreeing
                .iter()
                .filter(|p| p.label == PairLabel::Expected)
                .count();
            expected as f64 / disagreeing.len() as f64
        };
        scored.push((index, name, score));
    }
    scored.sort_by(|a, b| b.2.total_cmp(&a.2).then_with(|| a.1.cmp(b.1)));

    let mut atoms = Vec::new();
    let mut trace = Vec::new();
    for &(index, name, score) in scored.iter().take(width) {
        let constant = match pair_of_interest.value(index) {
            Some(DerivedValue::Flag(b)) => Literal::Flag(*b),
            _ => continue,
        };
        let atom = AtomicPredicate {
            feature: index,
            feature_name: name.to_string(),
            op: CmpOp::Eq,
            constant,
        };
        trace.push(TraceStep {
            clause: ClauseKind::Because,
            step: atoms.len() + 1,
            atom: atom.clone(),
            info_gain: 0.0,
            marginal: Some(score),
            generality: None,
            score,
            surviving: evidence.len(),
        });
        atoms.push(atom);
    }
    let bec = Clause { atoms };
    let scores = score_explanation(query, &Clause::empty(), &bec, related);
    let explanation = Explanation {
        method: Method::SimButDiff,
        des_prime: Clause::empty(),
        bec,
        scores,
        trace,
    };
    assert!(
        explanation.is_applicable_to(pair_of_interest),
        "what-if atoms pin the pair of interest's own values"
    );
    Ok(explanation)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::log_model::{ExecutionRecord, FeatureSchema, LogLevel, LogSchema, Value};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn schema() -> LogSchema {
        LogSchema::new(vec![
            FeatureSchema::numeric("inputsize", FeatureRole::Data),
            FeatureSchema::numeric("numinstances", FeatureRole::Config),
            FeatureSchema::nominal("script", FeatureRole::App, ["a.pig", "b.pig"]),
            FeatureSchema::outcome(),
        ])
        .unwrap()
    }

    fn record(id: &str, size: f64, inst: f64, script: &str, dur: f64) -> ExecutionRecord {
        ExecutionRecord::new(id, dur)
            .set("inputsize", Value::Num(size))
            .set("numinstances", Value::Num(inst))
            .set("script", Value::Str(script.into()))
    }

    #[test]
    fn relief_matches_brute_force_on_hand_log() {
        let log = ExecutionLog {
            schema: schema(),
            records: vec![
                record("a", 1.0, 4.0, "a.pig", 100.0),
                record("b", 2.0, 4.0, "a.pig", 200.0),
                record("c", 1.0, 8.0, "b.pig", 110.0),
                record("d", 2.0, 8.0, "b.pig", 190.0),
            ],
            level: LogLevel::Job,
        };
        // k = n-1 and one full pass: the neighbor set of every record is
        // all other records, so the accumulators are plain sums over all
        // ordered record pairs and the visiting order cannot matter.
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let table = relief_weights(&log, 3, 4, &mut rng).unwrap();

        // brute-force oracle over all ordered record pairs
        let features = ["inputsize", "numinstances", "script"];
        let ranges = [1.0, 4.0, 1.0];
        let dur_range = 100.0;
        let mut n_dt = 0.0;
        let mut n_df = [0.0; 3];
        let mut n_dt_df = [0.0; 3];
        let mut updates = 0.0;
        for r in &log.records {
            for o in &log.records {
                if std::ptr::eq(r, o) {
                    continue;
                }
                let dt = (r.duration - o.duration).abs() / dur_range;
                n_dt += dt;
                updates += 1.0;
                for (f, name) in features.iter().enumerate() {
                    let df = match (r.raw_value(name), o.raw_value(name)) {
                        (Some(ValueRef::Num(x)), Some(ValueRef::Num(y))) => {
                            (x - y).abs() / ranges[f]
                        }
                        (Some(ValueRef::Str(x)), Some(ValueRef::Str(y))) => {
                            if x == y {
                                0.0
                            } else {
                                1.0
                            }
                        }
                        _ => 0.5,
                    };
                    n_df[f] += df;
                    n_dt_df[f] += dt * df;
                }
            }
        }
        for (f, name) in features.iter().enumerate() {
            let want = n_dt_df[f] / n_dt - (n_df[f] - n_dt_df[f]) / (updates - n_dt);
            let got = table.weight(name).unwrap();
            assert!((got - want).abs() < 1e-12, "{name}: got {got}, want {want}");
        }
    }

    #[test]
    fn relief_finds_planted_dependency() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut records = Vec::new();
        for i in 0..40 {
            let size = 1.0 + (i % 8) as f64;
            let noise_inst = rng.gen_range(1.0..16.0);
            let script = if rng.gen::<bool>() { "a.pig" } else { "b.pig" };
            records.push(record(
                &format!("r{i}"),
                size,
                noise_inst,
                script,
                size * size * 10.0, // duration depends on inputsize only
            ));
        }
        let log = ExecutionLog {
            schema: schema(),
            records,
            level: LogLevel::Job,
        };
        let table = relief_weights(&log, 10, log.records.len(), &mut rng).unwrap();
        let ranked = table.ranked();
        assert_eq!(ranked[0].0, "inputsize", "{ranked:?}");
        assert!(ranked[0].1 > ranked[1].1);
    }

    #[test]
    fn relief_constant_feature_weighs_zero() {
        let log = ExecutionLog {
            schema: schema(),
            records: vec![
                record("a", 1.0, 4.0, "a.pig", 100.0),
                record("b", 2.0, 4.0, "a.pig", 200.0),
                record("c", 3.0, 4.0, "a.pig", 300.0),
            ],
            level: LogLevel::Job,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let table = relief_weights(&log, 2, 3, &mut rng).unwrap();
        assert_eq!(table.weight("numinstances"), Some(0.0));
    }

    #[test]
    fn relief_rejects_degenerate_log() {
        let log = ExecutionLog {
            schema: schema(),
            records: vec![
                record("a", 1.0, 4.0, "a.pig", 100.0),
                record("b", 1.0, 4.0, "a.pig", 100.0),
                record("c", 1.0, 4.0, "a.pig", 100.0),
            ],
            level: LogLevel::Job,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(matches!(
            relief_weights(&log, 2, 3, &mut rng),
            Err(Error::DegenerateLog(_))
        ));
    }

    use crate::pxql::parse_query;

    fn flags_catalog() -> PairFeatureCatalog {
        let schema = LogSchema::new(vec![
            FeatureSchema::numeric("a", FeatureRole::Config),
            FeatureSchema::numeric("b", FeatureRole::Config),
            FeatureSchema::numeric("c", FeatureRole::Config),
            FeatureSchema::outcome(),
        ])
        .unwrap();
        PairFeatureCatalog::new(&schema, 0.10).unwrap()
    }

    fn flag_pair(
        catalog: &PairFeatureCatalog,
        id: usize,
        flags: [bool; 3],
        label: PairLabel,
    ) -> PairExample {
        let mut derived = vec![None; catalog.len()];
        for (name, flag) in ["a_isSame", "b_isSame", "c_isSame"].iter().zip(flags) {
            derived[catalog.resolve(name).unwrap()] = Some(DerivedValue::Flag(flag));
        }
        PairExample::from_values(format!("l{id}"), format!("r{id}"), derived, label)
    }

    fn toy_query(catalog: &PairFeatureCatalog) -> Query {
        parse_query(
            "OBSERVED duration_compare = GT EXPECTED duration_compare = SIM",
            catalog,
        )
        .unwrap()
    }

    #[test]
    fn rule_of_thumb_worked_example() {
        // importance order: numinstances, inputsize, num_reduce_tasks; the
        // pair agrees on numinstances and disagrees on the other two
        let schema = LogSchema::new(vec![
            FeatureSchema::numeric("numinstances", FeatureRole::Config),
            FeatureSchema::numeric("inputsize", FeatureRole::Data),
            FeatureSchema::numeric("num_reduce_tasks", FeatureRole::Config),
            FeatureSchema::outcome(),
        ])
        .unwrap();
        let catalog = PairFeatureCatalog::new(&schema, 0.10).unwrap();
        let table = FeatureWeightTable {
            weights: vec![
                ("numinstances".into(), 0.9),
                ("inputsize".into(), 0.6),
                ("num_reduce_tasks".into(), 0.3),
            ],
        };
        let mut derived = vec![None; catalog.len()];
        for (name, flag) in [
            ("numinstances_isSame", true),
            ("inputsize_isSame", false),
            ("num_reduce_tasks_isSame", false),
        ] {
            derived[catalog.resolve(name).unwrap()] = Some(DerivedValue::Flag(flag));
        }
        let poi = PairExample::from_values("j1", "j2", derived, PairLabel::Observed);
        let query = toy_query(&catalog);

        let explanation = rule_of_thumb_explain(&query, &table, &poi, 2, &catalog, &[]);
        let atoms: Vec<String> = explanation
            .bec
            .atoms
            .iter()
            .map(|a| a.to_string())
            .collect();
        assert_eq!(
            atoms,
            vec!["inputsize_isSame = F", "num_reduce_tasks_isSame = F"]
        );
        assert!(explanation.des_prime.is_empty());
        assert!(explanation.is_applicable_to(&poi));

        // width 1 keeps only the highest-weight disagreeing feature
        let w1 = rule_of_thumb_explain(&query, &table, &poi, 1, &catalog, &[]);
        assert_eq!(w1.bec.atoms[0].to_string(), "inputsize_isSame = F");

        // a pair agreeing on everything yields the empty clause
        let mut all_same = vec![None; catalog.len()];
        for name in [
            "numinstances_isSame",
            "inputsize_isSame",
            "num_reduce_tasks_isSame",
        ] {
            all_same[catalog.resolve(name).unwrap()] = Some(DerivedValue::Flag(true));
        }
        let agreeable = PairExample::from_values("j1", "j3", all_same, PairLabel::Observed);
        let empty = rule_of_thumb_explain(&query, &table, &agreeable, 2, &catalog, &[]);
        assert!(empty.bec.is_empty());
    }

    #[test]
    fn rule_of_thumb_ignores_obs_exp_clauses() {
        let catalog = flags_catalog();
        let table = FeatureWeightTable {
            weights: vec![("a".into(), 0.5), ("b".into(), 0.4), ("c".into(), 0.1)],
        };
        let poi = flag_pair(&catalog, 0, [false, false, true], PairLabel::Observed);
        let q1 = toy_query(&catalog);
        let q2 = parse_query(
            "OBSERVED duration_compare = LT EXPECTED duration_compare = SIM",
            &catalog,
        )
        .unwrap();
        let e1 = rule_of_thumb_explain(&q1, &table, &poi, 2, &catalog, &[]);
        let e2 = rule_of_thumb_explain(&q2, &table, &poi, 2, &catalog, &[]);
        assert_eq!(e1.bec, e2.bec);
    }

    #[test]
    fn sim_but_diff_matches_hand_counted_scores() {
        let catalog = flags_catalog();
        let query = toy_query(&catalog);
        let poi = flag_pair(&catalog, 99, [true, true, false], PairLabel::Observed);
        use PairLabel::{Expected as E, Observed as O};
        let related = vec![
            flag_pair(&catalog, 1, [true, true, true], E),
            flag_pair(&catalog, 2, [true, true, false], O),
            flag_pair(&catalog, 3, [false, true, false], E),
            flag_pair(&catalog, 4, [false, true, false], O),
            flag_pair(&catalog, 5, [true, false, false], E),
            flag_pair(&catalog, 6, [true, true, true], O),
            flag_pair(&catalog, 7, [false, false, true], E), // too dissimilar
            flag_pair(&catalog, 8, [true, true, false], E),
        ];
        // s = 0.5 over 3 dims: similar pairs agree on >= 2 features.
        // By direct counting over S = {1,2,3,4,5,6,8}:
        //   a: disagreeing {3,4}, expected {3}      -> 0.5
        //   b: disagreeing {5},   expected {5}      -> 1.0
        //   c: disagreeing {1,6}, expected {1}      -> 0.5
        // order: b, then a before c by name on the tie
        let explanation = sim_but_diff_explain(&query, &related, &catalog, &poi, 3, 0.5).unwrap();
        let got: Vec<(String, Option<f64>)> = explanation
            .trace
            .iter()
            .map(|s| (s.atom.to_string(), s.marginal))
            .collect();
        assert_eq!(
            got,
            vec![
                ("b_isSame = T".to_string(), Some(1.0)),
                ("a_isSame = T".to_string(), Some(0.5)),
                ("c_isSame = F".to_string(), Some(0.5)),
            ]
        );
        assert!(explanation.is_applicable_to(&poi));
    }

    #[test]
    fn sim_but_diff_planted_what_if() {
        // flipping feature a reliably flips the label; feature b is noise;
        // all of S agrees on c, so its denominator is 0 and it scores 0
        let catalog = flags_catalog();
        let query = toy_query(&catalog);
        let poi = flag_pair(&catalog, 99, [true, true, true], PairLabel::Observed);
        let mut related = Vec::new();
        for i in 0..12 {
            let a = i % 3 != 0;
            let b = i % 2 == 0;
            let label = if a {
                PairLabel::Observed
            } else {
                PairLabel::Expected
            };
            related.push(flag_pair(&catalog, i, [a, b, true], label));
        }
        let explanation = sim_but_diff_explain(&query, &related, &catalog, &poi, 3, 0.5).unwrap();
        assert_eq!(explanation.trace[0].atom.feature_name, "a_isSame");
        assert_eq!(explanation.trace[0].marginal, Some(1.0));
        let c_step = explanation
            .trace
            .iter()
            .find(|s| s.atom.feature_name == "c_isSame")
            .unwrap();
        assert_eq!(c_step.marginal, Some(0.0));
    }

    #[test]
    fn sim_but_diff_errors_when_nothing_is_similar() {
        let catalog = flags_catalog();
        let query = toy_query(&catalog);
        let poi = flag_pair(&catalog, 99, [true, true, true], PairLabel::Observed);
        let related = vec![flag_pair(
            &catalog,
            1,
            [false, false, false],
            PairLabel::Expected,
        )];
        let err = sim_but_diff_explain(&query, &related, &catalog, &poi, 2, 0.9).unwrap_err();
        assert!(matches!(err, Error::NoSimilarPairs { .. }), "{err}");
    }

    #[test]
    fn relief_deterministic_under_seed() {
        let mut records = Vec::new();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for i in 0..20 {
            records.push(record(
                &format!("r{i}"),
                rng.gen_range(1.0..8.0),
                rng.gen_range(1.0..16.0),
                "a.pig",
                rng.gen_range(10.0..100.0),
            ));
        }
        let log = ExecutionLog {
            schema: schema(),
            records,
            level: LogLevel::Job,
        };
        let w1 = relief_weights(&log, 5, 10, &mut ChaCha8Rng::seed_from_u64(42)).unwrap();
        let w2 = relief_weights(&log, 5, 10, &mut ChaCha8Rng::seed_from_u64(42)).unwrap();
        assert_eq!(w1.weights, w2.weights);
    }
}
