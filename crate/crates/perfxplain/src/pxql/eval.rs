//! Query validation against the pair of interest, including the
//! conservative `obs ⊨ ¬exp` entailment check.

use crate::error::Diagnostic;
use crate::log_model::FeatureKind;
use crate::pair::{Comparison, DerivedValue, Family, PairExample, PairFeatureCatalog};

use super::{value_satisfies, AtomicPredicate, Clause, CmpOp, Literal, Query};

/// Checks the query against its pair of interest: despite and observed
/// must hold on the pair, expected must not, and the observed clause must
/// provably exclude the expected clause. Returns one diagnostic per
/// violation; an empty result means the query is well-formed.
pub fn validate_query(
    query: &Query,
    pair_of_interest: &PairExample,
    catalog: &PairFeatureCatalog,
) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    for (clause, name, want) in [
        (&query.des, "despite", true),
        (&query.obs, "observed", true),
        (&query.exp, "expected", false),
    ] {
        let holds = clause.eval(pair_of_interest);
        if holds != want {
            let detail = if want {
                let failing = clause
                    .atoms
                    .iter()
                    .find(|a| !a.eval(pair_of_interest))
                    .map(|a| format!(" (atom `{a}` is false)"))
                    .unwrap_or_default();
                format!(
                    "{name} clause must hold on the pair of interest{detail}",
                    detail = failing
                )
            } else {
                format!("{name} clause must be false on the pair of interest")
            };
            out.push(Diagnostic::new("query", detail));
        }
    }
    if !observed_excludes_expected(&query.obs, &query.exp, catalog) {
        out.push(Diagnostic::new(
            "query",
            "cannot establish that the observed clause excludes the expected clause: \
             no feature constrained by both has disjoint permitted values",
        ));
    }
    out
}

/// Conservative entailment `obs ⊨ ¬exp`: established iff some feature
/// constrained by both clauses has an empty joint value set. For features
/// with finite domains the domain is enumerated; for numeric base features
/// the atoms are intersected as intervals (`!=` constraints are ignored,
/// which only weakens the check, never wrongly establishes it).
fn observed_excludes_expected(obs: &Clause, exp: &Clause, catalog: &PairFeatureCatalog) -> bool {
    let exp_features: std::collections::HashSet<usize> =
        exp.atoms.iter().map(|a| a.feature).collect();
    let shared: std::collections::HashSet<usize> = obs
        .atoms
        .iter()
        .map(|a| a.feature)
        .filter(|f| exp_features.contains(f))
        .collect();
    shared.into_iter().any(|feature| {
        let atoms: Vec<&AtomicPredicate> = obs
            .atoms
            .iter()
            .chain(exp.atoms.iter())
            .filter(|a| a.feature == feature)
            .collect();
        jointly_unsatisfiable(feature, &atoms, catalog)
    })
}

fn jointly_unsatisfiable(
    feature: usize,
    atoms: &[&AtomicPredicate],
    catalog: &PairFeatureCatalog,
) -> bool {
    let derived = catalog.get(feature);
    let satisfies_all =
        |v: &DerivedValue| atoms.iter().all(|a| value_satisfies(v, a.op, &a.constant));
    match (derived.family, derived.raw_kind) {
        (Family::IsSame, _) => ![true, false]
            .into_iter()
            .any(|b| satisfies_all(&DerivedValue::Flag(b))),
        (Family::Compare, _) => ![Comparison::Lt, Comparison::Sim, Comparison::Gt]
            .into_iter()
            .any(|c| satisfies_all(&DerivedValue::Cmp(c))),
        (Family::Base, FeatureKind::Nominal) => {
            let Some(domain) = catalog
                .schema()
                .get(&derived.raw_name)
                .and_then(|f| f.domain.clone())
            else {
                return false;
            };
            !domain
                .iter()
                .any(|v| satisfies_all(&DerivedValue::Str(v.clone())))
        }
        (Family::Diff, FeatureKind::Nominal) => {
            let Some(domain) = catalog
                .schema()
                .get(&derived.raw_name)
                .and_then(|f| f.domain.clone())
            else {
                return false;
            };
            !domain.iter().any(|a| {
                domain
                    .iter()
                    .any(|b| satisfies_all(&DerivedValue::ValuePair(a.clone(), b.clone())))
            })
        }
        (Family::Base, FeatureKind::Numeric) => numeric_interval_empty(atoms),
        _ => false,
    }
}

fn numeric_interval_empty(atoms: &[&AtomicPredicate]) -> bool {
    let mut lo = f64::NEG_INFINITY;
    let mut lo_closed = true;
    let mut hi = f64::INFINITY;
    let mut hi_closed = true;
    for atom in atoms {
        let Literal::Num(c) = atom.constant else {
            continue;
        };
        match atom.op {
            CmpOp::Eq => {
                tighten_lo(&mut lo, &mut lo_closed, c, true);
                tighten_hi(&mut hi, &mut hi_closed, c, true);
            }
            CmpOp::Lt => tighten_hi(&mut hi, &mut hi_closed, c, false),
            CmpOp::Le => tighten_hi(&mut hi, &mut hi_closed, c, true),
            CmpOp::Gt => tighten_lo(&mut lo, &mut lo_closed, c, false),
            CmpOp::Ge => tighten_lo(&mut lo, &mut lo_closed, c, true),
            CmpOp::Ne => {} // ignored: over-approximation keeps the check sound
        }
    }
    lo > hi || (lo == hi && !(lo_closed && hi_closed))
}

fn tighten_lo(lo: &mut f64, closed: &mut bool, c: f64, c_closed: bool) {
    if c > *lo || (c == *lo && !c_closed) {
        *lo = c;
        *closed = c_closed;
    }
}

fn tighten_hi(hi: &mut f64, closed: &mut bool, c: f64, c_closed: bool) {
    if c < *hi || (c == *hi && !c_closed) {
        *hi = c;
        *closed = c_closed;
    }
}

#[cfg(test)]
mod tests {
    use super::super::parse_query;
    use super::*;
    use crate::log_model::{ExecutionRecord, FeatureRole, FeatureSchema, LogSchema, Value};

    fn catalog() -> PairFeatureCatalog {
        let schema = LogSchema::new(vec![
            FeatureSchema::numeric("inputsize", FeatureRole::Data),
            FeatureSchema::numeric("blocksize", FeatureRole::Config),
            FeatureSchema::nominal("pigscript", FeatureRole::App, ["filter.pig", "join.pig"]),
            FeatureSchema::outcome(),
        ])
        .unwrap();
        PairFeatureCatalog::new(&schema, 0.10).unwrap()
    }

    fn record(id: &str, inputsize: f64, blocksize: f64, script: &str, dur: f64) -> ExecutionRecord {
        ExecutionRecord::new(id, dur)
            .set("inputsize", Value::Num(inputsize))
            .set("blocksize", Value::Num(blocksize))
            .set("pigscript", Value::Str(script.into()))
    }

    #[test]
    fn eval_empty_clause_is_true() {
        let cat = catalog();
        let a = record("a", 1.0, 64.0, "filter.pig", 100.0);
        let b = record("b", 2.0, 64.0, "filter.pig", 300.0);
        let pair = cat.build_pair(&a, &b).unwrap();
        assert!(Clause::empty().eval(&pair));
    }

    #[test]
    fn eval_missing_feature_is_false() {
        let cat = catalog();
        let a = record("a", 1.0, 64.0, "filter.pig", 100.0);
        let b = record("b", 2.0, 256.0, "filter.pig", 300.0);
        let pair = cat.build_pair(&a, &b).unwrap();
        // blocksize differs, so blocksize base is missing: >= is false
        let atom = AtomicPredicate::new(&cat, "blocksize", CmpOp::Ge, Literal::Num(128.0)).unwrap();
        assert!(!atom.eval(&pair));

        let c = record("c", 2.0, 256.0, "filter.pig", 300.0);
        let pair_eq = cat.build_pair(&b, &c).unwrap();
        assert!(atom.eval(&pair_eq));
    }

    #[test]
    fn eval_duration_compare_via_similarity() {
        let cat = catalog();
        let a = record("a", 1.0, 64.0, "filter.pig", 100.0);
        let b = record("b", 1.0, 64.0, "filter.pig", 300.0);
        let pair = cat.build_pair(&a, &b).unwrap();
        let sim = AtomicPredicate::new(
            &cat,
            "duration_compare",
            CmpOp::Eq,
            Literal::Cmp(Comparison::Sim),
        )
        .unwrap();
        assert!(!sim.eval(&pair));
        let lt = AtomicPredicate::new(
            &cat,
            "duration_compare",
            CmpOp::Eq,
            Literal::Cmp(Comparison::Lt),
        )
        .unwrap();
        assert!(lt.eval(&pair));
    }

    #[test]
    fn clause_conjunction_distributes() {
        let cat = catalog();
        let a = record("a", 1.0, 64.0, "filter.pig", 100.0);
        let b = record("b", 1.0, 64.0, "filter.pig", 300.0);
        let pair = cat.build_pair(&a, &b).unwrap();
        let c1 = Clause {
            atoms: vec![AtomicPredicate::new(
                &cat,
                "inputsize_isSame",
                CmpOp::Eq,
                Literal::Flag(true),
            )
            .unwrap()],
        };
        let c2 = Clause {
            atoms: vec![AtomicPredicate::new(
                &cat,
                "duration_compare",
                CmpOp::Eq,
                Literal::Cmp(Comparison::Gt),
            )
            .unwrap()],
        };
        assert_eq!(c1.and(&c2).eval(&pair), c1.eval(&pair) && c2.eval(&pair));
    }

    #[test]
    fn validate_accepts_well_formed_query() {
        let cat = catalog();
        let slow = record("slow", 2.6e9, 64.0, "filter.pig", 660.0);
        let fast = record("fast", 1.3e9, 64.0, "filter.pig", 360.0);
        let poi = cat.build_pair(&slow, &fast).unwrap();
        let q = parse_query(
            "DESPITE pigscript_isSame = T OBSERVED duration_compare = GT EXPECTED duration_compare = SIM",
            &cat,
        )
        .unwrap();
        assert!(validate_query(&q, &poi, &cat).is_empty());
    }

    #[test]
    fn validate_rejects_unestablished_entailment() {
        let cat = catalog();
        let slow = record("slow", 2.6e9, 64.0, "filter.pig", 660.0);
        let fast = record("fast", 1.3e9, 64.0, "filter.pig", 360.0);
        let poi = cat.build_pair(&slow, &fast).unwrap();
        // observed and expected constrain unrelated features
        let q = parse_query(
            "OBSERVED inputsize_compare = GT EXPECTED duration_compare = SIM",
            &cat,
        )
        .unwrap();
        let diags = validate_query(&q, &poi, &cat);
        assert_eq!(diags.len(), 1);
        assert!(diags[0].message.contains("excludes"), "{diags:?}");
    }

    #[test]
    fn validate_reports_failing_despite_atom() {
        let cat = catalog();
        let slow = record("slow", 2.6e9, 64.0, "filter.pig", 660.0);
        let fast = record("fast", 1.3e9, 64.0, "join.pig", 360.0);
        let poi = cat.build_pair(&slow, &fast).unwrap();
        let q = parse_query(
            "DESPITE pigscript_isSame = T OBSERVED duration_compare = GT EXPECTED duration_compare = SIM",
            &cat,
        )
        .unwrap();
        let diags = validate_query(&q, &poi, &cat);
        assert_eq!(diags.len(), 1);
        assert!(diags[0].message.contains("pigscript_isSame"), "{diags:?}");
    }

    #[test]
    fn entailment_on_numeric_base_intervals() {
        let cat = catalog();
        let mk = |text: &str| parse_query(text, &cat).unwrap();
        // blocksize >= 128 excludes blocksize < 100
        let q = mk("OBSERVED blocksize >= 128 EXPECTED blocksize < 100");
        assert!(observed_excludes_expected(&q.obs, &q.exp, &cat));
        // overlapping intervals: not established
        let q = mk("OBSERVED blocksize >= 128 EXPECTED blocksize < 256");
        assert!(!observed_excludes_expected(&q.obs, &q.exp, &cat));
        // touching at an open endpoint: established
        let q = mk("OBSERVED blocksize > 128 EXPECTED blocksize <= 128");
        assert!(observed_excludes_expected(&q.obs, &q.exp, &cat));
    }
}
