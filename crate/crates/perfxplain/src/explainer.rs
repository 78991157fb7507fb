//! Greedy clause growth: balanced sampling, per-feature
//! max-information-gain predicate search, percentile-rank score
//! normalization, and width-bounded growth of the because clause, plus
//! the symmetric despite-clause generation that optimizes relevance
//! instead of precision.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::log_model::{ExecutionLog, FeatureKind};
use crate::metrics::{
    classify_pair, score_explanation, ClauseKind, Explanation, Method, PairClass, TraceStep,
};
use crate::pair::{
    DerivedValue, Family, FeatureLevel, PairExample, PairFeatureCatalog, PairLabel,
    DEFAULT_SIMILARITY_THRESHOLD,
};
use crate::pxql::{value_satisfies, AtomicPredicate, Clause, CmpOp, Literal, Query};

/// Tuning knobs for explanation generation.
#[derive(Debug, Clone)]
pub struct ExplainerConfig {
    /// Number of atomic predicates to grow (the explanation width).
    pub width: usize,
    /// Weight of the precision percentile in the combined predicate
    /// score; generality gets the complement.
    pub precision_weight: f64,
    /// Balanced-sample target size.
    pub sample_size: usize,
    /// Relative-difference threshold for the compare features.
    pub similarity_threshold: f64,
    /// Which derived-feature families may appear in explanations.
    pub feature_level: FeatureLevel,
    /// When set, a despite clause is grown until its relevance reaches
    /// this threshold (or the width bound, whichever stops first).
    pub relevance_threshold: Option<f64>,
    pub rng_seed: u64,
}

impl Default for ExplainerConfig {
    fn default() -> Self {
        ExplainerConfig {
            width: 3,
            precision_weight: 0.8,
            sample_size: 2000,
            similarity_threshold: DEFAULT_SIMILARITY_THRESHOLD,
            feature_level: FeatureLevel::L3,
            relevance_threshold: None,
            rng_seed: 0,
        }
    }
}

impl ExplainerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.precision_weight) {
            return Err(Error::Config(format!(
                "precision weight must be in [0, 1], got {}",
                self.precision_weight
            )));
        }
        if self.sample_size == 0 {
            return Err(Error::Config("sample size must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.similarity_threshold) {
            return Err(Error::Config(format!(
                "similarity threshold must be in [0, 1), got {}",
                self.similarity_threshold
            )));
        }
        if let Some(r) = self.relevance_threshold {
            if !(0.0..=1.0).contains(&r) {
                return Err(Error::Config(format!(
                    "relevance threshold must be in [0, 1], got {r}"
                )));
            }
        }
        Ok(())
    }
}

/// Binary entropy in bits; the endpoints take their limit value 0.
pub fn entropy(p: f64) -> f64 {
    if p <= 0.0 || p >= 1.0 {
        return 0.0;
    }
    -p * p.log2() - (1.0 - p) * (1.0 - p).log2()
}

/// Entropy reduction from splitting `population` on `atom`:
/// `H(P) - H(P|atom)`, with the conditional entropy the size-weighted
/// average over the satisfying and non-satisfying partitions.
///
/// Pairs on which the atom's feature is missing are excluded from the
/// computation (they satisfy no atom on that feature and carry no signal
/// about it).
pub fn information_gain(population: &[PairExample], atom: &AtomicPredicate) -> f64 {
    let mut n = 0usize;
    let mut pos = 0usize;
    let mut sat = 0usize;
    let mut sat_pos = 0usize;
    for pair in population {
        let Some(v) = pair.value(atom.feature) else {
            continue;
        };
        n += 1;
        let is_pos = pair.label == PairLabel::Observed;
        if is_pos {
            pos += 1;
        }
        if value_satisfies(v, atom.op, &atom.constant) {
            sat += 1;
            if is_pos {
                sat_pos += 1;
            }
        }
    }
    if n == 0 {
        return 0.0;
    }
    let unsat = n - sat;
    let unsat_pos = pos - sat_pos;
    let total = entropy(pos as f64 / n as f64);
    let mut conditional = 0.0;
    if sat > 0 {
        conditional += (sat as f64 / n as f64) * entropy(sat_pos as f64 / sat as f64);
    }
    if unsat > 0 {
        conditional += (unsat as f64 / n as f64) * entropy(unsat_pos as f64 / unsat as f64);
    }
    total - conditional
}

/// A per-feature best predicate with its selection scores.
#[derive(Debug, Clone)]
pub struct CandidatePredicate {
    pub atom: AtomicPredicate,
    pub info_gain: f64,
    pub precision: Option<f64>,
    pub generality: Option<f64>,
    pub score: f64,
}

fn literal_of(v: &DerivedValue) -> Literal {
    match v {
        DerivedValue::Flag(b) => Literal::Flag(*b),
        DerivedValue::Cmp(c) => Literal::Cmp(*c),
        DerivedValue::ValuePair(a, b) => Literal::ValuePair(a.clone(), b.clone()),
        DerivedValue::Num(x) => Literal::Num(*x),
        DerivedValue::Str(s) => Literal::Str(s.clone()),
    }
}

/// The max-information-gain atom on one derived feature, among the
/// candidates that hold on the pair of interest. Nominal-valued features
/// contribute equality atoms over the values observed in the population;
/// numeric base features contribute `<= t` / `> t` atoms at midpoints
/// between consecutive observed values, plus equality atoms. Returns
/// `None` when no candidate survives the pair-of-interest restriction
/// (in particular when the feature is missing on the pair of interest).
pub fn best_predicate_for_feature(
    feature_index: usize,
    catalog: &PairFeatureCatalog,
    population: &[PairExample],
    pair_of_interest: &PairExample,
) -> Option<CandidatePredicate> {
    let poi_value = pair_of_interest.value(feature_index)?;
    let derived = catalog.get(feature_index);
    let atom = |op: CmpOp, constant: Literal| AtomicPredicate {
        feature: feature_index,
        feature_name: derived.name.clone(),
        op,
        constant,
    };

    let mut candidates: Vec<AtomicPredicate> = Vec::new();
    if derived.family == Family::Base && derived.raw_kind == FeatureKind::Numeric {
        let DerivedValue::Num(poi_x) = *poi_value else {
            return None;
        };
        let mut values: Vec<f64> = population
            .iter()
            .filter_map(|p| match p.value(feature_index) {
                Some(DerivedValue::Num(x)) => Some(*x),
                _ => None,
            })
            .collect();
        values.sort_by(f64::total_cmp);
        values.dedup();
        for &v in &values {
            if v == poi_x {
                candidates.push(atom(CmpOp::Eq, Literal::Num(v)));
            }
        }
        for w in values.windows(2) {
            let threshold = (w[0] + w[1]) / 2.0;
            if poi_x <= threshold {
                candidates.push(atom(CmpOp::Le, Literal::Num(threshold)));
            } else {
                candidates.push(atom(CmpOp::Gt, Literal::Num(threshold)));
            }
        }
    } else {
        // only the equality atom pinning the pair of interest's own value
        // can be true on it; it is a candidate iff that value occurs in
        // the population
        let occurs = population
            .iter()
            .any(|p| p.value(feature_index) == Some(poi_value));
        if occurs {
            candidates.push(atom(CmpOp::Eq, literal_of(poi_value)));
        }
    }

    let mut best: Option<CandidatePredicate> = None;
    for cand in candidates {
        let gain = information_gain(population, &cand);
        let better = match &best {
            None => true,
            Some(b) => {
                gain > b.info_gain
                    || (gain == b.info_gain && cand.sort_cmp(&b.atom) == std::cmp::Ordering::Less)
            }
        };
        if better {
            best = Some(CandidatePredicate {
                atom: cand,
                info_gain: gain,
                precision: None,
                generality: None,
                score: 0.0,
            });
        }
    }
    best
}

/// Replaces each defined value with its percentile rank among the defined
/// values (ties share one rank); undefined values score 0.
pub fn normalize_scores(values: &[Option<f64>]) -> Vec<f64> {
    let defined: Vec<f64> = values.iter().flatten().copied().collect();
    let n = defined.len() as f64;
    values
        .iter()
        .map(|v| match v {
            None => 0.0,
            Some(x) => defined.iter().filter(|d| **d <= *x).count() as f64 / n,
        })
        .collect()
}

/// Per-label keep probabilities for a balanced sample of target size `m`:
/// `m / (2 · count)` capped at 1.
pub fn keep_probabilities(sample_size: usize, observed: usize, expected: usize) -> (f64, f64) {
    let p = |count: usize| {
        if count == 0 {
            1.0
        } else {
            (sample_size as f64 / (2.0 * count as f64)).min(1.0)
        }
    };
    (p(observed), p(expected))
}

/// Independent Bernoulli keep-decisions with per-label probabilities,
/// so each label contributes about `m/2` pairs. The pair of interest is
/// always kept. Unlabeled pairs are dropped.
pub fn balanced_sample(
    pairs: &[PairExample],
    sample_size: usize,
    pair_of_interest: (&str, &str),
    rng: &mut impl Rng,
) -> Result<Vec<PairExample>> {
    if sample_size == 0 {
        return Err(Error::Config("sample size must be positive".into()));
    }
    let observed = pairs
        .iter()
        .filter(|p| p.label == PairLabel::Observed)
        .count();
    let expected = pairs
        .iter()
        .filter(|p| p.label == PairLabel::Expected)
        .count();
    let (p_obs, p_exp) = keep_probabilities(sample_size, observed, expected);
    let mut kept = Vec::new();
    for pair in pairs {
        if pair.ids() == pair_of_interest {
            kept.push(pair.clone());
            continue;
        }
        let p = match pair.label {
            PairLabel::Observed => p_obs,
            PairLabel::Expected => p_exp,
            PairLabel::Unlabeled => continue,
        };
        if rng.gen::<f64>() < p {
            kept.push(pair.clone());
        }
    }
    Ok(kept)
}

/// Result of one greedy growth run.
pub struct Growth {
    pub clause: Clause,
    pub trace: Vec<TraceStep>,
}

/// The greedy growth loop shared by because- and despite-clause
/// generation. `target` is the label whose conditional probability plays
/// the precision role (observed for because, expected for despite).
///
/// Stops early when the surviving sample carries a single label (no
/// further split can gain), when no candidate survives the
/// pair-of-interest restriction, or when `stop` says the clause is good
/// enough (the relevance-threshold rule).
#[allow(clippy::too_many_arguments)]
pub fn grow_clause(
    catalog: &PairFeatureCatalog,
    level: FeatureLevel,
    target: PairLabel,
    weight: f64,
    width: usize,
    sample: Vec<PairExample>,
    pair_of_interest: &PairExample,
    mut stop: impl FnMut(&Clause) -> bool,
    kind: ClauseKind,
) -> Growth {
    let mut surviving = sample;
    let mut clause = Clause::empty();
    let mut trace = Vec::new();
    for step in 1..=width {
        if stop(&clause) {
            break;
        }
        let on_target = surviving.iter().filter(|p| p.label == target).count();
        if on_target == 0 || on_target == surviving.len() {
            break; // single-label set: every further gain is 0
        }
        let mut candidates: Vec<CandidatePredicate> = Vec::new();
        for (index, feature) in catalog.features_at_level(level) {
            if feature.is_outcome() {
                continue; // the outcome must not explain itself
            }
            if let Some(c) =
                best_predicate_for_feature(index, catalog, &surviving, pair_of_interest)
            {
                candidates.push(c);
            }
        }
        if candidates.is_empty() {
            break;
        }
        let n = surviving.len();
        for c in &mut candidates {
            let mut sat = 0usize;
            let mut sat_target = 0usize;
            for p in &surviving {
                if c.atom.eval(p) {
                    sat += 1;
                    if p.label == target {
                        sat_target += 1;
                    }
                }
            }
            c.precision = if sat > 0 {
                Some(sat_target as f64 / sat as f64)
            } else {
                None
            };
            c.generality = Some(sat as f64 / n as f64);
        }
        let precisions: Vec<Option<f64>> = candidates.iter().map(|c| c.precision).collect();
        let generalities: Vec<Option<f64>> = candidates.iter().map(|c| c.generality).collect();
        let prec_scores = normalize_scores(&precisions);
        let gen_scores = normalize_scores(&generalities);
        for (i, c) in candidates.iter_mut().enumerate() {
            c.score = weight * prec_scores[i] + (1.0 - weight) * gen_scores[i];
        }
        let best = candidates
            .iter()
            .reduce(|best, c| {
                if c.score > best.score
                    || (c.score == best.score
                        && c.atom.sort_cmp(&best.atom) == std::cmp::Ordering::Less)
                {
                    c
                } else {
                    best
                }
            })
            .expect("candidates is nonempty")
            .clone();
        clause.atoms.push(best.atom.clone());
        surviving.retain(|p| best.atom.eval(p));
        trace.push(TraceStep {
            clause: kind,
            step,
            atom: best.atom,
            info_gain: best.info_gain,
            marginal: best.precision,
            generality: best.generality,
            score: best.score,
            surviving: surviving.len(),
        });
    }
    Growth { clause, trace }
}

/// Builds the pair of interest named by the query and streams the log's
/// ordered pairs through classification, keeping the related ones with
/// their labels. Errors when an id is absent from the log or when no pair
/// at all is related.
pub fn related_population(
    catalog: &PairFeatureCatalog,
    query: &Query,
    log: &ExecutionLog,
) -> Result<(PairExample, Vec<PairExample>)> {
    let (left_id, right_id) = query.pair_ids()?;
    let left = log
        .record(left_id)
        .ok_or_else(|| Error::UnknownRecord(left_id.to_string()))?;
    let right = log
        .record(right_id)
        .ok_or_else(|| Error::UnknownRecord(right_id.to_string()))?;
    let poi = catalog.build_pair(left, right)?;
    let mut related = Vec::new();
    for mut pair in catalog.enumerate_pairs(log)? {
        let class = classify_pair(&pair, query);
        if class != PairClass::Unrelated {
            pair.label = class.label();
            related.push(pair);
        }
    }
    if related.is_empty() {
        return Err(Error::NoRelatedPairs);
    }
    Ok((poi, related))
}

/// Explanation generation against one catalog and configuration.
pub struct Explainer<'a> {
    catalog: &'a PairFeatureCatalog,
    cfg: ExplainerConfig,
}

impl<'a> Explainer<'a> {
    pub fn new(catalog: &'a PairFeatureCatalog, cfg: ExplainerConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Explainer { catalog, cfg })
    }

    pub fn config(&self) -> &ExplainerConfig {
        &self.cfg
    }

    /// Builds the pair of interest and the labeled related population.
    pub fn related_population(
        &self,
        query: &Query,
        log: &ExecutionLog,
    ) -> Result<(PairExample, Vec<PairExample>)> {
        related_population(self.catalog, query, log)
    }

    /// Grows the because clause for a validated query (the despite clause
    /// of `query` already contains any generated extension). Final metrics
    /// are recomputed over the full related population, not the sample.
    pub fn generate_bec(&self, query: &Query, log: &ExecutionLog) -> Result<Explanation> {
        let (poi, related) = self.related_population(query, log)?;
        self.generate_bec_from(query, &poi, &related)
    }

    /// [`Self::generate_bec`] over a precomputed related population
    /// (labeled pairs related to `query`).
    pub fn generate_bec_from(
        &self,
        query: &Query,
        pair_of_interest: &PairExample,
        related: &[PairExample],
    ) -> Result<Explanation> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.cfg.rng_seed);
        let sample = balanced_sample(
            related,
            self.cfg.sample_size,
            pair_of_interest.ids(),
            &mut rng,
        )?;
        let growth = grow_clause(
            self.catalog,
            self.cfg.feature_level,
            PairLabel::Observed,
            self.cfg.precision_weight,
            self.cfg.width,
            sample,
            pair_of_interest,
            |_| false,
            ClauseKind::Because,
        );
        let scores = score_explanation(query, &Clause::empty(), &growth.clause, related.iter());
        let explanation = Explanation {
            method: Method::PerfXplain,
            des_prime: Clause::empty(),
            bec: growth.clause,
            scores,
            trace: growth.trace,
        };
        assert!(
            explanation.is_applicable_to(pair_of_interest),
            "generated explanation must hold on the pair of interest"
        );
        Ok(explanation)
    }

    /// Grows a despite extension: the same loop as [`Self::generate_bec`]
    /// but optimizing relevance P(exp | ·) instead of precision. Growth
    /// stops at the width bound or, when a relevance threshold is
    /// configured, as soon as the clause's relevance over the full related
    /// population reaches it.
    pub fn generate_des_prime(&self, query: &Query, log: &ExecutionLog) -> Result<Clause> {
        let (poi, related) = self.related_population(query, log)?;
        Ok(self.des_prime_growth(query, &poi, &related)?.clause)
    }

    fn des_prime_growth(
        &self,
        query: &Query,
        pair_of_interest: &PairExample,
        related: &[PairExample],
    ) -> Result<Growth> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.cfg.rng_seed);
        let sample = balanced_sample(
            related,
            self.cfg.sample_size,
            pair_of_interest.ids(),
            &mut rng,
        )?;
        let threshold = self.cfg.relevance_threshold;
        let stop = |clause: &Clause| match threshold {
            None => false,
            Some(r) => crate::metrics::relevance(query, clause, related.iter())
                .value()
                .is_some_and(|v| v >= r),
        };
        let growth = grow_clause(
            self.catalog,
            self.cfg.feature_level,
            PairLabel::Expected,
            self.cfg.precision_weight,
            self.cfg.width,
            sample,
            pair_of_interest,
            stop,
            ClauseKind::Despite,
        );
        assert!(
            growth.clause.eval(pair_of_interest),
            "generated despite clause must hold on the pair of interest"
        );
        Ok(growth)
    }

    /// Full pipeline: grows a despite extension first when a relevance
    /// threshold is configured, then grows the because clause in its
    /// context. Scores are reported against the user's original query with
    /// the generated extension as the explanation's despite clause.
    pub fn explain(&self, query: &Query, log: &ExecutionLog) -> Result<Explanation> {
        let (poi, related) = self.related_population(query, log)?;
        self.explain_from(query, &poi, &related)
    }

    /// [`Self::explain`] over a precomputed related population.
    pub fn explain_from(
        &self,
        query: &Query,
        pair_of_interest: &PairExample,
        related: &[PairExample],
    ) -> Result<Explanation> {
        let (des_prime, mut trace) = if self.cfg.relevance_threshold.is_some() {
            let growth = self.des_prime_growth(query, pair_of_interest, related)?;
            (growth.clause, growth.trace)
        } else {
            (Clause::empty(), Vec::new())
        };
        let extended = query.with_des_extension(&des_prime);
        // conditioning on des' shrinks the related population; labels are
        // untouched because obs/exp are unchanged
        let narrowed: Vec<PairExample> = related
            .iter()
            .filter(|p| des_prime.eval(p))
            .cloned()
            .collect();
        if narrowed.is_empty() {
            return Err(Error::NoRelatedPairs);
        }
        let mut explanation = self.generate_bec_from(&extended, pair_of_interest, &narrowed)?;
        explanation.des_prime = des_prime;
        trace.extend(explanation.trace);
        explanation.trace = trace;
        Ok(explanation)
    }
}
