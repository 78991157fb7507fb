//! Train/test evaluation harness: random 2-way splits, repeated runs,
//! and per-(method, width) aggregation of test-side metrics.
//!
//! Each repeat splits the log (Bernoulli membership at the train
//! fraction), injects the pair of interest into both halves so that
//! applicability and test metrics stay well-defined, generates
//! explanations on the training half, and measures them on the test half.

use rayon::prelude::*;
use serde::Serialize;

use crate::baselines::{relief_weights, rule_of_thumb_explain, sim_but_diff_explain};
use crate::error::{Error, Result};
use crate::explainer::{related_population, Explainer, ExplainerConfig};
use crate::log_model::ExecutionLog;
use crate::metrics::{score_explanation, Explanation, ExplanationScores, Method};
use crate::pair::PairFeatureCatalog;
use crate::pxql::Query;
use crate::synth::split_log;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const REPORT_SCHEMA_VERSION: u32 = 1;
pub const EVAL_CSV_HEADER: &str = "method,width,repeat,precision,generality,relevance";

/// One explain run, serialized as the stable JSON report.
#[derive(Debug, Serialize)]
pub struct RunReport {
    pub schema_version: u32,
    pub method: Method,
    /// Echo of the query text.
    pub query: String,
    pub seed: u64,
    pub explanation: Explanation,
    /// The reply form, `DESPITE des' BECAUSE bec`.
    pub explanation_text: String,
    /// Metrics over the log the explanation was generated from.
    pub training: ExplanationScores,
    /// Metrics over a held-out log, when evaluation mode was used.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub test: Option<ExplanationScores>,
    pub timings: Timings,
}

#[derive(Debug, Serialize)]
pub struct Timings {
    pub explain_ms: f64,
}

/// Baseline knobs that sit outside [`ExplainerConfig`].
#[derive(Debug, Clone)]
pub struct BaselineConfig {
    /// Relief nearest-neighbor count.
    pub relief_neighbors: usize,
    /// Relief sampling iterations; `None` means one pass over the log.
    pub relief_iterations: Option<usize>,
    /// SimButDiff similarity fraction.
    pub similarity_fraction: f64,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        BaselineConfig {
            relief_neighbors: 10,
            relief_iterations: None,
            similarity_fraction: 0.9,
        }
    }
}

/// Generates one explanation with the chosen method.
pub fn explain_with_method(
    method: Method,
    query: &Query,
    log: &ExecutionLog,
    catalog: &PairFeatureCatalog,
    cfg: &ExplainerConfig,
    baselines: &BaselineConfig,
) -> Result<Explanation> {
    let explainer = Explainer::new(catalog, cfg.clone())?;
    match method {
        Method::PerfXplain => explainer.explain(query, log),
        Method::RuleOfThumb => {
            let (poi, related) = related_population(catalog, query, log)?;
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
            let iterations = baselines.relief_iterations.unwrap_or(log.records.len());
            let table = relief_weights(log, baselines.relief_neighbors, iterations, &mut rng)?;
            Ok(rule_of_thumb_explain(
                query, &table, &poi, cfg.width, catalog, &related,
            ))
        }
        Method::SimButDiff => {
            let (poi, related) = related_population(catalog, query, log)?;
            sim_but_diff_explain(
                query,
                &related,
                catalog,
                &poi,
                cfg.width,
                baselines.similarity_fraction,
            )
        }
    }
}

#[derive(Debug, Clone)]
pub struct EvalConfig {
    pub methods: Vec<Method>,
    pub widths: Vec<usize>,
    pub repeats: usize,
    pub train_fractions: Vec<f64>,
    pub explainer: ExplainerConfig,
    pub baselines: BaselineConfig,
    pub seed: u64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            methods: vec![Method::PerfXplain, Method::RuleOfThumb, Method::SimButDiff],
            widths: vec![0, 1, 2, 3],
            repeats: 10,
            train_fractions: vec![0.5],
            explainer: ExplainerConfig::default(),
            baselines: BaselineConfig::default(),
            seed: 0,
        }
    }
}

/// Test-side metrics of one (method, width, repeat) run.
#[derive(Debug, Clone, Serialize)]
pub struct EvalRow {
    pub method: Method,
    pub width: usize,
    pub train_fraction: f64,
    pub repeat: usize,
    pub relevance: Option<f64>,
    pub precision: Option<f64>,
    pub generality: Option<f64>,
    /// Set when the method failed on this repeat (e.g. no similar pairs).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Mean and standard deviation of test precision per (method, width,
/// fraction), over the repeats where it was defined.
#[derive(Debug, Clone, Serialize)]
pub struct EvalSummary {
    pub method: Method,
    pub width: usize,
    pub train_fraction: f64,
    pub mean_precision: Option<f64>,
    pub sd_precision: Option<f64>,
    pub mean_generality: Option<f64>,
    pub mean_relevance: Option<f64>,
    pub defined: usize,
}

#[derive(Debug, Serialize)]
pub struct EvalReport {
    pub rows: Vec<EvalRow>,
    pub summaries: Vec<EvalSummary>,
}

fn mean_sd(values: &[f64]) -> (Option<f64>, Option<f64>) {
    if values.is_empty() {
        return (None, None);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let sd = if values.len() > 1 {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    (Some(mean), Some(sd))
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E3779B97F4A7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

fn derive_seed(base: u64, a: u64, b: u64) -> u64 {
    splitmix64(base ^ splitmix64(a.wrapping_add(1)) ^ splitmix64(b.wrapping_mul(0x9E37)))
}

fn ensure_record(half: &mut ExecutionLog, full: &ExecutionLog, id: &str) -> Result<()> {
    if half.record(id).is_none() {
        let record = full
            .record(id)
            .ok_or_else(|| Error::UnknownRecord(id.to_string()))?;
        half.records.push(record.clone());
    }
    Ok(())
}

/// Runs the full evaluation grid. Repeats run in parallel with seeds
/// derived from the base seed; output order is deterministic.
pub fn run_eval(
    log: &ExecutionLog,
    query: &Query,
    catalog: &PairFeatureCatalog,
    cfg: &EvalConfig,
) -> Result<EvalReport> {
    if cfg.repeats == 0 {
        return Err(Error::Config("repeats must be positive".into()));
    }
    let (left_id, right_id) = query.pair_ids()?;

    let mut jobs: Vec<(usize, f64, usize)> = Vec::new(); // (fraction idx, fraction, repeat)
    for (fi, &fraction) in cfg.train_fractions.iter().enumerate() {
        for repeat in 0..cfg.repeats {
            jobs.push((fi, fraction, repeat));
        }
    }

    let results: Result<Vec<Vec<EvalRow>>> = jobs
        .par_iter()
        .map(|&(fi, fraction, repeat)| {
            run_repeat(
                log,
                query,
                catalog,
                cfg,
                fraction,
                repeat,
                derive_seed(cfg.seed, fi as u64, repeat as u64),
                (left_id, right_id),
            )
        })
        .collect();
    let mut rows: Vec<EvalRow> = results?.into_iter().flatten().collect();
    rows.sort_by(|a, b| {
        a.train_fraction
            .total_cmp(&b.train_fraction)
            .then_with(|| a.method.name().cmp(b.method.name()))
            .then(a.width.cmp(&b.width))
            .then(a.repeat.cmp(&b.repeat))
    });

    let mut summaries = Vec::new();
    for &fraction in &cfg.train_fractions {
        for &method in &cfg.methods {
            for &width in &cfg.widths {
                let select: Vec<&EvalRow> = rows
                    .iter()
                    .filter(|r| {
                        r.method == method && r.width == width && r.train_fraction == fraction
                    })
                    .collect();
                let precisions: Vec<f64> = select.iter().filter_map(|r| r.precision).collect();
                let generalities: Vec<f64> = select.iter().filter_map(|r| r.generality).collect();
                let relevances: Vec<f64> = select.iter().filter_map(|r| r.relevance).collect();
                let (mean_precision, sd_precision) = mean_sd(&precisions);
                summaries.push(EvalSummary {
                    method,
                    width,
                    train_fraction: fraction,
                    mean_precision,
                    sd_precision,
                    mean_generality: mean_sd(&generalities).0,
                    mean_relevance: mean_sd(&relevances).0,
                    defined: precisions.len(),
                });
            }
        }
    }
    Ok(EvalReport { rows, summaries })
}

#[allow(clippy::too_many_arguments)]
fn run_repeat(
    log: &ExecutionLog,
    query: &Query,
    catalog: &PairFeatureCatalog,
    cfg: &EvalConfig,
    fraction: f64,
    repeat: usize,
    seed: u64,
    poi_ids: (&str, &str),
) -> Result<Vec<EvalRow>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut train, mut test) = split_log(log, fraction, &mut rng)?;
    for id in [poi_ids.0, poi_ids.1] {
        ensure_record(&mut train, log, id)?;
        ensure_record(&mut test, log, id)?;
    }

    let (train_poi, train_related) = related_population(catalog, query, &train)?;
    let (_, test_related) = related_population(catalog, query, &test)?;

    // the importance table is computed once per training log, not per
    // width; the neighbor count is capped so small training halves can
    // still run
    let relief_table = if cfg.methods.contains(&Method::RuleOfThumb) {
        let iterations = cfg
            .baselines
            .relief_iterations
            .unwrap_or(train.records.len());
        let neighbors = cfg
            .baselines
            .relief_neighbors
            .min(train.records.len().saturating_sub(1))
            .max(1);
        let mut relief_rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(0x5EED));
        Some(relief_weights(
            &train,
            neighbors,
            iterations,
            &mut relief_rng,
        )?)
    } else {
        None
    };

    let mut rows = Vec::new();
    for &method in &cfg.methods {
        for &width in &cfg.widths {
            let explainer_cfg = ExplainerConfig {
                width,
                rng_seed: seed,
                ..cfg.explainer.clone()
            };
            let explanation = match method {
                Method::PerfXplain => Explainer::new(catalog, explainer_cfg)?.explain_from(
                    query,
                    &train_poi,
                    &train_related,
                ),
                Method::RuleOfThumb => Ok(rule_of_thumb_explain(
                    query,
                    relief_table
                        .as_ref()
                        .expect("table computed for ruleofthumb"),
                    &train_poi,
                    width,
                    catalog,
                    &train_related,
                )),
                Method::SimButDiff => sim_but_diff_explain(
                    query,
                    &train_related,
                    catalog,
                    &train_poi,
                    width,
                    cfg.baselines.similarity_fraction,
                ),
            };
            let row = match explanation {
                Ok(explanation) => {
                    let scores = score_explanation(
                        query,
                        &explanation.des_prime,
                        &explanation.bec,
                        test_related.iter(),
                    );
                    EvalRow {
                        method,
                        width,
                        train_fraction: fraction,
                        repeat,
                        relevance: scores.relevance.value(),
                        precision: scores.precision.value(),
                        generality: scores.generality.value(),
                        error: None,
                    }
                }
                Err(err) => EvalRow {
                    method,
                    width,
                    train_fraction: fraction,
                    repeat,
                    relevance: None,
                    precision: None,
                    generality: None,
                    error: Some(err.to_string()),
                },
            };
            rows.push(row);
        }
    }
    Ok(rows)
}

fn csv_cell(v: Option<f64>) -> String {
    v.map(|x| format!("{x}")).unwrap_or_default()
}

impl EvalReport {
    /// CSV rows for one train fraction, under the stable header.
    pub fn to_csv(&self, fraction: f64) -> String {
        let mut out = String::from(EVAL_CSV_HEADER);
        out.push('\n');
        for r in self.rows.iter().filter(|r| r.train_fraction == fraction) {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                r.method,
                r.width,
                r.repeat,
                csv_cell(r.precision),
                csv_cell(r.generality),
                csv_cell(r.relevance),
            ));
        }
        out
    }

    pub fn fractions(&self) -> Vec<f64> {
        let mut out: Vec<f64> = Vec::new();
        for r in &self.rows {
            if !out.contains(&r.train_fraction) {
                out.push(r.train_fraction);
            }
        }
        out
    }

    /// Human-readable mean ± sd table.
    pub fn table(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "{:<12} {:>5} {:>9} {:>19} {:>11} {:>11} {:>4}\n",
            "method", "width", "fraction", "precision", "generality", "relevance", "n"
        ));
        for s in &self.summaries {
            let precision = match (s.mean_precision, s.sd_precision) {
                (Some(m), Some(sd)) => format!("{m:.4} +/- {sd:.4}"),
                _ => "undefined".to_string(),
            };
            let fmt_mean =
                |m: Option<f64>| m.map(|x| format!("{x:.4}")).unwrap_or_else(|| "-".into());
            out.push_str(&format!(
                "{:<12} {:>5} {:>9} {:>19} {:>11} {:>11} {:>4}\n",
                s.method.name(),
                s.width,
                format!("{:.2}", s.train_fraction),
                precision,
                fmt_mean(s.mean_generality),
                fmt_mean(s.mean_relevance),
                s.defined,
            ));
        }
        out
    }
}
