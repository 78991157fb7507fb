use std::path::PathBuf;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};

use perfxplain::error::{Diagnostic, Error};
use perfxplain::eval::{
    explain_with_method, run_eval, BaselineConfig, EvalConfig, RunReport, Timings,
    REPORT_SCHEMA_VERSION,
};
use perfxplain::explainer::ExplainerConfig;
use perfxplain::log_model::{load_log, ExecutionLog};
use perfxplain::pair::FeatureLevel;
use perfxplain::pxql::validate_query;
use perfxplain::synth::{generate_job_log, generate_task_log, write_log, WorkloadSpec};
use perfxplain::{Method, PairFeatureCatalog, Query};

/// Explains the relative runtimes of pairs of jobs or tasks from a log of
/// past executions.
#[derive(Parser)]
#[command(name = "perfxplain", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate an explanation for one query
    Explain(ExplainArgs),
    /// Compare methods over repeated train/test splits
    Eval(EvalArgs),
    /// Generate a synthetic log with a planted causal model
    Synth(SynthArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// Log CSV file
    #[arg(long)]
    log: PathBuf,
    /// JSON schema sidecar for the log
    #[arg(long)]
    schema: PathBuf,
    /// Query file (UTF-8 text)
    #[arg(long)]
    query: PathBuf,
    /// Left pair-of-interest id (when the query has no WHERE clause)
    #[arg(long)]
    left: Option<String>,
    /// Right pair-of-interest id
    #[arg(long)]
    right: Option<String>,
    #[arg(long, default_value_t = 0.8)]
    precision_weight: f64,
    #[arg(long, default_value_t = 2000)]
    sample_size: usize,
    /// Derived-feature families available to explainers: 1 = isSame only,
    /// 2 = + compare/diff, 3 = + base
    #[arg(long, default_value_t = 3)]
    feature_level: u8,
    /// Grow a despite clause until its relevance reaches this threshold
    #[arg(long)]
    relevance_threshold: Option<f64>,
    /// Relative difference under which numeric values compare as similar
    #[arg(long, default_value_t = 0.10)]
    similarity_threshold: f64,
    /// Relief nearest-neighbor count (ruleofthumb)
    #[arg(long, default_value_t = 10)]
    relief_neighbors: usize,
    /// Fraction of isSame features a similar pair must agree on
    /// (simbutdiff)
    #[arg(long, default_value_t = 0.9)]
    simbutdiff_threshold: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct ExplainArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[arg(long, default_value = "perfxplain")]
    method: Method,
    /// Number of atoms in the because clause
    #[arg(long, default_value_t = 3)]
    width: usize,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    format: Format,
}

#[derive(Args)]
struct EvalArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[arg(long, value_delimiter = ',',
          default_values_t = vec![Method::PerfXplain, Method::RuleOfThumb, Method::SimButDiff])]
    methods: Vec<Method>,
    #[arg(long, value_delimiter = ',', default_values_t = vec![0, 1, 2, 3])]
    widths: Vec<usize>,
    #[arg(long, default_value_t = 10)]
    repeats: usize,
    /// Training-half fraction(s); several values sweep the log size
    #[arg(long = "train-fraction", value_delimiter = ',', default_values_t = vec![0.5])]
    train_fractions: Vec<f64>,
    /// Write per-repeat rows as CSV (one file per train fraction)
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args)]
struct SynthArgs {
    /// Workload spec JSON; omitted means the default parameter grid
    #[arg(long)]
    spec: Option<PathBuf>,
    #[arg(long)]
    out_log: PathBuf,
    #[arg(long)]
    out_schema: PathBuf,
    /// Generate the task-level log instead of the job-level one
    #[arg(long)]
    task_level: bool,
    /// Overrides the spec's rng seed
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Json,
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    let result = match cli.command {
        Command::Explain(args) => cmd_explain(args),
        Command::Eval(args) => cmd_eval(args),
        Command::Synth(args) => cmd_synth(args),
    };
    if let Err(err) = result {
        eprintln!("error: {err}");
        std::process::exit(err.exit_code());
    }
}

struct LoadedQuery {
    log: ExecutionLog,
    catalog: PairFeatureCatalog,
    query: Query,
    query_text: String,
}

impl CommonArgs {
    fn explainer_config(&self, width: usize) -> Result<ExplainerConfig, Error> {
        let cfg = ExplainerConfig {
            width,
            precision_weight: self.precision_weight,
            sample_size: self.sample_size,
            similarity_threshold: self.similarity_threshold,
            feature_level: FeatureLevel::try_from(self.feature_level)?,
            relevance_threshold: self.relevance_threshold,
            rng_seed: self.seed,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn baseline_config(&self) -> BaselineConfig {
        BaselineConfig {
            relief_neighbors: self.relief_neighbors,
            relief_iterations: None,
            similarity_fraction: self.simbutdiff_threshold,
        }
    }

    /// Loads the log, builds the catalog, parses the query, and runs the
    /// full pair-of-interest validation.
    fn load(&self) -> Result<LoadedQuery, Error> {
        let log = load_log(&self.schema, &self.log)?;
        let catalog = PairFeatureCatalog::new(&log.schema, self.similarity_threshold)?;
        let query_text =
            std::fs::read_to_string(&self.query).map_err(|e| Error::io(self.query.clone(), e))?;
        let mut query = perfxplain::parse_query(&query_text, &catalog)?;
        if let (Some(left), Some(right)) = (&self.left, &self.right) {
            query = query.with_ids(left, right);
        }
        if query.level != log.level {
            return Err(Error::InvalidQuery(vec![Diagnostic::new(
                "query",
                format!(
                    "query is {}-level but the log is {}-level",
                    query.level, log.level
                ),
            )]));
        }
        let (left_id, right_id) = query.pair_ids()?;
        let left = log
            .record(left_id)
            .ok_or_else(|| Error::UnknownRecord(left_id.to_string()))?;
        let right = log
            .record(right_id)
            .ok_or_else(|| Error::UnknownRecord(right_id.to_string()))?;
        let poi = catalog.build_pair(left, right)?;
        let diagnostics = validate_query(&query, &poi, &catalog);
        if !diagnostics.is_empty() {
            return Err(Error::InvalidQuery(diagnostics));
        }
        Ok(LoadedQuery {
            log,
            catalog,
            query,
            query_text,
        })
    }
}

fn cmd_explain(args: ExplainArgs) -> Result<(), Error> {
    let loaded = args.common.load()?;
    let cfg = args.common.explainer_config(args.width)?;
    let baselines = args.common.baseline_config();

    let started = Instant::now();
    let explanation = explain_with_method(
        args.method,
        &loaded.query,
        &loaded.log,
        &loaded.catalog,
        &cfg,
        &baselines,
    )?;
    let explain_ms = started.elapsed().as_secs_f64() * 1e3;

    let report = RunReport {
        schema_version: REPORT_SCHEMA_VERSION,
        method: args.method,
        query: loaded.query_text.trim().to_string(),
        seed: args.common.seed,
        explanation_text: explanation.text(),
        training: explanation.scores,
        test: None,
        timings: Timings { explain_ms },
        explanation,
    };

    match args.format {
        Format::Json => println!(
            "{}",
            serde_json::to_string_pretty(&report).expect("report serializes")
        ),
        Format::Text => print_report(&report),
    }
    Ok(())
}

fn print_report(report: &RunReport) {
    println!("method: {}", report.method);
    println!("seed:   {}", report.seed);
    println!("query:  {}", report.query.replace('\n', " "));
    println!();
    println!("{}", report.explanation_text);
    println!();
    println!("metrics over the log:");
    println!("  relevance  = {}", report.training.relevance);
    println!("  precision  = {}", report.training.precision);
    println!("  generality = {}", report.training.generality);
    if let Some(test) = &report.test {
        println!("test metrics:");
        println!("  relevance  = {}", test.relevance);
        println!("  precision  = {}", test.precision);
        println!("  generality = {}", test.generality);
    }
    if !report.explanation.trace.is_empty() {
        println!();
        println!("construction trace (marginal scores at selection):");
        for step in &report.explanation.trace {
            let marginal = step
                .marginal
                .map(|m| format!("{m:.4}"))
                .unwrap_or_else(|| "-".into());
            println!(
                "  {:?} {}: {}  [marginal {}, gain {:.4}]",
                step.clause, step.step, step.atom, marginal, step.info_gain
            );
        }
    }
    println!();
    println!("explain time: {:.1} ms", report.timings.explain_ms);
}

fn cmd_eval(args: EvalArgs) -> Result<(), Error> {
    let loaded = args.common.load()?;
    let cfg = EvalConfig {
        methods: args.methods.clone(),
        widths: args.widths.clone(),
        repeats: args.repeats,
        train_fractions: args.train_fractions.clone(),
        explainer: args.common.explainer_config(3)?,
        baselines: args.common.baseline_config(),
        seed: args.common.seed,
    };
    let report = run_eval(&loaded.log, &loaded.query, &loaded.catalog, &cfg)?;
    print!("{}", report.table());
    if let Some(path) = &args.csv {
        let fractions = report.fractions();
        if fractions.len() == 1 {
            std::fs::write(path, report.to_csv(fractions[0]))
                .map_err(|e| Error::io(path.clone(), e))?;
            println!("wrote {}", path.display());
        } else {
            for fraction in fractions {
                let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("eval");
                let ext = path.extension().and_then(|s| s.to_str()).unwrap_or("csv");
                let out = path.with_file_name(format!("{stem}-frac{fraction}.{ext}"));
                std::fs::write(&out, report.to_csv(fraction))
                    .map_err(|e| Error::io(out.clone(), e))?;
                println!("wrote {}", out.display());
            }
        }
    }
    Ok(())
}

fn cmd_synth(args: SynthArgs) -> Result<(), Error> {
    let mut spec = match &args.spec {
        Some(path) => WorkloadSpec::from_file(path)?,
        None => WorkloadSpec::default(),
    };
    if let Some(seed) = args.seed {
        spec.rng_seed = seed;
    }
    let job_log = generate_job_log(&spec)?;
    let log = if args.task_level {
        generate_task_log(&spec, &job_log)?
    } else {
        job_log
    };
    write_log(&log, &args.out_schema, &args.out_log)?;
    println!(
        "wrote {} {}-level records to {} (schema {})",
        log.records.len(),
        log.level,
        args.out_log.display(),
        args.out_schema.display()
    );
    Ok(())
}
