//! Synthetic execution logs from a planted causal model, so that
//! explanation quality can be checked against known ground truth.
//!
//! The model is a deliberate idealization of a map-phase-bound cluster:
//! an input is split into `ceil(inputsize / blocksize)` map tasks, the
//! cluster runs `slots_per_instance · numinstances` tasks per wave, and a
//! job's duration is `waves · per_block_time(script)`, optionally with
//! multiplicative Gaussian noise. At zero noise, duration is a
//! deterministic function of (inputsize, blocksize, numinstances, script)
//! alone; the nuisance features are pure rng and carry no signal.

use std::collections::BTreeMap;
use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::log_model::{
    save_log, ExecutionLog, ExecutionRecord, FeatureRole, FeatureSchema, LogLevel, LogSchema,
    Value, ValueRef,
};

/// Binary gigabyte / megabyte: 32 GiB split into 128 MiB blocks gives
/// exactly 256 map tasks.
pub const GIB: f64 = 1024.0 * 1024.0 * 1024.0;
pub const MIB: f64 = 1024.0 * 1024.0;

pub const FILTER_SCRIPT: &str = "simple-filter.pig";
pub const GROUPBY_SCRIPT: &str = "simple-groupby.pig";

/// Parameter grid and model knobs for one synthetic workload.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct WorkloadSpec {
    /// Cluster sizes to sweep.
    pub instances: Vec<f64>,
    /// Input sizes in bytes.
    pub input_sizes: Vec<f64>,
    /// DFS block sizes in bytes.
    pub block_sizes: Vec<f64>,
    pub reduce_factors: Vec<f64>,
    pub io_sort_factors: Vec<f64>,
    pub scripts: Vec<String>,
    /// Relative standard deviation of the multiplicative duration noise.
    pub noise: f64,
    /// Number of rng-only numeric / nominal features.
    pub nuisance_numeric: usize,
    pub nuisance_nominal: usize,
    /// Concurrent map tasks per machine.
    pub slots_per_instance: u64,
    /// Seconds to process one block, per script.
    pub per_block_time: BTreeMap<String, f64>,
    /// Duration multiplier (< 1) for a task running alone on its host.
    pub last_task_speedup: f64,
    /// When set, generate only this many grid points, sampled uniformly.
    pub max_records: Option<usize>,
    pub rng_seed: u64,
}

impl Default for WorkloadSpec {
    fn default() -> Self {
        WorkloadSpec {
            instances: vec![1.0, 2.0, 4.0, 8.0, 16.0],
            input_sizes: vec![1.3 * GIB, 2.6 * GIB],
            block_sizes: vec![64.0 * MIB, 256.0 * MIB, 1024.0 * MIB],
            reduce_factors: vec![1.0, 1.5, 2.0],
            io_sort_factors: vec![10.0, 50.0, 100.0],
            scripts: vec![FILTER_SCRIPT.into(), GROUPBY_SCRIPT.into()],
            noise: 0.05,
            nuisance_numeric: 2,
            nuisance_nominal: 1,
            slots_per_instance: 2,
            per_block_time: BTreeMap::from([
                (FILTER_SCRIPT.to_string(), 60.0),
                (GROUPBY_SCRIPT.to_string(), 90.0),
            ]),
            last_task_speedup: 0.6,
            max_records: None,
            rng_seed: 0,
        }
    }
}

impl WorkloadSpec {
    pub fn validate(&self) -> Result<()> {
        let grids: [(&str, usize); 6] = [
            ("instances", self.instances.len()),
            ("input_sizes", self.input_sizes.len()),
            ("block_sizes", self.block_sizes.len()),
            ("reduce_factors", self.reduce_factors.len()),
            ("io_sort_factors", self.io_sort_factors.len()),
            ("scripts", self.scripts.len()),
        ];
        for (name, len) in grids {
            if len == 0 {
                return Err(Error::Config(format!("workload grid {name} is empty")));
            }
        }
        if self.noise < 0.0 {
            return Err(Error::Config("noise must be >= 0".into()));
        }
        if self.slots_per_instance == 0 {
            return Err(Error::Config("slots_per_instance must be >= 1".into()));
        }
        if !(self.last_task_speedup > 0.0 && self.last_task_speedup <= 1.0) {
            return Err(Error::Config("last_task_speedup must be in (0, 1]".into()));
        }
        for script in &self.scripts {
            match self.per_block_time.get(script) {
                Some(t) if *t > 0.0 => {}
                _ => {
                    return Err(Error::Config(format!(
                        "per_block_time missing or non-positive for script {script:?}"
                    )))
                }
            }
        }
        Ok(())
    }

    pub fn from_file(path: &Path) -> Result<WorkloadSpec> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let spec: WorkloadSpec = serde_json::from_str(&text).map_err(|e| Error::SchemaFile {
            path: path.to_owned(),
            message: e.to_string(),
        })?;
        spec.validate()?;
        Ok(spec)
    }
}

/// The arithmetic core of the planted model.
#[derive(Debug, Clone, Copy)]
pub struct CausalModel {
    pub slots_per_instance: u64,
}

impl CausalModel {
    pub fn of(spec: &WorkloadSpec) -> Self {
        CausalModel {
            slots_per_instance: spec.slots_per_instance,
        }
    }

    /// One map task per block: `ceil(inputsize / blocksize)`.
    pub fn num_map_tasks(self, input_size: f64, block_size: f64) -> u64 {
        (input_size / block_size).ceil() as u64
    }

    /// Rounds of map tasks needed to drain the task queue.
    pub fn waves(self, num_tasks: u64, instances: u64) -> u64 {
        let slots = (self.slots_per_instance * instances).max(1);
        num_tasks.div_ceil(slots)
    }

    /// Noiseless job duration.
    pub fn duration(
        self,
        input_size: f64,
        block_size: f64,
        instances: u64,
        per_block_time: f64,
    ) -> f64 {
        let tasks = self.num_map_tasks(input_size, block_size);
        self.waves(tasks, instances) as f64 * per_block_time
    }
}

fn noise_factor(noise: f64, rng: &mut impl Rng) -> f64 {
    if noise <= 0.0 {
        return 1.0;
    }
    let normal = Normal::new(0.0, noise).expect("noise is finite and non-negative");
    // truncated so durations stay positive
    (1.0 + normal.sample(rng)).max(0.05)
}

const NOMINAL_TAGS: [&str; 4] = ["east", "west", "north", "south"];

fn nuisance_schema(spec: &WorkloadSpec) -> Vec<FeatureSchema> {
    let mut out = Vec::new();
    for i in 0..spec.nuisance_numeric {
        out.push(FeatureSchema::numeric(
            format!("env_metric_{i}"),
            FeatureRole::Metric,
        ));
    }
    for i in 0..spec.nuisance_nominal {
        out.push(FeatureSchema::nominal(
            format!("env_tag_{i}"),
            FeatureRole::Metric,
            NOMINAL_TAGS,
        ));
    }
    out
}

fn push_nuisance(record: &mut ExecutionRecord, spec: &WorkloadSpec, rng: &mut impl Rng) {
    for i in 0..spec.nuisance_numeric {
        record.values.insert(
            format!("env_metric_{i}"),
            Value::Num((rng.gen::<f64>() * 100.0 * 1e6).round() / 1e6),
        );
    }
    for i in 0..spec.nuisance_nominal {
        let tag = NOMINAL_TAGS[rng.gen_range(0..NOMINAL_TAGS.len())];
        record
            .values
            .insert(format!("env_tag_{i}"), Value::Str(tag.to_string()));
    }
}

/// Generates one job record per grid point (or per sampled grid point
/// when `max_records` caps the grid), with durations from the causal
/// model and nuisance features from the rng.
pub fn generate_job_log(spec: &WorkloadSpec) -> Result<ExecutionLog> {
    spec.validate()?;
    let mut features = vec![
        FeatureSchema::numeric("numinstances", FeatureRole::Config),
        FeatureSchema::numeric("inputsize", FeatureRole::Data),
        FeatureSchema::numeric("blocksize", FeatureRole::Config),
        FeatureSchema::numeric("reduce_tasks_factor", FeatureRole::Config),
        FeatureSchema::numeric("iosortfactor", FeatureRole::Config),
        FeatureSchema::nominal("pig_script", FeatureRole::App, spec.scripts.clone()),
    ];
    features.extend(nuisance_schema(spec));
    features.push(FeatureSchema::outcome());
    let schema = LogSchema::new(features)?;

    let mut grid = Vec::new();
    for &inst in &spec.instances {
        for &input in &spec.input_sizes {
            for &block in &spec.block_sizes {
                for &reduce in &spec.reduce_factors {
                    for &iosort in &spec.io_sort_factors {
                        for script in &spec.scripts {
                            grid.push((inst, input, block, reduce, iosort, script.clone()));
                        }
                    }
                }
            }
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(spec.rng_seed);
    if let Some(cap) = spec.max_records {
        if cap < grid.len() {
            let mut picked = rand::seq::index::sample(&mut rng, grid.len(), cap).into_vec();
            picked.sort_unstable();
            grid = picked.into_iter().map(|i| grid[i].clone()).collect();
        }
    }

    let model = CausalModel::of(spec);
    let mut records = Vec::with_capacity(grid.len());
    for (index, (inst, input, block, reduce, iosort, script)) in grid.into_iter().enumerate() {
        let per_block = spec.per_block_time[&script];
        let base = model.duration(input, block, inst as u64, per_block);
        let duration = base * noise_factor(spec.noise, &mut rng);
        let mut record = ExecutionRecord::new(format!("job-{index:03}"), duration)
            .set("numinstances", Value::Num(inst))
            .set("inputsize", Value::Num(input))
            .set("blocksize", Value::Num(block))
            .set("reduce_tasks_factor", Value::Num(reduce))
            .set("iosortfactor", Value::Num(iosort))
            .set("pig_script", Value::Str(script));
        push_nuisance(&mut record, spec, &mut rng);
        records.push(record);
    }
    Ok(ExecutionLog {
        schema,
        records,
        level: LogLevel::Job,
    })
}

/// Generates the task-level log for every job of a job log.
///
/// Tasks are placed wave by wave onto `hostNN` slots. In a job's final
/// (partial) wave a task may occupy a host alone; such a task runs with
/// the last-task speedup and a proportionally lighter load reading. Each
/// task processes one block, so sibling tasks share their input size.
pub fn generate_task_log(spec: &WorkloadSpec, job_log: &ExecutionLog) -> Result<ExecutionLog> {
    spec.validate()?;
    let max_instances = job_log
        .records
        .iter()
        .filter_map(|r| match r.raw_value("numinstances") {
            Some(ValueRef::Num(x)) => Some(x as u64),
            _ => None,
        })
        .max()
        .unwrap_or(1);
    let hosts: Vec<String> = (0..max_instances).map(|h| format!("host{h:02}")).collect();
    let job_ids: Vec<String> = job_log.records.iter().map(|r| r.id.clone()).collect();

    let mut features = vec![
        FeatureSchema::nominal("jobID", FeatureRole::App, job_ids),
        FeatureSchema::nominal("hostname", FeatureRole::Metric, hosts.clone()),
        FeatureSchema::numeric("inputsize", FeatureRole::Data),
        FeatureSchema::numeric("avg_load_one", FeatureRole::Metric),
    ];
    features.extend(nuisance_schema(spec));
    features.push(FeatureSchema::outcome());
    let schema = LogSchema::new(features)?;

    let model = CausalModel::of(spec);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.rng_seed.wrapping_add(1));
    let mut records = Vec::new();
    for job in &job_log.records {
        let fetch = |name: &str| match job.raw_value(name) {
            Some(ValueRef::Num(x)) => Ok(x),
            _ => Err(Error::SchemaMismatch(format!(
                "job {:?} lacks numeric feature {name:?}",
                job.id
            ))),
        };
        let input = fetch("inputsize")?;
        let block = fetch("blocksize")?;
        let instances = fetch("numinstances")? as u64;
        let script = match job.raw_value("pig_script") {
            Some(ValueRef::Str(s)) => s.to_string(),
            _ => {
                return Err(Error::SchemaMismatch(format!(
                    "job {:?} lacks pig_script",
                    job.id
                )))
            }
        };
        let per_block = *spec
            .per_block_time
            .get(&script)
            .ok_or_else(|| Error::Config(format!("no per_block_time for {script:?}")))?;

        let tasks = model.num_map_tasks(input, block);
        let slots = (spec.slots_per_instance * instances.max(1)) as usize;
        for t in 0..tasks as usize {
            let within_wave = t % slots;
            let host = within_wave / spec.slots_per_instance as usize;
            // slots occupied on this host during this task's wave
            let wave_start = t - within_wave;
            let wave_len = ((tasks as usize) - wave_start).min(slots);
            let host_start = host * spec.slots_per_instance as usize;
            let co_resident = wave_len
                .saturating_sub(host_start)
                .min(spec.slots_per_instance as usize);
            let lone = co_resident <= 1;

            let load = co_resident as f64 * noise_factor(spec.noise, &mut rng);
            let speedup = if lone { spec.last_task_speedup } else { 1.0 };
            let duration = per_block * speedup * noise_factor(spec.noise, &mut rng);
            let mut record = ExecutionRecord::new(format!("{}-t{t:03}", job.id), duration)
                .with_parent(job.id.clone())
                .set("jobID", Value::Str(job.id.clone()))
                .set("hostname", Value::Str(format!("host{host:02}")))
                .set("inputsize", Value::Num(block))
                .set("avg_load_one", Value::Num(load));
            push_nuisance(&mut record, spec, &mut rng);
            records.push(record);
        }
    }
    Ok(ExecutionLog {
        schema,
        records,
        level: LogLevel::Task,
    })
}

/// Splits a log into training and test halves by independent
/// Bernoulli(`fraction`) membership per record. Both halves share the
/// schema; every record lands in exactly one half.
pub fn split_log(
    log: &ExecutionLog,
    fraction: f64,
    rng: &mut impl Rng,
) -> Result<(ExecutionLog, ExecutionLog)> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::Config(format!(
            "train fraction must be in (0, 1), got {fraction}"
        )));
    }
    let mut training = Vec::new();
    let mut test = Vec::new();
    for record in &log.records {
        if rng.gen::<f64>() < fraction {
            training.push(record.clone());
        } else {
            test.push(record.clone());
        }
    }
    Ok((
        ExecutionLog {
            schema: log.schema.clone(),
            records: training,
            level: log.level,
        },
        ExecutionLog {
            schema: log.schema.clone(),
            records: test,
            level: log.level,
        },
    ))
}

/// Writes a generated log in the CSV + JSON schema format.
pub fn write_log(log: &ExecutionLog, schema_path: &Path, log_path: &Path) -> Result<()> {
    save_log(log, schema_path, log_path)
}
