//! Benchmark runner: generate, solve, audit, and tabulate.

use std::io::{Read, Write};
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::generate::{generate, GeneratorConfig};
use crate::harness::{audit, gys_on_leaves_until, Instance};
use crate::mgys::{run_mgys, RunOptions};
use crate::model::MultilevelAllocation;
use crate::sma::run_sma_until;

pub const SEED_ENV: &str = "HIERFAIR_SEED";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Algorithm {
    #[serde(rename = "sma")]
    Sma,
    #[serde(rename = "mgys")]
    Mgys,
    #[serde(rename = "gys-leaves")]
    GysLeaves,
}

impl Algorithm {
    pub fn name(&self) -> &'static str {
        match self {
            Algorithm::Sma => "sma",
            Algorithm::Mgys => "mgys",
            Algorithm::GysLeaves => "gys-leaves",
        }
    }

    pub fn parse(s: &str) -> Result<Algorithm> {
        match s {
            "sma" => Ok(Algorithm::Sma),
            "mgys" => Ok(Algorithm::Mgys),
            "gys-leaves" => Ok(Algorithm::GysLeaves),
            _ => Err(Error::InvalidConfig(format!("unknown algorithm {s:?}"))),
        }
    }

    /// Solves `instance`, giving up at `deadline`. Returns the allocation
    /// and the iteration count where meaningful.
    pub fn solve(&self, instance: &Instance, deadline: Option<Instant>) -> Result<(MultilevelAllocation, Option<usize>)> {
        match self {
            Algorithm::Sma => Ok((run_sma_until(instance, deadline)?, None)),
            Algorithm::Mgys => {
                let out = run_mgys(instance, &RunOptions { deadline, ..RunOptions::default() })?;
                Ok((out.allocation, Some(out.iterations)))
            }
            Algorithm::GysLeaves => Ok((gys_on_leaves_until(instance, deadline)?, None)),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BenchCase {
    pub id: String,
    pub generator: GeneratorConfig,
    #[serde(default = "default_instances")]
    pub instances: usize,
}

fn default_instances() -> usize {
    30
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BenchConfig {
    pub configs: Vec<BenchCase>,
    pub algorithms: Vec<Algorithm>,
    #[serde(default = "default_timeout")]
    pub timeout_secs: f64,
    /// Audit against the exhaustive oracle instead of per-node GYS.
    #[serde(default)]
    pub oracle: bool,
}

fn default_timeout() -> f64 {
    60.0
}

impl BenchConfig {
    pub fn from_json(text: &str) -> Result<BenchConfig> {
        let config: BenchConfig = serde_json::from_str(text)?;
        for case in &config.configs {
            case.generator.validate()?;
        }
        if config.algorithms.is_empty() {
            return Err(Error::InvalidConfig("no algorithms listed".into()));
        }
        Ok(config)
    }
}

/// One (config, instance, algorithm) run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub config_id: String,
    pub instance_id: usize,
    pub algorithm: String,
    pub runtime_ms: f64,
    pub err1: bool,
    pub err2: usize,
    pub discarded: usize,
    pub timeout: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub config_id: String,
    pub algorithm: String,
    pub runs: usize,
    pub timeouts: usize,
    pub mean_runtime_ms: f64,
    pub std_runtime_ms: f64,
    pub err1_rate: f64,
    /// Mean err2 over instances with err1 set; 0 when there are none.
    pub mean_err2_failing: f64,
    pub mean_discarded: f64,
}

/// The seed of instance `k` of a case: the case seed, or the environment
/// override, plus `k`.
pub fn instance_seed(case: &BenchCase, k: usize) -> u64 {
    let base = std::env::var(SEED_ENV).ok().and_then(|s| s.parse().ok()).unwrap_or(case.generator.seed);
    base.wrapping_add(k as u64)
}

pub fn run_one(instance: &Instance, algorithm: Algorithm, timeout: Duration, use_oracle: bool) -> Result<(f64, Option<audit::AuditReport>)> {
    let start = Instant::now();
    match algorithm.solve(instance, Some(start + timeout)) {
        Ok((alloc, _)) => {
            let ms = start.elapsed().as_secs_f64() * 1e3;
            Ok((ms, Some(audit::audit(instance, &alloc, use_oracle)?)))
        }
        Err(Error::Timeout) => Ok((start.elapsed().as_secs_f64() * 1e3, None)),
        Err(e) => Err(e),
    }
}

/// Runs every case on a pool of `jobs` threads. Rows come back ordered by
/// case, instance and algorithm as listed in the config.
pub fn run_bench(config: &BenchConfig, jobs: usize) -> Result<Vec<BenchRow>> {
    let timeout = Duration::from_secs_f64(config.timeout_secs.max(0.0));
    let tasks: Vec<(usize, usize)> = config
        .configs
        .iter()
        .enumerate()
        .flat_map(|(c, case)| (0..case.instances).map(move |k| (c, k)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::InvalidConfig(e.to_string()))?;
    let rows: Result<Vec<Vec<BenchRow>>> = pool.install(|| {
        tasks
            .par_iter()
            .map(|&(c, k)| {
                let case = &config.configs[c];
                let gen = GeneratorConfig { seed: instance_seed(case, k), ..case.generator.clone() };
                let instance = generate(&gen)?;
                config
                    .algorithms
                    .iter()
                    .map(|&alg| {
                        let (runtime_ms, report) = run_one(&instance, alg, timeout, config.oracle)?;
                        Ok(BenchRow {
                            config_id: case.id.clone(),
                            instance_id: k,
                            algorithm: alg.name().to_string(),
                            runtime_ms,
                            err1: report.as_ref().is_some_and(|r| r.err1),
                            err2: report.as_ref().map_or(0, |r| r.err2),
                            discarded: report.as_ref().map_or(0, |r| r.discarded),
                            timeout: report.is_none(),
                        })
                    })
                    .collect()
            })
            .collect()
    });
    Ok(rows?.into_iter().flatten().collect())
}

/// Per (config, algorithm) statistics, in first-appearance order. Timed-out
/// runs only count towards `timeouts`.
pub fn summarize(rows: &[BenchRow]) -> Vec<SummaryRow> {
    let mut keys: Vec<(String, String)> = Vec::new();
    for r in rows {
        let key = (r.config_id.clone(), r.algorithm.clone());
        if !keys.contains(&key) {
            keys.push(key);
        }
    }
    keys.into_iter()
        .map(|(config_id, algorithm)| {
            let group: Vec<&BenchRow> =
                rows.iter().filter(|r| r.config_id == config_id && r.algorithm == algorithm).collect();
            let done: Vec<&&BenchRow> = group.iter().filter(|r| !r.timeout).collect();
            let k = done.len().max(1) as f64;
            let mean_rt = done.iter().map(|r| r.runtime_ms).sum::<f64>() / k;
            let var = done.iter().map(|r| (r.runtime_ms - mean_rt).powi(2)).sum::<f64>() / k;
            let failing: Vec<_> = done.iter().filter(|r| r.err1).collect();
            SummaryRow {
                runs: group.len(),
                timeouts: group.len() - done.len(),
                mean_runtime_ms: mean_rt,
                std_runtime_ms: var.sqrt(),
                err1_rate: failing.len() as f64 / k,
                mean_err2_failing: if failing.is_empty() {
                    0.0
                } else {
                    failing.iter().map(|r| r.err2 as f64).sum::<f64>() / failing.len() as f64
                },
                mean_discarded: done.iter().map(|r| r.discarded as f64).sum::<f64>() / k,
                config_id,
                algorithm,
            }
        })
        .collect()
}

pub fn write_csv<T: Serialize, W: Write>(rows: &[T], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_rows<R: Read>(input: R) -> Result<Vec<BenchRow>> {
    let mut r = csv::Reader::from_reader(input);
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}
