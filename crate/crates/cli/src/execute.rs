//! Runs a plan into a results directory.
//!
//! ```text
//! <out>/plan.txt
//! <out>/runs/<experiment>/<digest>-seed<k>.csv   one trace per run
//! <out>/runs/<experiment>/<digest>-seed<k>.json  run metadata and timing
//! <out>/results.csv                             merged traces
//! <out>/manifest.json
//! ```
//!
//! Completed runs are keyed by experiment digest and seed and are skipped on
//! re-runs, so repeating a finished plan rewrites identical bytes.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::Instant;

use anyhow::{Context, Result};
use gridbo::engine::run_bo;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::plan::{Experiment, ExperimentPlan};
use crate::results::{read_rows, write_rows, ResultRow};

pub const MANIFEST_SCHEMA: u32 = 1;

/// Sidecar written next to every completed run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunInfo {
    pub experiment: String,
    pub seed: u64,
    pub iterations: usize,
    pub dim: usize,
    /// Acquisition construction time summed over iterations.
    pub build_ms_total: f64,
    /// Solver time summed over iterations.
    pub solve_ms_total: f64,
    /// Wall time of the whole run, including the initial design and fit.
    pub wall_ms: f64,
    pub metadata: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "lowercase")]
pub enum RunEntry {
    Ok { seed: u64, file: String, info: RunInfo },
    Failed { seed: u64, error: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentEntry {
    pub id: String,
    pub digest: String,
    pub settings: BTreeMap<String, String>,
    pub runs: Vec<RunEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema: u32,
    pub tool: String,
    pub plan: String,
    pub seed: u64,
    pub results_header: Vec<String>,
    pub experiments: Vec<ExperimentEntry>,
    pub completed: usize,
    pub failed: usize,
}

#[derive(Debug, Clone)]
pub struct ExecuteOptions {
    pub workers: usize,
    /// Print one line per finished run to stderr.
    pub verbose: bool,
}

impl Default for ExecuteOptions {
    fn default() -> Self {
        Self {
            workers: default_workers(),
            verbose: false,
        }
    }
}

/// `BO_WORKERS` if set, otherwise the available parallelism.
pub fn default_workers() -> usize {
    std::env::var("BO_WORKERS")
        .ok()
        .and_then(|v| v.parse().ok())
        .filter(|&n: &usize| n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

#[derive(Debug, Clone)]
pub struct ExecuteReport {
    pub out_dir: PathBuf,
    pub manifest: Manifest,
    /// Runs computed by this call.
    pub computed: usize,
    /// Runs found on disk and reused.
    pub reused: usize,
}

impl ExecuteReport {
    pub fn all_failed(&self) -> bool {
        self.manifest.failed > 0 && self.manifest.completed == 0
    }
}

struct Job<'a> {
    exp: usize,
    experiment: &'a Experiment,
    seed: u64,
    csv: PathBuf,
    json: PathBuf,
}

fn run_paths(out: &Path, e: &Experiment, seed: u64) -> (PathBuf, PathBuf, String) {
    let stem = format!("{}-seed{seed}", e.digest());
    let rel = format!("runs/{}/{stem}.csv", e.id);
    let dir = out.join("runs").join(&e.id);
    (dir.join(format!("{stem}.csv")), dir.join(format!("{stem}.json")), rel)
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes).with_context(|| format!("writing {}", tmp.display()))?;
    fs::rename(&tmp, path).with_context(|| format!("renaming {}", tmp.display()))?;
    Ok(())
}

fn run_one(job: &Job<'_>, objective: &gridbo::objectives::ObjectiveSpec) -> Result<RunInfo> {
    let cfg = job
        .experiment
        .config_with(objective.clone(), job.seed)
        .map_err(anyhow::Error::msg)?;
    let start = Instant::now();
    let trace = run_bo(&cfg)?;
    let wall_ms = start.elapsed().as_secs_f64() * 1e3;
    let rows = ResultRow::from_trace(&job.experiment.id, &trace);
    let mut buf = Vec::new();
    write_rows(&mut buf, &rows, 0)?;
    let info = RunInfo {
        experiment: job.experiment.id.clone(),
        seed: job.seed,
        iterations: trace.records.len(),
        dim: objective.dim(),
        build_ms_total: trace.total_build_time().as_secs_f64() * 1e3,
        solve_ms_total: trace.total_solve_time().as_secs_f64() * 1e3,
        wall_ms,
        metadata: trace.metadata.clone(),
    };
    if let Some(dir) = job.csv.parent() {
        fs::create_dir_all(dir)?;
    }
    write_atomic(&job.json, serde_json::to_string_pretty(&info)?.as_bytes())?;
    write_atomic(&job.csv, &buf)?;
    Ok(info)
}

fn read_info(path: &Path) -> Result<RunInfo> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(serde_json::from_str(&text)?)
}

/// Executes every (experiment, replicate) pair of `plan` that has no
/// completed run in `out`, then rewrites `results.csv` and `manifest.json`.
pub fn execute_plan(plan: &ExperimentPlan, out: &Path, opts: &ExecuteOptions) -> Result<ExecuteReport> {
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    write_atomic(&out.join("plan.txt"), plan.serialize().as_bytes())?;

    let mut objectives = Vec::with_capacity(plan.experiments.len());
    for e in &plan.experiments {
        objectives.push(e.objective().with_context(|| format!("experiment '{}'", e.id))?);
    }

    let mut jobs = Vec::new();
    let mut reused = 0;
    for (i, e) in plan.experiments.iter().enumerate() {
        for r in 0..e.n_reps() {
            let seed = plan.seed.wrapping_add(r as u64);
            let (csv, json, _) = run_paths(out, e, seed);
            if csv.exists() && json.exists() {
                reused += 1;
                continue;
            }
            jobs.push(Job {
                exp: i,
                experiment: e,
                seed,
                csv,
                json,
            });
        }
    }

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.workers.max(1))
        .build()?;
    let done = AtomicUsize::new(0);
    let total = jobs.len();
    let outcomes: Vec<Result<RunInfo>> = pool.install(|| {
        jobs.par_iter()
            .map(|job| {
                let r = run_one(job, &objectives[job.exp]);
                if opts.verbose {
                    let k = done.fetch_add(1, Ordering::Relaxed) + 1;
                    match &r {
                        Ok(info) => eprintln!(
                            "[{k}/{total}] {} seed {} ({:.0} ms solving)",
                            job.experiment.id, job.seed, info.solve_ms_total
                        ),
                        Err(e) => eprintln!("[{k}/{total}] {} seed {} failed: {e:#}", job.experiment.id, job.seed),
                    }
                }
                r
            })
            .collect()
    });
    let mut failures: BTreeMap<(usize, u64), String> = BTreeMap::new();
    let computed = outcomes.iter().filter(|o| o.is_ok()).count();
    for (job, o) in jobs.iter().zip(outcomes) {
        if let Err(e) = o {
            failures.insert((job.exp, job.seed), format!("{e:#}"));
        }
    }

    // single-threaded merge in plan order
    let dim = objectives.iter().map(|o| o.dim()).max().unwrap_or(0);
    let mut rows = Vec::new();
    let mut entries = Vec::new();
    let (mut completed, mut failed) = (0, 0);
    for (i, e) in plan.experiments.iter().enumerate() {
        let mut runs = Vec::new();
        for r in 0..e.n_reps() {
            let seed = plan.seed.wrapping_add(r as u64);
            if let Some(error) = failures.remove(&(i, seed)) {
                failed += 1;
                runs.push(RunEntry::Failed { seed, error });
                continue;
            }
            let (csv, json, rel) = run_paths(out, e, seed);
            let file = fs::File::open(&csv).with_context(|| format!("opening {}", csv.display()))?;
            rows.extend(read_rows(file).with_context(|| format!("reading {}", csv.display()))?);
            runs.push(RunEntry::Ok {
                seed,
                file: rel,
                info: read_info(&json)?,
            });
            completed += 1;
        }
        entries.push(ExperimentEntry {
            id: e.id.clone(),
            digest: e.digest(),
            settings: e.settings.clone(),
            runs,
        });
    }
    let mut buf = Vec::new();
    write_rows(&mut buf, &rows, dim)?;
    write_atomic(&out.join("results.csv"), &buf)?;
    let manifest = Manifest {
        schema: MANIFEST_SCHEMA,
        tool: format!("gridbo {}", env!("CARGO_PKG_VERSION")),
        plan: plan.name.clone(),
        seed: plan.seed,
        results_header: crate::results::header(dim),
        experiments: entries,
        completed,
        failed,
    };
    write_atomic(
        &out.join("manifest.json"),
        serde_json::to_string_pretty(&manifest)?.as_bytes(),
    )?;
    Ok(ExecuteReport {
        out_dir: out.to_path_buf(),
        manifest,
        computed,
        reused,
    })
}

/// Reads `manifest.json` from a results directory.
pub fn read_manifest(dir: &Path) -> Result<Manifest> {
    let path = dir.join("manifest.json");
    let text = fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
    Ok(serde_json::from_str(&text)?)
}
