//! Parallel, seed-deterministic execution of trial batches.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use dla_core::analytics::default_omega;
use dla_core::engine::{run_trial_with, TrialConfig};
use dla_core::oracle::exact_tf_pmf;
use dla_core::{split_seed, trial_rng, ModelSpec, PredictionSet, TrialResult};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{ExperimentConfig, Format};
use crate::records::{write_csv, write_json_lines, TrialRecord};
use crate::summary::{summarize, SweepSummary};
use crate::HarnessError;

/// Environment variable holding the default worker count.
pub const THREADS_ENV: &str = "DLA_THREADS";

/// Worker count from [`THREADS_ENV`], if set to a positive integer.
pub fn threads_from_env() -> Option<usize> {
    std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse().ok())
        .filter(|&n| n > 0)
}

/// Runs `f` on a dedicated pool of `threads` workers, or on the global pool.
pub fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> T {
    match threads.or_else(threads_from_env) {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .expect("thread pool")
            .install(f),
        None => f(),
    }
}

/// Runs one trial and checks, after every step, that the counts sum to `t`
/// and never decrease.
pub fn run_checked_trial(
    spec: &ModelSpec,
    seed: u64,
    config: &TrialConfig,
) -> Result<TrialResult, HarnessError> {
    let mut prev = vec![0u64; spec.k() as usize + 1];
    let mut violation = None;
    let result = run_trial_with(spec, &mut trial_rng(seed), config, |state, _| {
        let counts = state.counts();
        let conserved = counts.iter().sum::<u64>() == state.t();
        let monotone = counts.iter().zip(&prev).all(|(c, p)| c >= p);
        if violation.is_none() && !(conserved && monotone) {
            violation = Some(state.t());
        }
        prev.copy_from_slice(counts);
    })?;
    match violation {
        Some(t) => Err(HarnessError::InvariantViolation { seed, t }),
        None => Ok(result),
    }
}

/// Runs trials `0..trials` with seeds `split_seed(base_seed, i)`, in parallel.
/// The output order is the trial order whatever the worker count.
pub fn run_trials(
    spec: &ModelSpec,
    config: &TrialConfig,
    base_seed: u64,
    trials: u64,
) -> Result<Vec<TrialRecord>, HarnessError> {
    (0..trials)
        .into_par_iter()
        .map(|i| {
            let seed = split_seed(base_seed, i);
            run_checked_trial(spec, seed, config).map(|r| TrialRecord::from_result(i, seed, &r))
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct Experiment {
    pub config: ExperimentConfig,
    pub snapshot_times: Vec<u64>,
    pub predictions: PredictionSet,
    pub records: Vec<TrialRecord>,
    pub summary: SweepSummary,
}

impl Experiment {
    pub fn all_finished(&self) -> bool {
        self.summary.unfinished == 0
    }
}

pub fn predictions_for(
    spec: &ModelSpec,
    omega: Option<f64>,
) -> Result<PredictionSet, HarnessError> {
    let omega = match omega {
        Some(w) => w,
        None => default_omega(spec)?,
    };
    Ok(PredictionSet::new(spec, omega)?)
}

/// Runs the configured trials, summarizes them and, if an output path is
/// configured, writes the records there and the summary next to it as
/// `<path>.summary.json`.
pub fn run_experiment(
    config: &ExperimentConfig,
    threads: Option<usize>,
) -> Result<Experiment, HarnessError> {
    config.validate()?;
    let predictions = predictions_for(&config.spec, config.omega)?;
    let snapshot_times = config.snapshot_times();
    let trial_config = TrialConfig {
        snapshot_times: snapshot_times.clone(),
        max_steps: config.max_steps(),
        mode: config.mode.into(),
    };
    let records = with_threads(threads, || {
        run_trials(&config.spec, &trial_config, config.base_seed, config.trials)
    })?;
    let summary = summarize(&records, &predictions)?;
    if let Some(out) = &config.output {
        write_records(&out.path, out.format, &records)?;
        write_json(&summary_path(&out.path), &summary)?;
    }
    Ok(Experiment {
        config: config.clone(),
        snapshot_times,
        predictions,
        records,
        summary,
    })
}

pub fn summary_path(records_path: &Path) -> PathBuf {
    let mut name = records_path.as_os_str().to_owned();
    name.push(".summary.json");
    PathBuf::from(name)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleComparison {
    pub trials: u64,
    pub tv_distance: f64,
    pub exact_mean: f64,
    pub empirical_mean: f64,
    /// Standard error of the empirical mean under the exact law.
    pub standard_error: f64,
}

/// Total-variation distance between the finish times of `config`'s trials
/// and the exact pmf of its model.
pub fn compare_to_oracle(
    config: &ExperimentConfig,
    threads: Option<usize>,
) -> Result<OracleComparison, HarnessError> {
    config.validate()?;
    let pmf = exact_tf_pmf(&config.spec)?;
    let trial_config = TrialConfig {
        snapshot_times: Vec::new(),
        max_steps: config.max_steps(),
        mode: config.mode.into(),
    };
    let records = with_threads(threads, || {
        run_trials(&config.spec, &trial_config, config.base_seed, config.trials)
    })?;
    let counts = finish_histogram(&records)?;
    let empirical_mean =
        counts.iter().map(|&(t, c)| (t * c) as f64).sum::<f64>() / config.trials as f64;
    Ok(OracleComparison {
        trials: config.trials,
        tv_distance: pmf.tv_distance_to_counts(&counts, config.trials),
        exact_mean: pmf.mean,
        empirical_mean,
        standard_error: (pmf.variance() / config.trials as f64).sqrt(),
    })
}

/// `(t_f, count)` pairs in ascending `t_f`; errors if any trial is unfinished.
pub fn finish_histogram(records: &[TrialRecord]) -> Result<Vec<(u64, u64)>, HarnessError> {
    let mut hist = BTreeMap::new();
    for r in records {
        let t = r.t_f().ok_or(HarnessError::Unfinished(1))?;
        *hist.entry(t).or_insert(0u64) += 1;
    }
    Ok(hist.into_iter().collect())
}

/// Writes `bytes` to a temporary file in the target directory, creating it
/// if needed, then renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), HarnessError> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let name = path
        .file_name()
        .ok_or_else(|| HarnessError::Config(format!("{} is not a file path", path.display())))?;
    let mut tmp_name = std::ffi::OsString::from(".");
    tmp_name.push(name);
    tmp_name.push(format!(".tmp{}", std::process::id()));
    let tmp = dir.join(tmp_name);
    let write = || -> std::io::Result<()> {
        fs::create_dir_all(dir)?;
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    };
    write().map_err(|e| {
        let _ = fs::remove_file(&tmp);
        HarnessError::io(path, e)
    })
}

pub fn write_records(
    path: &Path,
    format: Format,
    records: &[TrialRecord],
) -> Result<(), HarnessError> {
    let mut buf = Vec::new();
    match format {
        Format::Csv => write_csv(&mut buf, records)?,
        Format::Json => write_json_lines(&mut buf, records)?,
    }
    write_atomic(path, &buf)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), HarnessError> {
    let mut buf = serde_json::to_vec_pretty(value)?;
    buf.push(b'\n');
    write_atomic(path, &buf)
}
