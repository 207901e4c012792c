//! Aggregate statistics of a batch of trial records.

use dla_core::{ModelSpec, PredictionSet};
use serde::Serialize;

use crate::config::spec_serde;
use crate::records::TrialRecord;
use crate::HarnessError;

/// Linear-interpolation quantiles of the finished trials' `t_f`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Quantiles {
    pub min: f64,
    pub q05: f64,
    pub q25: f64,
    pub median: f64,
    pub q75: f64,
    pub q95: f64,
    pub max: f64,
}

impl Quantiles {
    pub fn iqr(&self) -> f64 {
        self.q75 - self.q25
    }
}

/// `q`-quantile of sorted data, interpolating between order statistics.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty());
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FinishStats {
    pub mean: f64,
    pub sd: f64,
    /// Standard error of the mean.
    pub se: f64,
    pub quantiles: Quantiles,
    /// `median(t_f) / T_f`.
    pub median_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SnapshotSummary {
    pub t: u64,
    /// Trials still running after step `t` (`t_f > t`).
    pub running: u64,
    /// Mean count per level over the running trials.
    pub mean_counts_running: Vec<f64>,
    /// Mean count per level over all trials, finished ones frozen at `t_f`.
    pub mean_counts_all: Vec<f64>,
    /// `mu` per level at `t`.
    pub predicted: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SingleOccupancy {
    /// Levels `1..=last_level` are checked.
    pub last_level: u32,
    /// Fraction of finished trials in which each checked level holds exactly
    /// one occupied vertex at `t_f`.
    pub fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepSummary {
    #[serde(with = "spec_serde")]
    pub spec: ModelSpec,
    pub trials: u64,
    pub finished: u64,
    pub unfinished: u64,
    pub predicted_finish_time: f64,
    /// `None` if no trial finished.
    pub finish: Option<FinishStats>,
    pub snapshots: Vec<SnapshotSummary>,
    /// Fraction of finished vertex-mode trials with an all-blue path.
    pub blue_fraction: Option<f64>,
    /// Growing layers and trees only.
    pub single_occupancy: Option<SingleOccupancy>,
    pub saturated_trials: u64,
    pub saturation_events: u64,
}

/// Last level of the band `1..=k - ceil(sqrt(2k+2) - 1)` expected to hold a
/// single occupied vertex at the finish; `None` if the band is empty.
pub fn single_occupancy_band(k: u32) -> Option<u32> {
    let depth = ((2.0 * f64::from(k) + 2.0).sqrt() - 1.0).ceil() as u32;
    k.checked_sub(depth).filter(|&last| last >= 1)
}

pub fn summarize(
    records: &[TrialRecord],
    predictions: &PredictionSet,
) -> Result<SweepSummary, HarnessError> {
    if records.is_empty() {
        return Err(HarnessError::EmptyRecords);
    }
    let spec = predictions.spec;
    let k = spec.k();
    let done: Vec<&TrialRecord> = records.iter().filter(|r| r.finished).collect();
    let unfinished = (records.len() - done.len()) as u64;
    if unfinished > 0 {
        log::warn!(
            "{unfinished} of {} trials on {spec} hit max_steps; excluded from t_f statistics",
            records.len()
        );
    }

    let finish = (!done.is_empty()).then(|| {
        let mut tf: Vec<f64> = done.iter().map(|r| r.steps as f64).collect();
        tf.sort_by(f64::total_cmp);
        let n = tf.len() as f64;
        let mean = tf.iter().sum::<f64>() / n;
        let sd = if tf.len() > 1 {
            (tf.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        let quantiles = Quantiles {
            min: tf[0],
            q05: quantile(&tf, 0.05),
            q25: quantile(&tf, 0.25),
            median: quantile(&tf, 0.5),
            q75: quantile(&tf, 0.75),
            q95: quantile(&tf, 0.95),
            max: tf[tf.len() - 1],
        };
        FinishStats {
            mean,
            sd,
            se: sd / n.sqrt(),
            median_ratio: quantiles.median / predictions.finish_time,
            quantiles,
        }
    });

    let mut times: Vec<u64> = records
        .iter()
        .flat_map(|r| r.snapshots.iter().map(|(t, _)| *t))
        .collect();
    times.sort_unstable();
    times.dedup();
    let snapshots = times
        .into_iter()
        .map(|t| snapshot_summary(records, predictions, t))
        .collect::<Result<_, _>>()?;

    let vertex: Vec<bool> = done.iter().filter_map(|r| r.path_is_blue).collect();
    let blue_fraction = (!vertex.is_empty())
        .then(|| vertex.iter().filter(|&&b| b).count() as f64 / vertex.len() as f64);

    let single_occupancy = match spec {
        ModelSpec::EqualLayers { .. } => None,
        _ => single_occupancy_band(k)
            .filter(|_| !done.is_empty())
            .map(|last| {
                let hits = done
                    .iter()
                    .filter(|r| r.final_counts[1..=last as usize].iter().all(|&c| c == 1))
                    .count();
                SingleOccupancy {
                    last_level: last,
                    fraction: hits as f64 / done.len() as f64,
                }
            }),
    };

    Ok(SweepSummary {
        spec,
        trials: records.len() as u64,
        finished: done.len() as u64,
        unfinished,
        predicted_finish_time: predictions.finish_time,
        finish,
        snapshots,
        blue_fraction,
        single_occupancy,
        saturated_trials: records.iter().filter(|r| r.saturation_events > 0).count() as u64,
        saturation_events: records.iter().map(|r| r.saturation_events).sum(),
    })
}

fn snapshot_summary(
    records: &[TrialRecord],
    predictions: &PredictionSet,
    t: u64,
) -> Result<SnapshotSummary, HarnessError> {
    let levels = predictions.spec.k() as usize + 1;
    let mut running = vec![0.0; levels];
    let mut all = vec![0.0; levels];
    let (mut n_running, mut n_all) = (0u64, 0u64);
    for r in records {
        let Some(counts) = r.snapshot(t) else {
            continue;
        };
        n_all += 1;
        for (acc, &c) in all.iter_mut().zip(counts) {
            *acc += c as f64;
        }
        if r.steps > t {
            n_running += 1;
            for (acc, &c) in running.iter_mut().zip(counts) {
                *acc += c as f64;
            }
        }
    }
    let scale = |v: &mut Vec<f64>, n: u64| {
        for x in v.iter_mut() {
            *x = if n == 0 { f64::NAN } else { *x / n as f64 };
        }
    };
    scale(&mut running, n_running);
    scale(&mut all, n_all);
    let predicted = (0..levels as u32)
        .map(|level| predictions.mu_level(level, t as f64))
        .collect::<Result<_, _>>()?;
    Ok(SnapshotSummary {
        t,
        running: n_running,
        mean_counts_running: running,
        mean_counts_all: all,
        predicted,
    })
}
