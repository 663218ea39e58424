//! Streaming-vs-batch timing comparison.
//!
//! Both arms consume the same pre-lifted data, so dictionary evaluation is
//! excluded from the comparison (it is timed separately and reported). The
//! recursive arm performs one rank-1 update and one operator
//! materialization per sample; the batch arm recomputes the pseudo-inverse
//! estimator from scratch at every step, which is what streaming use of a
//! batch algorithm costs. Checkpoints record cumulative seconds; the
//! reported numbers are medians over `repeats` full runs.

use std::hint::black_box;
use std::time::Instant;

use koopman::numlin;
use koopman::{Error, Result, StreamState};
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::experiment::{build_data, build_dictionary};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CheckpointTiming {
    pub m: usize,
    pub recursive_cum_s: f64,
    pub batch_cum_s: f64,
    pub speedup: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TimingReport {
    pub system: String,
    pub feature_dim: usize,
    pub repeats: usize,
    pub eig_every_step: bool,
    /// Cumulative seconds for the recursive arm at the final checkpoint.
    pub recursive_total_s: f64,
    /// Cumulative seconds for the from-scratch batch arm at the final checkpoint.
    pub batch_total_s: f64,
    /// One-off cost of lifting the full dataset (paid identically by both arms).
    pub lifting_s: f64,
    pub checkpoints: Vec<CheckpointTiming>,
}

fn median(samples: &mut [f64]) -> f64 {
    samples.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = samples.len();
    if n % 2 == 1 {
        samples[n / 2]
    } else {
        0.5 * (samples[n / 2 - 1] + samples[n / 2])
    }
}

pub fn bench_compare(cfg: &ExperimentConfig) -> Result<TimingReport> {
    cfg.validate()?;
    let data = build_data(cfg)?;
    let dictionary = build_dictionary(cfg, &data.pairs)?;
    let m_max = cfg.max_snapshot();
    if m_max > data.pairs.sample_count() {
        return Err(Error::contract(format!(
            "bench checkpoint {m_max} exceeds the {} available samples",
            data.pairs.sample_count()
        )));
    }
    let delta = cfg.delta;
    let eig_every_step = cfg.timing.eig_every_step;

    let lift_start = Instant::now();
    let y_p = dictionary.lift_batch(&data.pairs.x_p().columns(0, m_max).clone_owned())?;
    let y_f = dictionary.lift_batch(&data.pairs.x_f().columns(0, m_max).clone_owned())?;
    let lifting_s = lift_start.elapsed().as_secs_f64();

    let n_ckpt = cfg.snapshot_points.len();
    let mut recursive_runs: Vec<Vec<f64>> = vec![Vec::new(); n_ckpt];
    let mut batch_runs: Vec<Vec<f64>> = vec![Vec::new(); n_ckpt];

    for _ in 0..cfg.timing.repeats {
        // Recursive arm: rank-1 update + operator materialization per sample.
        let mut state = StreamState::new(dictionary.clone(), delta)?;
        let mut ckpt = cfg.snapshot_points.iter().copied().peekable();
        let mut idx = 0;
        let start = Instant::now();
        for m in 1..=m_max {
            let a = y_p.column(m - 1).clone_owned();
            let b = y_f.column(m - 1).clone_owned();
            state.update_lifted(&a, &b)?;
            let model = state.operator();
            black_box(model.operator());
            if eig_every_step {
                black_box(numlin::eig(model.operator())?);
            }
            if ckpt.peek() == Some(&m) {
                ckpt.next();
                recursive_runs[idx].push(start.elapsed().as_secs_f64());
                idx += 1;
            }
        }

        // Batch arm: pseudo-inverse fit from scratch at every step.
        let mut ckpt = cfg.snapshot_points.iter().copied().peekable();
        let mut idx = 0;
        let start = Instant::now();
        for m in 1..=m_max {
            let yp_m = y_p.columns(0, m).clone_owned();
            let yf_m = y_f.columns(0, m).clone_owned();
            let k = yf_m * numlin::pinv(&yp_m, numlin::DEFAULT_RCOND)?;
            black_box(&k);
            if eig_every_step {
                black_box(numlin::eig(&k)?);
            }
            if ckpt.peek() == Some(&m) {
                ckpt.next();
                batch_runs[idx].push(start.elapsed().as_secs_f64());
                idx += 1;
            }
        }
    }

    let checkpoints: Vec<CheckpointTiming> = cfg
        .snapshot_points
        .iter()
        .enumerate()
        .map(|(i, &m)| {
            let recursive_cum_s = median(&mut recursive_runs[i]);
            let batch_cum_s = median(&mut batch_runs[i]);
            CheckpointTiming {
                m,
                recursive_cum_s,
                batch_cum_s,
                speedup: batch_cum_s / recursive_cum_s,
            }
        })
        .collect();

    let last = checkpoints.last().expect("validated non-empty");
    Ok(TimingReport {
        system: cfg.system.to_string(),
        feature_dim: dictionary.feature_dim(),
        repeats: cfg.timing.repeats,
        eig_every_step,
        recursive_total_s: last.recursive_cum_s,
        batch_total_s: last.batch_cum_s,
        lifting_s,
        checkpoints,
    })
}

/// Least-squares slope of log(time) against log(m): the empirical scaling
/// exponent of cumulative cost in the stream length.
pub fn loglog_slope(points: &[(usize, f64)]) -> f64 {
    let n = points.len() as f64;
    let (mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0);
    for &(m, t) in points {
        let x = (m as f64).ln();
        let y = t.ln();
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    (n * sxy - sx * sy) / (n * sxx - sx * sx)
}
