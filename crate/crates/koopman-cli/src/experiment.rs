//! Full experiment driver: dataset generation, streaming identification at
//! checkpoints, spectra, prediction-error curves, the δ validation sweep,
//! and the timing comparison.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use koopman::systems::{
    simulate_burgers_trajectory, simulate_ring_trajectory, simulate_vdp_trajectory,
    RingOscillatorConfig,
};
use koopman::{
    fit_c, per_step_mse, rolling_mse, spectral, Dictionary, Error, KoopmanModel, Result,
    SnapshotPairs, StreamState,
};
use nalgebra::DMatrix;

use crate::bench::{bench_compare, TimingReport};
use crate::config::{DictionaryKind, ExperimentConfig, PredictionMode, SystemKind};

/// Dataset plus the fully resolved configuration that produced it.
pub struct ExperimentData {
    pub pairs: SnapshotPairs,
    /// Trajectory states s_0..s_M (pairs are consecutive snapshots of it).
    pub states: DMatrix<f64>,
    pub resolved: ExperimentConfig,
}

/// Builds (or ingests) the dataset named by the config.
pub fn build_data(cfg: &ExperimentConfig) -> Result<ExperimentData> {
    let mut resolved = cfg.clone();
    let states = match cfg.system {
        SystemKind::Vdp => {
            let mut vdp = cfg.vdp.clone().unwrap_or_default();
            if cfg.vdp.is_none() {
                vdp.steps = vdp.steps.max(cfg.required_states().saturating_sub(1));
            }
            let traj = simulate_vdp_trajectory(&vdp)?;
            resolved.vdp = Some(vdp);
            traj
        }
        SystemKind::Ring => {
            let params = cfg.ring.clone().unwrap_or_default();
            let ring = RingOscillatorConfig::seeded(
                params.n_osc,
                params.damping,
                params.dt,
                params.steps,
                cfg.seed,
            );
            resolved.ring = Some(params);
            simulate_ring_trajectory(&ring)?
        }
        SystemKind::Burgers => {
            let params = cfg.burgers.clone().unwrap_or_default();
            let bcfg = params.to_config();
            if !bcfg.is_cfl_stable() {
                eprintln!(
                    "warning: burgers diffusion number r = {:.3} exceeds 0.5; \
                     the explicit scheme may blow up",
                    bcfg.cfl_number()
                );
            }
            resolved.burgers = Some(params);
            simulate_burgers_trajectory(&bcfg)?
        }
        SystemKind::CsvInput => {
            let path = cfg
                .input_csv
                .as_ref()
                .ok_or_else(|| Error::contract("csv-input system needs `input_csv`"))?;
            let pairs = crate::ingest::ingest_csv(path)?;
            let m = pairs.sample_count();
            let states = pairs.predictor_states(m)?;
            if cfg.prediction.is_some() {
                ensure_single_trajectory(&pairs)?;
            }
            let needed = cfg.required_states();
            if states.ncols() < needed {
                return Err(Error::contract(format!(
                    "experiment needs {needed} states but {} provides {}",
                    path.display(),
                    states.ncols()
                )));
            }
            return Ok(ExperimentData {
                pairs,
                states,
                resolved,
            });
        }
    };
    let needed = cfg.required_states();
    if states.ncols() < needed {
        return Err(Error::contract(format!(
            "experiment needs {needed} trajectory states but the system config provides {}; \
             raise `steps`",
            states.ncols()
        )));
    }
    let pairs = SnapshotPairs::from_trajectory(&states)?;
    Ok(ExperimentData {
        pairs,
        states,
        resolved,
    })
}

fn ensure_single_trajectory(pairs: &SnapshotPairs) -> Result<()> {
    for i in 0..pairs.sample_count() - 1 {
        if pairs.x_f().column(i) != pairs.x_p().column(i + 1) {
            return Err(Error::contract(
                "prediction experiments need single-trajectory data \
                 (column i of y must equal column i+1 of x)",
            ));
        }
    }
    Ok(())
}

/// Builds the configured dictionary. RBF centers are sampled from the
/// training columns only, so holdout data never leaks into the basis.
pub fn build_dictionary(cfg: &ExperimentConfig, pairs: &SnapshotPairs) -> Result<Dictionary> {
    match cfg.dictionary.kind {
        DictionaryKind::Linear => Dictionary::linear(pairs.state_dim()),
        DictionaryKind::Rbf => {
            let train = cfg.max_snapshot().min(pairs.sample_count());
            let training_columns = pairs.x_p().columns(0, train).clone_owned();
            Dictionary::rbf_from_data(
                &training_columns,
                cfg.dictionary.count,
                cfg.dictionary.sigma,
                cfg.seed,
            )
        }
    }
}

pub struct CheckpointResult {
    pub count: usize,
    pub model: KoopmanModel,
    /// (per-step MSE curve, horizon average), when prediction is configured.
    pub mse: Option<(Vec<f64>, f64)>,
}

pub struct RunArtifacts {
    pub output_dir: PathBuf,
    pub checkpoints: Vec<CheckpointResult>,
    pub timing: TimingReport,
    pub files: Vec<PathBuf>,
}

fn create(path: &PathBuf) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

/// Streams the dataset through the recursive engine, emitting all artifacts
/// under `output_dir`. Deterministic for a fixed config and seed except for
/// the wall-clock fields of the timing report.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunArtifacts> {
    cfg.validate()?;
    let data = build_data(cfg)?;
    if cfg.max_snapshot() > data.pairs.sample_count() {
        return Err(Error::contract(format!(
            "last snapshot point {} exceeds the {} available samples",
            cfg.max_snapshot(),
            data.pairs.sample_count()
        )));
    }
    std::fs::create_dir_all(&cfg.output_dir)?;
    let mut files = Vec::new();

    let dataset_path = cfg.output_dir.join("dataset.csv");
    data.pairs.save_csv(&dataset_path)?;
    files.push(dataset_path);

    let sidecar_path = cfg.output_dir.join("config.json");
    let mut sidecar = create(&sidecar_path)?;
    serde_json::to_writer_pretty(&mut sidecar, &data.resolved)
        .map_err(|e| Error::data(format!("config sidecar: {e}")))?;
    sidecar.write_all(b"\n")?;
    drop(sidecar);
    files.push(sidecar_path);

    let dictionary = build_dictionary(cfg, &data.pairs)?;
    let checkpoints = stream_checkpoints(cfg, &data, &dictionary, cfg.delta)?;

    for c in &checkpoints {
        let model_path = cfg.output_dir.join(format!("model_{:05}.json", c.count));
        c.model.save_json(&model_path)?;
        files.push(model_path);

        let spec = spectral::spectrum(&c.model)?;
        let spec_path = cfg.output_dir.join(format!("spectrum_{:05}.csv", c.count));
        spectral::write_spectrum_csv(create(&spec_path)?, &spec)?;
        files.push(spec_path);
    }

    if cfg.prediction.is_some() {
        let mse_path = cfg.output_dir.join("prediction_mse.csv");
        let mut w = create(&mse_path)?;
        writeln!(w, "checkpoint,step,mse")?;
        for c in &checkpoints {
            if let Some((curve, avg)) = &c.mse {
                for (step, v) in curve.iter().enumerate() {
                    writeln!(w, "{},{step},{:.16e}", c.count, v)?;
                }
                writeln!(w, "{},avg,{:.16e}", c.count, avg)?;
            }
        }
        drop(w);
        files.push(mse_path);

        if !cfg.delta_sweep.is_empty() {
            let sweep_path = cfg.output_dir.join("delta_sweep.csv");
            let mut w = create(&sweep_path)?;
            writeln!(w, "delta,avg_mse")?;
            for &delta in &cfg.delta_sweep {
                let runs = stream_checkpoints(cfg, &data, &dictionary, delta)?;
                let avg = runs
                    .last()
                    .and_then(|c| c.mse.as_ref())
                    .map(|(_, a)| *a)
                    .unwrap_or(f64::NAN);
                writeln!(w, "{delta:.16e},{avg:.16e}")?;
            }
            drop(w);
            files.push(sweep_path);
        }
    }

    let timing = bench_compare(cfg)?;
    let timing_path = cfg.output_dir.join("timing.json");
    let mut w = create(&timing_path)?;
    serde_json::to_writer_pretty(&mut w, &timing)
        .map_err(|e| Error::data(format!("timing report: {e}")))?;
    w.write_all(b"\n")?;
    drop(w);
    files.push(timing_path);

    Ok(RunArtifacts {
        output_dir: cfg.output_dir.clone(),
        checkpoints,
        timing,
        files,
    })
}

/// Replays the stream once with the given δ, materializing the operator and
/// (optionally) the prediction error at every snapshot point.
pub fn stream_checkpoints(
    cfg: &ExperimentConfig,
    data: &ExperimentData,
    dictionary: &Dictionary,
    delta: f64,
) -> Result<Vec<CheckpointResult>> {
    let mut state = StreamState::new(dictionary.clone(), delta)?;
    let n = data.pairs.state_dim();
    let mut x = vec![0.0; n];
    let mut y = vec![0.0; n];
    let mut out = Vec::new();
    let mut points = cfg.snapshot_points.iter().copied().peekable();
    for i in 0..cfg.max_snapshot() {
        for d in 0..n {
            x[d] = data.pairs.x_p()[(d, i)];
            y[d] = data.pairs.x_f()[(d, i)];
        }
        state.update(&x, &y).map_err(|e| e.at_sample(i))?;
        if points.peek() == Some(&state.count()) {
            let count = points.next().unwrap();
            let model = state.operator();
            let mse = evaluate_prediction(cfg, data, &model, count)?;
            out.push(CheckpointResult { count, model, mse });
        }
    }
    Ok(out)
}

/// Fits the output map on the states seen so far and scores the configured
/// prediction window. Returns (per-step curve, horizon average).
fn evaluate_prediction(
    cfg: &ExperimentConfig,
    data: &ExperimentData,
    model: &KoopmanModel,
    count: usize,
) -> Result<Option<(Vec<f64>, f64)>> {
    let Some(pred_cfg) = &cfg.prediction else {
        return Ok(None);
    };
    let training_states = data.pairs.predictor_states(count)?;
    let predictor = fit_c(&training_states, model.clone(), koopman::numlin::DEFAULT_RCOND)?;

    let (start, steps) = match pred_cfg.mode {
        // From the newest state, horizon steps into the future.
        PredictionMode::Immediate => (count, pred_cfg.horizon),
        // A fixed unseen window [start, start + horizon - 1].
        PredictionMode::Holdout => (
            pred_cfg.holdout_start.expect("validated"),
            pred_cfg.horizon - 1,
        ),
    };
    if start + steps >= data.states.ncols() {
        return Err(Error::contract(format!(
            "prediction window [{start}, {}] exceeds trajectory length {}",
            start + steps,
            data.states.ncols()
        )));
    }
    let x0: Vec<f64> = (0..data.states.nrows())
        .map(|d| data.states[(d, start)])
        .collect();
    let pred = predictor.predict(&x0, steps)?;
    let truth = data.states.columns(start, steps + 1).clone_owned();
    let curve = per_step_mse(&truth, &pred)?;
    let avg = rolling_mse(&truth, &pred)?;
    Ok(Some((curve, avg)))
}
