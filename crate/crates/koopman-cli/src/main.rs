use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use koopman::systems::{
    simulate_burgers, simulate_ring, simulate_vdp, RingOscillatorConfig, VanDerPolConfig,
};
use koopman::{
    fit_c, spectral, Dictionary, Error, KoopmanModel, Result, SnapshotPairs, StreamState,
};
use koopman_cli::{
    bench_compare, ingest_csv, run_experiment, DictionaryKind, ExperimentConfig, SystemKind,
};

/// Koopman-operator identification: simulators, batch and streaming fits,
/// spectral analysis, prediction, and a streaming-vs-batch benchmark.
#[derive(Parser)]
#[command(name = "koopman", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a dataset CSV (plus a JSON config sidecar) from a simulator.
    Simulate {
        #[command(subcommand)]
        system: SimulateCommand,
    },
    /// Fit a Koopman operator on a full dataset (pseudo-inverse or ridge).
    FitBatch(FitBatchArgs),
    /// Stream a dataset through the recursive engine, saving models at
    /// snapshot counts and an optional resumable checkpoint.
    FitStream(FitStreamArgs),
    /// Roll a fitted model forward from an initial state.
    Predict(PredictArgs),
    /// Eigenvalues (and optionally an eigenfunction field) of a model.
    Spectrum(SpectrumArgs),
    /// Time recursive updates against from-scratch batch refits.
    Bench(RunArgs),
    /// Run a full experiment: dataset, checkpointed stream, spectra,
    /// prediction errors, timing report.
    Run(RunArgs),
}

#[derive(Subcommand)]
enum SimulateCommand {
    /// Van der Pol oscillator.
    Vdp {
        #[arg(long, default_value_t = 0.2)]
        mu: f64,
        #[arg(long, default_value_t = 0.01)]
        dt: f64,
        #[arg(long, default_value_t = 2500)]
        steps: usize,
        /// Initial state as "x1,x2".
        #[arg(long, default_value = "2,0", value_delimiter = ',', allow_hyphen_values = true)]
        x0: Vec<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Ring network of coupled damped oscillators.
    Ring {
        #[arg(long, default_value_t = 100)]
        n_osc: usize,
        #[arg(long, default_value_t = 2.0)]
        damping: f64,
        #[arg(long, default_value_t = 0.1)]
        dt: f64,
        #[arg(long, default_value_t = 460)]
        steps: usize,
        /// Seed for the random initial condition.
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Viscous Burgers equation (explicit finite differences).
    Burgers {
        #[arg(long, default_value_t = 0.01)]
        k_visc: f64,
        #[arg(long, default_value_t = 0.01)]
        dx: f64,
        #[arg(long, default_value_t = 0.002)]
        dt: f64,
        #[arg(long, default_value_t = 760)]
        steps: usize,
        #[arg(long, default_value_t = 1.0)]
        amplitude: f64,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct DictArgs {
    /// Observable dictionary family.
    #[arg(long = "dict", value_enum, default_value_t = DictFlag::Linear)]
    dict: DictFlag,
    /// Number of RBF centers (rbf only).
    #[arg(long, default_value_t = 60)]
    rbf_count: usize,
    /// RBF kernel width (rbf only).
    #[arg(long, default_value_t = 0.3)]
    sigma: f64,
    /// Seed for RBF center sampling.
    #[arg(long, default_value_t = 7)]
    seed: u64,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum DictFlag {
    Linear,
    Rbf,
}

impl DictArgs {
    fn build(&self, data: &SnapshotPairs) -> Result<Dictionary> {
        match self.dict {
            DictFlag::Linear => Dictionary::linear(data.state_dim()),
            DictFlag::Rbf => {
                Dictionary::rbf_from_data(data.x_p(), self.rbf_count, self.sigma, self.seed)
            }
        }
    }
}

#[derive(Args)]
struct FitBatchArgs {
    /// Input snapshot CSV.
    #[arg(long)]
    data: PathBuf,
    #[command(flatten)]
    dict: DictArgs,
    /// Singular-value cutoff for the pseudo-inverse estimator.
    #[arg(long, default_value_t = koopman::numlin::DEFAULT_RCOND)]
    rcond: f64,
    /// Use the Tikhonov estimator with this δ instead of the pseudo-inverse.
    #[arg(long)]
    ridge_delta: Option<f64>,
    /// Output model JSON.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct FitStreamArgs {
    /// Input snapshot CSV.
    #[arg(long)]
    data: PathBuf,
    #[command(flatten)]
    dict: DictArgs,
    /// Initialization parameter δ (the Gram matrix starts as δI).
    #[arg(long, default_value_t = 1e-4)]
    delta: f64,
    /// Sample counts at which to save models, e.g. "1500,2000,2500".
    /// Defaults to the final sample only.
    #[arg(long, value_delimiter = ',')]
    snapshots: Option<Vec<usize>>,
    /// Resume from a previously saved checkpoint instead of a fresh state.
    #[arg(long)]
    resume: Option<PathBuf>,
    /// Save the final stream state here for later resumption.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// Directory for model_<count>.json outputs.
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args)]
struct PredictArgs {
    /// Model JSON produced by fit-batch or fit-stream.
    #[arg(long)]
    model: PathBuf,
    /// Initial state as comma-separated values.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    x0: Vec<f64>,
    #[arg(long)]
    steps: usize,
    /// Snapshot CSV with reference data to fit the output map on
    /// (and to emit as truth columns). Defaults to reconstructing from
    /// the model alone is not possible, so this is required.
    #[arg(long)]
    data: PathBuf,
    /// Trajectory index the prediction starts from; truth columns are taken
    /// from here when present.
    #[arg(long)]
    truth_start: Option<usize>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SpectrumArgs {
    #[arg(long)]
    model: PathBuf,
    /// Output CSV for the eigenvalues (re,im,abs).
    #[arg(long)]
    out: PathBuf,
    /// Also evaluate the eigenfunction with this spectrum index on a grid.
    #[arg(long)]
    eigenfunction: Option<usize>,
    /// Grid as "min:max:n" per axis, comma-separated; one spec is reused
    /// for both axes.
    #[arg(long, default_value = "-3:3:100", allow_hyphen_values = true)]
    grid: String,
    /// Output CSV for the eigenfunction field (x1,x2,re,im,abs).
    #[arg(long)]
    field_out: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    /// Experiment config (TOML or JSON). Omitted: built-in defaults for
    /// --system.
    #[arg(long)]
    config: Option<PathBuf>,
    /// System preset when no config file is given.
    #[arg(long)]
    system: Option<SystemFlag>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long = "dict", value_enum)]
    dict: Option<DictFlag>,
    #[arg(long)]
    rbf_count: Option<usize>,
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Snapshot counts, e.g. "1500,2000,2500".
    #[arg(long, value_delimiter = ',')]
    snapshots: Option<Vec<usize>>,
    #[arg(long)]
    horizon: Option<usize>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Median-of-N timing repeats.
    #[arg(long)]
    repeats: Option<usize>,
    /// Also time an eigendecomposition at every step in both bench arms.
    #[arg(long)]
    eig_every_step: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum SystemFlag {
    Vdp,
    Ring,
    Burgers,
}

fn parse_grid(s: &str) -> Result<spectral::GridSpec> {
    let parse_axis = |axis: &str| -> Result<(f64, f64, usize)> {
        let parts: Vec<&str> = axis.split(':').collect();
        if parts.len() != 3 {
            return Err(Error::contract(format!(
                "grid axis '{axis}' must be min:max:n"
            )));
        }
        let min = parts[0]
            .parse()
            .map_err(|e| Error::contract(format!("grid min '{}': {e}", parts[0])))?;
        let max = parts[1]
            .parse()
            .map_err(|e| Error::contract(format!("grid max '{}': {e}", parts[1])))?;
        let n = parts[2]
            .parse()
            .map_err(|e| Error::contract(format!("grid count '{}': {e}", parts[2])))?;
        Ok((min, max, n))
    };
    let axes: Vec<&str> = s.split(',').collect();
    let (x1, x2) = match axes.len() {
        1 => (parse_axis(axes[0])?, parse_axis(axes[0])?),
        2 => (parse_axis(axes[0])?, parse_axis(axes[1])?),
        n => {
            return Err(Error::contract(format!(
                "grid needs one or two axis specs, got {n}"
            )))
        }
    };
    Ok(spectral::GridSpec {
        x1_min: x1.0,
        x1_max: x1.1,
        n_x1: x1.2,
        x2_min: x2.0,
        x2_max: x2.1,
        n_x2: x2.2,
    })
}

fn write_sidecar<T: serde::Serialize>(csv_path: &PathBuf, cfg: &T) -> Result<()> {
    let sidecar = csv_path.with_extension("config.json");
    let text = serde_json::to_string_pretty(cfg)
        .map_err(|e| Error::data(format!("sidecar serialization: {e}")))?;
    std::fs::write(sidecar, text + "\n")?;
    Ok(())
}

fn cmd_simulate(cmd: SimulateCommand) -> Result<()> {
    match cmd {
        SimulateCommand::Vdp {
            mu,
            dt,
            steps,
            x0,
            out,
        } => {
            if x0.len() != 2 {
                return Err(Error::contract("vdp --x0 needs exactly two components"));
            }
            let cfg = VanDerPolConfig {
                mu,
                dt,
                steps,
                x0: [x0[0], x0[1]],
            };
            let pairs = simulate_vdp(&cfg)?;
            pairs.save_csv(&out)?;
            write_sidecar(&out, &cfg)?;
            println!(
                "wrote {} samples of the Van der Pol system to {}",
                pairs.sample_count(),
                out.display()
            );
        }
        SimulateCommand::Ring {
            n_osc,
            damping,
            dt,
            steps,
            seed,
            out,
        } => {
            let cfg = RingOscillatorConfig::seeded(n_osc, damping, dt, steps, seed);
            let pairs = simulate_ring(&cfg)?;
            pairs.save_csv(&out)?;
            write_sidecar(&out, &cfg)?;
            println!(
                "wrote {} samples of the {}-oscillator ring to {}",
                pairs.sample_count(),
                n_osc,
                out.display()
            );
        }
        SimulateCommand::Burgers {
            k_visc,
            dx,
            dt,
            steps,
            amplitude,
            out,
        } => {
            let cfg = koopman_cli::BurgersParams {
                k_visc,
                dx,
                dt,
                steps,
                amplitude,
            }
            .to_config();
            if !cfg.is_cfl_stable() {
                eprintln!(
                    "warning: diffusion number r = {:.3} exceeds 0.5; \
                     the explicit scheme may blow up",
                    cfg.cfl_number()
                );
            }
            let pairs = simulate_burgers(&cfg)?;
            pairs.save_csv(&out)?;
            write_sidecar(&out, &cfg)?;
            println!(
                "wrote {} samples ({} interior nodes) to {}",
                pairs.sample_count(),
                cfg.interior_points(),
                out.display()
            );
        }
    }
    Ok(())
}

fn cmd_fit_batch(args: FitBatchArgs) -> Result<()> {
    let data = ingest_csv(&args.data)?;
    let dict = args.dict.build(&data)?;
    let model = match args.ridge_delta {
        Some(delta) => koopman::ridge_fit(&data, &dict, delta)?,
        None => koopman::edmd_fit(&data, &dict, args.rcond)?,
    };
    model.save_json(&args.out)?;
    println!(
        "fit operator ({0}x{0}) on {1} samples -> {2}",
        model.feature_dim(),
        model.sample_count(),
        args.out.display()
    );
    Ok(())
}

fn cmd_fit_stream(args: FitStreamArgs) -> Result<()> {
    let data = ingest_csv(&args.data)?;
    let mut state = match &args.resume {
        Some(path) => {
            let state = StreamState::load_checkpoint(path)?;
            if state.dictionary().state_dim() != data.state_dim() {
                return Err(Error::contract(format!(
                    "checkpoint expects state dimension {}, data has {}",
                    state.dictionary().state_dim(),
                    data.state_dim()
                )));
            }
            state
        }
        None => StreamState::new(args.dict.build(&data)?, args.delta)?,
    };
    std::fs::create_dir_all(&args.out_dir)?;
    let snapshots = args
        .snapshots
        .clone()
        .unwrap_or_else(|| vec![state.count() + data.sample_count()]);
    let n = data.state_dim();
    let mut x = vec![0.0; n];
    let mut y = vec![0.0; n];
    let mut written = 0;
    for i in 0..data.sample_count() {
        for d in 0..n {
            x[d] = data.x_p()[(d, i)];
            y[d] = data.x_f()[(d, i)];
        }
        state.update(&x, &y).map_err(|e| e.at_sample(i))?;
        if snapshots.contains(&state.count()) {
            let path = args.out_dir.join(format!("model_{:05}.json", state.count()));
            state.operator().save_json(&path)?;
            println!("saved {}", path.display());
            written += 1;
        }
    }
    if written == 0 {
        let path = args.out_dir.join(format!("model_{:05}.json", state.count()));
        state.operator().save_json(&path)?;
        println!("saved {}", path.display());
    }
    if let Some(ckpt) = &args.checkpoint {
        state.save_checkpoint(ckpt)?;
        println!("checkpoint ({} samples) -> {}", state.count(), ckpt.display());
    }
    Ok(())
}

fn cmd_predict(args: PredictArgs) -> Result<()> {
    let model = KoopmanModel::load_json(&args.model)?;
    let data = ingest_csv(&args.data)?;
    let m = data.sample_count();
    let states = data.predictor_states(m)?;
    let predictor = fit_c(&states, model, koopman::numlin::DEFAULT_RCOND)?;
    let pred = predictor.predict(&args.x0, args.steps)?;
    let truth = match args.truth_start {
        Some(start) => {
            if start + args.steps >= states.ncols() {
                return Err(Error::contract(format!(
                    "truth window [{start}, {}] exceeds the {} available states",
                    start + args.steps,
                    states.ncols()
                )));
            }
            Some(states.columns(start, args.steps + 1).clone_owned())
        }
        None => None,
    };
    let file = std::fs::File::create(&args.out)?;
    koopman::predictor::write_prediction_csv(
        std::io::BufWriter::new(file),
        &pred,
        truth.as_ref(),
    )?;
    println!(
        "predicted {} steps from {:?} -> {}",
        args.steps,
        args.x0,
        args.out.display()
    );
    Ok(())
}

fn cmd_spectrum(args: SpectrumArgs) -> Result<()> {
    let model = KoopmanModel::load_json(&args.model)?;
    let decomp = spectral::spectrum(&model)?;
    let file = std::fs::File::create(&args.out)?;
    spectral::write_spectrum_csv(std::io::BufWriter::new(file), &decomp)?;
    println!(
        "spectrum ({} eigenvalues) -> {}",
        decomp.eigenvalues.len(),
        args.out.display()
    );
    if let Some(which) = args.eigenfunction {
        let field_out = args.field_out.ok_or_else(|| {
            Error::contract("--eigenfunction needs --field-out for the field CSV")
        })?;
        let grid = parse_grid(&args.grid)?;
        let field = spectral::eigenfunction_on_grid(&model, which, &grid)?;
        let file = std::fs::File::create(&field_out)?;
        field.write_csv(std::io::BufWriter::new(file))?;
        println!(
            "eigenfunction {} (lambda = {:.6}+{:.6}i) -> {}",
            which,
            field.eigenvalue.re,
            field.eigenvalue.im,
            field_out.display()
        );
    }
    Ok(())
}

fn resolve_run_config(args: &RunArgs) -> Result<ExperimentConfig> {
    let mut cfg = match &args.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => {
            let system = match args.system {
                Some(SystemFlag::Vdp) => SystemKind::Vdp,
                Some(SystemFlag::Ring) => SystemKind::Ring,
                Some(SystemFlag::Burgers) => SystemKind::Burgers,
                None => {
                    return Err(Error::contract(
                        "either --config or --system must be given",
                    ))
                }
            };
            let out = args
                .out
                .clone()
                .unwrap_or_else(|| PathBuf::from(format!("out/{system}")));
            ExperimentConfig::preset(system, out)
        }
    };
    if let Some(delta) = args.delta {
        cfg.delta = delta;
    }
    if let Some(dict) = args.dict {
        cfg.dictionary.kind = match dict {
            DictFlag::Linear => DictionaryKind::Linear,
            DictFlag::Rbf => DictionaryKind::Rbf,
        };
    }
    if let Some(count) = args.rbf_count {
        cfg.dictionary.count = count;
    }
    if let Some(sigma) = args.sigma {
        cfg.dictionary.sigma = sigma;
    }
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(snapshots) = &args.snapshots {
        cfg.snapshot_points = snapshots.clone();
    }
    if let Some(horizon) = args.horizon {
        if let Some(p) = &mut cfg.prediction {
            p.horizon = horizon;
        }
    }
    if let Some(out) = &args.out {
        cfg.output_dir = out.clone();
    }
    if let Some(repeats) = args.repeats {
        cfg.timing.repeats = repeats;
    }
    if args.eig_every_step {
        cfg.timing.eig_every_step = true;
    }
    Ok(cfg)
}

fn cmd_bench(args: RunArgs) -> Result<()> {
    let cfg = resolve_run_config(&args)?;
    let report = bench_compare(&cfg)?;
    std::fs::create_dir_all(&cfg.output_dir)?;
    let path = cfg.output_dir.join(if report.eig_every_step {
        "timing_eig.json"
    } else {
        "timing.json"
    });
    let text = serde_json::to_string_pretty(&report)
        .map_err(|e| Error::data(format!("timing report: {e}")))?;
    std::fs::write(&path, text + "\n")?;
    for c in &report.checkpoints {
        println!(
            "M = {:6}: recursive {:.4}s, batch {:.4}s, speedup {:.2}x",
            c.m, c.recursive_cum_s, c.batch_cum_s, c.speedup
        );
    }
    println!("report -> {}", path.display());
    Ok(())
}

fn cmd_run(args: RunArgs) -> Result<()> {
    let cfg = resolve_run_config(&args)?;
    let artifacts = run_experiment(&cfg)?;
    for c in &artifacts.checkpoints {
        match &c.mse {
            Some((_, avg)) => println!("checkpoint {:6}: horizon-average MSE {avg:.6e}", c.count),
            None => println!("checkpoint {:6}: operator saved", c.count),
        }
    }
    let t = &artifacts.timing;
    println!(
        "timing: recursive {:.4}s vs batch {:.4}s ({:.2}x) over {} checkpoints",
        t.recursive_total_s,
        t.batch_total_s,
        t.batch_total_s / t.recursive_total_s,
        t.checkpoints.len()
    );
    println!("artifacts under {}", artifacts.output_dir.display());
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate { system } => cmd_simulate(system),
        Command::FitBatch(args) => cmd_fit_batch(args),
        Command::FitStream(args) => cmd_fit_stream(args),
        Command::Predict(args) => cmd_predict(args),
        Command::Spectrum(args) => cmd_spectrum(args),
        Command::Bench(args) => cmd_bench(args),
        Command::Run(args) => cmd_run(args),
    }
}

fn exit_code_for(err: &Error) -> u8 {
    match err {
        Error::Contract(_) => 2,
        Error::Numerical(_) | Error::Divergence { .. } | Error::Data(_) => 3,
        Error::Io(_) | Error::Parse { .. } => 4,
        Error::AtSample { source, .. } => exit_code_for(source),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code_for(&err))
        }
    }
}
