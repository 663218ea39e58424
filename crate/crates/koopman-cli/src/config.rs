//! Experiment configuration: TOML or JSON file plus flag overrides.

use std::path::{Path, PathBuf};

use koopman::systems::{BurgersConfig, VanDerPolConfig};
use koopman::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SystemKind {
    Vdp,
    Ring,
    Burgers,
    CsvInput,
}

impl std::fmt::Display for SystemKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            SystemKind::Vdp => "vdp",
            SystemKind::Ring => "ring",
            SystemKind::Burgers => "burgers",
            SystemKind::CsvInput => "csv-input",
        };
        write!(f, "{s}")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DictionaryKind {
    Linear,
    Rbf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DictionarySpec {
    pub kind: DictionaryKind,
    /// Number of RBF centers (rbf only).
    #[serde(default = "default_rbf_count")]
    pub count: usize,
    /// Kernel width (rbf only).
    #[serde(default = "default_sigma")]
    pub sigma: f64,
}

fn default_rbf_count() -> usize {
    60
}

fn default_sigma() -> f64 {
    0.3
}

impl Default for DictionarySpec {
    fn default() -> Self {
        DictionarySpec {
            kind: DictionaryKind::Linear,
            count: default_rbf_count(),
            sigma: default_sigma(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PredictionMode {
    /// Predict the `horizon` steps immediately following each checkpoint.
    Immediate,
    /// Predict a fixed window starting at `holdout_start`, from every
    /// checkpoint's operator.
    Holdout,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionSpec {
    pub mode: PredictionMode,
    pub horizon: usize,
    /// First predicted time step (holdout mode).
    #[serde(default)]
    pub holdout_start: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingSpec {
    pub repeats: usize,
    /// Also time an eigendecomposition of the operator at every step in
    /// both arms (secondary table; the headline comparison leaves it off).
    #[serde(default)]
    pub eig_every_step: bool,
}

impl Default for TimingSpec {
    fn default() -> Self {
        TimingSpec {
            repeats: 3,
            eig_every_step: false,
        }
    }
}

/// Ring parameters as configured; initial conditions are drawn from the
/// experiment seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RingParams {
    pub n_osc: usize,
    pub damping: f64,
    pub dt: f64,
    pub steps: usize,
}

impl Default for RingParams {
    fn default() -> Self {
        RingParams {
            n_osc: 100,
            damping: 2.0,
            dt: 0.1,
            steps: 460,
        }
    }
}

/// Burgers parameters in step counts; `t_end = steps * dt`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BurgersParams {
    pub k_visc: f64,
    pub dx: f64,
    pub dt: f64,
    pub steps: usize,
    #[serde(default = "default_amplitude")]
    pub amplitude: f64,
}

fn default_amplitude() -> f64 {
    1.0
}

impl Default for BurgersParams {
    fn default() -> Self {
        // dt is 0.002 rather than the printed 0.02: the explicit scheme
        // needs k·dt/dx² ≤ 0.5 to survive the 750+ steps the holdout
        // experiment consumes (0.02 gives r = 2 and the field blows up).
        BurgersParams {
            k_visc: 0.01,
            dx: 0.01,
            dt: 0.002,
            steps: 760,
            amplitude: 1.0,
        }
    }
}

impl BurgersParams {
    pub fn to_config(&self) -> BurgersConfig {
        BurgersConfig {
            k_visc: self.k_visc,
            dx: self.dx,
            dt: self.dt,
            t_end: self.steps as f64 * self.dt,
            amplitude: self.amplitude,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub system: SystemKind,
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default)]
    pub seed: u64,
    pub snapshot_points: Vec<usize>,
    pub output_dir: PathBuf,
    #[serde(default)]
    pub dictionary: DictionarySpec,
    #[serde(default)]
    pub prediction: Option<PredictionSpec>,
    #[serde(default)]
    pub timing: TimingSpec,
    #[serde(default)]
    pub vdp: Option<VanDerPolConfig>,
    #[serde(default)]
    pub ring: Option<RingParams>,
    #[serde(default)]
    pub burgers: Option<BurgersParams>,
    /// Input file for `system = "csv-input"`.
    #[serde(default)]
    pub input_csv: Option<PathBuf>,
    /// Extra δ values for the validation-error sweep artifact.
    #[serde(default)]
    pub delta_sweep: Vec<f64>,
}

fn default_delta() -> f64 {
    1e-4
}

impl ExperimentConfig {
    /// Paper-protocol defaults for each system.
    pub fn preset(system: SystemKind, output_dir: PathBuf) -> Self {
        let (snapshot_points, dictionary, prediction) = match system {
            SystemKind::Vdp => (
                vec![500, 1000, 1500, 2000, 2500],
                DictionarySpec {
                    kind: DictionaryKind::Rbf,
                    count: 60,
                    sigma: 0.3,
                },
                None,
            ),
            SystemKind::Ring => (
                vec![50, 100, 150, 200, 250, 300],
                DictionarySpec::default(),
                Some(PredictionSpec {
                    mode: PredictionMode::Holdout,
                    horizon: 50,
                    holdout_start: Some(401),
                }),
            ),
            SystemKind::Burgers => (
                vec![50, 100, 200, 300, 400, 500],
                DictionarySpec::default(),
                Some(PredictionSpec {
                    mode: PredictionMode::Holdout,
                    horizon: 50,
                    holdout_start: Some(701),
                }),
            ),
            SystemKind::CsvInput => (vec![], DictionarySpec::default(), None),
        };
        ExperimentConfig {
            system,
            delta: default_delta(),
            seed: 7,
            snapshot_points,
            output_dir,
            dictionary,
            prediction,
            timing: TimingSpec::default(),
            vdp: None,
            ring: None,
            burgers: None,
            input_csv: None,
            delta_sweep: Vec::new(),
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let is_json = path
            .extension()
            .map(|e| e.eq_ignore_ascii_case("json"))
            .unwrap_or(false);
        if is_json {
            serde_json::from_str(&text)
                .map_err(|e| Error::contract(format!("config {}: {e}", path.display())))
        } else {
            toml::from_str(&text)
                .map_err(|e| Error::contract(format!("config {}: {e}", path.display())))
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.delta > 0.0) {
            return Err(Error::contract("config field `delta` must be > 0"));
        }
        if self.snapshot_points.is_empty() {
            return Err(Error::contract(
                "config field `snapshot_points` must be non-empty",
            ));
        }
        for w in self.snapshot_points.windows(2) {
            if w[1] <= w[0] {
                return Err(Error::contract(
                    "config field `snapshot_points` must be strictly increasing",
                ));
            }
        }
        if self.snapshot_points[0] == 0 {
            return Err(Error::contract(
                "config field `snapshot_points` must start at >= 1",
            ));
        }
        if let Some(p) = &self.prediction {
            if p.horizon == 0 {
                return Err(Error::contract("config field `prediction.horizon` must be >= 1"));
            }
            if p.mode == PredictionMode::Holdout && p.holdout_start.is_none() {
                return Err(Error::contract(
                    "config field `prediction.holdout_start` is required in holdout mode",
                ));
            }
        }
        if self.timing.repeats == 0 {
            return Err(Error::contract("config field `timing.repeats` must be >= 1"));
        }
        if self.system == SystemKind::CsvInput && self.input_csv.is_none() {
            return Err(Error::contract(
                "config field `input_csv` is required for system = \"csv-input\"",
            ));
        }
        if self.dictionary.kind == DictionaryKind::Rbf {
            if self.dictionary.count == 0 {
                return Err(Error::contract("config field `dictionary.count` must be >= 1"));
            }
            if !(self.dictionary.sigma > 0.0) {
                return Err(Error::contract("config field `dictionary.sigma` must be > 0"));
            }
        }
        if let Some(d) = self.delta_sweep.iter().find(|d| !(**d > 0.0)) {
            return Err(Error::contract(format!(
                "config field `delta_sweep` entries must be > 0, got {d}"
            )));
        }
        Ok(())
    }

    /// Highest sample index the experiment trains on.
    pub fn max_snapshot(&self) -> usize {
        self.snapshot_points.last().copied().unwrap_or(0)
    }

    /// Number of trajectory states (t = 0 included) the experiment consumes.
    pub fn required_states(&self) -> usize {
        let train = self.max_snapshot() + 1;
        let predict = match &self.prediction {
            Some(p) => match p.mode {
                PredictionMode::Immediate => self.max_snapshot() + p.horizon + 1,
                PredictionMode::Holdout => p.holdout_start.unwrap_or(0) + p.horizon,
            },
            None => 0,
        };
        train.max(predict)
    }
}
