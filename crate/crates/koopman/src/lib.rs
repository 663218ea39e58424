//! Koopman-operator identification from snapshot data.
//!
//! The crate implements the batch EDMD/DMD estimators, a streaming recursive
//! EDMD engine that maintains the Gram inverse through Sherman–Morrison
//! rank-1 updates, a lifted-space linear predictor, spectral analysis of the
//! identified operator, and simulators for three benchmark systems (Van der
//! Pol oscillator, a ring of coupled damped oscillators, and the viscous
//! Burgers equation).

pub mod batch;
pub mod dictionary;
pub mod error;
pub mod numlin;
pub mod predictor;
mod repr;
pub mod spectral;
pub mod stream;
pub mod systems;

pub use batch::{dmd_fit, edmd_fit, ridge_fit, KoopmanModel, SnapshotPairs};
pub use dictionary::Dictionary;
pub use error::{Error, Result};
pub use numlin::EigenDecomposition;
pub use predictor::{fit_c, per_step_mse, rolling_mse, Predictor};
pub use spectral::{eigenfunction_on_grid, spectrum, EigenfunctionField, GridSpec};
pub use stream::{fit_stream, StreamState};
