//! Van der Pol oscillator:
//!
//! ẋ₁ = x₂
//! ẋ₂ = μ(1 − x₁²)x₂ − x₁
//!
//! For μ = 0 this is the harmonic oscillator; for μ > 0 there is a stable
//! limit cycle that trajectories converge onto.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::integrate_rk4;
use crate::batch::SnapshotPairs;
use crate::error::{Error, Result};

/// RK4 substep ceiling; sampling intervals above this are split internally.
const MAX_INTERNAL_STEP: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VanDerPolConfig {
    pub mu: f64,
    /// Sampling interval between snapshots.
    pub dt: f64,
    pub steps: usize,
    pub x0: [f64; 2],
}

impl Default for VanDerPolConfig {
    fn default() -> Self {
        VanDerPolConfig {
            mu: 0.2,
            dt: 0.01,
            steps: 2500,
            x0: [2.0, 0.0],
        }
    }
}

impl VanDerPolConfig {
    fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) {
            return Err(Error::contract("vdp: dt must be > 0"));
        }
        if self.steps == 0 {
            return Err(Error::contract("vdp: steps must be >= 1"));
        }
        if !self.mu.is_finite() || !self.x0.iter().all(|v| v.is_finite()) {
            return Err(Error::data("vdp: mu and x0 must be finite"));
        }
        Ok(())
    }
}

/// States at t = 0, dt, ..., steps·dt as columns of a 2×(steps+1) matrix.
pub fn simulate_vdp_trajectory(cfg: &VanDerPolConfig) -> Result<DMatrix<f64>> {
    cfg.validate()?;
    let mu = cfg.mu;
    let f = move |y: &DVector<f64>| {
        DVector::from_column_slice(&[y[1], mu * (1.0 - y[0] * y[0]) * y[1] - y[0]])
    };
    integrate_rk4(
        &f,
        DVector::from_column_slice(&cfg.x0),
        cfg.dt,
        cfg.steps,
        MAX_INTERNAL_STEP,
    )
}

pub fn simulate_vdp(cfg: &VanDerPolConfig) -> Result<SnapshotPairs> {
    SnapshotPairs::from_trajectory(&simulate_vdp_trajectory(cfg)?)
}
