//! Viscous Burgers equation ∂ₜu + u ∂ₓu = k ∂ₓ²u on x ∈ [0, 1] with
//! Dirichlet boundaries u(0,t) = u(1,t) = 0 and initial condition
//! u(x,0) = amplitude · sin(2πx).
//!
//! Discretization: forward Euler in time, central differences for both the
//! diffusion and the convection terms. The state vector carries the interior
//! grid values only; the boundary nodes are identically zero and would make
//! the lifted data matrix rank-deficient if carried along.
//!
//! The explicit scheme needs the diffusion number r = k·dt/dx² ≤ 0.5; the
//! config exposes [`BurgersConfig::is_cfl_stable`] so callers can warn, and
//! a run that blows up reports a divergence error with the step index.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::batch::SnapshotPairs;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BurgersConfig {
    /// Kinematic viscosity.
    pub k_visc: f64,
    pub dx: f64,
    pub dt: f64,
    /// Simulated time span [0, t_end].
    pub t_end: f64,
    /// Scale on the sin(2πx) initial condition.
    pub amplitude: f64,
}

impl Default for BurgersConfig {
    fn default() -> Self {
        BurgersConfig {
            k_visc: 0.01,
            dx: 0.01,
            dt: 0.02,
            t_end: 1.0,
            amplitude: 1.0,
        }
    }
}

impl BurgersConfig {
    /// Interior grid points; 99 for dx = 0.01.
    pub fn interior_points(&self) -> usize {
        ((1.0 / self.dx).round() as usize).saturating_sub(1)
    }

    pub fn steps(&self) -> usize {
        (self.t_end / self.dt).round() as usize
    }

    /// Diffusion number r = k·dt/dx².
    pub fn cfl_number(&self) -> f64 {
        self.k_visc * self.dt / (self.dx * self.dx)
    }

    pub fn is_cfl_stable(&self) -> bool {
        self.cfl_number() <= 0.5
    }

    fn validate(&self) -> Result<()> {
        if !(self.dx > 0.0) || !(self.dt > 0.0) {
            return Err(Error::contract("burgers: dx and dt must be > 0"));
        }
        if self.k_visc < 0.0 || !self.k_visc.is_finite() {
            return Err(Error::contract("burgers: k_visc must be finite and >= 0"));
        }
        if self.interior_points() == 0 {
            return Err(Error::contract("burgers: grid has no interior points"));
        }
        if self.steps() == 0 {
            return Err(Error::contract("burgers: t_end must cover at least one step"));
        }
        Ok(())
    }

    /// Interior samples of amplitude · sin(2πx).
    pub fn initial_field(&self) -> Vec<f64> {
        let n = self.interior_points();
        (0..n)
            .map(|j| {
                let x = (j + 1) as f64 * self.dx;
                self.amplitude * (2.0 * std::f64::consts::PI * x).sin()
            })
            .collect()
    }
}

/// Advances the interior field one explicit step; boundary neighbors are 0.
fn step_field(u: &[f64], out: &mut [f64], k: f64, dx: f64, dt: f64) {
    let n = u.len();
    let dx2 = dx * dx;
    let two_dx = 2.0 * dx;
    for j in 0..n {
        let left = if j == 0 { 0.0 } else { u[j - 1] };
        let right = if j + 1 == n { 0.0 } else { u[j + 1] };
        out[j] = u[j]
            + dt * (k * (right - 2.0 * u[j] + left) / dx2 - u[j] * (right - left) / two_dx);
    }
}

/// Interior fields at t = 0, dt, ..., steps·dt as columns.
pub fn simulate_burgers_trajectory(cfg: &BurgersConfig) -> Result<DMatrix<f64>> {
    cfg.validate()?;
    let n = cfg.interior_points();
    let steps = cfg.steps();
    let mut traj = DMatrix::zeros(n, steps + 1);
    let mut u = cfg.initial_field();
    let mut next = vec![0.0; n];
    for (j, &v) in u.iter().enumerate() {
        traj[(j, 0)] = v;
    }
    for step in 1..=steps {
        step_field(&u, &mut next, cfg.k_visc, cfg.dx, cfg.dt);
        if !next.iter().all(|v| v.is_finite()) {
            return Err(Error::Divergence {
                step,
                detail: format!(
                    "explicit scheme blew up (diffusion number r = {:.3})",
                    cfg.cfl_number()
                ),
            });
        }
        std::mem::swap(&mut u, &mut next);
        for (j, &v) in u.iter().enumerate() {
            traj[(j, step)] = v;
        }
    }
    Ok(traj)
}

pub fn simulate_burgers(cfg: &BurgersConfig) -> Result<SnapshotPairs> {
    SnapshotPairs::from_trajectory(&simulate_burgers_trajectory(cfg)?)
}
