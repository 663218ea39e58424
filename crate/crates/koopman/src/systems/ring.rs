//! Ring network of coupled damped linear oscillators:
//!
//! θ̈_k = −L_k θ − d θ̇_k
//!
//! where L is the unweighted ring-graph Laplacian (2 on the diagonal, −1 for
//! the two neighbors modulo N). The integrated state is the 2N vector
//! (θ₁..θ_N, θ̇₁..θ̇_N).

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::integrate_rk4;
use crate::batch::SnapshotPairs;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RingOscillatorConfig {
    pub n_osc: usize,
    pub damping: f64,
    pub dt: f64,
    pub steps: usize,
    pub theta0: Vec<f64>,
    pub thetadot0: Vec<f64>,
}

impl RingOscillatorConfig {
    /// Random initial angles in (−1, 1) and velocities in (−0.5, 0.5),
    /// deterministic for a fixed seed.
    pub fn seeded(n_osc: usize, damping: f64, dt: f64, steps: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let theta0 = (0..n_osc).map(|_| rng.random_range(-1.0..1.0)).collect();
        let thetadot0 = (0..n_osc).map(|_| rng.random_range(-0.5..0.5)).collect();
        RingOscillatorConfig {
            n_osc,
            damping,
            dt,
            steps,
            theta0,
            thetadot0,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.n_osc < 3 {
            return Err(Error::contract("ring: need at least 3 oscillators"));
        }
        if self.damping < 0.0 {
            return Err(Error::contract("ring: damping must be >= 0"));
        }
        if !(self.dt > 0.0) || self.steps == 0 {
            return Err(Error::contract("ring: dt must be > 0 and steps >= 1"));
        }
        if self.theta0.len() != self.n_osc || self.thetadot0.len() != self.n_osc {
            return Err(Error::contract(format!(
                "ring: initial conditions must have length {}",
                self.n_osc
            )));
        }
        Ok(())
    }
}

/// Unweighted ring-graph Laplacian.
pub fn ring_laplacian(n: usize) -> DMatrix<f64> {
    let mut l = DMatrix::zeros(n, n);
    for k in 0..n {
        l[(k, k)] = 2.0;
        l[(k, (k + 1) % n)] = -1.0;
        l[(k, (k + n - 1) % n)] = -1.0;
    }
    l
}

/// States (θ, θ̇) at t = 0, dt, ..., steps·dt as columns of a
/// 2N×(steps+1) matrix.
pub fn simulate_ring_trajectory(cfg: &RingOscillatorConfig) -> Result<DMatrix<f64>> {
    cfg.validate()?;
    let n = cfg.n_osc;
    let lap = ring_laplacian(n);
    let d = cfg.damping;
    let f = move |y: &DVector<f64>| {
        let theta = y.rows(0, n);
        let thetadot = y.rows(n, n);
        let mut dy = DVector::zeros(2 * n);
        dy.rows_mut(0, n).copy_from(&thetadot);
        let accel = -(&lap * theta) - thetadot * d;
        dy.rows_mut(n, n).copy_from(&accel);
        dy
    };
    let mut y0 = DVector::zeros(2 * n);
    for k in 0..n {
        y0[k] = cfg.theta0[k];
        y0[n + k] = cfg.thetadot0[k];
    }
    integrate_rk4(&f, y0, cfg.dt, cfg.steps, cfg.dt)
}

pub fn simulate_ring(cfg: &RingOscillatorConfig) -> Result<SnapshotPairs> {
    SnapshotPairs::from_trajectory(&simulate_ring_trajectory(cfg)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn laplacian_ring_structure() {
        let l = ring_laplacian(3);
        assert_eq!(l.row(0).iter().copied().collect::<Vec<_>>(), vec![
            2.0, -1.0, -1.0
        ]);
        let l = ring_laplacian(5);
        for k in 0..5 {
            assert_eq!(l.row(k).sum(), 0.0, "row {k} sum");
        }
        assert_eq!(l, l.transpose());
        // The all-ones vector spans the nullspace.
        let ones = DVector::from_element(5, 1.0);
        assert_eq!(&l * ones, DVector::zeros(5));
    }

    #[test]
    fn consensus_state_is_invariant() {
        let n = 6;
        let cfg = RingOscillatorConfig {
            n_osc: n,
            damping: 3.7,
            dt: 0.1,
            steps: 50,
            theta0: vec![0.42; n],
            thetadot0: vec![0.0; n],
        };
        let traj = simulate_ring_trajectory(&cfg).unwrap();
        for c in 0..traj.ncols() {
            for k in 0..n {
                assert!((traj[(k, c)] - 0.42).abs() <= 1e-14);
                assert!(traj[(n + k, c)].abs() <= 1e-14);
            }
        }
    }

    #[test]
    fn damped_ring_approaches_consensus() {
        let cfg = RingOscillatorConfig::seeded(100, 2.0, 0.1, 2000, 5);
        let traj = simulate_ring_trajectory(&cfg).unwrap();
        let spread = |c: usize| {
            let mut lo = f64::INFINITY;
            let mut hi = f64::NEG_INFINITY;
            for k in 0..100 {
                lo = lo.min(traj[(k, c)]);
                hi = hi.max(traj[(k, c)]);
            }
            hi - lo
        };
        // After the fast transient the angle spread shrinks monotonically.
        let checkpoints = [500, 1000, 1500, 2000];
        for w in checkpoints.windows(2) {
            assert!(
                spread(w[1]) < spread(w[0]),
                "spread grew between t={} and t={}",
                w[0],
                w[1]
            );
        }
        // Velocities die out.
        let vel_norm: f64 = (0..100).map(|k| traj[(100 + k, 2000)].powi(2)).sum();
        assert!(vel_norm.sqrt() < 1e-2);
    }

    #[test]
    fn seeded_config_is_deterministic() {
        let a = RingOscillatorConfig::seeded(10, 2.0, 0.1, 5, 99);
        let b = RingOscillatorConfig::seeded(10, 2.0, 0.1, 5, 99);
        assert_eq!(a, b);
    }

    #[test]
    fn rejects_tiny_rings_and_bad_ic_lengths() {
        let cfg = RingOscillatorConfig {
            n_osc: 2,
            damping: 1.0,
            dt: 0.1,
            steps: 1,
            theta0: vec![0.0; 2],
            thetadot0: vec![0.0; 2],
        };
        assert!(simulate_ring(&cfg).is_err());

        let cfg = RingOscillatorConfig {
            n_osc: 4,
            damping: 1.0,
            dt: 0.1,
            steps: 1,
            theta0: vec![0.0; 3],
            thetadot0: vec![0.0; 4],
        };
        assert!(simulate_ring(&cfg).is_err());
    }
}
