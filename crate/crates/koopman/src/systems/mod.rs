//! Simulators for the three benchmark systems. Each produces a state
//! trajectory (states as columns) and the corresponding consecutive
//! [`SnapshotPairs`].

mod burgers;
mod ring;
mod vdp;

pub use burgers::{simulate_burgers, simulate_burgers_trajectory, BurgersConfig};
pub use ring::{ring_laplacian, simulate_ring, simulate_ring_trajectory, RingOscillatorConfig};
pub use vdp::{simulate_vdp, simulate_vdp_trajectory, VanDerPolConfig};

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// One classical Runge–Kutta step of size `h`.
pub(crate) fn rk4_step<F>(f: &F, y: &DVector<f64>, h: f64) -> DVector<f64>
where
    F: Fn(&DVector<f64>) -> DVector<f64>,
{
    let k1 = f(y);
    let k2 = f(&(y + &k1 * (h / 2.0)));
    let k3 = f(&(y + &k2 * (h / 2.0)));
    let k4 = f(&(y + &k3 * h));
    y + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0)
}

/// Integrates with RK4 at the sampling interval `dt`, substepping so no
/// internal step exceeds `max_h`. Returns the dim×(steps+1) trajectory.
pub(crate) fn integrate_rk4<F>(
    f: &F,
    y0: DVector<f64>,
    dt: f64,
    steps: usize,
    max_h: f64,
) -> Result<DMatrix<f64>>
where
    F: Fn(&DVector<f64>) -> DVector<f64>,
{
    let substeps = if dt > max_h {
        (dt / max_h).ceil() as usize
    } else {
        1
    };
    let h = dt / substeps as f64;
    let mut out = DMatrix::zeros(y0.len(), steps + 1);
    let mut y = y0;
    out.set_column(0, &y);
    for step in 1..=steps {
        for _ in 0..substeps {
            y = rk4_step(f, &y, h);
        }
        if !y.iter().all(|v| v.is_finite()) {
            return Err(Error::Divergence {
                step,
                detail: "integrator state became non-finite".into(),
            });
        }
        out.set_column(step, &y);
    }
    Ok(out)
}
