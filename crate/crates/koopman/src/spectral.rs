//! Spectral analysis of an identified Koopman operator: eigenvalues on the
//! complex plane and eigenfunction evaluation over a phase-space grid.
//!
//! Under the convention used throughout this crate the operator acts as
//! K Ψ(x) ≈ Ψ(T(x)) (features as columns), so a Koopman eigenfunction is
//! built from a LEFT eigenvector: if wᴴK = λwᴴ then
//! φ(x) = wᴴΨ(x) satisfies φ(T(x)) = wᴴΨ(T(x)) ≈ wᴴKΨ(x) = λφ(x).
//! Using right eigenvectors here is the classic transposition bug.

use std::io::Write;

use nalgebra::{Complex, DMatrix};

use crate::batch::KoopmanModel;
use crate::error::{Error, Result};
use crate::numlin::{self, EigenDecomposition};

/// Eigenvalues and eigenvectors of the operator matrix, ordered by
/// descending real part (ties by descending imaginary part).
pub fn spectrum(model: &KoopmanModel) -> Result<EigenDecomposition> {
    numlin::eig(model.operator())
}

/// Rectangular evaluation grid over a two-dimensional state space.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub x1_min: f64,
    pub x1_max: f64,
    pub n_x1: usize,
    pub x2_min: f64,
    pub x2_max: f64,
    pub n_x2: usize,
}

impl GridSpec {
    pub fn square(min: f64, max: f64, n: usize) -> Self {
        GridSpec {
            x1_min: min,
            x1_max: max,
            n_x1: n,
            x2_min: min,
            x2_max: max,
            n_x2: n,
        }
    }

    fn axis(min: f64, max: f64, n: usize) -> Vec<f64> {
        if n == 1 {
            return vec![min];
        }
        let h = (max - min) / (n - 1) as f64;
        (0..n).map(|i| min + i as f64 * h).collect()
    }

    fn validate(&self) -> Result<()> {
        if self.n_x1 == 0 || self.n_x2 == 0 {
            return Err(Error::contract("grid: need at least one point per axis"));
        }
        if !(self.x1_min <= self.x1_max) || !(self.x2_min <= self.x2_max) {
            return Err(Error::contract("grid: min must not exceed max"));
        }
        Ok(())
    }
}

/// A Koopman eigenfunction sampled on a grid. `values[(i2, i1)]` is
/// φ(grid_x1[i1], grid_x2[i2]).
#[derive(Debug, Clone)]
pub struct EigenfunctionField {
    pub grid_x1: Vec<f64>,
    pub grid_x2: Vec<f64>,
    pub values: DMatrix<Complex<f64>>,
    pub eigenvalue: Complex<f64>,
}

/// Evaluates the eigenfunction of the `which`-th eigenvalue (in spectrum
/// order) on the grid. Only defined for two-dimensional state spaces.
pub fn eigenfunction_on_grid(
    model: &KoopmanModel,
    which: usize,
    grid: &GridSpec,
) -> Result<EigenfunctionField> {
    grid.validate()?;
    if model.dictionary().state_dim() != 2 {
        return Err(Error::contract(format!(
            "eigenfunction grids need a 2-dimensional state space, dictionary has {}",
            model.dictionary().state_dim()
        )));
    }
    let decomp = spectrum(model)?;
    if which >= decomp.eigenvalues.len() {
        return Err(Error::contract(format!(
            "eigenfunction index {which} out of range 0..{}",
            decomp.eigenvalues.len()
        )));
    }
    // Left eigenvectors come out of `eig` unit-norm with a deterministic
    // phase, so repeated calls are bit-identical.
    let w = decomp.left_eigenvectors.column(which).clone_owned();
    let grid_x1 = GridSpec::axis(grid.x1_min, grid.x1_max, grid.n_x1);
    let grid_x2 = GridSpec::axis(grid.x2_min, grid.x2_max, grid.n_x2);
    let mut values = DMatrix::zeros(grid.n_x2, grid.n_x1);
    for (i2, &x2) in grid_x2.iter().enumerate() {
        for (i1, &x1) in grid_x1.iter().enumerate() {
            let psi = model.dictionary().lift(&[x1, x2])?;
            let mut phi = Complex::new(0.0, 0.0);
            for k in 0..psi.len() {
                phi += w[k].conj() * psi[k];
            }
            values[(i2, i1)] = phi;
        }
    }
    Ok(EigenfunctionField {
        grid_x1,
        grid_x2,
        values,
        eigenvalue: decomp.eigenvalues[which],
    })
}

/// Writes a spectrum as CSV rows `re,im,abs` in spectrum order.
pub fn write_spectrum_csv<W: Write>(mut w: W, decomp: &EigenDecomposition) -> Result<()> {
    writeln!(w, "re,im,abs")?;
    for lam in &decomp.eigenvalues {
        writeln!(w, "{:.16e},{:.16e},{:.16e}", lam.re, lam.im, lam.norm())?;
    }
    Ok(())
}

impl EigenfunctionField {
    /// Writes the field as CSV rows `x1,x2,re,im,abs`, x2-major.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "x1,x2,re,im,abs")?;
        for (i2, &x2) in self.grid_x2.iter().enumerate() {
            for (i1, &x1) in self.grid_x1.iter().enumerate() {
                let v = self.values[(i2, i1)];
                writeln!(
                    w,
                    "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
                    x1,
                    x2,
                    v.re,
                    v.im,
                    v.norm()
                )?;
            }
        }
        Ok(())
    }
}
