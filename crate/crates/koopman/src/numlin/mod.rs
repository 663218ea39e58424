//! Dense linear-algebra kernels shared by the identification modules:
//! SVD-backed pseudo-inverse and least squares, and a real nonsymmetric
//! eigendecomposition with a deterministic eigenvalue ordering.
//!
//! Matrix storage and factorizations (SVD, Cholesky) come from `nalgebra`;
//! the eigendecomposition is implemented in [`evd`] because complex
//! eigenvectors of real matrices are not exposed by the backend.

mod evd;

use nalgebra::{Complex, DMatrix, DVector};

use crate::error::{Error, Result};

/// Default relative singular-value cutoff for pseudo-inverse style solves.
pub const DEFAULT_RCOND: f64 = 1e-12;

const SVD_MAX_ITER: usize = 10_000;

/// Frobenius norm.
pub fn frobenius(a: &DMatrix<f64>) -> f64 {
    a.norm()
}

pub(crate) fn ensure_finite(a: &DMatrix<f64>, what: &str) -> Result<()> {
    if a.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::data(format!("{what} contains non-finite entries")))
    }
}

pub(crate) fn ensure_finite_slice(x: &[f64], what: &str) -> Result<()> {
    if x.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::data(format!("{what} contains non-finite entries")))
    }
}

fn svd_of(a: &DMatrix<f64>) -> Result<nalgebra::linalg::SVD<f64, nalgebra::Dyn, nalgebra::Dyn>> {
    nalgebra::linalg::SVD::try_new(a.clone(), true, true, f64::EPSILON, SVD_MAX_ITER).ok_or_else(
        || {
            Error::numerical(format!(
                "SVD failed to converge for a {}x{} matrix",
                a.nrows(),
                a.ncols()
            ))
        },
    )
}

/// Moore–Penrose pseudo-inverse via SVD. Singular values at or below
/// `rcond * sigma_max` are treated as zero.
pub fn pinv(a: &DMatrix<f64>, rcond: f64) -> Result<DMatrix<f64>> {
    if rcond < 0.0 {
        return Err(Error::contract("pinv: rcond must be >= 0"));
    }
    ensure_finite(a, "pinv input")?;
    let svd = svd_of(a)?;
    let sigma = &svd.singular_values;
    let cutoff = rcond * sigma.max();
    // A† = V Σ⁺ Uᵀ, built as (Σ⁺ Uᵀ) applied to rows of Uᵀ.
    let mut ut = svd.u.as_ref().expect("u requested").transpose();
    for (i, &s) in sigma.iter().enumerate() {
        let inv = if s > cutoff { 1.0 / s } else { 0.0 };
        ut.row_mut(i).scale_mut(inv);
    }
    Ok(svd.v_t.as_ref().expect("v_t requested").transpose() * ut)
}

/// Minimum-norm least-squares solution of `A X = B` (per column of B).
pub fn lstsq(a: &DMatrix<f64>, b: &DMatrix<f64>, rcond: f64) -> Result<DMatrix<f64>> {
    if a.nrows() != b.nrows() {
        return Err(Error::contract(format!(
            "lstsq: A has {} rows but B has {}",
            a.nrows(),
            b.nrows()
        )));
    }
    ensure_finite(a, "lstsq A")?;
    ensure_finite(b, "lstsq B")?;
    let svd = svd_of(a)?;
    let cutoff = rcond * svd.singular_values.max();
    svd.solve(b, cutoff)
        .map_err(|m| Error::numerical(format!("lstsq solve failed: {m}")))
}

/// Eigendecomposition of a real square matrix.
///
/// Eigenvalues are sorted by descending real part, ties broken by descending
/// imaginary part. Right eigenvectors satisfy `A v = λ v`; left eigenvectors
/// satisfy `wᴴ A = λ wᴴ` and are obtained from the right eigenvectors of
/// `Aᵀ` matched by the shared sort order. All vectors have unit 2-norm with
/// the first significant component rotated to be real and positive, so
/// repeated calls are bit-identical.
#[derive(Debug, Clone)]
pub struct EigenDecomposition {
    pub eigenvalues: Vec<Complex<f64>>,
    /// Column j is the right eigenvector for `eigenvalues[j]`.
    pub right_eigenvectors: DMatrix<Complex<f64>>,
    /// Column j is the left eigenvector for `eigenvalues[j]`.
    pub left_eigenvectors: DMatrix<Complex<f64>>,
}

pub fn eig(a: &DMatrix<f64>) -> Result<EigenDecomposition> {
    if a.nrows() != a.ncols() {
        return Err(Error::contract(format!(
            "eig: matrix must be square, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    ensure_finite(a, "eig input")?;

    let (eigenvalues, right_eigenvectors) = eig_right(a)?;
    let (t_values, t_vectors) = eig_right(&a.transpose())?;

    // wᴴ A = λ wᴴ  ⟺  Aᵀ w̄ = λ w̄, so the left vector for λ is the
    // conjugated right eigenvector of Aᵀ at the same eigenvalue. Both runs
    // sort identically, but inside a cluster of eigenvalues whose real parts
    // agree to roundoff (e.g. critically damped oscillator banks) the sort
    // order is noise-driven, so each slot is paired with the nearest
    // remaining transpose eigenvalue instead of trusting the position.
    let n = a.nrows();
    let scale = 1.0 + frobenius(a);
    let mut taken = vec![false; n];
    let mut left_eigenvectors = DMatrix::zeros(n, n);
    for (j, lambda) in eigenvalues.iter().enumerate() {
        let mut best = usize::MAX;
        let mut best_dist = f64::INFINITY;
        for (i, candidate) in t_values.iter().enumerate() {
            if !taken[i] {
                let dist = (lambda - candidate).norm();
                if dist < best_dist {
                    best_dist = dist;
                    best = i;
                }
            }
        }
        if best_dist > 1e-4 * scale {
            return Err(Error::numerical(format!(
                "left/right eigenvalue sets disagree by {best_dist:.3e} at slot {j}"
            )));
        }
        taken[best] = true;
        left_eigenvectors.set_column(j, &t_vectors.column(best).map(|c| c.conj()));
    }

    Ok(EigenDecomposition {
        eigenvalues,
        right_eigenvectors,
        left_eigenvectors,
    })
}

fn eig_right(a: &DMatrix<f64>) -> Result<(Vec<Complex<f64>>, DMatrix<Complex<f64>>)> {
    let n = a.nrows();
    let evd = evd::real_evd(a).ok_or_else(|| {
        Error::numerical(format!("eigendecomposition did not converge ({n}x{n})"))
    })?;

    // Unpack JAMA's packed real storage into complex columns.
    let mut values = Vec::with_capacity(n);
    let mut vectors: Vec<DVector<Complex<f64>>> = Vec::with_capacity(n);
    for j in 0..n {
        values.push(Complex::new(evd.d[j], evd.e[j]));
        let col = if evd.e[j] == 0.0 {
            DVector::from_fn(n, |i, _| Complex::new(evd.v[(i, j)], 0.0))
        } else if evd.e[j] > 0.0 {
            DVector::from_fn(n, |i, _| Complex::new(evd.v[(i, j)], evd.v[(i, j + 1)]))
        } else {
            DVector::from_fn(n, |i, _| Complex::new(evd.v[(i, j - 1)], -evd.v[(i, j)]))
        };
        vectors.push(col);
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        (values[j].re, values[j].im)
            .partial_cmp(&(values[i].re, values[i].im))
            .expect("finite eigenvalues")
    });

    let sorted_values: Vec<Complex<f64>> = order.iter().map(|&i| values[i]).collect();
    let mut mat = DMatrix::<Complex<f64>>::zeros(n, n);
    for (slot, &i) in order.iter().enumerate() {
        let v = normalize_phase(&vectors[i]);
        mat.set_column(slot, &v);
    }
    Ok((sorted_values, mat))
}

/// Unit 2-norm with the first significant component rotated real-positive.
fn normalize_phase(v: &DVector<Complex<f64>>) -> DVector<Complex<f64>> {
    let norm = v.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
    if norm == 0.0 {
        return v.clone();
    }
    let mut out = v / Complex::new(norm, 0.0);
    let max_abs = out.iter().map(|c| c.norm()).fold(0.0, f64::max);
    if let Some(lead) = out.iter().find(|c| c.norm() > 1e-12 * max_abs) {
        let phase = lead / Complex::new(lead.norm(), 0.0);
        out /= phase;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<f64> {
        DMatrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
    }

    fn to_complex(a: &DMatrix<f64>) -> DMatrix<Complex<f64>> {
        a.map(|x| Complex::new(x, 0.0))
    }

    #[test]
    fn pinv_identity() {
        let i3 = DMatrix::<f64>::identity(3, 3);
        let p = pinv(&i3, 1e-12).unwrap();
        assert_relative_eq!(p, i3, epsilon = 1e-14);
    }

    #[test]
    fn pinv_rank_deficient_diagonal() {
        let a = DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 0.0]));
        let p = pinv(&a, 1e-12).unwrap();
        let expected = DMatrix::from_diagonal(&DVector::from_vec(vec![0.5, 0.0]));
        assert_relative_eq!(p, expected, epsilon = 1e-14);
    }

    #[test]
    fn pinv_tall_matrix_penrose() {
        let a = DMatrix::from_row_slice(3, 2, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let p = pinv(&a, 1e-12).unwrap();
        // Oracle: closed form (AᵀA)⁻¹Aᵀ for full column rank.
        let expected = (a.transpose() * &a).try_inverse().unwrap() * a.transpose();
        assert_relative_eq!(p, expected, epsilon = 1e-10);
        assert!(frobenius(&(&a * &p * &a - &a)) <= 1e-8 * frobenius(&a));
    }

    #[test]
    fn pinv_penrose_conditions_randomized() {
        for seed in 0..100 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let m = rng.random_range(1..=20);
            let n = rng.random_range(1..=20);
            let a = random_matrix(&mut rng, m, n);
            let p = pinv(&a, 1e-12).unwrap();
            let na = frobenius(&a);
            assert!(frobenius(&(&a * &p * &a - &a)) <= 1e-8 * na, "seed {seed}");
            assert!(frobenius(&(&p * &a * &p - &p)) <= 1e-8 * frobenius(&p));
            let ap = &a * &p;
            let pa = &p * &a;
            assert!(frobenius(&(&ap - ap.transpose())) <= 1e-8 * (1.0 + na));
            assert!(frobenius(&(&pa - pa.transpose())) <= 1e-8 * (1.0 + na));
        }
    }

    #[test]
    fn pinv_rejects_negative_rcond() {
        let a = DMatrix::<f64>::identity(2, 2);
        assert!(matches!(pinv(&a, -1.0), Err(Error::Contract(_))));
    }

    #[test]
    fn lstsq_identity_carries_rhs() {
        let a = DMatrix::<f64>::identity(2, 2);
        let b = DMatrix::from_column_slice(2, 1, &[1.0, 2.0]);
        let x = lstsq(&a, &b, 1e-12).unwrap();
        assert_relative_eq!(x, b, epsilon = 1e-14);
    }

    #[test]
    fn lstsq_mean_of_two_points() {
        let a = DMatrix::from_column_slice(2, 1, &[1.0, 1.0]);
        let b = DMatrix::from_column_slice(2, 1, &[1.0, 3.0]);
        let x = lstsq(&a, &b, 1e-12).unwrap();
        assert_relative_eq!(x[(0, 0)], 2.0, epsilon = 1e-12);
    }

    #[test]
    fn lstsq_matches_pinv_route() {
        for seed in 0..100 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = random_matrix(&mut rng, 10, 3);
            let b = random_matrix(&mut rng, 10, 2);
            let x = lstsq(&a, &b, 1e-12).unwrap();
            let via_pinv = pinv(&a, 1e-12).unwrap() * &b;
            assert!(frobenius(&(x - via_pinv)) <= 1e-10, "seed {seed}");
        }
    }

    #[test]
    fn lstsq_dimension_mismatch() {
        let a = DMatrix::<f64>::identity(3, 3);
        let b = DMatrix::<f64>::identity(2, 2);
        assert!(matches!(lstsq(&a, &b, 1e-12), Err(Error::Contract(_))));
    }

    #[test]
    fn eig_diagonal() {
        let a = DMatrix::from_diagonal(&DVector::from_vec(vec![3.0, 1.0]));
        let d = eig(&a).unwrap();
        assert_relative_eq!(d.eigenvalues[0].re, 3.0, epsilon = 1e-12);
        assert_relative_eq!(d.eigenvalues[1].re, 1.0, epsilon = 1e-12);
        assert_relative_eq!(d.right_eigenvectors[(0, 0)].re, 1.0, epsilon = 1e-12);
        assert_relative_eq!(d.right_eigenvectors[(1, 1)].re, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn eig_rotation_is_pure_imaginary() {
        let a = DMatrix::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0]);
        let d = eig(&a).unwrap();
        assert_relative_eq!(d.eigenvalues[0].im, 1.0, epsilon = 1e-12);
        assert_relative_eq!(d.eigenvalues[1].im, -1.0, epsilon = 1e-12);
        assert_relative_eq!(d.eigenvalues[0].re, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn eig_identity_all_ones() {
        let a = DMatrix::<f64>::identity(4, 4);
        let d = eig(&a).unwrap();
        for lam in &d.eigenvalues {
            assert_relative_eq!(lam.re, 1.0, epsilon = 1e-12);
            assert_relative_eq!(lam.im, 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn eig_residuals_randomized() {
        for seed in 0..100 {
            let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
            let n = rng.random_range(2..=60);
            let a = random_matrix(&mut rng, n, n);
            let d = eig(&a).unwrap();
            let ac = to_complex(&a);
            let tol = 1e-8 * frobenius(&a);
            for j in 0..n {
                let v = d.right_eigenvectors.column(j);
                let residual = (&ac * v) - v * d.eigenvalues[j];
                assert!(residual.norm() <= tol, "right residual, seed {seed} col {j}");
                let w = d.left_eigenvectors.column(j);
                let left_residual = (w.adjoint() * &ac) - w.adjoint() * d.eigenvalues[j];
                assert!(
                    left_residual.norm() <= tol,
                    "left residual, seed {seed} col {j}"
                );
            }
        }
    }

    #[test]
    fn eig_reconstruction_residual_seeded() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let a = random_matrix(&mut rng, 5, 5);
        let d = eig(&a).unwrap();
        let ac = to_complex(&a);
        let lambda = DMatrix::from_diagonal(&DVector::from_vec(d.eigenvalues.clone()));
        let residual = &ac * &d.right_eigenvectors - &d.right_eigenvectors * lambda;
        assert!(residual.norm() <= 1e-8 * frobenius(&a));
    }

    #[test]
    fn eig_ordering_is_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let a = random_matrix(&mut rng, 12, 12);
        let d1 = eig(&a).unwrap();
        let d2 = eig(&a).unwrap();
        assert_eq!(d1.eigenvalues, d2.eigenvalues);
        assert_eq!(d1.right_eigenvectors, d2.right_eigenvectors);
        for w in d1.eigenvalues.windows(2) {
            assert!(
                w[0].re > w[1].re || (w[0].re == w[1].re && w[0].im >= w[1].im),
                "ordering violated: {:?}",
                w
            );
        }
    }

    #[test]
    fn eig_rejects_rectangular() {
        let a = DMatrix::<f64>::zeros(2, 3);
        assert!(matches!(eig(&a), Err(Error::Contract(_))));
    }
}
