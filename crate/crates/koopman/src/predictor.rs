//! Lifted-space linear predictor.
//!
//! The output matrix C minimizes Σ_i ‖x_i − C Ψ(x_i)‖² over the training
//! states. A trajectory is predicted by lifting the initial condition once,
//! rolling the lifted vector forward with repeated applications of the
//! operator, and mapping each lifted state back through C.

use std::io::Write;

use nalgebra::DMatrix;

use crate::batch::KoopmanModel;
use crate::error::{Error, Result};
use crate::numlin;

#[derive(Debug, Clone)]
pub struct Predictor {
    model: KoopmanModel,
    c: DMatrix<f64>,
}

/// Fits the output-reconstruction matrix `C = states · Ψ(states)†`.
///
/// `states` holds the training states as columns; for a stream of M pairs
/// the conventional choice is x_1..x_M plus the final image y_M
/// (see [`crate::SnapshotPairs::predictor_states`]).
pub fn fit_c(states: &DMatrix<f64>, model: KoopmanModel, rcond: f64) -> Result<Predictor> {
    if states.ncols() == 0 {
        return Err(Error::contract("fit_c: need at least one state"));
    }
    if states.nrows() != model.dictionary().state_dim() {
        return Err(Error::contract(format!(
            "fit_c: states have dimension {} but dictionary expects {}",
            states.nrows(),
            model.dictionary().state_dim()
        )));
    }
    let lifted = model.dictionary().lift_batch(states)?;
    let c = states * numlin::pinv(&lifted, rcond)?;
    Ok(Predictor { model, c })
}

impl Predictor {
    pub fn model(&self) -> &KoopmanModel {
        &self.model
    }

    pub fn output_matrix(&self) -> &DMatrix<f64> {
        &self.c
    }

    /// Rolls the model forward from `x0` for `steps` steps and returns the
    /// N×(steps+1) matrix of reconstructed states. Column 0 is `C·Ψ(x0)`,
    /// the model's reconstruction of the initial condition; column n is
    /// `C·Kⁿ·Ψ(x0)`, computed by repeated matrix-vector products.
    pub fn predict(&self, x0: &[f64], steps: usize) -> Result<DMatrix<f64>> {
        let mut z = self.model.dictionary().lift(x0)?;
        let n = self.c.nrows();
        let mut out = DMatrix::zeros(n, steps + 1);
        out.set_column(0, &(&self.c * &z));
        for step in 1..=steps {
            z = self.model.operator() * z;
            if !z.iter().all(|v| v.is_finite()) {
                return Err(Error::Divergence {
                    step,
                    detail: "lifted state became non-finite during rollout".into(),
                });
            }
            out.set_column(step, &(&self.c * &z));
        }
        Ok(out)
    }
}

/// Mean squared error averaged over every state and every column:
/// `Σ (truth − pred)² / (N · (steps+1))`.
pub fn rolling_mse(truth: &DMatrix<f64>, pred: &DMatrix<f64>) -> Result<f64> {
    if truth.shape() != pred.shape() {
        return Err(Error::contract(format!(
            "rolling_mse: shapes {:?} and {:?} differ",
            truth.shape(),
            pred.shape()
        )));
    }
    let total: f64 = truth
        .iter()
        .zip(pred.iter())
        .map(|(t, p)| (t - p) * (t - p))
        .sum();
    Ok(total / truth.len() as f64)
}

/// Per-column mean squared errors: entry n averages over the states of
/// column n only.
pub fn per_step_mse(truth: &DMatrix<f64>, pred: &DMatrix<f64>) -> Result<Vec<f64>> {
    if truth.shape() != pred.shape() {
        return Err(Error::contract(format!(
            "per_step_mse: shapes {:?} and {:?} differ",
            truth.shape(),
            pred.shape()
        )));
    }
    Ok((0..truth.ncols())
        .map(|c| {
            let diff = truth.column(c) - pred.column(c);
            diff.norm_squared() / truth.nrows() as f64
        })
        .collect())
}

/// Writes prediction output as CSV with columns
/// `step,true_1..true_N,pred_1..pred_N`; the truth columns are omitted when
/// no reference trajectory is supplied.
pub fn write_prediction_csv<W: Write>(
    mut w: W,
    pred: &DMatrix<f64>,
    truth: Option<&DMatrix<f64>>,
) -> Result<()> {
    if let Some(t) = truth {
        if t.shape() != pred.shape() {
            return Err(Error::contract(format!(
                "prediction csv: truth shape {:?} does not match prediction {:?}",
                t.shape(),
                pred.shape()
            )));
        }
    }
    let n = pred.nrows();
    let mut header = String::from("step");
    if truth.is_some() {
        for i in 1..=n {
            header.push_str(&format!(",true_{i}"));
        }
    }
    for i in 1..=n {
        header.push_str(&format!(",pred_{i}"));
    }
    writeln!(w, "{header}")?;
    for s in 0..pred.ncols() {
        let mut row = format!("{s}");
        if let Some(t) = truth {
            for i in 0..n {
                row.push_str(&format!(",{:.16e}", t[(i, s)]));
            }
        }
        for i in 0..n {
            row.push_str(&format!(",{:.16e}", pred[(i, s)]));
        }
        writeln!(w, "{row}")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::batch::{dmd_fit, SnapshotPairs};
    use crate::dictionary::Dictionary;
    use crate::numlin::frobenius;
    use approx::assert_relative_eq;
    use nalgebra::DVector;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn model_from(k: DMatrix<f64>, dict: Dictionary) -> KoopmanModel {
        KoopmanModel::new(k, dict, 1, 0.0)
    }

    #[test]
    fn linear_dictionary_gives_identity_c() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let states = DMatrix::from_fn(3, 12, |_, _| rng.random_range(-1.0..1.0));
        let model = model_from(DMatrix::identity(3, 3), Dictionary::linear(3).unwrap());
        let p = fit_c(&states, model, 1e-12).unwrap();
        assert_relative_eq!(
            p.output_matrix().clone(),
            DMatrix::identity(3, 3),
            epsilon = 1e-10
        );
    }

    #[test]
    fn single_rbf_at_state_reconstructs_state() {
        let x = [0.7, -0.3];
        let centers = DMatrix::from_row_slice(1, 2, &[0.7, -0.3]);
        let dict = Dictionary::gaussian_rbf(centers, 0.3, false).unwrap();
        let states = DMatrix::from_column_slice(2, 1, &x);
        let model = model_from(DMatrix::identity(1, 1), dict);
        let p = fit_c(&states, model, 1e-12).unwrap();
        // Feature value is exactly 1, so C must be the state as a column.
        assert_relative_eq!(
            p.output_matrix().clone(),
            DMatrix::from_column_slice(2, 1, &x),
            epsilon = 1e-12
        );
    }

    #[test]
    fn identity_operator_predicts_constant() {
        let model = model_from(DMatrix::identity(2, 2), Dictionary::linear(2).unwrap());
        let states = DMatrix::from_fn(2, 5, |i, j| (i + j) as f64);
        let p = fit_c(&states, model, 1e-12).unwrap();
        let pred = p.predict(&[1.0, -2.5], 5).unwrap();
        assert_eq!(pred.ncols(), 6);
        for c in 0..6 {
            assert_relative_eq!(pred[(0, c)], 1.0, epsilon = 1e-10);
            assert_relative_eq!(pred[(1, c)], -2.5, epsilon = 1e-10);
        }
    }

    #[test]
    fn diagonal_operator_powers() {
        let k = DMatrix::from_row_slice(2, 2, &[0.5, 0.0, 0.0, 1.0]);
        let model = model_from(k, Dictionary::linear(2).unwrap());
        let states = DMatrix::from_fn(2, 4, |i, j| 1.0 + (i * 4 + j) as f64 * 0.1);
        let p = fit_c(&states, model, 1e-12).unwrap();
        let pred = p.predict(&[1.0, 1.0], 2).unwrap();
        let expected = DMatrix::from_row_slice(2, 3, &[1.0, 0.5, 0.25, 1.0, 1.0, 1.0]);
        assert_relative_eq!(pred, expected, epsilon = 1e-10);
    }

    #[test]
    fn linear_system_rollout_matches_matrix_powers() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let mut a = DMatrix::from_fn(4, 4, |_, _| rng.random_range(-1.0..1.0));
        // Scale to spectral radius 0.9 using the Frobenius bound.
        a.scale_mut(0.9 / frobenius(&a));
        let x_p = DMatrix::from_fn(4, 40, |_, _| rng.random_range(-1.0..1.0));
        let data = SnapshotPairs::new(x_p.clone(), &a * &x_p).unwrap();
        let model = dmd_fit(&data, 1e-12).unwrap();
        let p = fit_c(&x_p, model, 1e-12).unwrap();

        let x0 = [1.0, -0.5, 0.25, 0.8];
        let pred = p.predict(&x0, 50).unwrap();
        let mut truth = DVector::from_column_slice(&x0);
        for step in 0..=50usize {
            for i in 0..4 {
                assert!(
                    (pred[(i, step)] - truth[i]).abs() <= 1e-6,
                    "step {step} component {i}"
                );
            }
            truth = &a * truth;
        }
    }

    #[test]
    fn prediction_prefix_is_bitwise_consistent() {
        let mut rng = ChaCha8Rng::seed_from_u64(55);
        let k = DMatrix::from_fn(3, 3, |_, _| rng.random_range(-0.4..0.4));
        let model = model_from(k, Dictionary::linear(3).unwrap());
        let states = DMatrix::from_fn(3, 6, |_, _| rng.random_range(-1.0..1.0));
        let p = fit_c(&states, model, 1e-12).unwrap();
        let short = p.predict(&[0.3, -0.1, 0.9], 10).unwrap();
        let long = p.predict(&[0.3, -0.1, 0.9], 20).unwrap();
        assert_eq!(short, long.columns(0, 11).clone_owned());
    }

    #[test]
    fn unstable_model_reports_divergence_step() {
        let k = DMatrix::from_row_slice(1, 1, &[1e200]);
        let model = model_from(k, Dictionary::linear(1).unwrap());
        let states = DMatrix::from_row_slice(1, 2, &[1.0, 2.0]);
        let p = fit_c(&states, model, 1e-12).unwrap();
        match p.predict(&[1.0], 10) {
            Err(Error::Divergence { step, .. }) => assert!(step >= 1),
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn mse_zero_for_identical_and_one_for_unit_offset() {
        let truth = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(rolling_mse(&truth, &truth).unwrap(), 0.0);
        let pred = truth.map(|v| v + 1.0);
        assert_relative_eq!(rolling_mse(&truth, &pred).unwrap(), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn mse_shape_mismatch() {
        let a = DMatrix::<f64>::zeros(2, 2);
        let b = DMatrix::<f64>::zeros(2, 3);
        assert!(matches!(rolling_mse(&a, &b), Err(Error::Contract(_))));
    }

    #[test]
    fn per_step_mse_averages_each_column() {
        let truth = DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 0.0, 0.0]);
        let pred = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 1.0, 2.0]);
        let steps = per_step_mse(&truth, &pred).unwrap();
        assert_relative_eq!(steps[0], 1.0);
        assert_relative_eq!(steps[1], 4.0);
    }

    #[test]
    fn fit_c_optimality_spot_check() {
        let mut rng = ChaCha8Rng::seed_from_u64(30);
        let states = DMatrix::from_fn(2, 40, |_, _| rng.random_range(-2.0..2.0));
        let dict = Dictionary::rbf_from_data(&states, 12, 0.6, 8).unwrap();
        let lifted = dict.lift_batch(&states).unwrap();
        let model = KoopmanModel::new(DMatrix::identity(12, 12), dict, 40, 0.0);
        let p = fit_c(&states, model, 1e-12).unwrap();
        let base = frobenius(&(p.output_matrix() * &lifted - &states));
        for _ in 0..50 {
            let mut e = DMatrix::from_fn(2, 12, |_, _| rng.random_range(-1.0..1.0));
            let scale = 1e-3 / frobenius(&e);
            e.scale_mut(scale);
            let perturbed = frobenius(&((p.output_matrix() + e) * &lifted - &states));
            assert!(base <= perturbed);
        }
    }

    #[test]
    fn prediction_csv_layout() {
        let pred = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        let mut buf = Vec::new();
        write_prediction_csv(&mut buf, &pred, Some(&pred)).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "step,true_1,true_2,pred_1,pred_2");
        assert!(lines.next().unwrap().starts_with("0,"));

        let mut buf = Vec::new();
        write_prediction_csv(&mut buf, &pred, None).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().next().unwrap(), "step,pred_1,pred_2");
    }
}
