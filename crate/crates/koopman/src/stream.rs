//! Streaming (recursive) EDMD.
//!
//! The engine maintains the inverse Gram matrix `phi_inv = (δI + Σ a_i a_iᵀ)⁻¹`
//! and the cross matrix `z = Σ b_i a_iᵀ` over the lifted samples
//! `a_i = Ψ(x_i)`, `b_i = Ψ(y_i)`. Each streamed pair costs one
//! Sherman–Morrison rank-1 update of `phi_inv` and one rank-1 accumulation
//! into `z`; the operator `K = z · phi_inv` is only materialized on demand.
//! After M samples the result equals `ridge_fit` on the same M pairs with the
//! same δ, which is the equivalence the test suite leans on.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::batch::{KoopmanModel, SnapshotPairs};
use crate::dictionary::Dictionary;
use crate::error::{Error, Result};
use crate::repr::MatrixRepr;

/// Running state of the recursive estimator. Fixed-size in the feature
/// dimension: no per-sample history is retained, so update cost does not
/// depend on how many samples have been absorbed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "StreamStateRepr", into = "StreamStateRepr")]
pub struct StreamState {
    phi_inv: DMatrix<f64>,
    z: DMatrix<f64>,
    count: usize,
    delta: f64,
    dictionary: Dictionary,
}

impl StreamState {
    /// Fresh state: `phi_inv = (1/δ) I`, `z = 0`, equivalent to initializing
    /// the Gram matrix to δI.
    pub fn new(dictionary: Dictionary, delta: f64) -> Result<Self> {
        if !(delta > 0.0) {
            return Err(Error::contract("stream init: delta must be > 0"));
        }
        let k = dictionary.feature_dim();
        Ok(StreamState {
            phi_inv: DMatrix::identity(k, k) / delta,
            z: DMatrix::zeros(k, k),
            count: 0,
            delta,
            dictionary,
        })
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn dictionary(&self) -> &Dictionary {
        &self.dictionary
    }

    pub fn feature_dim(&self) -> usize {
        self.phi_inv.nrows()
    }

    pub fn phi_inv(&self) -> &DMatrix<f64> {
        &self.phi_inv
    }

    pub fn z(&self) -> &DMatrix<f64> {
        &self.z
    }

    /// Absorbs one snapshot pair, lifting it through the dictionary first.
    pub fn update(&mut self, x: &[f64], y: &[f64]) -> Result<()> {
        let a = self.dictionary.lift(x)?;
        let b = self.dictionary.lift(y)?;
        self.update_lifted(&a, &b)
    }

    /// Absorbs one pre-lifted pair `(a, b) = (Ψ(x), Ψ(y))`.
    pub fn update_lifted(&mut self, a: &DVector<f64>, b: &DVector<f64>) -> Result<()> {
        let k = self.feature_dim();
        if a.len() != k || b.len() != k {
            return Err(Error::contract(format!(
                "lifted sample length {} does not match feature dimension {k}",
                a.len()
            )));
        }
        if !a.iter().all(|v| v.is_finite()) || !b.iter().all(|v| v.is_finite()) {
            return Err(Error::data("lifted sample contains non-finite values"));
        }

        // phi_inv is symmetric, so aᵀ·phi_inv = (phi_inv·a)ᵀ.
        let pa = &self.phi_inv * a;
        let denom = 1.0 + a.dot(&pa);
        if denom <= 1e-14 {
            return Err(Error::numerical(format!(
                "Sherman–Morrison denominator {denom:.3e} is not positive; state is corrupt"
            )));
        }
        self.phi_inv.ger(-1.0 / denom, &pa, &pa, 1.0);
        // The update is symmetric in exact arithmetic; re-symmetrize so
        // floating-point drift cannot accumulate over long streams.
        for i in 0..k {
            for j in (i + 1)..k {
                let avg = 0.5 * (self.phi_inv[(i, j)] + self.phi_inv[(j, i)]);
                self.phi_inv[(i, j)] = avg;
                self.phi_inv[(j, i)] = avg;
            }
        }
        self.z.ger(1.0, b, a, 1.0);
        self.count += 1;
        Ok(())
    }

    /// Materializes the operator `K = z · phi_inv` for the samples absorbed
    /// so far. At count 0 this is the zero matrix.
    pub fn operator(&self) -> KoopmanModel {
        KoopmanModel::new(
            &self.z * &self.phi_inv,
            self.dictionary.clone(),
            self.count,
            self.delta,
        )
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string(self)
            .map_err(|e| Error::data(format!("checkpoint serialization failed: {e}")))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::data(format!("bad checkpoint JSON: {e}")))
    }

    /// Writes a checkpoint from which the stream can resume bit-identically
    /// (serde_json emits the shortest round-tripping decimal for every f64).
    pub fn save_checkpoint(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut f = BufWriter::new(File::create(path)?);
        f.write_all(self.to_json()?.as_bytes())?;
        f.write_all(b"\n")?;
        Ok(())
    }

    pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Self> {
        let mut text = String::new();
        File::open(path)?.read_to_string(&mut text)?;
        Self::from_json(&text)
    }
}

#[derive(Serialize, Deserialize)]
struct StreamStateRepr {
    delta: f64,
    count: usize,
    phi_inv: MatrixRepr,
    z: MatrixRepr,
    dictionary: Dictionary,
}

impl From<StreamState> for StreamStateRepr {
    fn from(s: StreamState) -> Self {
        StreamStateRepr {
            delta: s.delta,
            count: s.count,
            phi_inv: MatrixRepr::from_matrix(&s.phi_inv),
            z: MatrixRepr::from_matrix(&s.z),
            dictionary: s.dictionary,
        }
    }
}

impl TryFrom<StreamStateRepr> for StreamState {
    type Error = Error;

    fn try_from(r: StreamStateRepr) -> Result<Self> {
        let phi_inv = r.phi_inv.into_matrix()?;
        let z = r.z.into_matrix()?;
        let k = r.dictionary.feature_dim();
        if phi_inv.shape() != (k, k) || z.shape() != (k, k) {
            return Err(Error::data(format!(
                "checkpoint matrices {:?}/{:?} do not match feature dimension {k}",
                phi_inv.shape(),
                z.shape()
            )));
        }
        if !(r.delta > 0.0) {
            return Err(Error::data("checkpoint delta must be > 0"));
        }
        Ok(StreamState {
            phi_inv,
            z,
            count: r.count,
            delta: r.delta,
            dictionary: r.dictionary,
        })
    }
}

/// Replays a snapshot set through the recursive engine in column order,
/// recording the operator at every multiple of `snapshot_every` and after
/// the final sample.
pub fn fit_stream(
    data: &SnapshotPairs,
    dictionary: &Dictionary,
    delta: f64,
    snapshot_every: usize,
) -> Result<Vec<(usize, KoopmanModel)>> {
    if snapshot_every == 0 {
        return Err(Error::contract("fit_stream: snapshot_every must be >= 1"));
    }
    let mut state = StreamState::new(dictionary.clone(), delta)?;
    let mut out = Vec::new();
    let m = data.sample_count();
    let mut x = vec![0.0; data.state_dim()];
    let mut y = vec![0.0; data.state_dim()];
    for i in 0..m {
        for d in 0..data.state_dim() {
            x[d] = data.x_p()[(d, i)];
            y[d] = data.x_f()[(d, i)];
        }
        state.update(&x, &y).map_err(|e| e.at_sample(i))?;
        if state.count() % snapshot_every == 0 || i + 1 == m {
            out.push((state.count(), state.operator()));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::batch::ridge_fit;
    use crate::numlin::frobenius;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_pairs(rng: &mut ChaCha8Rng, n: usize, m: usize) -> SnapshotPairs {
        let x_p = DMatrix::from_fn(n, m, |_, _| rng.random_range(-1.0..1.0));
        let x_f = DMatrix::from_fn(n, m, |_, _| rng.random_range(-1.0..1.0));
        SnapshotPairs::new(x_p, x_f).unwrap()
    }

    fn dictionary_for(rng: &mut ChaCha8Rng, n: usize, k: usize) -> Dictionary {
        if k == n {
            Dictionary::linear(n).unwrap()
        } else {
            let centers = DMatrix::from_fn(k, n, |_, _| rng.random_range(-1.0..1.0));
            Dictionary::gaussian_rbf(centers, 0.8, false).unwrap()
        }
    }

    #[test]
    fn init_is_scaled_identity_and_zero() {
        let d = Dictionary::linear(2).unwrap();
        let s = StreamState::new(d, 1.0).unwrap();
        assert_eq!(s.phi_inv(), &DMatrix::identity(2, 2));
        assert_eq!(s.z(), &DMatrix::zeros(2, 2));
        assert_eq!(s.count(), 0);

        let d60 = Dictionary::linear(60).unwrap();
        let s = StreamState::new(d60, 1e-4).unwrap();
        assert_relative_eq!(s.phi_inv()[(0, 0)], 1e4, epsilon = 1e-8);
        assert_eq!(s.feature_dim(), 60);

        let d100 = Dictionary::linear(100).unwrap();
        let s = StreamState::new(d100, 1e-4).unwrap();
        assert_eq!(s.phi_inv().shape(), (100, 100));
        assert_eq!(s.z().shape(), (100, 100));
    }

    #[test]
    fn init_rejects_nonpositive_delta() {
        let d = Dictionary::linear(2).unwrap();
        assert!(matches!(
            StreamState::new(d.clone(), 0.0),
            Err(Error::Contract(_))
        ));
        assert!(matches!(StreamState::new(d, -1.0), Err(Error::Contract(_))));
    }

    #[test]
    fn single_update_hand_computed() {
        // δ=1, a=e1, b=(1,2): denominator 2, phi_inv → diag(1/2, 1),
        // z → [[1,0],[2,0]], K = z·phi_inv = [[1/2,0],[1,0]].
        let d = Dictionary::linear(2).unwrap();
        let mut s = StreamState::new(d, 1.0).unwrap();
        s.update(&[1.0, 0.0], &[1.0, 2.0]).unwrap();
        let expected_phi = DMatrix::from_row_slice(2, 2, &[0.5, 0.0, 0.0, 1.0]);
        let expected_z = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 2.0, 0.0]);
        assert_relative_eq!(s.phi_inv().clone(), expected_phi, epsilon = 1e-15);
        assert_relative_eq!(s.z().clone(), expected_z, epsilon = 1e-15);
        let model = s.operator();
        let expected_k = DMatrix::from_row_slice(2, 2, &[0.5, 0.0, 1.0, 0.0]);
        assert_relative_eq!(model.operator().clone(), expected_k, epsilon = 1e-15);
        assert_eq!(model.sample_count(), 1);
        assert_eq!(model.regularization(), 1.0);
    }

    #[test]
    fn zero_feature_vector_only_bumps_count() {
        let d = Dictionary::linear(2).unwrap();
        let mut s = StreamState::new(d, 0.5).unwrap();
        s.update(&[1.0, 2.0], &[0.5, 0.25]).unwrap();
        let phi_before = s.phi_inv().clone();
        let z_before = s.z().clone();
        s.update(&[0.0, 0.0], &[3.0, 4.0]).unwrap();
        assert_eq!(s.phi_inv(), &phi_before);
        assert_eq!(s.z(), &z_before);
        assert_eq!(s.count(), 2);
    }

    #[test]
    fn operator_at_count_zero_is_zero() {
        let d = Dictionary::linear(3).unwrap();
        let s = StreamState::new(d, 1e-4).unwrap();
        assert_eq!(s.operator().operator(), &DMatrix::zeros(3, 3));
    }

    #[test]
    fn phi_inv_matches_directly_inverted_gram() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let k = 8;
        let delta = 1e-3;
        let d = Dictionary::linear(k).unwrap();
        let mut s = StreamState::new(d, delta).unwrap();
        let mut gram = DMatrix::<f64>::identity(k, k) * delta;
        for _ in 0..50 {
            let a = DVector::from_fn(k, |_, _| rng.random_range(-1.0..1.0));
            let b = DVector::from_fn(k, |_, _| rng.random_range(-1.0..1.0));
            gram.ger(1.0, &a, &a, 1.0);
            s.update_lifted(&a, &b).unwrap();
        }
        let direct = gram.try_inverse().unwrap();
        for i in 0..k {
            for j in 0..k {
                assert!(
                    (s.phi_inv()[(i, j)] - direct[(i, j)]).abs() <= 1e-9,
                    "entry ({i},{j})"
                );
            }
        }
    }

    #[test]
    fn stream_equals_ridge_across_sizes() {
        // Central equivalence: the recursion reproduces the closed-form
        // ridge estimator for every (K, M, δ) combination tried.
        for (n, k, m) in [(2usize, 2usize, 7usize), (5, 10, 200), (2, 60, 200)] {
            for delta in [1e-4, 1e-2] {
                let mut rng = ChaCha8Rng::seed_from_u64((n * 1000 + k * 10 + m) as u64);
                let data = random_pairs(&mut rng, n, m);
                let dict = dictionary_for(&mut rng, n, k);
                let mut s = StreamState::new(dict.clone(), delta).unwrap();
                let mut x = vec![0.0; n];
                let mut y = vec![0.0; n];
                for i in 0..m {
                    for d in 0..n {
                        x[d] = data.x_p()[(d, i)];
                        y[d] = data.x_f()[(d, i)];
                    }
                    s.update(&x, &y).unwrap();
                }
                let streamed = s.operator();
                let ridge = ridge_fit(&data, &dict, delta).unwrap();
                let rel = frobenius(&(streamed.operator() - ridge.operator()))
                    / frobenius(ridge.operator());
                assert!(rel <= 1e-8, "rel {rel} for K={k} M={m} delta={delta}");
            }
        }
    }

    #[test]
    fn fit_stream_snapshot_schedule() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let data = random_pairs(&mut rng, 2, 3);
        let dict = Dictionary::linear(2).unwrap();

        let every = fit_stream(&data, &dict, 1e-4, 1).unwrap();
        assert_eq!(every.len(), 3);
        assert_eq!(every[2].0, 3);

        let only_final = fit_stream(&data, &dict, 1e-4, 3).unwrap();
        assert_eq!(only_final.len(), 1);
        assert_eq!(only_final[0].0, 3);
        assert_eq!(only_final[0].1, every[2].1);

        // A large snapshot interval still records the final model.
        let tail = fit_stream(&data, &dict, 1e-4, 100).unwrap();
        assert_eq!(tail.len(), 1);
        assert_eq!(tail[0].0, 3);
    }

    #[test]
    fn checkpoint_resumes_bit_identically() {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let data = random_pairs(&mut rng, 3, 40);
        let dict = dictionary_for(&mut rng, 3, 7);
        let mut full = StreamState::new(dict.clone(), 1e-4).unwrap();
        let mut half = StreamState::new(dict, 1e-4).unwrap();
        let mut x = vec![0.0; 3];
        let mut y = vec![0.0; 3];
        for i in 0..40 {
            for d in 0..3 {
                x[d] = data.x_p()[(d, i)];
                y[d] = data.x_f()[(d, i)];
            }
            full.update(&x, &y).unwrap();
            if i < 20 {
                half.update(&x, &y).unwrap();
            }
        }
        let mut resumed = StreamState::from_json(&half.to_json().unwrap()).unwrap();
        assert_eq!(resumed, half);
        for i in 20..40 {
            for d in 0..3 {
                x[d] = data.x_p()[(d, i)];
                y[d] = data.x_f()[(d, i)];
            }
            resumed.update(&x, &y).unwrap();
        }
        assert_eq!(resumed.phi_inv(), full.phi_inv());
        assert_eq!(resumed.z(), full.z());
        assert_eq!(resumed.count(), full.count());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(40))]

        #[test]
        fn phi_inv_stays_symmetric(seed in 0u64..10_000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let k = rng.random_range(2..10usize);
            let dict = Dictionary::linear(k).unwrap();
            let mut s = StreamState::new(dict, 1e-4).unwrap();
            for _ in 0..30 {
                let a = DVector::from_fn(k, |_, _| rng.random_range(-1.0..1.0));
                let b = DVector::from_fn(k, |_, _| rng.random_range(-1.0..1.0));
                s.update_lifted(&a, &b).unwrap();
            }
            let asym = frobenius(&(s.phi_inv() - s.phi_inv().transpose()));
            prop_assert!(asym <= 1e-10);
        }

        #[test]
        fn final_operator_is_order_invariant(seed in 0u64..10_000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let k = 4usize;
            let m = 25usize;
            let pairs: Vec<(DVector<f64>, DVector<f64>)> = (0..m)
                .map(|_| {
                    (
                        DVector::from_fn(k, |_, _| rng.random_range(-1.0..1.0)),
                        DVector::from_fn(k, |_, _| rng.random_range(-1.0..1.0)),
                    )
                })
                .collect();
            let dict = Dictionary::linear(k).unwrap();
            let mut fwd = StreamState::new(dict.clone(), 1e-3).unwrap();
            for (a, b) in &pairs {
                fwd.update_lifted(a, b).unwrap();
            }
            let mut rev = StreamState::new(dict, 1e-3).unwrap();
            for (a, b) in pairs.iter().rev() {
                rev.update_lifted(a, b).unwrap();
            }
            let kf = fwd.operator();
            let kr = rev.operator();
            let rel = frobenius(&(kf.operator() - kr.operator()))
                / frobenius(kf.operator()).max(1e-300);
            prop_assert!(rel <= 1e-8, "rel {}", rel);
        }
    }
}
