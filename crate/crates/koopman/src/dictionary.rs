//! Observable dictionaries: the map Ψ from state space to feature space.
//!
//! Two families are provided: the identity (linear) dictionary, under which
//! EDMD coincides with DMD, and Gaussian radial basis functions
//! `ψ_j(x) = exp(-‖x - c_j‖² / σ²)` with optional raw-state passthrough.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numlin::ensure_finite_slice;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DictionaryRepr", into = "DictionaryRepr")]
pub enum Dictionary {
    /// Ψ(x) = x; feature dimension equals the state dimension.
    Linear { state_dim: usize },
    /// Gaussian RBFs centered at the rows of `centers`; if `include_state`
    /// the raw state coordinates are appended after the kernel values.
    GaussianRbf {
        /// One center per row, `state_dim` columns.
        centers: DMatrix<f64>,
        sigma: f64,
        include_state: bool,
        /// Seed used when the centers were sampled from data, if any.
        seed: Option<u64>,
    },
}

impl Dictionary {
    pub fn linear(state_dim: usize) -> Result<Self> {
        if state_dim == 0 {
            return Err(Error::contract("linear dictionary: state_dim must be >= 1"));
        }
        Ok(Dictionary::Linear { state_dim })
    }

    pub fn gaussian_rbf(centers: DMatrix<f64>, sigma: f64, include_state: bool) -> Result<Self> {
        if centers.nrows() == 0 || centers.ncols() == 0 {
            return Err(Error::contract("rbf dictionary: centers must be non-empty"));
        }
        if !(sigma > 0.0) {
            return Err(Error::contract("rbf dictionary: sigma must be > 0"));
        }
        if !centers.iter().all(|c| c.is_finite()) {
            return Err(Error::data("rbf dictionary: centers must be finite"));
        }
        Ok(Dictionary::GaussianRbf {
            centers,
            sigma,
            include_state,
            seed: None,
        })
    }

    /// Builds an RBF dictionary whose centers are `count` columns of `data`
    /// sampled uniformly without replacement with the given seed.
    pub fn rbf_from_data(data: &DMatrix<f64>, count: usize, sigma: f64, seed: u64) -> Result<Self> {
        let samples = data.ncols();
        if count == 0 {
            return Err(Error::contract("rbf_from_data: count must be >= 1"));
        }
        if count > samples {
            return Err(Error::contract(format!(
                "rbf_from_data: requested {count} centers from {samples} samples"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let picks = rand::seq::index::sample(&mut rng, samples, count);
        let mut centers = DMatrix::zeros(count, data.nrows());
        for (row, col) in picks.iter().enumerate() {
            for d in 0..data.nrows() {
                centers[(row, d)] = data[(d, col)];
            }
        }
        let mut dict = Self::gaussian_rbf(centers, sigma, false)?;
        if let Dictionary::GaussianRbf { seed: s, .. } = &mut dict {
            *s = Some(seed);
        }
        Ok(dict)
    }

    pub fn state_dim(&self) -> usize {
        match self {
            Dictionary::Linear { state_dim } => *state_dim,
            Dictionary::GaussianRbf { centers, .. } => centers.ncols(),
        }
    }

    pub fn feature_dim(&self) -> usize {
        match self {
            Dictionary::Linear { state_dim } => *state_dim,
            Dictionary::GaussianRbf {
                centers,
                include_state,
                ..
            } => centers.nrows() + if *include_state { centers.ncols() } else { 0 },
        }
    }

    /// Lifts a single state, Ψ(x).
    pub fn lift(&self, x: &[f64]) -> Result<DVector<f64>> {
        if x.len() != self.state_dim() {
            return Err(Error::contract(format!(
                "lift: state has length {} but dictionary expects {}",
                x.len(),
                self.state_dim()
            )));
        }
        ensure_finite_slice(x, "lift input")?;
        match self {
            Dictionary::Linear { .. } => Ok(DVector::from_column_slice(x)),
            Dictionary::GaussianRbf {
                centers,
                sigma,
                include_state,
                ..
            } => {
                let mut out = DVector::zeros(self.feature_dim());
                let inv_s2 = 1.0 / (sigma * sigma);
                for j in 0..centers.nrows() {
                    let mut dist2 = 0.0;
                    for d in 0..centers.ncols() {
                        let diff = x[d] - centers[(j, d)];
                        dist2 += diff * diff;
                    }
                    out[j] = (-dist2 * inv_s2).exp();
                }
                if *include_state {
                    let base = centers.nrows();
                    for (d, &v) in x.iter().enumerate() {
                        out[base + d] = v;
                    }
                }
                Ok(out)
            }
        }
    }

    /// Lifts every column of a state matrix: column m of the result is
    /// Ψ applied to column m of `states`.
    pub fn lift_batch(&self, states: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if states.nrows() != self.state_dim() {
            return Err(Error::contract(format!(
                "lift_batch: states have {} rows but dictionary expects {}",
                states.nrows(),
                self.state_dim()
            )));
        }
        let mut out = DMatrix::zeros(self.feature_dim(), states.ncols());
        let mut x = vec![0.0; states.nrows()];
        for m in 0..states.ncols() {
            for (d, slot) in x.iter_mut().enumerate() {
                *slot = states[(d, m)];
            }
            out.set_column(m, &self.lift(&x)?);
        }
        Ok(out)
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self)
            .map_err(|e| Error::data(format!("dictionary serialization failed: {e}")))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::data(format!("bad dictionary JSON: {e}")))
    }
}

#[derive(Serialize, Deserialize)]
struct DictionaryRepr {
    kind: String,
    state_dim: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    sigma: Option<f64>,
    /// Row-major centers, one row per basis function.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    centers: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    include_state: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
}

impl From<Dictionary> for DictionaryRepr {
    fn from(d: Dictionary) -> Self {
        match d {
            Dictionary::Linear { state_dim } => DictionaryRepr {
                kind: "linear".into(),
                state_dim,
                sigma: None,
                centers: None,
                include_state: None,
                seed: None,
            },
            Dictionary::GaussianRbf {
                centers,
                sigma,
                include_state,
                seed,
            } => {
                let mut flat = Vec::with_capacity(centers.len());
                for i in 0..centers.nrows() {
                    for j in 0..centers.ncols() {
                        flat.push(centers[(i, j)]);
                    }
                }
                DictionaryRepr {
                    kind: "gaussian_rbf".into(),
                    state_dim: centers.ncols(),
                    sigma: Some(sigma),
                    centers: Some(flat),
                    include_state: Some(include_state),
                    seed,
                }
            }
        }
    }
}

impl TryFrom<DictionaryRepr> for Dictionary {
    type Error = Error;

    fn try_from(r: DictionaryRepr) -> Result<Self> {
        match r.kind.as_str() {
            "linear" => Dictionary::linear(r.state_dim),
            "gaussian_rbf" => {
                let flat = r
                    .centers
                    .ok_or_else(|| Error::data("gaussian_rbf dictionary without centers"))?;
                if r.state_dim == 0 || flat.len() % r.state_dim != 0 {
                    return Err(Error::data(format!(
                        "centers array of length {} does not tile state_dim {}",
                        flat.len(),
                        r.state_dim
                    )));
                }
                let rows = flat.len() / r.state_dim;
                let centers = DMatrix::from_row_slice(rows, r.state_dim, &flat);
                let sigma = r
                    .sigma
                    .ok_or_else(|| Error::data("gaussian_rbf dictionary without sigma"))?;
                let mut dict =
                    Dictionary::gaussian_rbf(centers, sigma, r.include_state.unwrap_or(false))?;
                if let Dictionary::GaussianRbf { seed: s, .. } = &mut dict {
                    *s = r.seed;
                }
                Ok(dict)
            }
            other => Err(Error::data(format!("unknown dictionary kind '{other}'"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::Rng;

    #[test]
    fn linear_lift_is_identity() {
        let d = Dictionary::linear(2).unwrap();
        let y = d.lift(&[1.5, -2.0]).unwrap();
        assert_eq!(y.as_slice(), &[1.5, -2.0]);
    }

    #[test]
    fn rbf_at_center_is_one() {
        let centers = DMatrix::from_row_slice(1, 2, &[0.4, -0.7]);
        let d = Dictionary::gaussian_rbf(centers, 0.3, false).unwrap();
        let y = d.lift(&[0.4, -0.7]).unwrap();
        assert_relative_eq!(y[0], 1.0, epsilon = 1e-15);
    }

    #[test]
    fn rbf_kernel_value_hand_computed() {
        // exp(-0.09 / 0.09) = exp(-1)
        let centers = DMatrix::from_row_slice(1, 2, &[0.0, 0.0]);
        let d = Dictionary::gaussian_rbf(centers, 0.3, false).unwrap();
        let y = d.lift(&[0.3, 0.0]).unwrap();
        assert_relative_eq!(y[0], (-1.0_f64).exp(), epsilon = 1e-15);
        assert_relative_eq!(y[0], 0.367_879_441_171_442_33, epsilon = 1e-15);
    }

    #[test]
    fn include_state_appends_coordinates() {
        let centers = DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 1.0, 1.0]);
        let d = Dictionary::gaussian_rbf(centers, 0.5, true).unwrap();
        assert_eq!(d.feature_dim(), 4);
        let y = d.lift(&[0.25, -0.5]).unwrap();
        assert_relative_eq!(y[2], 0.25);
        assert_relative_eq!(y[3], -0.5);
    }

    #[test]
    fn lift_batch_linear_identity() {
        let d = Dictionary::linear(2).unwrap();
        let x = DMatrix::<f64>::identity(2, 2);
        let y = d.lift_batch(&x).unwrap();
        assert_eq!(y, x);
    }

    #[test]
    fn lift_batch_rbf_zero_columns() {
        let centers = DMatrix::from_row_slice(1, 2, &[0.0, 0.0]);
        let d = Dictionary::gaussian_rbf(centers, 0.3, false).unwrap();
        let x = DMatrix::<f64>::zeros(2, 2);
        let y = d.lift_batch(&x).unwrap();
        assert_eq!(y, DMatrix::from_row_slice(1, 2, &[1.0, 1.0]));
    }

    #[test]
    fn lift_dimension_mismatch() {
        let d = Dictionary::linear(2).unwrap();
        assert!(matches!(d.lift(&[1.0]), Err(Error::Contract(_))));
    }

    #[test]
    fn rbf_from_data_all_columns_is_permutation() {
        let data = DMatrix::from_row_slice(2, 3, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let d = Dictionary::rbf_from_data(&data, 3, 0.3, 9).unwrap();
        let Dictionary::GaussianRbf { centers, .. } = &d else {
            panic!("expected rbf dictionary");
        };
        let mut rows: Vec<(f64, f64)> =
            (0..3).map(|i| (centers[(i, 0)], centers[(i, 1)])).collect();
        rows.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(rows, vec![(1.0, 4.0), (2.0, 5.0), (3.0, 6.0)]);
    }

    #[test]
    fn rbf_from_data_is_deterministic() {
        let data = DMatrix::from_fn(3, 40, |i, j| (i * 40 + j) as f64 * 0.01);
        let a = Dictionary::rbf_from_data(&data, 10, 0.3, 1234).unwrap();
        let b = Dictionary::rbf_from_data(&data, 10, 0.3, 1234).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rbf_from_data_rejects_oversampling() {
        let data = DMatrix::<f64>::zeros(2, 3);
        assert!(matches!(
            Dictionary::rbf_from_data(&data, 4, 0.3, 0),
            Err(Error::Contract(_))
        ));
    }

    #[test]
    fn json_round_trip() {
        let data = DMatrix::from_fn(2, 30, |i, j| ((i + 1) * j) as f64 * 0.1);
        let d = Dictionary::rbf_from_data(&data, 5, 0.3, 7).unwrap();
        let text = d.to_json().unwrap();
        let back = Dictionary::from_json(&text).unwrap();
        assert_eq!(d, back);

        let lin = Dictionary::linear(4).unwrap();
        let back = Dictionary::from_json(&lin.to_json().unwrap()).unwrap();
        assert_eq!(lin, back);
    }

    proptest! {
        #[test]
        fn lift_batch_matches_columnwise_lift(seed in 0u64..500) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let n = rng.random_range(1..4usize);
            let m = rng.random_range(1..12usize);
            let states = DMatrix::from_fn(n, m, |_, _| rng.random_range(-2.0..2.0));
            let dict = if seed % 2 == 0 {
                Dictionary::linear(n).unwrap()
            } else {
                let centers = DMatrix::from_fn(5, n, |_, _| rng.random_range(-2.0..2.0));
                Dictionary::gaussian_rbf(centers, 0.3, seed % 3 == 1).unwrap()
            };
            let batch = dict.lift_batch(&states).unwrap();
            for c in 0..m {
                let col: Vec<f64> = (0..n).map(|r| states[(r, c)]).collect();
                let single = dict.lift(&col).unwrap();
                prop_assert_eq!(batch.column(c).clone_owned(), single);
            }
        }

        #[test]
        fn rbf_features_bounded_and_peak_at_center(x0 in -3.0f64..3.0, x1 in -3.0f64..3.0) {
            let centers = DMatrix::from_row_slice(2, 2, &[0.5, 0.5, -1.0, 2.0]);
            let d = Dictionary::gaussian_rbf(centers.clone(), 0.3, false).unwrap();
            let y = d.lift(&[x0, x1]).unwrap();
            for j in 0..2 {
                prop_assert!(y[j] > 0.0 && y[j] <= 1.0);
                let at_center = y[j] == 1.0;
                let is_center = x0 == centers[(j, 0)] && x1 == centers[(j, 1)];
                prop_assert_eq!(at_center, is_center);
            }
        }
    }
}
