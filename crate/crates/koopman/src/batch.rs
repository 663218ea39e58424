//! Batch Koopman estimators.
//!
//! `edmd_fit` solves min_K ‖K Y_p − Y_f‖_F through the pseudo-inverse,
//! `K = Y_f Y_p†`. `ridge_fit` solves the Tikhonov-regularized variant
//! `K = Y_f Y_pᵀ (δI + Y_p Y_pᵀ)⁻¹`, which is exactly what the streaming
//! engine converges to and therefore serves as its equivalence oracle.
//! `dmd_fit` is EDMD with the identity dictionary.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::dictionary::Dictionary;
use crate::error::{Error, Result};
use crate::numlin::{self, ensure_finite};
use crate::repr::MatrixRepr;

/// Paired snapshot matrices: column i of `x_f` is the image of column i of
/// `x_p` under the (unknown) dynamics.
#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotPairs {
    x_p: DMatrix<f64>,
    x_f: DMatrix<f64>,
}

impl SnapshotPairs {
    pub fn new(x_p: DMatrix<f64>, x_f: DMatrix<f64>) -> Result<Self> {
        if x_p.shape() != x_f.shape() {
            return Err(Error::contract(format!(
                "snapshot pairs must have identical shape, got {:?} and {:?}",
                x_p.shape(),
                x_f.shape()
            )));
        }
        if x_p.nrows() == 0 || x_p.ncols() == 0 {
            return Err(Error::contract("snapshot pairs must be non-empty"));
        }
        ensure_finite(&x_p, "X_p")?;
        ensure_finite(&x_f, "X_f")?;
        Ok(SnapshotPairs { x_p, x_f })
    }

    /// Splits a single trajectory (states as columns) into consecutive
    /// snapshot pairs: x_i = column i, y_i = column i+1.
    pub fn from_trajectory(states: &DMatrix<f64>) -> Result<Self> {
        if states.ncols() < 2 {
            return Err(Error::contract(
                "a trajectory needs at least two states to form pairs",
            ));
        }
        let m = states.ncols() - 1;
        let x_p = states.columns(0, m).clone_owned();
        let x_f = states.columns(1, m).clone_owned();
        Self::new(x_p, x_f)
    }

    pub fn state_dim(&self) -> usize {
        self.x_p.nrows()
    }

    pub fn sample_count(&self) -> usize {
        self.x_p.ncols()
    }

    pub fn x_p(&self) -> &DMatrix<f64> {
        &self.x_p
    }

    pub fn x_f(&self) -> &DMatrix<f64> {
        &self.x_f
    }

    /// The first `m` pairs.
    pub fn truncated(&self, m: usize) -> Result<Self> {
        if m == 0 || m > self.sample_count() {
            return Err(Error::contract(format!(
                "cannot truncate {} pairs to {m}",
                self.sample_count()
            )));
        }
        Ok(SnapshotPairs {
            x_p: self.x_p.columns(0, m).clone_owned(),
            x_f: self.x_f.columns(0, m).clone_owned(),
        })
    }

    /// States x_1..x_m plus y_m: the N×(m+1) matrix a predictor is fit on
    /// after absorbing m pairs.
    pub fn predictor_states(&self, m: usize) -> Result<DMatrix<f64>> {
        if m == 0 || m > self.sample_count() {
            return Err(Error::contract(format!(
                "predictor_states: m={m} out of range 1..={}",
                self.sample_count()
            )));
        }
        let n = self.state_dim();
        let mut out = DMatrix::zeros(n, m + 1);
        out.columns_mut(0, m).copy_from(&self.x_p.columns(0, m));
        out.set_column(m, &self.x_f.column(m - 1));
        Ok(out)
    }

    /// Writes the CSV form: header `x1..xN,y1..yN`, one row per pair,
    /// values formatted with 17 significant digits so the round-trip is
    /// bit-exact.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let n = self.state_dim();
        let mut header = String::new();
        for i in 1..=n {
            header.push_str(&format!("x{i},"));
        }
        for i in 1..=n {
            header.push_str(&format!("y{i}"));
            if i < n {
                header.push(',');
            }
        }
        writeln!(w, "{header}")?;
        for s in 0..self.sample_count() {
            let mut row = String::new();
            for i in 0..n {
                row.push_str(&format!("{:.16e},", self.x_p[(i, s)]));
            }
            for i in 0..n {
                row.push_str(&format!("{:.16e}", self.x_f[(i, s)]));
                if i + 1 < n {
                    row.push(',');
                }
            }
            writeln!(w, "{row}")?;
        }
        Ok(())
    }

    /// Parses the CSV form; the state dimension is inferred from the header.
    pub fn read_csv<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines();
        let header = match lines.next() {
            Some(line) => line?,
            None => {
                return Err(Error::Parse {
                    line: 1,
                    detail: "empty file, expected header x1..xN,y1..yN".into(),
                })
            }
        };
        let fields: Vec<&str> = header.trim_end().split(',').collect();
        if fields.len() < 2 || fields.len() % 2 != 0 {
            return Err(Error::Parse {
                line: 1,
                detail: format!("header must hold x1..xN,y1..yN, got {} fields", fields.len()),
            });
        }
        let n = fields.len() / 2;
        for (i, f) in fields.iter().enumerate() {
            let expect = if i < n {
                format!("x{}", i + 1)
            } else {
                format!("y{}", i + 1 - n)
            };
            if *f != expect {
                return Err(Error::Parse {
                    line: 1,
                    detail: format!("header field {} is '{f}', expected '{expect}'", i + 1),
                });
            }
        }

        let mut xs: Vec<f64> = Vec::new();
        let mut ys: Vec<f64> = Vec::new();
        let mut samples = 0usize;
        for (idx, line) in lines.enumerate() {
            let line_no = idx + 2;
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let cells: Vec<&str> = line.trim_end().split(',').collect();
            if cells.len() != 2 * n {
                return Err(Error::Parse {
                    line: line_no,
                    detail: format!("expected {} cells, got {}", 2 * n, cells.len()),
                });
            }
            for (c, cell) in cells.iter().enumerate() {
                let v: f64 = cell.trim().parse().map_err(|_| Error::Parse {
                    line: line_no,
                    detail: format!("cell {} ('{cell}') is not a number", c + 1),
                })?;
                if !v.is_finite() {
                    return Err(Error::Parse {
                        line: line_no,
                        detail: format!("cell {} is not finite", c + 1),
                    });
                }
                if c < n {
                    xs.push(v);
                } else {
                    ys.push(v);
                }
            }
            samples += 1;
        }
        if samples == 0 {
            return Err(Error::Parse {
                line: 1,
                detail: "no samples after header".into(),
            });
        }
        // Rows were read sample-major; transpose into column-per-sample.
        let x_p = DMatrix::from_row_slice(samples, n, &xs).transpose();
        let x_f = DMatrix::from_row_slice(samples, n, &ys).transpose();
        SnapshotPairs::new(x_p, x_f)
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let f = File::create(path)?;
        self.write_csv(BufWriter::new(f))
    }

    pub fn load_csv(path: impl AsRef<Path>) -> Result<Self> {
        let f = File::open(path)?;
        Self::read_csv(BufReader::new(f))
    }
}

/// A finite-dimensional Koopman approximation: the operator matrix on the
/// span of a dictionary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "KoopmanModelRepr", into = "KoopmanModelRepr")]
pub struct KoopmanModel {
    k: DMatrix<f64>,
    dictionary: Dictionary,
    sample_count: usize,
    /// Tikhonov δ the operator was computed with; 0 for pure pseudo-inverse.
    regularization: f64,
}

impl KoopmanModel {
    pub(crate) fn new(
        k: DMatrix<f64>,
        dictionary: Dictionary,
        sample_count: usize,
        regularization: f64,
    ) -> Self {
        debug_assert_eq!(k.nrows(), k.ncols());
        debug_assert_eq!(k.nrows(), dictionary.feature_dim());
        KoopmanModel {
            k,
            dictionary,
            sample_count,
            regularization,
        }
    }

    pub fn operator(&self) -> &DMatrix<f64> {
        &self.k
    }

    pub fn dictionary(&self) -> &Dictionary {
        &self.dictionary
    }

    pub fn feature_dim(&self) -> usize {
        self.k.nrows()
    }

    pub fn sample_count(&self) -> usize {
        self.sample_count
    }

    pub fn regularization(&self) -> f64 {
        self.regularization
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self)
            .map_err(|e| Error::data(format!("model serialization failed: {e}")))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::data(format!("bad model JSON: {e}")))
    }

    pub fn save_json(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut f = BufWriter::new(File::create(path)?);
        f.write_all(self.to_json()?.as_bytes())?;
        f.write_all(b"\n")?;
        Ok(())
    }

    pub fn load_json(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

#[derive(Serialize, Deserialize)]
struct KoopmanModelRepr {
    k: MatrixRepr,
    dictionary: Dictionary,
    sample_count: usize,
    regularization: f64,
}

impl From<KoopmanModel> for KoopmanModelRepr {
    fn from(m: KoopmanModel) -> Self {
        KoopmanModelRepr {
            k: MatrixRepr::from_matrix(&m.k),
            dictionary: m.dictionary,
            sample_count: m.sample_count,
            regularization: m.regularization,
        }
    }
}

impl TryFrom<KoopmanModelRepr> for KoopmanModel {
    type Error = Error;

    fn try_from(r: KoopmanModelRepr) -> Result<Self> {
        let k = r.k.into_matrix()?;
        if k.nrows() != k.ncols() || k.nrows() != r.dictionary.feature_dim() {
            return Err(Error::data(format!(
                "operator is {}x{} but dictionary has {} features",
                k.nrows(),
                k.ncols(),
                r.dictionary.feature_dim()
            )));
        }
        Ok(KoopmanModel {
            k,
            dictionary: r.dictionary,
            sample_count: r.sample_count,
            regularization: r.regularization,
        })
    }
}

fn lifted_pair(data: &SnapshotPairs, dictionary: &Dictionary) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    if data.state_dim() != dictionary.state_dim() {
        return Err(Error::contract(format!(
            "data has state dimension {} but dictionary expects {}",
            data.state_dim(),
            dictionary.state_dim()
        )));
    }
    Ok((
        dictionary.lift_batch(data.x_p())?,
        dictionary.lift_batch(data.x_f())?,
    ))
}

/// EDMD: `K = Y_f Y_p†` with singular values below `rcond * σ_max` dropped.
pub fn edmd_fit(data: &SnapshotPairs, dictionary: &Dictionary, rcond: f64) -> Result<KoopmanModel> {
    let (y_p, y_f) = lifted_pair(data, dictionary)?;
    let k = y_f * numlin::pinv(&y_p, rcond)?;
    Ok(KoopmanModel::new(
        k,
        dictionary.clone(),
        data.sample_count(),
        0.0,
    ))
}

/// Tikhonov-regularized batch estimator `K = Y_f Y_pᵀ (δI + Y_p Y_pᵀ)⁻¹`,
/// computed through a symmetric positive-definite factorization.
pub fn ridge_fit(data: &SnapshotPairs, dictionary: &Dictionary, delta: f64) -> Result<KoopmanModel> {
    if !(delta > 0.0) {
        return Err(Error::contract("ridge_fit: delta must be > 0"));
    }
    let (y_p, y_f) = lifted_pair(data, dictionary)?;
    let kdim = dictionary.feature_dim();
    let mut gram = &y_p * y_p.transpose();
    for i in 0..kdim {
        gram[(i, i)] += delta;
    }
    let chol = nalgebra::linalg::Cholesky::new(gram).ok_or_else(|| {
        Error::numerical("ridge normal matrix is not positive definite".to_string())
    })?;
    let z = y_f * y_p.transpose();
    // K (δI + G) = Z  ⇒  Kᵀ solves (δI + G) Kᵀ = Zᵀ since the matrix is symmetric.
    let k = chol.solve(&z.transpose()).transpose();
    Ok(KoopmanModel::new(
        k,
        dictionary.clone(),
        data.sample_count(),
        delta,
    ))
}

/// DMD: EDMD with the identity dictionary.
pub fn dmd_fit(data: &SnapshotPairs, rcond: f64) -> Result<KoopmanModel> {
    let dictionary = Dictionary::linear(data.state_dim())?;
    edmd_fit(data, &dictionary, rcond)
}
