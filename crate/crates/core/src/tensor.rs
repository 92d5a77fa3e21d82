//! Small dense symmetric tensors and the two-phase conductivity pair.
//!
//! Everything here is `N x N` with `N` a runtime parameter; the sizes that show
//! up in practice are 1, 2 and 3, so the algorithms favour robustness over
//! asymptotic speed (cyclic Jacobi for the eigenproblem, eigen-based inverse).

use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Off-diagonal Frobenius norm (relative to the full norm) at which Jacobi stops.
const JACOBI_TOL: f64 = 1e-14;
const JACOBI_MAX_SWEEPS: usize = 100;
/// Relative eigenvalue magnitude below which a tensor counts as singular.
const SINGULAR_RTOL: f64 = 1e-14;
/// Allowed deviation from unit length for lamination directions.
pub const UNIT_TOL: f64 = 1e-12;

/// Conductivities of the two phases: `gamma1` fills the inclusions, `gamma0`
/// is the background. Always `0 < gamma1 < gamma0 < inf`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PhasePair {
    gamma1: f64,
    gamma0: f64,
}

impl PhasePair {
    /// Background conductivity first, inclusion conductivity second.
    pub fn new(gamma0: f64, gamma1: f64) -> Result<Self> {
        let ok = gamma1.is_finite() && gamma0.is_finite() && gamma1 > 0.0 && gamma1 < gamma0;
        if !ok {
            return Err(Error::InvalidPhases { gamma1, gamma0 });
        }
        Ok(Self { gamma1, gamma0 })
    }

    pub fn gamma0(&self) -> f64 {
        self.gamma0
    }

    pub fn gamma1(&self) -> f64 {
        self.gamma1
    }

    /// `gamma0 / gamma1 > 1`.
    pub fn contrast(&self) -> f64 {
        self.gamma0 / self.gamma1
    }

    /// Conductivity at a point that is (`true`) or is not in the inclusion phase.
    pub fn conductivity(&self, inclusion: bool) -> f64 {
        if inclusion {
            self.gamma1
        } else {
            self.gamma0
        }
    }
}

impl<'de> Deserialize<'de> for PhasePair {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Raw {
            gamma0: f64,
            gamma1: f64,
        }
        let raw = Raw::deserialize(d)?;
        PhasePair::new(raw.gamma0, raw.gamma1).map_err(serde::de::Error::custom)
    }
}

/// Real symmetric `N x N` matrix, stored as its packed upper triangle.
#[derive(Clone, PartialEq)]
pub struct SymTensor {
    dim: usize,
    packed: Vec<f64>,
}

/// Eigenvalues in ascending order with the matching orthonormal eigenvectors.
#[derive(Debug, Clone)]
pub struct Eigen {
    pub values: Vec<f64>,
    /// `vectors[k]` is the unit eigenvector for `values[k]`.
    pub vectors: Vec<Vec<f64>>,
}

impl SymTensor {
    fn index(dim: usize, i: usize, j: usize) -> usize {
        let (i, j) = if i <= j { (i, j) } else { (j, i) };
        i * (2 * dim - i + 1) / 2 + (j - i)
    }

    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            packed: vec![0.0; dim * (dim + 1) / 2],
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self::scalar(dim, 1.0)
    }

    pub fn scalar(dim: usize, value: f64) -> Self {
        Self::from_fn(dim, |i, j| if i == j { value } else { 0.0 })
    }

    pub fn diag(values: &[f64]) -> Self {
        Self::from_fn(values.len(), |i, j| if i == j { values[i] } else { 0.0 })
    }

    /// Builds the tensor from the upper triangle of `f` (`f(i, j)` for `i <= j`).
    pub fn from_fn(dim: usize, f: impl Fn(usize, usize) -> f64) -> Self {
        let mut t = Self::zeros(dim);
        for i in 0..dim {
            for j in i..dim {
                t.set(i, j, f(i, j));
            }
        }
        t
    }

    /// Accepts a square matrix that is symmetric up to `1e-12` relative; the
    /// stored value is the average of the two triangles.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let (t, asymmetry) = Self::symmetrized(rows)?;
        let scale = t.max_abs().max(f64::MIN_POSITIVE);
        if asymmetry > 1e-12 * scale {
            return Err(Error::NotSymmetric { asymmetry });
        }
        Ok(t)
    }

    /// Averages `rows` with its transpose; also returns the largest `|a_ij - a_ji|`.
    pub fn symmetrized(rows: &[Vec<f64>]) -> Result<(Self, f64)> {
        let dim = rows.len();
        if dim == 0 {
            return Err(Error::UnsupportedDimension(0));
        }
        for r in rows {
            if r.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: r.len(),
                });
            }
        }
        let t = Self::from_fn(dim, |i, j| 0.5 * (rows[i][j] + rows[j][i]));
        let mut asym: f64 = 0.0;
        for i in 0..dim {
            for j in 0..i {
                asym = asym.max((rows[i][j] - rows[j][i]).abs());
            }
        }
        Ok((t, asym))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.packed[Self::index(self.dim, i, j)]
    }

    fn set(&mut self, i: usize, j: usize, v: f64) {
        let k = Self::index(self.dim, i, j);
        self.packed[k] = v;
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.dim)
            .map(|i| (0..self.dim).map(|j| self.get(i, j)).collect())
            .collect()
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim).map(|i| self.get(i, i)).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        let mut s = 0.0;
        for i in 0..self.dim {
            for j in 0..self.dim {
                s += self.get(i, j).powi(2);
            }
        }
        s.sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.packed.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            dim: self.dim,
            packed: self.packed.iter().map(|v| v * s).collect(),
        }
    }

    fn check_dim(&self, other: &Self) -> Result<()> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: other.dim,
            });
        }
        Ok(())
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_dim(other)?;
        Ok(Self {
            dim: self.dim,
            packed: self.packed.iter().zip(&other.packed).map(|(a, b)| a + b).collect(),
        })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.add(&other.scale(-1.0))
    }

    /// `self + s I`.
    pub fn shift(&self, s: f64) -> Self {
        let mut t = self.clone();
        for i in 0..self.dim {
            let v = t.get(i, i) + s;
            t.set(i, i, v);
        }
        t
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        (0..self.dim)
            .map(|i| (0..self.dim).map(|j| self.get(i, j) * v[j]).sum())
            .collect()
    }

    /// `xi . T xi`.
    pub fn quadratic_form(&self, xi: &[f64]) -> f64 {
        self.mul_vec(xi).iter().zip(xi).map(|(a, b)| a * b).sum()
    }

    /// Dense product `self * other` (not symmetric in general).
    pub fn matmul(&self, other: &Self) -> Result<Vec<Vec<f64>>> {
        self.check_dim(other)?;
        let n = self.dim;
        Ok((0..n)
            .map(|i| {
                (0..n)
                    .map(|j| (0..n).map(|k| self.get(i, k) * other.get(k, j)).sum())
                    .collect()
            })
            .collect())
    }

    /// Frobenius distance between two tensors of equal dimension.
    pub fn distance(&self, other: &Self) -> Result<f64> {
        Ok(self.sub(other)?.frobenius_norm())
    }

    /// Cyclic Jacobi eigendecomposition. Eigenvalues ascending, ties kept in
    /// the order of the diagonal positions they converged on.
    pub fn eigendecompose(&self) -> Result<Eigen> {
        let n = self.dim;
        let mut a = self.to_rows();
        let mut v: Vec<Vec<f64>> = (0..n)
            .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
            .collect();
        let total = self.frobenius_norm();
        let mut converged = false;
        for _ in 0..JACOBI_MAX_SWEEPS {
            let off: f64 = (0..n)
                .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
                .map(|(i, j)| a[i][j] * a[i][j])
                .sum::<f64>()
                .sqrt();
            if off <= JACOBI_TOL * total {
                converged = true;
                break;
            }
            for p in 0..n {
                for q in (p + 1)..n {
                    if a[p][q] == 0.0 {
                        continue;
                    }
                    let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                    let c = 1.0 / (t * t + 1.0).sqrt();
                    let s = t * c;
                    for k in 0..n {
                        let akp = a[k][p];
                        let akq = a[k][q];
                        a[k][p] = c * akp - s * akq;
                        a[k][q] = s * akp + c * akq;
                    }
                    for k in 0..n {
                        let apk = a[p][k];
                        let aqk = a[q][k];
                        a[p][k] = c * apk - s * aqk;
                        a[q][k] = s * apk + c * aqk;
                    }
                    for row in v.iter_mut() {
                        let vp = row[p];
                        let vq = row[q];
                        row[p] = c * vp - s * vq;
                        row[q] = s * vp + c * vq;
                    }
                }
            }
        }
        if !converged {
            return Err(Error::EigenNoConvergence {
                sweeps: JACOBI_MAX_SWEEPS,
            });
        }
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&x, &y| a[x][x].total_cmp(&a[y][y]));
        Ok(Eigen {
            values: order.iter().map(|&k| a[k][k]).collect(),
            vectors: order
                .iter()
                .map(|&k| (0..n).map(|i| v[i][k]).collect())
                .collect(),
        })
    }

    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        Ok(self.eigendecompose()?.values)
    }

    /// `sum_k values[k] v_k (x) v_k`.
    pub fn from_eigen(values: &[f64], vectors: &[Vec<f64>]) -> Self {
        let dim = values.len();
        Self::from_fn(dim, |i, j| {
            values
                .iter()
                .zip(vectors)
                .map(|(l, v)| l * v[i] * v[j])
                .sum()
        })
    }

    pub fn invert(&self) -> Result<Self> {
        let eig = self.eigendecompose()?;
        let max_abs = eig.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        let min_abs = eig.values.iter().fold(f64::INFINITY, |m, v| m.min(v.abs()));
        if max_abs == 0.0 || min_abs <= SINGULAR_RTOL * max_abs {
            return Err(Error::SingularTensor { min_abs, max_abs });
        }
        let recip: Vec<f64> = eig.values.iter().map(|l| 1.0 / l).collect();
        Ok(Self::from_eigen(&recip, &eig.vectors))
    }

    pub fn is_positive_definite(&self) -> bool {
        match self.eigendecompose() {
            Ok(e) => e.values[0] > 0.0,
            Err(_) => false,
        }
    }

    /// `sum_i weights[i] e_i (x) e_i`; every direction must be a unit vector.
    pub fn rank_one_sum(dim: usize, directions: &[Vec<f64>], weights: &[f64]) -> Result<Self> {
        if directions.len() != weights.len() {
            return Err(Error::DimensionMismatch {
                expected: directions.len(),
                got: weights.len(),
            });
        }
        for (index, e) in directions.iter().enumerate() {
            if e.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: e.len(),
                });
            }
            let norm = e.iter().map(|x| x * x).sum::<f64>().sqrt();
            if (norm - 1.0).abs() > UNIT_TOL {
                return Err(Error::NonUnitDirection { index, norm });
            }
        }
        Ok(Self::from_fn(dim, |i, j| {
            directions
                .iter()
                .zip(weights)
                .map(|(e, c)| c * e[i] * e[j])
                .sum()
        }))
    }
}

impl fmt::Debug for SymTensor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "SymTensor{:?}", self.to_rows())
    }
}

#[derive(Serialize, Deserialize)]
struct RawTensor {
    dim: usize,
    matrix: Vec<Vec<f64>>,
}

impl Serialize for SymTensor {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        RawTensor {
            dim: self.dim,
            matrix: self.to_rows(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for SymTensor {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = RawTensor::deserialize(d)?;
        if raw.matrix.len() != raw.dim {
            return Err(serde::de::Error::custom(format!(
                "dim {} does not match {} matrix rows",
                raw.dim,
                raw.matrix.len()
            )));
        }
        SymTensor::from_rows(&raw.matrix).map_err(serde::de::Error::custom)
    }
}
