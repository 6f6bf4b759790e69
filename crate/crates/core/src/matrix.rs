//! Small dense real square matrices.
//!
//! Row index is the upper index of a frame matrix: entry `(j, i)` of `Q`
//! holds `Q^j_i`, so column `i` lists the coordinates of the `i`-th frame
//! vector in the reference frame.
//!
//! Only what the flow needs lives here: products, an inverse with a relative
//! pivot test, the triangular-times-orthogonal factorization `Q = B·U`, and a
//! cyclic Jacobi eigensolver for symmetric matrices.

use std::fmt;
use std::ops::{Add, Index, IndexMut, Mul, Sub};

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Default relative pivot threshold used by [`SquareMatrix::inverse`].
pub const DEFAULT_SINGULAR_TOL: f64 = 1e-12;

const JACOBI_OFF_TOL: f64 = 1e-12;
const JACOBI_MAX_SWEEPS: usize = 100;
const SYMMETRY_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MatrixError {
    #[error("matrix is singular (pivot {pivot:e} below threshold {threshold:e})")]
    Singular { pivot: f64, threshold: f64 },
    #[error("matrix is not symmetric (asymmetry {0:e})")]
    NotSymmetric(f64),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("matrix entry ({row}, {col}) is not finite")]
    NonFinite { row: usize, col: usize },
    #[error("matrix must have at least one row")]
    Empty,
}

/// Dense `n × n` matrix in row-major order.
#[derive(Clone, PartialEq)]
pub struct SquareMatrix {
    n: usize,
    data: Vec<f64>,
}

impl fmt::Debug for SquareMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.rows()).finish()
    }
}

impl SquareMatrix {
    /// Builds a matrix from row-major data, rejecting NaN and infinities.
    pub fn new(n: usize, data: Vec<f64>) -> Result<Self, MatrixError> {
        if n == 0 {
            return Err(MatrixError::Empty);
        }
        if data.len() != n * n {
            return Err(MatrixError::DimensionMismatch {
                expected: n * n,
                got: data.len(),
            });
        }
        if let Some(pos) = data.iter().position(|x| !x.is_finite()) {
            return Err(MatrixError::NonFinite {
                row: pos / n,
                col: pos % n,
            });
        }
        Ok(Self { n, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, MatrixError> {
        let n = rows.len();
        let mut data = Vec::with_capacity(n * n);
        for row in rows {
            if row.len() != n {
                return Err(MatrixError::DimensionMismatch {
                    expected: n,
                    got: row.len(),
                });
            }
            data.extend_from_slice(row);
        }
        Self::new(n, data)
    }

    pub fn zeros(n: usize) -> Self {
        assert!(n > 0, "dimension must be positive");
        Self {
            n,
            data: vec![0.0; n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_diag(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = d;
        }
        m
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.data.chunks(self.n).map(<[f64]>::to_vec).collect()
    }

    pub fn diag(&self) -> Vec<f64> {
        (0..self.n).map(|i| self[(i, i)]).collect()
    }

    pub fn transpose(&self) -> Self {
        let n = self.n;
        let mut t = Self::zeros(n);
        for i in 0..n {
            for j in 0..n {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            n: self.n,
            data: self.data.iter().map(|x| x * s).collect(),
        }
    }

    /// `self + s·other`, the basic update of the Runge-Kutta stages.
    pub fn add_scaled(&self, s: f64, other: &Self) -> Self {
        assert_eq!(self.n, other.n, "dimension mismatch");
        Self {
            n: self.n,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a + s * b)
                .collect(),
        }
    }

    pub fn trace(&self) -> f64 {
        (0..self.n).map(|i| self[(i, i)]).sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!(self.n, other.n, "dimension mismatch");
        self.data
            .iter()
            .zip(&other.data)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    /// Largest `|m_ij − m_ji|`.
    pub fn asymmetry(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.n {
            for j in i + 1..self.n {
                worst = worst.max((self[(i, j)] - self[(j, i)]).abs());
            }
        }
        worst
    }

    /// `(m + mᵀ)/2`.
    pub fn symmetric_part(&self) -> Self {
        let mut s = self.clone();
        for i in 0..self.n {
            for j in i + 1..self.n {
                let v = 0.5 * (self[(i, j)] + self[(j, i)]);
                s[(i, j)] = v;
                s[(j, i)] = v;
            }
        }
        s
    }

    /// Largest off-diagonal magnitude.
    pub fn max_off_diag(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.n {
            for j in 0..self.n {
                if i != j {
                    worst = worst.max(self[(i, j)].abs());
                }
            }
        }
        worst
    }

    /// Largest strictly-lower magnitude; zero means upper triangular.
    pub fn max_strict_lower(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.n {
            for j in 0..i {
                worst = worst.max(self[(i, j)].abs());
            }
        }
        worst
    }

    pub fn is_upper_triangular(&self) -> bool {
        self.max_strict_lower() == 0.0
    }

    /// Sets every strictly-lower entry to exactly zero.
    pub fn zero_strict_lower(&mut self) {
        for i in 0..self.n {
            for j in 0..i {
                self[(i, j)] = 0.0;
            }
        }
    }

    /// `‖mᵀm − I‖_max`.
    pub fn orthogonality_defect(&self) -> f64 {
        (&self.transpose() * self).max_abs_diff(&Self::identity(self.n))
    }

    /// Determinant by partial-pivot elimination.
    pub fn det(&self) -> f64 {
        let n = self.n;
        let mut a = self.data.clone();
        let mut det = 1.0;
        for col in 0..n {
            let piv = (col..n)
                .max_by(|&x, &y| a[x * n + col].abs().total_cmp(&a[y * n + col].abs()))
                .unwrap();
            if a[piv * n + col] == 0.0 {
                return 0.0;
            }
            if piv != col {
                for k in 0..n {
                    a.swap(col * n + k, piv * n + k);
                }
                det = -det;
            }
            let p = a[col * n + col];
            det *= p;
            for r in col + 1..n {
                let factor = a[r * n + col] / p;
                for k in col..n {
                    a[r * n + k] -= factor * a[col * n + k];
                }
            }
        }
        det
    }

    /// Inverse with the default relative singularity threshold.
    pub fn inverse(&self) -> Result<Self, MatrixError> {
        self.inverse_with_tol(DEFAULT_SINGULAR_TOL)
    }

    /// Gauss-Jordan inverse with partial pivoting.
    ///
    /// A pivot smaller than `rel_tol · max|m_ij|` is reported as
    /// [`MatrixError::Singular`].
    pub fn inverse_with_tol(&self, rel_tol: f64) -> Result<Self, MatrixError> {
        let n = self.n;
        let threshold = rel_tol * self.max_abs();
        let mut a = self.data.clone();
        let mut inv = Self::identity(n).data;
        for col in 0..n {
            let piv = (col..n)
                .max_by(|&x, &y| a[x * n + col].abs().total_cmp(&a[y * n + col].abs()))
                .unwrap();
            let pivot = a[piv * n + col];
            if !(pivot.abs() > threshold) {
                return Err(MatrixError::Singular {
                    pivot: pivot.abs(),
                    threshold,
                });
            }
            if piv != col {
                for k in 0..n {
                    a.swap(col * n + k, piv * n + k);
                    inv.swap(col * n + k, piv * n + k);
                }
            }
            let p = a[col * n + col];
            for k in 0..n {
                a[col * n + k] /= p;
                inv[col * n + k] /= p;
            }
            for r in 0..n {
                if r == col {
                    continue;
                }
                let factor = a[r * n + col];
                if factor == 0.0 {
                    continue;
                }
                for k in 0..n {
                    a[r * n + k] -= factor * a[col * n + k];
                    inv[r * n + k] -= factor * inv[col * n + k];
                }
            }
        }
        Ok(Self { n, data: inv })
    }
}

impl Index<(usize, usize)> for SquareMatrix {
    type Output = f64;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.n + j]
    }
}

impl IndexMut<(usize, usize)> for SquareMatrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.n + j]
    }
}

impl Mul for &SquareMatrix {
    type Output = SquareMatrix;

    fn mul(self, rhs: &SquareMatrix) -> SquareMatrix {
        assert_eq!(self.n, rhs.n, "dimension mismatch");
        let n = self.n;
        let mut out = SquareMatrix::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                for j in 0..n {
                    out[(i, j)] += a * rhs[(k, j)];
                }
            }
        }
        out
    }
}

impl Add for &SquareMatrix {
    type Output = SquareMatrix;

    fn add(self, rhs: &SquareMatrix) -> SquareMatrix {
        self.add_scaled(1.0, rhs)
    }
}

impl Sub for &SquareMatrix {
    type Output = SquareMatrix;

    fn sub(self, rhs: &SquareMatrix) -> SquareMatrix {
        self.add_scaled(-1.0, rhs)
    }
}

impl Serialize for SquareMatrix {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        self.rows().serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for SquareMatrix {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let rows = Vec::<Vec<f64>>::deserialize(deserializer)?;
        SquareMatrix::from_rows(&rows).map_err(D::Error::custom)
    }
}

/// `Q = B·U` with `B` upper triangular (positive diagonal) and `U` orthogonal.
#[derive(Debug, Clone, PartialEq)]
pub struct TriOrthFactors {
    pub b: SquareMatrix,
    pub u: SquareMatrix,
}

/// Factors `q = b·u` with the triangular factor on the left.
///
/// Row `i` of `q` is `Σ_{j≥i} b_ij u_j`, so the rows of `u` come out of
/// Gram-Schmidt run from the last row upward. Each row is orthogonalized
/// twice against the rows already produced; that keeps `uᵀu` at roundoff
/// level even for mildly ill-conditioned `q`.
pub fn factor_tri_orth(q: &SquareMatrix) -> Result<TriOrthFactors, MatrixError> {
    let n = q.dim();
    let threshold = DEFAULT_SINGULAR_TOL * q.max_abs();
    let mut b = SquareMatrix::zeros(n);
    let mut u = SquareMatrix::zeros(n);
    for i in (0..n).rev() {
        let mut v: Vec<f64> = (0..n).map(|k| q[(i, k)]).collect();
        for _pass in 0..2 {
            for j in i + 1..n {
                let proj: f64 = (0..n).map(|k| v[k] * u[(j, k)]).sum();
                b[(i, j)] += proj;
                for k in 0..n {
                    v[k] -= proj * u[(j, k)];
                }
            }
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if !(norm > threshold) {
            return Err(MatrixError::Singular {
                pivot: norm,
                threshold,
            });
        }
        b[(i, i)] = norm;
        for k in 0..n {
            u[(i, k)] = v[k] / norm;
        }
    }
    Ok(TriOrthFactors { b, u })
}

/// Eigenvalues (descending) and the orthogonal matrix whose columns are the
/// matching eigenvectors, so that `rotationᵀ·s·rotation` is diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricEigen {
    pub values: Vec<f64>,
    pub rotation: SquareMatrix,
}

/// Cyclic Jacobi eigensolver.
pub fn symmetric_eigen(s: &SquareMatrix) -> Result<SymmetricEigen, MatrixError> {
    let asym = s.asymmetry();
    if asym > SYMMETRY_TOL {
        return Err(MatrixError::NotSymmetric(asym));
    }
    let n = s.dim();
    let mut a = s.symmetric_part();
    let mut v = SquareMatrix::identity(n);

    for _sweep in 0..JACOBI_MAX_SWEEPS {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[(i, j)] * a[(i, j)])
            .sum::<f64>()
            .sqrt();
        if off <= JACOBI_OFF_TOL * a.max_abs().max(1.0) {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                // rotation angle that annihilates a[p][q]
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let sn = t * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - sn * akq;
                    a[(k, q)] = sn * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - sn * aqk;
                    a[(q, k)] = sn * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - sn * vkq;
                    v[(k, q)] = sn * vkp + c * vkq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| a[(y, y)].total_cmp(&a[(x, x)]));
    let values = order.iter().map(|&i| a[(i, i)]).collect();
    let mut rotation = SquareMatrix::zeros(n);
    for (dst, &src) in order.iter().enumerate() {
        for k in 0..n {
            rotation[(k, dst)] = v[(k, src)];
        }
    }
    Ok(SymmetricEigen { values, rotation })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(rows: &[&[f64]]) -> SquareMatrix {
        SquareMatrix::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn rejects_non_finite_entries() {
        let err = SquareMatrix::new(2, vec![1.0, f64::NAN, 0.0, 1.0]).unwrap_err();
        assert_eq!(err, MatrixError::NonFinite { row: 0, col: 1 });
        assert!(SquareMatrix::new(2, vec![1.0; 3]).is_err());
    }

    #[test]
    fn inverse_of_identity_and_diagonal() {
        assert_eq!(SquareMatrix::identity(3).inverse().unwrap(), SquareMatrix::identity(3));
        let inv = SquareMatrix::from_diag(&[2.0, 4.0]).inverse().unwrap();
        assert_eq!(inv, SquareMatrix::from_diag(&[0.5, 0.25]));
    }

    #[test]
    fn inverse_residual_on_fixed_matrix() {
        let a = m(&[&[4.0, -2.0, 1.0], &[3.0, 6.0, -4.0], &[2.0, 1.0, 8.0]]);
        let b = a.inverse().unwrap();
        assert!((&a * &b).max_abs_diff(&SquareMatrix::identity(3)) <= 1e-10);
    }

    #[test]
    fn singular_matrix_is_reported() {
        let a = m(&[&[1.0, 2.0], &[2.0, 4.0]]);
        assert!(matches!(a.inverse(), Err(MatrixError::Singular { .. })));
        assert!(matches!(factor_tri_orth(&a), Err(MatrixError::Singular { .. })));
        // threshold is relative to the entry scale
        let tiny = SquareMatrix::from_diag(&[1e-20, 1e-20]);
        assert!(tiny.inverse().is_ok());
        let lopsided = SquareMatrix::from_diag(&[1.0, 1e-13]);
        assert!(lopsided.inverse().is_err());
        assert!(lopsided.inverse_with_tol(1e-15).is_ok());
    }

    #[test]
    fn determinant() {
        let a = m(&[&[0.0, 1.0], &[1.0, 0.0]]);
        assert_eq!(a.det(), -1.0);
        assert_eq!(SquareMatrix::from_diag(&[2.0, 3.0, 4.0]).det(), 24.0);
    }

    #[test]
    fn factor_identity_and_triangular() {
        let f = factor_tri_orth(&SquareMatrix::identity(3)).unwrap();
        assert_eq!(f.b, SquareMatrix::identity(3));
        assert_eq!(f.u, SquareMatrix::identity(3));

        let f = factor_tri_orth(&SquareMatrix::from_diag(&[2.0, 3.0])).unwrap();
        assert_eq!(f.b, SquareMatrix::from_diag(&[2.0, 3.0]));
        assert_eq!(f.u, SquareMatrix::identity(2));
    }

    #[test]
    fn factor_flips_negative_diagonal_into_u() {
        let q = m(&[&[-1.0, 2.0], &[0.0, -3.0]]);
        let f = factor_tri_orth(&q).unwrap();
        assert!(f.b[(0, 0)] > 0.0 && f.b[(1, 1)] > 0.0);
        assert_eq!(f.b[(1, 0)], 0.0);
        assert!((&f.b * &f.u).max_abs_diff(&q) <= 1e-14);
        assert!(f.u.orthogonality_defect() <= 1e-14);
    }

    #[test]
    fn eigen_of_diagonal_is_trivial() {
        let e = symmetric_eigen(&SquareMatrix::from_diag(&[3.0, 1.0])).unwrap();
        assert_eq!(e.values, vec![3.0, 1.0]);
        assert_eq!(e.rotation, SquareMatrix::identity(2));
    }

    #[test]
    fn eigen_of_swap_matrix() {
        let e = symmetric_eigen(&m(&[&[0.0, 1.0], &[1.0, 0.0]])).unwrap();
        assert!((e.values[0] - 1.0).abs() <= 1e-14);
        assert!((e.values[1] + 1.0).abs() <= 1e-14);
        assert!(e.rotation.orthogonality_defect() <= 1e-14);
    }

    #[test]
    fn eigen_rejects_asymmetric_input() {
        let err = symmetric_eigen(&m(&[&[1.0, 1.0], &[0.0, 1.0]])).unwrap_err();
        assert!(matches!(err, MatrixError::NotSymmetric(_)));
    }

    #[test]
    fn json_is_nested_rows() {
        let a = m(&[&[1.0, 2.0], &[3.0, 4.5]]);
        let s = serde_json::to_string(&a).unwrap();
        assert_eq!(s, "[[1.0,2.0],[3.0,4.5]]");
        let back: SquareMatrix = serde_json::from_str(&s).unwrap();
        assert_eq!(back, a);
        assert!(serde_json::from_str::<SquareMatrix>("[[1.0,2.0],[3.0]]").is_err());
    }
}
