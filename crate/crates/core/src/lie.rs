//! Lie algebras given by structure constants in a fixed frame.
//!
//! `c^k_ij` is stored with `k` outermost. Only `i < j` is ever written by
//! callers; the mirrored `j > i` entry is set to the exact negative, so
//! antisymmetry holds bit for bit.

use std::fmt;

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::matrix::{MatrixError, SquareMatrix};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LieError {
    #[error("unknown preset `{0}` (expected one of: {list})", list = PRESET_NAMES.join(", "))]
    UnknownPreset(String),
    #[error("dimension mismatch: algebra has dimension {algebra}, matrix has {matrix}")]
    DimensionMismatch { algebra: usize, matrix: usize },
    #[error("invalid structure-constant entry: {0}")]
    InvalidEntry(String),
    #[error("constants are not a three-dimensional unimodular algebra (defect {0:e})")]
    NotUnimodular3(f64),
    #[error(transparent)]
    Matrix(#[from] MatrixError),
}

/// Names accepted by [`preset`].
pub const PRESET_NAMES: [&str; 6] = ["so3", "heisenberg", "e2", "e11", "sl2r", "abelian"];

/// `[E_i, E_j] = c^k_ij E_k`.
#[derive(Clone, PartialEq)]
pub struct StructureConstants {
    dim: usize,
    c: Vec<f64>,
}

impl fmt::Debug for StructureConstants {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut list = f.debug_list();
        for (k, i, j, v) in self.upper_entries() {
            if v != 0.0 {
                list.entry(&format_args!("C^{}_{}{} = {}", k + 1, i + 1, j + 1, v));
            }
        }
        list.finish()
    }
}

impl StructureConstants {
    /// The abelian algebra of dimension `dim`.
    pub fn zeros(dim: usize) -> Self {
        assert!(dim > 0, "dimension must be positive");
        Self {
            dim,
            c: vec![0.0; dim * dim * dim],
        }
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    fn idx(&self, k: usize, i: usize, j: usize) -> usize {
        (k * self.dim + i) * self.dim + j
    }

    /// `c^k_ij`.
    #[inline]
    pub fn get(&self, k: usize, i: usize, j: usize) -> f64 {
        self.c[self.idx(k, i, j)]
    }

    /// Sets `c^k_ij = value` and `c^k_ji = −value`.
    ///
    /// # Panics
    /// If `i == j`; the diagonal is identically zero.
    pub fn set(&mut self, k: usize, i: usize, j: usize, value: f64) {
        assert_ne!(i, j, "c^k_ii is zero by antisymmetry");
        let a = self.idx(k, i, j);
        let b = self.idx(k, j, i);
        self.c[a] = value;
        self.c[b] = -value;
    }

    /// Builder-style [`set`](Self::set).
    pub fn with(mut self, k: usize, i: usize, j: usize, value: f64) -> Self {
        self.set(k, i, j, value);
        self
    }

    /// All `(k, i, j, c^k_ij)` with `i < j`.
    pub fn upper_entries(&self) -> impl Iterator<Item = (usize, usize, usize, f64)> + '_ {
        let n = self.dim;
        (0..n).flat_map(move |k| {
            (0..n).flat_map(move |i| (i + 1..n).map(move |j| (k, i, j, self.get(k, i, j))))
        })
    }

    pub fn max_abs(&self) -> f64 {
        self.c.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!(self.dim, other.dim, "dimension mismatch");
        self.c
            .iter()
            .zip(&other.c)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    /// `Σ_s c^s_si`, which is `−tr ad_{E_i}`.
    pub fn ad_trace(&self, i: usize) -> f64 {
        (0..self.dim).map(|s| self.get(s, s, i)).sum()
    }

    /// Largest violation of the Jacobi identity,
    /// `max |Σ_s (c^s_ij c^l_sk + c^s_jk c^l_si + c^s_ki c^l_sj)|`.
    pub fn jacobi_defect(&self) -> f64 {
        let n = self.dim;
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    for l in 0..n {
                        let mut sum = 0.0;
                        for s in 0..n {
                            sum += self.get(s, i, j) * self.get(l, s, k)
                                + self.get(s, j, k) * self.get(l, s, i)
                                + self.get(s, k, i) * self.get(l, s, j);
                        }
                        worst = worst.max(sum.abs());
                    }
                }
            }
        }
        worst
    }

    /// `max_i |Σ_s c^s_si|`; zero exactly for unimodular algebras.
    pub fn unimodular_defect(&self) -> f64 {
        (0..self.dim).fold(0.0, |m, i| m.max(self.ad_trace(i).abs()))
    }

    /// Structure constants in the frame `E'_i = Q^s_i E_s`:
    /// `c'^k_ij = Q^s_i Q^m_j c^l_sm Q̃^k_l` with `Q̃ = Q⁻¹`.
    ///
    /// Frame changes compose left to right: `transform(transform(c, q1), q2)`
    /// equals `transform(c, q1·q2)`.
    pub fn transform(&self, q: &SquareMatrix) -> Result<Self, LieError> {
        let n = self.dim;
        if q.dim() != n {
            return Err(LieError::DimensionMismatch {
                algebra: n,
                matrix: q.dim(),
            });
        }
        let qinv = q.inverse()?;
        let mut out = Self::zeros(n);
        for k in 0..n {
            for i in 0..n {
                for j in i + 1..n {
                    let mut sum = 0.0;
                    for s in 0..n {
                        let qs = q[(s, i)];
                        if qs == 0.0 {
                            continue;
                        }
                        for m in 0..n {
                            let qm = q[(m, j)];
                            if qm == 0.0 {
                                continue;
                            }
                            for l in 0..n {
                                sum += qs * qm * self.get(l, s, m) * qinv[(k, l)];
                            }
                        }
                    }
                    out.set(k, i, j, sum);
                }
            }
        }
        Ok(out)
    }

    /// Matrix of `ad_{E_i}`: column `j` holds the components of `[E_i, E_j]`.
    pub fn ad(&self, i: usize) -> SquareMatrix {
        let n = self.dim;
        let mut m = SquareMatrix::zeros(n);
        for k in 0..n {
            for j in 0..n {
                m[(k, j)] = self.get(k, i, j);
            }
        }
        m
    }

    /// Dimension of the derived algebra `[g, g]`, counted with a relative
    /// rank tolerance on the bracket vectors.
    pub fn derived_dimension(&self, tol: f64) -> usize {
        let n = self.dim;
        let mut vectors: Vec<Vec<f64>> = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                vectors.push((0..n).map(|k| self.get(k, i, j)).collect());
            }
        }
        let scale = self.max_abs().max(f64::MIN_POSITIVE);
        let mut basis: Vec<Vec<f64>> = Vec::new();
        for mut v in vectors {
            for b in &basis {
                let p: f64 = v.iter().zip(b).map(|(x, y)| x * y).sum();
                v.iter_mut().zip(b).for_each(|(x, y)| *x -= p * y);
            }
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > tol * scale {
                basis.push(v.into_iter().map(|x| x / norm).collect());
            }
        }
        basis.len()
    }
}

/// The six parameters `(a1, a2, a3, b1, b2, b3)` of a three-dimensional
/// unimodular algebra.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Unimodular3Params {
    pub a1: f64,
    pub a2: f64,
    pub a3: f64,
    pub b1: f64,
    pub b2: f64,
    pub b3: f64,
}

impl Unimodular3Params {
    pub const fn new(a1: f64, a2: f64, a3: f64, b1: f64, b2: f64, b3: f64) -> Self {
        Self {
            a1,
            a2,
            a3,
            b1,
            b2,
            b3,
        }
    }

    /// Order `a1, a2, a3, b1, b2, b3`.
    pub fn to_array(self) -> [f64; 6] {
        [self.a1, self.a2, self.a3, self.b1, self.b2, self.b3]
    }

    pub fn from_array(p: [f64; 6]) -> Self {
        Self::new(p[0], p[1], p[2], p[3], p[4], p[5])
    }

    pub fn max_abs(self) -> f64 {
        self.to_array().iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    /// Replaces `a` by the solution of the diagonal-`R¹` conditions
    /// `a1 = b1 b2 / b3`, `a2 = b2 b3 / b1`, `a3 = b1 b3 / b2`.
    pub fn with_solved_a(self) -> Self {
        Self {
            a1: self.b1 * self.b2 / self.b3,
            a2: self.b2 * self.b3 / self.b1,
            a3: self.b1 * self.b3 / self.b2,
            ..self
        }
    }

    /// Reads the six parameters back from three-dimensional constants.
    ///
    /// Each `b` appears twice in the bracket table; the two copies must agree
    /// to `tol` relative to the largest constant.
    pub fn from_constants(c: &StructureConstants, tol: f64) -> Result<Self, LieError> {
        if c.dim() != 3 {
            return Err(LieError::NotUnimodular3(f64::INFINITY));
        }
        let p = Self::new(
            c.get(0, 1, 2),
            -c.get(1, 0, 2),
            c.get(2, 0, 1),
            c.get(0, 0, 1),
            c.get(1, 1, 2),
            c.get(1, 0, 1),
        );
        let defect = (p.b1 - c.get(2, 1, 2))
            .abs()
            .max((p.b2 + c.get(0, 0, 2)).abs())
            .max((p.b3 + c.get(2, 0, 2)).abs());
        if defect > tol * c.max_abs().max(1.0) {
            return Err(LieError::NotUnimodular3(defect));
        }
        Ok(p)
    }
}

impl fmt::Display for Unimodular3Params {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "a=({}, {}, {}) b=({}, {}, {})",
            self.a1, self.a2, self.a3, self.b1, self.b2, self.b3
        )
    }
}

/// Constants of the unimodular family:
///
/// ```text
/// C^1: [[0, b1, -b2], [-b1, 0, a1], [b2, -a1, 0]]
/// C^2: [[0, b3, -a2], [-b3, 0, b2], [a2, -b2, 0]]
/// C^3: [[0, a3, -b3], [-a3, 0, b1], [b3, -b1, 0]]
/// ```
pub fn from_unimodular3(p: &Unimodular3Params) -> StructureConstants {
    StructureConstants::zeros(3)
        .with(0, 0, 1, p.b1)
        .with(0, 0, 2, -p.b2)
        .with(0, 1, 2, p.a1)
        .with(1, 0, 1, p.b3)
        .with(1, 0, 2, -p.a2)
        .with(1, 1, 2, p.b2)
        .with(2, 0, 1, p.a3)
        .with(2, 0, 2, -p.b3)
        .with(2, 1, 2, p.b1)
}

pub fn preset(name: &str) -> Result<Unimodular3Params, LieError> {
    let p = match name {
        "so3" => [1.0, 1.0, 1.0, 0.0, 0.0, 0.0],
        "heisenberg" => [1.0, 0.0, 0.0, 0.0, 0.0, 0.0],
        "e2" => [1.0, 1.0, 0.0, 0.0, 0.0, 0.0],
        "e11" => [1.0, -1.0, 0.0, 0.0, 0.0, 0.0],
        "sl2r" => [1.0, 1.0, -1.0, 0.0, 0.0, 0.0],
        "abelian" => [0.0; 6],
        other => return Err(LieError::UnknownPreset(other.to_string())),
    };
    Ok(Unimodular3Params::from_array(p))
}

// JSON form: {"dim": n, "entries": [{"k":1,"i":1,"j":2,"value":…}, …]}
// with one-based indices and only i < j listed.

#[derive(Serialize, Deserialize)]
struct EntryJson {
    k: usize,
    i: usize,
    j: usize,
    value: f64,
}

#[derive(Serialize, Deserialize)]
struct ConstantsJson {
    dim: usize,
    entries: Vec<EntryJson>,
}

impl Serialize for StructureConstants {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let entries = self
            .upper_entries()
            .filter(|e| e.3 != 0.0)
            .map(|(k, i, j, value)| EntryJson {
                k: k + 1,
                i: i + 1,
                j: j + 1,
                value,
            })
            .collect();
        ConstantsJson {
            dim: self.dim,
            entries,
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for StructureConstants {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let raw = ConstantsJson::deserialize(deserializer)?;
        if raw.dim == 0 {
            return Err(D::Error::custom("dim must be positive"));
        }
        let mut c = StructureConstants::zeros(raw.dim);
        let mut seen = std::collections::HashSet::new();
        for e in raw.entries {
            let in_range = |x: usize| (1..=raw.dim).contains(&x);
            if !(in_range(e.k) && in_range(e.i) && in_range(e.j)) {
                return Err(D::Error::custom(format!(
                    "index out of range in entry k={} i={} j={}",
                    e.k, e.i, e.j
                )));
            }
            if e.i >= e.j {
                return Err(D::Error::custom(format!(
                    "entries must have i < j (got i={} j={})",
                    e.i, e.j
                )));
            }
            if !e.value.is_finite() {
                return Err(D::Error::custom("non-finite value"));
            }
            if !seen.insert((e.k, e.i, e.j)) {
                return Err(D::Error::custom(format!(
                    "duplicate entry k={} i={} j={}",
                    e.k, e.i, e.j
                )));
            }
            c.set(e.k - 1, e.i - 1, e.j - 1, e.value);
        }
        Ok(c)
    }
}
