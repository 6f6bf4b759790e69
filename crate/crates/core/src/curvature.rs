//! Connection and Ricci tensor of the left-invariant metric for which the
//! current frame is orthonormal.
//!
//! Three routes compute the Ricci matrix:
//!
//! * [`ricci_parts`]: the four-term split `R = R¹ + R² + R³ + R⁴`;
//! * [`ricci_via_connection`]: contraction of the curvature built from the
//!   connection coefficients;
//! * [`ricci_combined`]: the same four terms written as one expression with
//!   their index order rearranged.
//!
//! Every sum is an explicit loop over the full index range so the routes
//! share no intermediate results.

use serde::Serialize;

use crate::lie::StructureConstants;
use crate::matrix::SquareMatrix;

/// `∇_{E_i} E_j = Γ^k_ij E_k`, stored as `gamma[(i*n + j)*n + k]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Connection {
    n: usize,
    gamma: Vec<f64>,
}

impl Connection {
    #[inline]
    pub fn dim(&self) -> usize {
        self.n
    }

    /// `Γ^k_ij`.
    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.gamma[(i * self.n + j) * self.n + k]
    }

    /// `max |Γ^j_ki + Γ^i_kj|`, zero for a metric connection.
    pub fn metric_defect(&self) -> f64 {
        let n = self.n;
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    worst = worst.max((self.get(k, i, j) + self.get(k, j, i)).abs());
                }
            }
        }
        worst
    }
}

/// Levi-Civita connection in an orthonormal frame:
/// `Γ^k_ij = ½ (c^k_ij + c^j_ki + c^i_kj)`.
pub fn connection(c: &StructureConstants) -> Connection {
    let n = c.dim();
    let mut gamma = vec![0.0; n * n * n];
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                gamma[(i * n + j) * n + k] = 0.5 * (c.get(k, i, j) + c.get(j, k, i) + c.get(i, k, j));
            }
        }
    }
    Connection { n, gamma }
}

/// The four symmetric pieces of the Ricci matrix, their sum and its trace.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RicciDecomposition {
    pub r1: SquareMatrix,
    pub r2: SquareMatrix,
    pub r3: SquareMatrix,
    pub r4: SquareMatrix,
    pub total: SquareMatrix,
    pub scalar: f64,
}

impl RicciDecomposition {
    pub fn part(&self, alpha: usize) -> &SquareMatrix {
        match alpha {
            1 => &self.r1,
            2 => &self.r2,
            3 => &self.r3,
            4 => &self.r4,
            _ => panic!("Ricci part index must be 1..=4, got {alpha}"),
        }
    }
}

/// ```text
/// R¹_jk = −½ Σ_{s,m} c^s_mj c^m_sk
/// R²_jk =  ½ Σ_s (Σ_m c^m_ms)(c^k_sj + c^j_sk)
/// R³_jk =  ¼ Σ_{s,m} c^j_sm c^k_sm
/// R⁴_jk = −½ Σ_{s,m} c^m_sj c^m_sk
/// ```
///
/// `R¹` is minus half the Killing form. `R²` vanishes on unimodular
/// algebras, where every `Σ_m c^m_ms` is zero.
pub fn ricci_parts(c: &StructureConstants) -> RicciDecomposition {
    let n = c.dim();
    let mut r1 = SquareMatrix::zeros(n);
    let mut r2 = SquareMatrix::zeros(n);
    let mut r3 = SquareMatrix::zeros(n);
    let mut r4 = SquareMatrix::zeros(n);
    let traces: Vec<f64> = (0..n).map(|s| (0..n).map(|m| c.get(m, m, s)).sum()).collect();

    for j in 0..n {
        for k in 0..n {
            let mut s1 = 0.0;
            let mut s2 = 0.0;
            let mut s3 = 0.0;
            let mut s4 = 0.0;
            for s in 0..n {
                s2 += traces[s] * (c.get(k, s, j) + c.get(j, s, k));
                for m in 0..n {
                    s1 += c.get(s, m, j) * c.get(m, s, k);
                    s3 += c.get(j, s, m) * c.get(k, s, m);
                    s4 += c.get(m, s, j) * c.get(m, s, k);
                }
            }
            r1[(j, k)] = -0.5 * s1;
            r2[(j, k)] = 0.5 * s2;
            r3[(j, k)] = 0.25 * s3;
            r4[(j, k)] = -0.5 * s4;
        }
    }

    let total = &(&(&r1 + &r2) + &r3) + &r4;
    let scalar = total.trace();
    RicciDecomposition {
        r1,
        r2,
        r3,
        r4,
        total,
        scalar,
    }
}

/// `R_jk = Γ^l_jk Γ^s_sl − Γ^l_sk Γ^s_jl − c^l_sj Γ^s_lk`, unsymmetrized.
///
/// The result is symmetric whenever the constants satisfy the Jacobi
/// identity; otherwise its antisymmetric part is a multiple of the Jacobi
/// defect.
pub fn ricci_contraction(c: &StructureConstants) -> SquareMatrix {
    let n = c.dim();
    let gamma = connection(c);
    let mut r = SquareMatrix::zeros(n);
    for j in 0..n {
        for k in 0..n {
            let mut sum = 0.0;
            for s in 0..n {
                for l in 0..n {
                    sum += gamma.get(j, k, l) * gamma.get(s, l, s)
                        - gamma.get(s, k, l) * gamma.get(j, l, s)
                        - c.get(l, s, j) * gamma.get(l, k, s);
                }
            }
            r[(j, k)] = sum;
        }
    }
    r
}

/// Ricci matrix through the connection: the symmetric part of
/// [`ricci_contraction`].
pub fn ricci_via_connection(c: &StructureConstants) -> SquareMatrix {
    ricci_contraction(c).symmetric_part()
}

/// ```text
/// R_jk = −½ c^s_mj c^m_sk + ¼ c^j_ms c^k_ms − ½ c^s_mj c^s_mk
///        + ½ c^m_ms (c^k_sj + c^j_sk)
/// ```
/// evaluated term by term in a single pass.
pub fn ricci_combined(c: &StructureConstants) -> SquareMatrix {
    let n = c.dim();
    let mut r = SquareMatrix::zeros(n);
    for j in 0..n {
        for k in 0..n {
            let mut sum = 0.0;
            for m in 0..n {
                for s in 0..n {
                    sum += -0.5 * c.get(s, m, j) * c.get(m, s, k)
                        + 0.25 * c.get(j, m, s) * c.get(k, m, s)
                        - 0.5 * c.get(s, m, j) * c.get(s, m, k)
                        + 0.5 * c.get(m, m, s) * (c.get(k, s, j) + c.get(j, s, k));
                }
            }
            r[(j, k)] = sum;
        }
    }
    r
}

/// `(T_S(Q) A)_ij = Q^p_i Q^q_j A_pq`, i.e. `Qᵀ·A·Q`, written out in index
/// form.
pub fn lower_index_transform(q: &SquareMatrix, a: &SquareMatrix) -> SquareMatrix {
    let n = q.dim();
    assert_eq!(n, a.dim(), "dimension mismatch");
    let mut out = SquareMatrix::zeros(n);
    for i in 0..n {
        for j in 0..n {
            let mut sum = 0.0;
            for p in 0..n {
                for r in 0..n {
                    sum += q[(p, i)] * q[(r, j)] * a[(p, r)];
                }
            }
            out[(i, j)] = sum;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lie::{from_unimodular3, preset};

    fn levi_civita(i: usize, j: usize, k: usize) -> f64 {
        match (i, j, k) {
            (0, 1, 2) | (1, 2, 0) | (2, 0, 1) => 1.0,
            (0, 2, 1) | (2, 1, 0) | (1, 0, 2) => -1.0,
            _ => 0.0,
        }
    }

    fn so3() -> StructureConstants {
        from_unimodular3(&preset("so3").unwrap())
    }

    #[test]
    fn abelian_is_flat() {
        let c = StructureConstants::zeros(3);
        let d = ricci_parts(&c);
        for alpha in 1..=4 {
            assert_eq!(d.part(alpha), &SquareMatrix::zeros(3));
        }
        assert_eq!(d.scalar, 0.0);
        assert_eq!(ricci_via_connection(&c), SquareMatrix::zeros(3));
        assert_eq!(ricci_combined(&c), SquareMatrix::zeros(3));
        let g = connection(&c);
        assert!((0..27).all(|x| g.gamma[x] == 0.0));
    }

    #[test]
    fn so3_connection_is_half_levi_civita() {
        let g = connection(&so3());
        for i in 0..3 {
            for j in 0..3 {
                for k in 0..3 {
                    assert_eq!(g.get(i, j, k), 0.5 * levi_civita(i, j, k));
                }
            }
        }
        assert_eq!(g.metric_defect(), 0.0);
    }

    #[test]
    fn so3_parts() {
        let d = ricci_parts(&so3());
        let eye = SquareMatrix::identity(3);
        assert_eq!(d.r1, eye);
        assert_eq!(d.r2, SquareMatrix::zeros(3));
        assert_eq!(d.r3, eye.scale(0.5));
        assert_eq!(d.r4, eye.scale(-1.0));
        assert_eq!(d.total, eye.scale(0.5));
        assert_eq!(d.scalar, 1.5);
        assert!(ricci_via_connection(&so3()).max_abs_diff(&eye.scale(0.5)) <= 1e-15);
        assert!(ricci_combined(&so3()).max_abs_diff(&eye.scale(0.5)) <= 1e-15);
    }

    #[test]
    fn heisenberg_parts() {
        let c = from_unimodular3(&preset("heisenberg").unwrap());
        let d = ricci_parts(&c);
        let expect = SquareMatrix::from_diag(&[0.5, -0.5, -0.5]);
        assert_eq!(d.r1, SquareMatrix::zeros(3));
        assert_eq!(d.total, expect);
        assert!(ricci_combined(&c).max_abs_diff(&expect) <= 1e-15);
        assert!(ricci_via_connection(&c).max_abs_diff(&expect) <= 1e-15);
    }

    #[test]
    fn hyperbolic_space_has_constant_negative_ricci() {
        // [E1,E2] = E2, [E1,E3] = E3: not unimodular, so R² contributes
        let c = StructureConstants::zeros(3).with(1, 0, 1, 1.0).with(2, 0, 2, 1.0);
        let d = ricci_parts(&c);
        assert!(d.r2.max_abs() > 0.0);
        let expect = SquareMatrix::identity(3).scale(-2.0);
        assert!(d.total.max_abs_diff(&expect) <= 1e-15);
        assert!(ricci_contraction(&c).max_abs_diff(&expect) <= 1e-15);
    }

    #[test]
    fn contraction_asymmetry_tracks_jacobi_failure() {
        let bad = StructureConstants::zeros(3).with(0, 0, 1, 1.0).with(1, 0, 2, 1.0);
        assert!(bad.jacobi_defect() > 0.0);
        assert!(ricci_contraction(&bad).asymmetry() > 0.1);
        let good = from_unimodular3(&crate::lie::Unimodular3Params::new(0.4, -1.0, 2.0, 0.3, 0.8, -0.6));
        assert!(ricci_contraction(&good).asymmetry() <= 1e-14);
    }

    #[test]
    fn lower_index_transform_is_congruence() {
        let q = SquareMatrix::from_rows(&[vec![1.0, 2.0, 0.0], vec![0.0, 1.0, 3.0], vec![4.0, 0.0, 1.0]]).unwrap();
        let a = SquareMatrix::from_rows(&[vec![2.0, 1.0, 0.5], vec![1.0, -1.0, 0.0], vec![0.5, 0.0, 3.0]]).unwrap();
        let expect = &(&q.transpose() * &a) * &q;
        assert!(lower_index_transform(&q, &a).max_abs_diff(&expect) <= 1e-13);
    }

    #[test]
    #[should_panic]
    fn part_index_out_of_range() {
        ricci_parts(&so3()).part(5);
    }

    #[test]
    fn json_keys() {
        let v = serde_json::to_value(ricci_parts(&so3())).unwrap();
        for key in ["r1", "r2", "r3", "r4", "total", "scalar"] {
            assert!(v.get(key).is_some(), "{key}");
        }
        assert_eq!(v["total"][0][0], 0.5);
    }
}
