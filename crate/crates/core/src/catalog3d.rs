//! Three-dimensional unimodular algebras.
//!
//! In the six-parameter family `(a1, a2, a3, b1, b2, b3)` the Cartan part
//! `R¹` is diagonal exactly when
//!
//! ```text
//! b1 b3 − a3 b2 = 0,   b2 b3 − a2 b1 = 0,   b1 b2 − a1 b3 = 0.
//! ```
//!
//! Solving these gives three patterns: all `b` zero (case I), a single
//! nonzero `b` (case II), or all three nonzero (case III, which an
//! orthogonal change of frame turns into case I with a single constant).
//! The closed-form Ricci matrices for the diagonal and the case II frames
//! serve as oracles for the general pipeline.

use std::f64::consts::FRAC_PI_2;

use serde::Serialize;

use crate::curvature::ricci_parts;
use crate::lie::{from_unimodular3, LieError, StructureConstants, Unimodular3Params};
use crate::matrix::{symmetric_eigen, SquareMatrix};

/// Default tolerance of [`classify`], relative to `max|p|` for the `b`
/// values and to `max|p|²` for the quadratic residuals.
pub const DEFAULT_CLASSIFY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CatalogError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error(transparent)]
    Lie(#[from] LieError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum CaseLabel {
    CaseI,
    CaseII,
    CaseIII,
    NonDiagonalR1,
}

/// Left-hand sides of the three diagonality conditions, in the order
/// `b1 b3 − a3 b2`, `b2 b3 − a2 b1`, `b1 b2 − a1 b3`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DiagonalityResiduals(pub [f64; 3]);

impl DiagonalityResiduals {
    pub fn of(p: &Unimodular3Params) -> Self {
        Self([
            p.b1 * p.b3 - p.a3 * p.b2,
            p.b2 * p.b3 - p.a2 * p.b1,
            p.b1 * p.b2 - p.a1 * p.b3,
        ])
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().fold(0.0, |m, x| m.max(x.abs()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Classification {
    pub label: CaseLabel,
    pub residuals: DiagonalityResiduals,
}

pub fn classify(p: &Unimodular3Params, tol: f64) -> Classification {
    let scale = p.max_abs();
    let residuals = DiagonalityResiduals::of(p);
    let diagonal = residuals.max_abs() <= tol * scale * scale;
    let nonzero_b = [p.b1, p.b2, p.b3]
        .iter()
        .filter(|b| b.abs() > tol * scale)
        .count();
    let label = match (nonzero_b, diagonal) {
        (0, _) => CaseLabel::CaseI,
        (1, true) => CaseLabel::CaseII,
        (3, true) => CaseLabel::CaseIII,
        _ => CaseLabel::NonDiagonalR1,
    };
    Classification { label, residuals }
}

/// The `R¹` matrix as printed alongside the six-parameter family, e.g.
/// `−2 a2 a3 + 2 b3²` in the corner. It is `−2` times the `R¹` of
/// [`ricci_parts`].
pub fn lemma_r1_display(p: &Unimodular3Params) -> SquareMatrix {
    let Unimodular3Params {
        a1,
        a2,
        a3,
        b1,
        b2,
        b3,
    } = *p;
    let d12 = 2.0 * a3 * b2 - 2.0 * b1 * b3;
    let d13 = 2.0 * a2 * b1 - 2.0 * b2 * b3;
    let d23 = -2.0 * b1 * b2 + 2.0 * a1 * b3;
    SquareMatrix::from_rows(&[
        vec![-2.0 * a2 * a3 + 2.0 * b3 * b3, d12, d13],
        vec![d12, -2.0 * a1 * a3 + 2.0 * b1 * b1, d23],
        vec![d13, d23, -2.0 * a1 * a2 + 2.0 * b2 * b2],
    ])
    .expect("finite parameters give a finite matrix")
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct R1Diagonalization {
    /// Orthogonal; columns are the new frame vectors.
    pub rotation: SquareMatrix,
    /// Diagonal of `R¹` in the new frame.
    pub eigenvalues: Vec<f64>,
    pub constants: StructureConstants,
}

/// Rotates the frame so that `R¹` becomes diagonal. When it already is, the
/// rotation is the identity.
pub fn diagonalize_r1(p: &Unimodular3Params) -> R1Diagonalization {
    let c = from_unimodular3(p);
    let r1 = ricci_parts(&c).r1;
    if r1.max_off_diag() == 0.0 {
        return R1Diagonalization {
            rotation: SquareMatrix::identity(3),
            eigenvalues: r1.diag(),
            constants: c,
        };
    }
    let eig = symmetric_eigen(&r1).expect("R¹ is symmetric by construction");
    let constants = c
        .transform(&eig.rotation)
        .expect("an orthogonal matrix is invertible");
    R1Diagonalization {
        rotation: eig.rotation,
        eigenvalues: eig.values,
        constants,
    }
}

/// `(ρ, α, β)` with
///
/// ```text
/// b1² = ρ cos β cos α / sin β
/// b2² = ρ sin β cos α / cos β
/// b3² = sin² α · ρ sin β cos β / cos α
/// ```
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Case3Angles {
    pub rho: f64,
    pub alpha: f64,
    pub beta: f64,
}

impl Case3Angles {
    /// Recovers the angles from positive `b`.
    ///
    /// The ratio of the first two relations gives `tan β = b2 / b1`; their
    /// product gives `ρ cos α = b1 b2`; substituting into the third leaves
    /// `tan α = b3 / √(b1 b2 sin β cos β)`.
    pub fn from_b(b1: f64, b2: f64, b3: f64) -> Result<Self, CatalogError> {
        if !(b1 > 0.0 && b2 > 0.0 && b3 > 0.0) || !(b1 * b2 * b3).is_finite() {
            return Err(CatalogError::Domain(format!(
                "case III reduction needs b1, b2, b3 > 0, got ({b1}, {b2}, {b3})"
            )));
        }
        let beta = (b2 / b1).atan();
        let radicand = b1 * b2 * beta.sin() * beta.cos();
        if !(radicand > 0.0) {
            return Err(CatalogError::Domain(format!(
                "b1 b2 sin β cos β must be positive, got {radicand}"
            )));
        }
        let alpha = (b3 / radicand.sqrt()).atan();
        let cos_a = alpha.cos();
        if !(cos_a > 0.0) {
            return Err(CatalogError::Domain(format!("cos α must be positive, got {cos_a}")));
        }
        let angles = Self {
            rho: b1 * b2 / cos_a,
            alpha,
            beta,
        };
        angles.check_domain()?;
        Ok(angles)
    }

    fn check_domain(&self) -> Result<(), CatalogError> {
        let open = |x: f64| x > 0.0 && x < FRAC_PI_2;
        if !(self.rho > 0.0 && open(self.alpha) && open(self.beta)) {
            return Err(CatalogError::Domain(format!(
                "need ρ > 0 and α, β in (0, π/2), got ρ={} α={} β={}",
                self.rho, self.alpha, self.beta
            )));
        }
        Ok(())
    }

    /// `(b1, b2, b3)` from the defining relations.
    pub fn b_values(&self) -> Result<[f64; 3], CatalogError> {
        self.check_domain()?;
        let (sa, ca) = self.alpha.sin_cos();
        let (sb, cb) = self.beta.sin_cos();
        Ok([
            (self.rho * cb * ca / sb).sqrt(),
            (self.rho * sb * ca / cb).sqrt(),
            sa * (self.rho * sb * cb / ca).sqrt(),
        ])
    }

    /// The surviving constant `(1/sin α)·√(ρ / (cos α cos β sin β))`.
    pub fn reduced_constant(&self) -> Result<f64, CatalogError> {
        self.check_domain()?;
        let (sa, ca) = self.alpha.sin_cos();
        let (sb, cb) = self.beta.sin_cos();
        Ok((self.rho / (ca * cb * sb)).sqrt() / sa)
    }

    /// Orthogonal frame with columns
    ///
    /// ```text
    /// E1 = (cos α,  sin α sin β,  sin α cos β)
    /// E2 = (sin α, −cos α sin β, −cos α cos β)
    /// E3 = (0,      cos β,       −sin β)
    /// ```
    pub fn frame(&self) -> SquareMatrix {
        let (sa, ca) = self.alpha.sin_cos();
        let (sb, cb) = self.beta.sin_cos();
        let rows = SquareMatrix::from_rows(&[
            vec![ca, sa * sb, sa * cb],
            vec![sa, -ca * sb, -ca * cb],
            vec![0.0, cb, -sb],
        ])
        .expect("finite angles give a finite matrix");
        rows.transpose()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Case3Reduction {
    /// Input `b` with `a` solved from the diagonality conditions.
    pub params: Unimodular3Params,
    pub angles: Case3Angles,
    pub frame: SquareMatrix,
    pub constants: StructureConstants,
}

/// Moves a case III algebra to the frame where only `c^1_23` survives.
pub fn case3_reduce(b1: f64, b2: f64, b3: f64) -> Result<Case3Reduction, CatalogError> {
    let angles = Case3Angles::from_b(b1, b2, b3)?;
    let params = Unimodular3Params::new(0.0, 0.0, 0.0, b1, b2, b3).with_solved_a();
    let frame = angles.frame();
    let constants = from_unimodular3(&params).transform(&frame)?;
    Ok(Case3Reduction {
        params,
        angles,
        frame,
        constants,
    })
}

fn nonzero(name: &str, x: f64) -> Result<(), CatalogError> {
    if x == 0.0 || !x.is_finite() {
        return Err(CatalogError::Domain(format!("{name} must be finite and nonzero, got {x}")));
    }
    Ok(())
}

/// Ricci matrix in the diagonal frame `diag(f, g, h)` of a case I algebra:
///
/// ```text
/// R11 = a2 a3 f² + a1² g² h² / (2 f²) − f² (a3² g⁴ + a2² h⁴) / (2 g² h²)
/// R22 = a1 a3 g² + a2² f² h² / (2 g²) − g² (a3² f⁴ + a1² h⁴) / (2 f² h²)
/// R33 = (a3² f⁴ g⁴ − (a2 f² − a1 g²)² h⁴) / (2 f² g² h²)
/// ```
pub fn closed_form_ricci_case1(
    a1: f64,
    a2: f64,
    a3: f64,
    f: f64,
    g: f64,
    h: f64,
) -> Result<SquareMatrix, CatalogError> {
    nonzero("f", f)?;
    nonzero("g", g)?;
    nonzero("h", h)?;
    let (f2, g2, h2) = (f * f, g * g, h * h);
    let r11 = a2 * a3 * f2 + a1 * a1 * g2 * h2 / (2.0 * f2)
        - f2 * (a3 * a3 * g2 * g2 + a2 * a2 * h2 * h2) / (2.0 * g2 * h2);
    let r22 = a1 * a3 * g2 + a2 * a2 * f2 * h2 / (2.0 * g2)
        - g2 * (a3 * a3 * f2 * f2 + a1 * a1 * h2 * h2) / (2.0 * f2 * h2);
    let r33 = (a3 * a3 * f2 * f2 * g2 * g2 - (a2 * f2 - a1 * g2).powi(2) * h2 * h2)
        / (2.0 * f2 * g2 * h2);
    Ok(SquareMatrix::from_diag(&[r11, r22, r33]))
}

/// Case I Ricci matrix in the reference frame:
/// `½(a1² − (a2 − a3)²)` and its cyclic partners.
pub fn case1_ricci_at_identity(a1: f64, a2: f64, a3: f64) -> SquareMatrix {
    SquareMatrix::from_diag(&[
        0.5 * (a1 * a1 - (a2 - a3).powi(2)),
        0.5 * (-a1 * a1 + a2 * a2 + 2.0 * a1 * a3 - a3 * a3),
        0.5 * (-a1 * a1 + 2.0 * a1 * a2 - a2 * a2 + a3 * a3),
    ])
}

/// The case II frame: `diag(f, g, h)` plus `w` in row 3, column 1.
pub fn case2_frame(f: f64, g: f64, h: f64, w: f64) -> SquareMatrix {
    SquareMatrix::from_rows(&[vec![f, 0.0, 0.0], vec![0.0, g, 0.0], vec![w, 0.0, h]])
        .expect("finite entries")
}

/// Ricci matrix of the case II algebra `(a1, 0, a3, b1, 0, 0)` in the frame
/// [`case2_frame`]`(f, g, h, w)`.
///
/// The `w` coefficient of `R13` is `a1² h² + (2 b1² + a1 a3) f²`. A variant
/// with `a1² a3` in place of `a1 a3` is cubic in the structure constants and
/// disagrees with the general pipeline; the quadratic form is the one that
/// matches.
pub fn closed_form_ricci_case2(
    a1: f64,
    a3: f64,
    b1: f64,
    f: f64,
    g: f64,
    h: f64,
    w: f64,
) -> Result<SquareMatrix, CatalogError> {
    nonzero("f", f)?;
    nonzero("g", g)?;
    nonzero("h", h)?;
    let (f2, g2, h2) = (f * f, g * g, h * h);
    let (w2, w3, w4) = (w * w, w * w * w, w * w * w * w);

    // shared by R11 and R33
    let core = a1 * a1 * w4 - 4.0 * a1 * b1 * f * w3 + (4.0 * b1 * b1 + 2.0 * a1 * a3) * f2 * w2
        - 4.0 * a3 * b1 * f2 * f * w
        - a1 * a1 * h2 * h2
        + a3 * a3 * f2 * f2;
    let r11 = -g2 * core / (2.0 * f2 * h2);
    let r33 = g2 * core / (2.0 * f2 * h2);

    let r13 = -g2
        * (a1 * a1 * w3 - 3.0 * a1 * b1 * f * w2
            + (a1 * a1 * h2 + (2.0 * b1 * b1 + a1 * a3) * f2) * w
            - a1 * b1 * f * h2
            - a3 * b1 * f2 * f)
        / (f2 * h);

    let r22 = -g2
        * (a1 * a1 * w4 - 4.0 * a1 * b1 * f * w3
            + (2.0 * a1 * a1 * h2 + (4.0 * b1 * b1 + 2.0 * a1 * a3) * f2) * w2
            - 4.0 * (a1 * b1 * f * h2 + a3 * b1 * f2 * f) * w
            + a1 * a1 * h2 * h2
            + (4.0 * b1 * b1 - 2.0 * a1 * a3) * f2 * h2
            + a3 * a3 * f2 * f2)
        / (2.0 * f2 * h2);

    Ok(SquareMatrix::from_rows(&[
        vec![r11, 0.0, r13],
        vec![0.0, r22, 0.0],
        vec![r13, 0.0, r33],
    ])
    .expect("finite inputs give a finite matrix"))
}

/// Case II Ricci matrix in the reference frame (`f = g = h = 1`, `w = 0`).
pub fn case2_ricci_at_identity(a1: f64, a3: f64, b1: f64) -> SquareMatrix {
    let r13 = (a1 + a3) * b1;
    SquareMatrix::from_rows(&[
        vec![0.5 * (a1 * a1 - a3 * a3), 0.0, r13],
        vec![0.0, 0.5 * (-a1 * a1 + 2.0 * a1 * a3 - a3 * a3 - 4.0 * b1 * b1), 0.0],
        vec![r13, 0.0, 0.5 * (-a1 * a1 + a3 * a3)],
    ])
    .expect("finite inputs give a finite matrix")
}

/// Velocity of the diagonal frame: `ḟ = f R11`, `ġ = g R22`, `ḣ = h R33`.
pub fn case1_flow_rhs(a: [f64; 3], fgh: [f64; 3]) -> Result<[f64; 3], CatalogError> {
    let [f, g, h] = fgh;
    let r = closed_form_ricci_case1(a[0], a[1], a[2], f, g, h)?;
    Ok([f * r[(0, 0)], g * r[(1, 1)], h * r[(2, 2)]])
}

/// Velocity of the case II frame: the diagonal equations as in case I plus
/// `(f ẇ − w ḟ)/(f h) = 2 R13`.
pub fn case2_flow_rhs(a1: f64, a3: f64, b1: f64, fghw: [f64; 4]) -> Result<[f64; 4], CatalogError> {
    let [f, g, h, w] = fghw;
    let r = closed_form_ricci_case2(a1, a3, b1, f, g, h, w)?;
    let df = f * r[(0, 0)];
    let dw = (w * df + 2.0 * f * h * r[(0, 2)]) / f;
    Ok([df, g * r[(1, 1)], h * r[(2, 2)], dw])
}
