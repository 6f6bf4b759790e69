//! Ricci flow of a left-invariant metric as an ODE for a frame matrix.
//!
//! Fix an orthonormal frame `E_j` of the initial metric and track frames
//! `E_i(t) = B^j_i(t) E_j` that stay orthonormal for `g(t)`. The flow
//! `∂g/∂t = −2 Rc` holds exactly when
//!
//! ```text
//! B⁻¹Ḃ + (B⁻¹Ḃ)ᵀ = 2 R(t),
//! ```
//!
//! where `R(t)` is the Ricci matrix of the constants transformed into the
//! frame `B(t)`. Only the symmetric part of `M = B⁻¹Ḃ` is constrained, and an
//! orthogonal factor on the right of `B` does not change the metric, so `B`
//! may be kept upper triangular. Then `M` is upper triangular too, and
//! `M + Mᵀ = 2R` fixes it uniquely:
//!
//! ```text
//! M_ii = R_ii,   M_ij = 2 R_ij (i < j),   M_ij = 0 (i > j).
//! ```
//!
//! For a diagonal frame this is `ḟ/f = R_11` and so on, the scalar system of
//! the diagonal case.
//!
//! The normalized flow `∂g/∂t = −2 Rc + (2/n) r g` replaces `R` by
//! `R − (tr R / n) I`; for a homogeneous metric the scalar curvature is the
//! same everywhere, so its volume average is just `tr R`.

use std::ops::ControlFlow;

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::curvature::ricci_parts;
use crate::lie::{LieError, StructureConstants};
use crate::matrix::{MatrixError, SquareMatrix};
use crate::ode::{self, DriveOptions, StopReason};

pub use crate::ode::Method;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FlowError {
    #[error("invalid flow configuration: {0}")]
    InvalidConfig(String),
    #[error("invalid initial frame: {0}")]
    InvalidInitialFrame(String),
    #[error("frame lost its positive diagonal")]
    DegenerateFrame,
    #[error(transparent)]
    Matrix(#[from] MatrixError),
    #[error(transparent)]
    Lie(#[from] LieError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlowConfig {
    pub method: Method,
    /// Initial step for the adaptive method, the step for RK4.
    pub h0: f64,
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub t_end: f64,
    pub max_steps: u64,
    /// The run stops as collapsed once `max |b_ij|` exceeds this.
    pub collapse_threshold: f64,
    pub min_step: f64,
    /// Upper bound on the step, for dense output.
    pub max_step: Option<f64>,
    /// Record every N-th accepted step (the first and last are always kept).
    pub sample_every: u64,
    pub normalized: bool,
}

impl Default for FlowConfig {
    fn default() -> Self {
        Self {
            method: Method::RkAdaptive,
            h0: 1e-3,
            rel_tol: 1e-8,
            abs_tol: 1e-10,
            t_end: 1.0,
            max_steps: 10_000_000,
            collapse_threshold: 1e5,
            min_step: 1e-14,
            max_step: None,
            sample_every: 1,
            normalized: false,
        }
    }
}

impl FlowConfig {
    pub fn validate(&self) -> Result<(), FlowError> {
        let bad = |msg: String| Err(FlowError::InvalidConfig(msg));
        let positive = [
            ("h0", self.h0),
            ("t_end", self.t_end),
            ("rel_tol", self.rel_tol),
            ("abs_tol", self.abs_tol),
            ("collapse_threshold", self.collapse_threshold),
            ("max_step", self.max_step.unwrap_or(f64::INFINITY)),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || v.is_nan() {
                return bad(format!("{name} must be positive, got {v}"));
            }
        }
        if !self.t_end.is_finite() || !self.h0.is_finite() {
            return bad("h0 and t_end must be finite".into());
        }
        if !(self.min_step >= 0.0 && self.min_step < self.h0) {
            return bad(format!(
                "min_step must lie in [0, h0), got {} with h0 = {}",
                self.min_step, self.h0
            ));
        }
        if self.max_steps == 0 {
            return bad("max_steps must be positive".into());
        }
        if self.sample_every == 0 {
            return bad("sample_every must be positive".into());
        }
        Ok(())
    }
}

/// Time and upper-triangular frame matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowState {
    pub t: f64,
    pub b: SquareMatrix,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Completed,
    Collapsed,
    StepUnderflow,
    MaxSteps,
}

impl Termination {
    pub fn as_str(self) -> &'static str {
        match self {
            Termination::Completed => "completed",
            Termination::Collapsed => "collapsed",
            Termination::StepUnderflow => "step_underflow",
            Termination::MaxSteps => "max_steps",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Sample {
    pub t: f64,
    pub b: SquareMatrix,
    /// Metric in the initial frame, `(b⁻¹)ᵀ b⁻¹`.
    pub g: SquareMatrix,
    /// Ricci matrix in the orthonormal frame `b` (unnormalized).
    pub ricci: SquareMatrix,
    pub scalar: f64,
}

impl Sample {
    fn at(c: &StructureConstants, t: f64, b: SquareMatrix) -> Result<Self, FlowError> {
        let g = metric_in_initial_frame(&b)?;
        let ricci = ricci_parts(&c.transform(&b)?).total;
        let scalar = ricci.trace();
        Ok(Self {
            t,
            b,
            g,
            ricci,
            scalar,
        })
    }

    /// Ricci tensor in the initial frame, directly comparable with `g`.
    pub fn ricci_in_initial_frame(&self) -> SquareMatrix {
        ricci_in_initial_frame(&self.b, &self.ricci).expect("sampled frames are invertible")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub samples: Vec<Sample>,
    pub termination: Termination,
    pub collapse_time_estimate: Option<f64>,
}

impl Trajectory {
    pub fn last(&self) -> &Sample {
        self.samples.last().expect("a trajectory always holds its initial sample")
    }

    /// CSV header for dimension `n`: `t`, upper parts of `b`, `g`, `R`, then
    /// `scalar`. Indices are one-based.
    pub fn csv_header(n: usize) -> String {
        let mut cols = vec!["t".to_string()];
        for prefix in ["b", "g", "R"] {
            for i in 0..n {
                for j in i..n {
                    cols.push(format!("{prefix}_{}{}", i + 1, j + 1));
                }
            }
        }
        cols.push("scalar".into());
        cols.join(",")
    }

    /// Numbers use the shortest decimal form that reads back to the same
    /// `f64`.
    pub fn to_csv(&self) -> String {
        let n = self.last().b.dim();
        let mut out = Self::csv_header(n);
        out.push('\n');
        for s in &self.samples {
            let mut fields = vec![s.t.to_string()];
            for m in [&s.b, &s.g, &s.ricci] {
                for i in 0..n {
                    for j in i..n {
                        fields.push(m[(i, j)].to_string());
                    }
                }
            }
            fields.push(s.scalar.to_string());
            out.push_str(&fields.join(","));
            out.push('\n');
        }
        out
    }

    pub fn to_json(&self, algebra: &StructureConstants, cfg: &FlowConfig) -> serde_json::Value {
        json!({
            "metadata": {
                "algebra": algebra,
                "config": cfg,
                "termination": self.termination,
                "collapse_time_estimate": self.collapse_time_estimate,
            },
            "samples": self.samples,
        })
    }
}

/// The upper-triangular `M` with `M + Mᵀ = 2r` for symmetric `r`.
pub fn tri_fill(r: &SquareMatrix) -> SquareMatrix {
    let n = r.dim();
    let mut m = SquareMatrix::zeros(n);
    for i in 0..n {
        m[(i, i)] = r[(i, i)];
        for j in i + 1..n {
            m[(i, j)] = r[(i, j)] + r[(j, i)];
        }
    }
    m
}

/// Ricci matrix driving the frame, shifted by `tr R / n` in normalized mode.
pub fn driving_ricci(
    c_base: &StructureConstants,
    b: &SquareMatrix,
    normalized: bool,
) -> Result<SquareMatrix, FlowError> {
    let mut r = ricci_parts(&c_base.transform(b)?).total;
    if normalized {
        let n = r.dim();
        let shift = r.trace() / n as f64;
        for i in 0..n {
            r[(i, i)] -= shift;
        }
    }
    Ok(r)
}

/// `Ḃ = B·M` with `M` the triangular fill of the (possibly normalized) Ricci
/// matrix of the frame `B`.
pub fn rhs(
    c_base: &StructureConstants,
    state: &FlowState,
    normalized: bool,
) -> Result<SquareMatrix, FlowError> {
    let mut db = &state.b * &tri_fill(&driving_ricci(c_base, &state.b, normalized)?);
    // exact zeros for a triangular input; removes roundoff from the product
    db.zero_strict_lower();
    Ok(db)
}

/// `g_ab = Q̃^i_a Q̃^j_b δ_ij`, i.e. `(b⁻¹)ᵀ b⁻¹`.
pub fn metric_in_initial_frame(b: &SquareMatrix) -> Result<SquareMatrix, FlowError> {
    let inv = b.inverse()?;
    Ok((&inv.transpose() * &inv).symmetric_part())
}

/// `Rc_ab = Q̃^i_a Q̃^j_b R_ij` with `Q̃ = b⁻¹`.
pub fn ricci_in_initial_frame(
    b: &SquareMatrix,
    r_frame: &SquareMatrix,
) -> Result<SquareMatrix, FlowError> {
    let inv = b.inverse()?;
    Ok(crate::curvature::lower_index_transform(&inv, r_frame).symmetric_part())
}

fn check_initial_frame(c: &StructureConstants, b0: &SquareMatrix) -> Result<(), FlowError> {
    if b0.dim() != c.dim() {
        return Err(FlowError::InvalidInitialFrame(format!(
            "frame has dimension {}, algebra has {}",
            b0.dim(),
            c.dim()
        )));
    }
    if !b0.is_upper_triangular() {
        return Err(FlowError::InvalidInitialFrame(
            "frame must be upper triangular".into(),
        ));
    }
    if let Some(d) = b0.diag().into_iter().find(|&d| !(d > 0.0)) {
        return Err(FlowError::InvalidInitialFrame(format!(
            "frame diagonal must be positive, found {d}"
        )));
    }
    b0.inverse()?;
    Ok(())
}

/// Integrates the frame from `b0` at `t = 0` toward `cfg.t_end`.
pub fn integrate(
    c_base: &StructureConstants,
    b0: &SquareMatrix,
    cfg: &FlowConfig,
) -> Result<Trajectory, FlowError> {
    cfg.validate()?;
    check_initial_frame(c_base, b0)?;

    let opts = DriveOptions {
        method: cfg.method,
        h0: cfg.h0,
        rel_tol: cfg.rel_tol,
        abs_tol: cfg.abs_tol,
        t_end: cfg.t_end,
        max_steps: cfg.max_steps,
        min_step: cfg.min_step,
        max_step: cfg.max_step.unwrap_or(f64::INFINITY),
    };

    let mut samples: Vec<Sample> = Vec::new();
    let mut collapsed = false;
    let mut sample_error: Option<FlowError> = None;

    let outcome = ode::drive(
        |t, b: &SquareMatrix| {
            if b.diag().iter().any(|&d| !(d > 0.0)) {
                return Err(FlowError::DegenerateFrame);
            }
            let state = FlowState { t, b: b.clone() };
            rhs(c_base, &state, cfg.normalized)
        },
        b0.clone(),
        &opts,
        SquareMatrix::zero_strict_lower,
        |t, b, steps| {
            let blown_up = b.max_abs() > cfg.collapse_threshold;
            let due = steps % cfg.sample_every == 0 || t >= cfg.t_end || blown_up;
            if due {
                match Sample::at(c_base, t, b.clone()) {
                    Ok(s) => samples.push(s),
                    Err(e) => {
                        sample_error = Some(e);
                        return ControlFlow::Break(());
                    }
                }
            }
            if blown_up {
                collapsed = true;
                return ControlFlow::Break(());
            }
            ControlFlow::Continue(())
        },
    );

    if let Some(e) = sample_error {
        if samples.is_empty() {
            return Err(e);
        }
        return Ok(Trajectory {
            samples,
            termination: Termination::StepUnderflow,
            collapse_time_estimate: None,
        });
    }

    let termination = match outcome.reason {
        StopReason::Completed => Termination::Completed,
        StopReason::Halted if collapsed => Termination::Collapsed,
        StopReason::Halted => unreachable!("observer halts only on collapse or sampling failure"),
        // a fixed step that overflows has stepped past the blow-up time
        StopReason::NonFinite => Termination::Collapsed,
        StopReason::StepUnderflow => Termination::StepUnderflow,
        StopReason::MaxSteps => Termination::MaxSteps,
    };

    // keep the final accepted state even when it fell between sampling strides
    if samples.last().is_none_or(|s| s.t < outcome.t) {
        samples.push(Sample::at(c_base, outcome.t, outcome.y)?);
    }

    let collapse_time_estimate = (termination == Termination::Collapsed).then_some(outcome.t);
    Ok(Trajectory {
        samples,
        termination,
        collapse_time_estimate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lie::{from_unimodular3, preset};

    fn algebra(name: &str) -> StructureConstants {
        from_unimodular3(&preset(name).unwrap())
    }

    fn state(b: SquareMatrix) -> FlowState {
        FlowState { t: 0.0, b }
    }

    #[test]
    fn tri_fill_reproduces_twice_r() {
        let r = SquareMatrix::from_rows(&[
            vec![1.0, 0.5, -2.0],
            vec![0.5, 3.0, 0.25],
            vec![-2.0, 0.25, -1.0],
        ])
        .unwrap();
        let m = tri_fill(&r);
        assert!(m.is_upper_triangular());
        assert_eq!(&m + &m.transpose(), r.scale(2.0));
    }

    #[test]
    fn abelian_is_stationary() {
        let c = StructureConstants::zeros(3);
        let b = SquareMatrix::from_rows(&[
            vec![1.0, 2.0, 3.0],
            vec![0.0, 0.5, -1.0],
            vec![0.0, 0.0, 4.0],
        ])
        .unwrap();
        assert_eq!(rhs(&c, &state(b), false).unwrap(), SquareMatrix::zeros(3));
    }

    #[test]
    fn so3_velocity_at_identity() {
        let db = rhs(&algebra("so3"), &state(SquareMatrix::identity(3)), false).unwrap();
        assert!(db.max_abs_diff(&SquareMatrix::identity(3).scale(0.5)) <= 1e-15);
        let db = rhs(&algebra("so3"), &state(SquareMatrix::identity(3)), true).unwrap();
        assert_eq!(db.max_abs(), 0.0);
    }

    #[test]
    fn heisenberg_velocity_on_diagonal_frame() {
        let (f, g, h) = (1.5, 0.7, 2.0);
        let u = g * h / f;
        let db = rhs(
            &algebra("heisenberg"),
            &state(SquareMatrix::from_diag(&[f, g, h])),
            false,
        )
        .unwrap();
        let expect = SquareMatrix::from_diag(&[f * u * u / 2.0, -g * u * u / 2.0, -h * u * u / 2.0]);
        assert!(db.max_abs_diff(&expect) <= 1e-14);
    }

    #[test]
    fn rhs_is_exactly_upper_triangular() {
        let c = from_unimodular3(&crate::lie::Unimodular3Params::new(0.3, -1.1, 0.8, 0.4, -0.6, 0.2));
        let b = SquareMatrix::from_rows(&[
            vec![1.2, 0.3, -0.7],
            vec![0.0, 0.9, 0.4],
            vec![0.0, 0.0, 1.1],
        ])
        .unwrap();
        let db = rhs(&c, &state(b.clone()), false).unwrap();
        assert!(db.is_upper_triangular());
        // symmetric part of B⁻¹Ḃ is the frame Ricci matrix
        let m = &b.inverse().unwrap() * &db;
        let r = ricci_parts(&c.transform(&b).unwrap()).total;
        assert!((&m + &m.transpose()).max_abs_diff(&r.scale(2.0)) <= 1e-12);
    }

    #[test]
    fn metric_of_simple_frames() {
        assert_eq!(
            metric_in_initial_frame(&SquareMatrix::identity(3)).unwrap(),
            SquareMatrix::identity(3)
        );
        let g = metric_in_initial_frame(&SquareMatrix::from_diag(&[2.0, 0.5, 4.0])).unwrap();
        assert!(g.max_abs_diff(&SquareMatrix::from_diag(&[0.25, 4.0, 1.0 / 16.0])) <= 1e-15);
        assert!(metric_in_initial_frame(&SquareMatrix::zeros(2)).is_err());
    }

    #[test]
    fn ricci_reporting_frame_change() {
        let r = SquareMatrix::from_diag(&[1.0, -2.0, 3.0]);
        assert_eq!(
            ricci_in_initial_frame(&SquareMatrix::identity(3), &r).unwrap(),
            r
        );
        let out = ricci_in_initial_frame(&SquareMatrix::from_diag(&[2.0, 0.5, 4.0]), &r).unwrap();
        let expect = SquareMatrix::from_diag(&[0.25, -8.0, 3.0 / 16.0]);
        assert!(out.max_abs_diff(&expect) <= 1e-15);
    }

    #[test]
    fn config_validation() {
        let ok = FlowConfig::default();
        assert!(ok.validate().is_ok());
        for broken in [
            FlowConfig { h0: 0.0, ..ok },
            FlowConfig { t_end: -1.0, ..ok },
            FlowConfig { rel_tol: 0.0, ..ok },
            FlowConfig { abs_tol: f64::NAN, ..ok },
            FlowConfig { min_step: 1.0, ..ok },
            FlowConfig { sample_every: 0, ..ok },
            FlowConfig { max_steps: 0, ..ok },
        ] {
            assert!(matches!(broken.validate(), Err(FlowError::InvalidConfig(_))), "{broken:?}");
        }
    }

    #[test]
    fn initial_frame_checks() {
        let c = algebra("so3");
        let cfg = FlowConfig::default();
        let lower = SquareMatrix::from_rows(&[
            vec![1.0, 0.0, 0.0],
            vec![1.0, 1.0, 0.0],
            vec![0.0, 0.0, 1.0],
        ])
        .unwrap();
        assert!(matches!(integrate(&c, &lower, &cfg), Err(FlowError::InvalidInitialFrame(_))));
        let negative = SquareMatrix::from_diag(&[1.0, -1.0, 1.0]);
        assert!(matches!(integrate(&c, &negative, &cfg), Err(FlowError::InvalidInitialFrame(_))));
        assert!(matches!(
            integrate(&c, &SquareMatrix::identity(2), &cfg),
            Err(FlowError::InvalidInitialFrame(_))
        ));
    }

    #[test]
    fn abelian_trajectory_is_constant() {
        let c = StructureConstants::zeros(3);
        let traj = integrate(&c, &SquareMatrix::identity(3), &FlowConfig::default()).unwrap();
        assert_eq!(traj.termination, Termination::Completed);
        assert_eq!(traj.collapse_time_estimate, None);
        assert_eq!(traj.last().t, 1.0);
        for s in &traj.samples {
            assert_eq!(s.b, SquareMatrix::identity(3));
        }
    }

    #[test]
    fn so3_collapses_near_one() {
        for method in [Method::RkAdaptive, Method::Rk4Fixed] {
            let cfg = FlowConfig {
                method,
                t_end: 2.0,
                ..FlowConfig::default()
            };
            let traj = integrate(&algebra("so3"), &SquareMatrix::identity(3), &cfg).unwrap();
            assert_eq!(traj.termination, Termination::Collapsed, "{method:?}");
            let t_star = traj.collapse_time_estimate.unwrap();
            // a fixed step can only bracket the blow-up to within a couple of steps
            let tol = match method {
                Method::RkAdaptive => 1e-3,
                Method::Rk4Fixed => 2.0 * cfg.h0,
            };
            assert!((t_star - 1.0).abs() <= tol, "{method:?}: {t_star}");
        }
    }

    #[test]
    fn sampling_stride_keeps_endpoints() {
        let cfg = FlowConfig {
            method: Method::Rk4Fixed,
            h0: 0.01,
            sample_every: 7,
            ..FlowConfig::default()
        };
        let traj = integrate(&algebra("heisenberg"), &SquareMatrix::identity(3), &cfg).unwrap();
        assert_eq!(traj.samples[0].t, 0.0);
        assert_eq!(traj.last().t, 1.0);
        assert!(traj.samples.windows(2).all(|w| w[0].t < w[1].t));
        assert_eq!(traj.samples.len(), 100 / 7 + 2);
    }

    #[test]
    fn max_steps_termination() {
        let cfg = FlowConfig {
            max_steps: 5,
            ..FlowConfig::default()
        };
        let traj = integrate(&algebra("heisenberg"), &SquareMatrix::identity(3), &cfg).unwrap();
        assert_eq!(traj.termination, Termination::MaxSteps);
        assert_eq!(traj.samples.len(), 6);
    }

    #[test]
    fn csv_layout() {
        assert_eq!(
            Trajectory::csv_header(2),
            "t,b_11,b_12,b_22,g_11,g_12,g_22,R_11,R_12,R_22,scalar"
        );
        let cfg = FlowConfig {
            method: Method::Rk4Fixed,
            h0: 0.5,
            min_step: 1e-14,
            ..FlowConfig::default()
        };
        let traj = integrate(&StructureConstants::zeros(2), &SquareMatrix::identity(2), &cfg).unwrap();
        let csv = traj.to_csv();
        let lines: Vec<_> = csv.lines().collect();
        assert_eq!(lines.len(), 4);
        assert_eq!(lines[1], "0,1,0,1,1,0,1,0,0,0,0");
        assert_eq!(lines[3], "1,1,0,1,1,0,1,0,0,0,0");
    }
}
