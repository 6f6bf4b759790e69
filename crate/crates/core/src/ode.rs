//! Explicit Runge-Kutta steppers for matrix-valued ODEs `Y' = F(t, Y)`.
//!
//! Two methods: classical fixed-step RK4 and the Dormand-Prince 5(4)
//! embedded pair with local extrapolation. [`drive`] runs either one with a
//! caller-supplied projection (applied to every accepted state) and an
//! observer that may stop the run early.

use std::ops::ControlFlow;

use serde::{Deserialize, Serialize};

use crate::matrix::SquareMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Rk4Fixed,
    RkAdaptive,
}

const SAFETY: f64 = 0.9;
const MIN_FACTOR: f64 = 0.2;
const MAX_FACTOR: f64 = 5.0;

// Dormand-Prince tableau
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
// fifth-order weights minus fourth-order weights
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

fn combine(y: &SquareMatrix, h: f64, terms: &[(f64, &SquareMatrix)]) -> SquareMatrix {
    terms
        .iter()
        .fold(y.clone(), |acc, &(w, k)| if w == 0.0 { acc } else { acc.add_scaled(h * w, k) })
}

/// One classical RK4 step.
pub fn rk4_step<F, E>(f: &mut F, t: f64, y: &SquareMatrix, h: f64) -> Result<SquareMatrix, E>
where
    F: FnMut(f64, &SquareMatrix) -> Result<SquareMatrix, E>,
{
    let k1 = f(t, y)?;
    let k2 = f(t + 0.5 * h, &y.add_scaled(0.5 * h, &k1))?;
    let k3 = f(t + 0.5 * h, &y.add_scaled(0.5 * h, &k2))?;
    let k4 = f(t + h, &y.add_scaled(h, &k3))?;
    Ok(combine(
        y,
        h,
        &[(1.0 / 6.0, &k1), (1.0 / 3.0, &k2), (1.0 / 3.0, &k3), (1.0 / 6.0, &k4)],
    ))
}

/// Fifth-order solution and the embedded error estimate of one step.
pub struct EmbeddedStep {
    pub y: SquareMatrix,
    pub err: SquareMatrix,
}

pub fn dopri5_step<F, E>(f: &mut F, t: f64, y: &SquareMatrix, h: f64) -> Result<EmbeddedStep, E>
where
    F: FnMut(f64, &SquareMatrix) -> Result<SquareMatrix, E>,
{
    let k1 = f(t, y)?;
    let k2 = f(t + C2 * h, &combine(y, h, &[(A21, &k1)]))?;
    let k3 = f(t + C3 * h, &combine(y, h, &[(A31, &k1), (A32, &k2)]))?;
    let k4 = f(t + C4 * h, &combine(y, h, &[(A41, &k1), (A42, &k2), (A43, &k3)]))?;
    let k5 = f(
        t + C5 * h,
        &combine(y, h, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)]),
    )?;
    let k6 = f(
        t + h,
        &combine(y, h, &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)]),
    )?;
    let y_new = combine(y, h, &[(B1, &k1), (B3, &k3), (B4, &k4), (B5, &k5), (B6, &k6)]);
    let k7 = f(t + h, &y_new)?;
    let zero = SquareMatrix::zeros(y.dim());
    let err = combine(
        &zero,
        h,
        &[(E1, &k1), (E3, &k3), (E4, &k4), (E5, &k5), (E6, &k6), (E7, &k7)],
    );
    Ok(EmbeddedStep { y: y_new, err })
}

/// `max |e_ij| / (abs_tol + rel_tol·|y_ij|)`, using the larger of the old and
/// new magnitudes. Non-finite inputs give `+∞`.
pub fn error_norm(
    err: &SquareMatrix,
    y_old: &SquareMatrix,
    y_new: &SquareMatrix,
    abs_tol: f64,
    rel_tol: f64,
) -> f64 {
    let mut worst: f64 = 0.0;
    for ((e, a), b) in err.as_slice().iter().zip(y_old.as_slice()).zip(y_new.as_slice()) {
        let scale = abs_tol + rel_tol * a.abs().max(b.abs());
        let r = e.abs() / scale;
        if !r.is_finite() {
            return f64::INFINITY;
        }
        worst = worst.max(r);
    }
    worst
}

/// Step-size multiplier for an error norm, clamped to `[0.2, 5]`.
pub fn step_factor(norm: f64) -> f64 {
    if norm == 0.0 {
        return MAX_FACTOR;
    }
    if !norm.is_finite() {
        return MIN_FACTOR;
    }
    (SAFETY * norm.powf(-0.2)).clamp(MIN_FACTOR, MAX_FACTOR)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriveOptions {
    pub method: Method,
    pub h0: f64,
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub t_end: f64,
    pub max_steps: u64,
    pub min_step: f64,
    pub max_step: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    Completed,
    /// The observer asked to stop.
    Halted,
    StepUnderflow,
    MaxSteps,
    /// A fixed step produced a non-finite state; the last finite one is kept.
    NonFinite,
}

#[derive(Debug, Clone)]
pub struct DriveOutcome {
    pub t: f64,
    pub y: SquareMatrix,
    pub steps: u64,
    pub reason: StopReason,
}

/// Integrates from `t = 0` to `opts.t_end`.
///
/// `observe(t, y, steps)` sees the initial state (with `steps == 0`) and every
/// accepted state after `project` has been applied. A failing right-hand side
/// evaluation halves the step; once the step falls below `opts.min_step` the
/// run stops with [`StopReason::StepUnderflow`].
pub fn drive<F, E, P, O>(
    mut f: F,
    y0: SquareMatrix,
    opts: &DriveOptions,
    mut project: P,
    mut observe: O,
) -> DriveOutcome
where
    F: FnMut(f64, &SquareMatrix) -> Result<SquareMatrix, E>,
    P: FnMut(&mut SquareMatrix),
    O: FnMut(f64, &SquareMatrix, u64) -> ControlFlow<()>,
{
    let mut t = 0.0;
    let mut y = y0;
    let mut steps = 0u64;
    let mut h = opts.h0.min(opts.max_step);

    let finish = |t, y, steps, reason| DriveOutcome { t, y, steps, reason };

    if observe(t, &y, steps).is_break() {
        return finish(t, y, steps, StopReason::Halted);
    }

    while t < opts.t_end {
        if steps >= opts.max_steps {
            return finish(t, y, steps, StopReason::MaxSteps);
        }
        let remaining = opts.t_end - t;
        // absorb a sliver left over from accumulated roundoff into this step
        let last = remaining <= h * (1.0 + 1e-6);
        let h_try = if last { remaining } else { h };

        let (mut y_new, next_h) = match opts.method {
            Method::Rk4Fixed => match rk4_step(&mut f, t, &y, h_try) {
                Ok(y_new) => {
                    if !y_new.is_finite() {
                        return finish(t, y, steps, StopReason::NonFinite);
                    }
                    (y_new, opts.h0.min(opts.max_step))
                }
                Err(_) => {
                    h = 0.5 * h_try;
                    if h < opts.min_step {
                        return finish(t, y, steps, StopReason::StepUnderflow);
                    }
                    continue;
                }
            },
            Method::RkAdaptive => match dopri5_step(&mut f, t, &y, h_try) {
                Ok(step) => {
                    let norm = error_norm(&step.err, &y, &step.y, opts.abs_tol, opts.rel_tol);
                    let proposed = (h_try * step_factor(norm)).min(opts.max_step);
                    if norm > 1.0 || !step.y.is_finite() {
                        h = proposed;
                        if h < opts.min_step {
                            return finish(t, y, steps, StopReason::StepUnderflow);
                        }
                        continue;
                    }
                    // a clipped final step must not shrink the controller's step
                    (step.y, if last { h.max(proposed) } else { proposed })
                }
                Err(_) => {
                    h = 0.5 * h_try;
                    if h < opts.min_step {
                        return finish(t, y, steps, StopReason::StepUnderflow);
                    }
                    continue;
                }
            },
        };

        project(&mut y_new);
        t = if last { opts.t_end } else { t + h_try };
        y = y_new;
        steps += 1;
        h = next_h;

        if observe(t, &y, steps).is_break() {
            return finish(t, y, steps, StopReason::Halted);
        }
        if !last && h < opts.min_step {
            return finish(t, y, steps, StopReason::StepUnderflow);
        }
    }
    finish(t, y, steps, StopReason::Completed)
}
