//! Ricci flow of left-invariant metrics on Lie groups.
//!
//! A left-invariant metric is an inner product on the Lie algebra, and its
//! curvature is a polynomial in the structure constants. Following the metric
//! through a moving orthonormal frame turns the flow into an ODE for an
//! upper-triangular matrix, integrated in [`flow`]. The three-dimensional
//! unimodular family and its closed-form curvature live in [`catalog3d`].

// Tensor formulas read best as explicit index loops, and `!(x > 0.0)` is the
// idiom used throughout to reject NaN along with nonpositive values.
#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod catalog3d;
pub mod cli;
pub mod curvature;
pub mod flow;
pub mod lie;
pub mod matrix;
pub mod ode;

pub use curvature::{
    connection, lower_index_transform, ricci_combined, ricci_contraction, ricci_parts,
    ricci_via_connection, Connection, RicciDecomposition,
};
pub use flow::{
    integrate, metric_in_initial_frame, ricci_in_initial_frame, rhs, FlowConfig, FlowError,
    FlowState, Method, Sample, Termination, Trajectory,
};
pub use lie::{from_unimodular3, preset, LieError, StructureConstants, Unimodular3Params};
pub use matrix::{factor_tri_orth, symmetric_eigen, MatrixError, SquareMatrix, TriOrthFactors};
pub use catalog3d::{
    case3_reduce, classify, closed_form_ricci_case1, closed_form_ricci_case2, diagonalize_r1,
    CaseLabel, CatalogError,
};
