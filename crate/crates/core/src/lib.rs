//! Periodic Prandtl boundary layers for slip-forced steady flows on simply
//! connected domains.
//!
//! The boundary-layer profile is written in von Mises variables `(s, psi)`,
//! where `s` is arc length along the boundary and `psi` the rescaled stream
//! function. The unknown `Q = q^2 - omega0^2 q_e^2` solves the periodic
//! nonlinear heat equation
//!
//! ```text
//! d_s Q - q d_psi^2 Q = 0,   q = sqrt(omega0^2 q_e^2 + Q),
//! Q(s, 0) = f(s)^2 - omega0^2 q_e(s)^2,   Q(s, inf) = 0,
//! ```
//!
//! and the eddy vorticity `omega0` is the unique constant for which an
//! s-periodic solution exists (Feynman-Lagerstrom selection).
//!
//! Modules, bottom-up:
//!
//! - [`geometry`]: boundary data for disks, ellipses and tabulated slips, plus
//!   curvilinear-coordinate identity checks.
//! - [`discretization`]: grids, fields, periodic DFT, psi stencils, quadrature,
//!   and the arc-length to uniform-speed resampling.
//! - [`linear_solver`]: the linear periodic problem solved mode by mode.
//! - [`iteration`]: the nonlinearity, the vorticity update and the Picard loop.
//! - [`norms`]: weighted Sobolev norms and residual diagnostics.
//! - [`oracle`]: an independent marching/shooting solver used for validation.
//! - [`run`]: configuration, run modes and output files.

// `!(x > 0.0)` is used on purpose so that NaN fails the check too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod discretization;
pub mod error;
pub mod geometry;
pub mod iteration;
pub mod linear_solver;
pub mod norms;
pub mod oracle;
pub mod run;

pub use discretization::{Field, Grid};
pub use error::{Error, Result};
pub use geometry::BoundaryGeometry;
pub use iteration::{
    picard_solve, IterationTrace, PicardOptions, PicardSolution, SlipForcing, VorticityState,
};
pub use linear_solver::{solve_linear, LinearProblem, TMap};
pub use norms::{xkm_norm, NormSpec};
