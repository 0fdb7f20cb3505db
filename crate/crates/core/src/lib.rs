//! Fractional powers of commuting quaternionic vector operators
//! `T = e1 a1(x1) d/dx1 + e2 a2(x2) d/dx2 + e3 a3(x3) d/dx3` on boxes with
//! homogeneous Dirichlet data.
//!
//! The pipeline: parse and check the coefficients ([`coeff`]), discretize
//! the operator on a uniform grid ([`grid`]), solve with the pseudo-resolvent
//! and apply the S-resolvents ([`resolvent`]), integrate along the imaginary
//! line to obtain `P_alpha(T)` ([`frac`]), and evolve the divergence-form
//! equation ([`evolve`]). [`oracle`] holds independent reference
//! computations.

#![allow(clippy::needless_range_loop)]

pub mod coeff;
pub mod error;
pub mod evolve;
pub mod frac;
pub mod grid;
pub mod linalg;
pub mod oracle;
pub mod quad;
pub mod quat;
pub mod resolvent;

pub use coeff::{check_conditions, poincare_constant, CoefficientProfile, ConditionReport, Expr};
pub use error::{Error, Result};
pub use evolve::{EvolutionConfig, EvolutionTrace, Generator, Scheme};
pub use frac::{FracApplyResult, FracPower, FracPowerOperator, QuadratureSpec, ResolventForm};
pub use grid::{BoxDomain, Grid, QuatField, RealField, VectorOperator};
pub use quat::{qlog, qmul, qpow, slice_decompose, ImaginaryUnit, Quaternion, SliceDecomposition};
pub use resolvent::{ResolventWorkspace, SolverConfig, SolverMethod};
