//! Porous-medium flow with pressure-modulated growth on uniform grids.
//!
//! The crate provides an implicit resolvent solver, time stepping by the
//! implicit Euler scheme, stability certificates with respect to the power-law
//! exponent, and Bayesian inversion of that exponent from noisy observations.

// NaN-rejecting guards are written as negated comparisons on purpose.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod checksum;
pub mod error;
pub mod exec;
pub mod field;
pub mod inference;
pub mod linalg;
pub mod model;
pub mod evolution;
pub mod resolvent;
pub mod stability;

pub use error::{Error, Result};
pub use exec::Exec;
pub use field::{Boundary, GridField, GridSpec, Window};
pub use model::{ConstitutiveModel, GrowthKind, GrowthLaw};
pub use resolvent::{solve_resolvent, ResolventConfig, ResolventReport};
