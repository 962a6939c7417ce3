//! Finite-element solver and a-priori bound checker for parabolic problems
//! with anisotropic diffusion, a drift term and a nonlinear Robin-type law on
//! part of the boundary of a box.

pub mod bounds;
pub mod domain;
pub mod error;
pub mod exec;
pub mod fem;
pub mod harness;
pub mod problem;
pub mod quadrature;
pub mod sobolev;
pub mod solver;

pub use error::{Error, Result};
pub use exec::Exec;
