//! Positive ground states of generalized quasilinear Schrödinger equations with
//! critical growth, computed through the dual transform `v = G(u)` and the
//! Nehari manifold.

pub mod critical;
pub mod error;
pub mod functional;
pub mod quadrature;
pub mod report;
pub mod solver;
pub mod grid;
pub mod nehari;
pub mod nonlinearity;
pub mod transform;
pub mod verify;

pub use error::{Error, Result};
pub use report::{PropertyEntry, PropertyReport};
pub use transform::{check_g_assumptions, TransformKind, TransformSpec};
