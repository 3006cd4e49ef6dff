//! Open XXZ spin-½ chain with generic integrable boundaries, treated by the
//! modified algebraic Bethe ansatz.
//!
//! The crate builds every object of the construction as a dense numerical
//! operator (R- and K-matrices, double-row monodromy, transfer matrix,
//! dynamical gauge operators, Bethe vectors) and checks the algebraic
//! identities between them as operator identities. A root solver for the
//! modified Bethe equations and a spectrum matcher close the loop against
//! brute-force diagonalization.

pub mod boundary;
pub mod error;
pub mod gauge;
pub mod lattice;
pub mod maba;
pub mod scalars;
pub mod solver;
pub mod transfer;
pub mod verify;

pub use error::{MabaError, Result};
pub use scalars::{BoundaryParams, Chain, DynCoeff, Factors, GaugeFrame, ModelParams, Sampler, Structural, C};
