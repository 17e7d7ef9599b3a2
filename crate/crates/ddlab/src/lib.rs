//! Iterative substructuring preconditioners on desk-scale elliptic model
//! problems.
//!
//! The crate builds a 2D Laplace model problem on the unit square (plus a
//! hand-checkable 1D bar), partitions it into substructures, condenses each
//! substructure to its interface Schur complement, and assembles the coupling
//! algebra (embedding `R`, jump `B`, weights `D_P`, averaging `E`, scaled
//! jump `B_D`) on top of which six methods are implemented:
//!
//! * FETI-1 with the natural coarse problem and a Dirichlet preconditioner,
//! * P-FETI-1, its primal counterpart,
//! * BDD (balancing Neumann-Neumann),
//! * FETI-DP with corner coarse degrees of freedom,
//! * P-FETI-DP, its primal counterpart,
//! * BDDC with explicit energy-minimal coarse basis functions.
//!
//! P-FETI-DP and BDDC are deliberately kept as two independent code paths so
//! that their equality can be verified rather than assumed; the same holds for
//! P-FETI-1 versus BDD with the Dirichlet choice of the FETI-1 scaling matrix.
//! The [`spectral`] module certifies the eigenvalue relations between the
//! primal and dual preconditioned operators.
//!
//! See the `examples/` directory for runnable walkthroughs of each
//! capability, and the `ddlab` binary for the flag-driven experiment runner.

pub mod cli;
pub mod krylov;
pub mod linalg;
pub mod model;
pub mod operators;
pub mod preconditioners;
pub mod spectral;

mod error;

pub use error::{Error, Result};
