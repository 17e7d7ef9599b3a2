//! The six methods: FETI-1 (dual, projected), P-FETI-1, BDD, FETI-DP (dual,
//! corner-constrained), P-FETI-DP, and BDDC.
//!
//! Every preconditioner is exposed as a composition of cached
//! factorizations; dense assemblies exist only as diagnostics for the
//! theorem checks in [`crate::spectral`] and the tests.

pub mod bdd;
pub mod bddc;
pub mod feti1;
pub mod fetidp;

pub use bdd::{bdd_build, Bdd};
pub use bddc::{bddc_build, Bddc, CoarseBasis};
pub use feti1::{feti1_build, Feti1System, QChoice};
pub use fetidp::{fetidp_build, pfetidp_apply, FetiDp};
