//! Eigenvalues and resonances of Gaussian random matrices coupled to the
//! discrete Laplacian on the half-line.
//!
//! The coupled operator is reduced to a finite-range Jacobi perturbation of the
//! free Jacobi operator. Its eigenvalues and resonances are the nonzero zeros of
//! the reversed perturbation determinant `L*`, generated by the Geronimo–Case
//! recursion. The crate samples these configurations, checks the algebraic
//! identities and Jacobians behind their joint law, and evaluates that law in
//! closed form.
//!
//! Module map:
//!
//! - [`rng_ensembles`]: seeded substreams, scalar samplers, Gaussian ensembles,
//!   the tridiagonal beta model and Householder reduction.
//! - [`operator_model`]: coupled Jacobi coefficients and truncated-operator spectra.
//! - [`poly`] and [`gc_engine`]: polynomial arithmetic and the recursion with its inverse.
//! - [`spectra`]: roots, conjugate canonicalization, labels, the Joukowsky map and
//!   the admissible-configuration predicate.
//! - [`identities_checks`]: zero/coefficient identities and finite-difference Jacobians.
//! - [`density_model`]: closed-form joint densities and their constants.
//! - [`experiments`]: Monte Carlo runs, KS tests, reports.
//! - [`cli_io`]: command implementations behind the `jres` binary.

pub mod cli_io;
pub mod density_model;
pub mod error;
pub mod experiments;
pub mod gc_engine;
pub mod identities_checks;
pub mod operator_model;
pub mod poly;
pub mod rng_ensembles;
pub mod spectra;

pub use error::{Error, Result};
pub use num_complex::Complex64;
