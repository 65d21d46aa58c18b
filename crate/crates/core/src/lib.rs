//! Renormalized Anderson Hamiltonian on the 1D and 2D torus: white-noise
//! sampling and renormalization, low spectrum and ground-state gauge, nodal
//! geometry, quasiconformal factorization of eigenfunctions, and spectral
//! inequality and null control for the 1D parabolic problem.

// `!(x > 0.0)` guards reject NaN along with the out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod besov;
pub mod constants;
pub mod control;
pub mod eigen;
pub mod error;
pub mod gauge;
pub mod grid;
pub mod io;
pub mod nodal;
pub mod noise;
pub mod operator;
pub mod qc;
pub mod quad;
pub mod resolvent;
pub mod verify;

pub use error::{Error, Result};
