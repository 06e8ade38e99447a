//! Operator-theoretic renormalization group for toy atom-field Hamiltonians.
//!
//! Kernels of Wick-ordered operators are discretised on a Chebyshev grid in
//! the field energy and a graded Gauss rule in the photon momentum. The
//! smooth Feshbach map and the renormalization transformation act on these
//! kernels; the iterated flow yields the ground-state energy and eigenvector,
//! which are checked against exact diagonalisation of the same discrete
//! model.

pub mod cli;
pub mod config;
pub mod error;
pub mod feshbach;
pub mod fock;
pub mod grid;
pub mod initial;
pub mod kernel_space;
pub mod rg;
pub mod smooth;
pub mod solver;
pub mod wick;

pub use error::{Error, Result};
pub use num_complex::Complex64;
