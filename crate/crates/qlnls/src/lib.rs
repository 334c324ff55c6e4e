//! Spectral toolkit for the control and Cauchy theory of Hamiltonian
//! quasi-linear Schrodinger equations on the circle.

pub mod cli;
pub mod error;
pub mod hamiltonian;
pub mod hum;
pub mod nash_moser;
pub mod reduction;
pub mod sampling;
pub mod solver;
pub mod spectral;

pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;
