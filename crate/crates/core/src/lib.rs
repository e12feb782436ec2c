//! A finite-dimensional laboratory for the GW⁰ approximation on the
//! imaginary frequency axis.
//!
//! The pipeline: a lattice model and its mean field ([`model`]), an exact
//! diagonalization reference ([`fock`]), RPA screening ([`screening`]), the
//! self-energy map ([`self_energy`]) and the GW⁰ fixed-point solver
//! ([`solver`]). [`config`], [`pipeline`] and [`io`] drive runs from text
//! configs and write plot-ready tracks.

pub mod checks;
pub mod config;
pub mod error;
pub mod fock;
pub mod freq;
pub mod io;
pub mod kernel;
pub mod linalg;
pub mod model;
pub mod pipeline;
pub mod screening;
pub mod self_energy;
pub mod solver;

pub use error::{GwError, Result};
