//! Numerical toolkit for a time-multiplexed nonunitary quantum walk with
//! sublattice symmetry: Floquet operators, quasienergy spectra, Bloch and
//! non-Bloch winding numbers, closed-form edge modes, edge-state transfer
//! classification and parameter sweeps.

pub mod edge;
pub mod eigen;
pub mod error;
pub mod plot;
pub mod selftest;
pub mod spectra;
pub mod sweep;
pub mod table;
pub mod topology;
pub mod walk;

pub use error::{Error, Result};

pub type C64 = num_complex::Complex64;
