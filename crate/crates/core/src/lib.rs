//! Colored-noise stochastic Schrodinger dynamics on finite-dimensional
//! Hilbert spaces, their white-noise limits, and the GKSL master equations
//! they unravel.
//!
//! The crate is `no_std` (it needs `alloc`). Parallel ensembles, file
//! formats and the command line live in the `qhomog` crate.

#![no_std]
extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod analysis;
pub mod error;
pub mod hilbert;
pub mod homogenize;
pub mod lindblad;
pub mod models;
pub mod noise;
pub mod sde;

pub use error::{Error, Result};
pub use hilbert::{CMatrix, DensityMatrix, HermitianOperator, StateVector, C64};
pub use models::{ModelSpec, NoiseChannel, Regime};
pub use noise::{NoiseKind, RngStream};
