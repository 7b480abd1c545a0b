//! Ground states of classical particles interacting through pair potentials
//! whose Fourier transform is nonnegative and vanishes beyond a cutoff `K0`.

pub mod energy;
pub mod error;
pub mod fixtures;
pub mod numerics;
pub mod lattice;
pub mod optimizer;
pub mod spectral;
pub mod verify;

pub use error::{Error, Result};
