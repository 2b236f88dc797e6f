//! Spectral laboratory for the Zakharov system on anisotropic tori.

pub mod counting;
pub mod dyadic;
pub mod error;
pub mod estimates;
pub mod fit;
pub mod grid;
pub mod inflation;
pub mod quad;
pub mod resonance;
pub mod solver;
pub mod torus;

pub use error::{Error, Result};
pub use torus::{DualLattice, FourierField, TorusSpec};
