//! Density functionals, Hartree energies, kinetic and exchange-correlation
//! envelopes, and ε-optimised LDA error certificates for electron densities.

pub mod bounds;
pub mod certificate;
pub mod coulomb;
pub mod error;
pub mod field;
pub mod geom;
pub mod kinetic;
pub mod quad;
pub mod summation;
pub mod tiling;

pub use error::{Error, Result};
pub use field::{Density, Family, FunctionalSet, GridSpec, ScalarField};
