//! Numerical laboratory for perturbed Siegel disks of quadratic polynomials.
pub mod cfrac;
pub mod cli;
pub mod dynamics;
pub mod error;
pub mod fatou;
pub mod density;
pub mod geometry;
pub mod series;

pub use error::{Error, Result};
