//! Numerical core for the rotational Smagorinsky model with a wall-degenerate
//! mixing length: weighted spaces, the curl-curl p-Laplacian, the convective
//! form, an implicit time integrator and a laboratory of weighted
//! inequalities.
//!
//! The crate is `no_std` (it needs `alloc`) and single-threaded; every
//! reduction runs in a fixed order so results are bit-reproducible.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod cg;
pub mod conditions;
pub mod diff;
pub mod error;
pub mod family;
pub mod field;
pub mod geometry;
pub mod grid;
pub mod lab;
pub mod norms;
pub mod operators;
pub mod projection;
pub mod solver;
mod spectral;
pub mod weight;

pub use error::{Error, Result};
pub use field::{CurlField, ScalarField, VectorField};
pub use geometry::{Domain, DomainKind, MixingLength, MixingVariant};
pub use grid::Grid;
pub use projection::{leray_project, Projector};
