//! Discrete Leray projection onto divergence-free MAC fields.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::cg::{pcg, CgOutcome};
use crate::diff::{divergence, gradient};
use crate::error::{Error, Result};
use crate::field::{ScalarField, VectorField};
use crate::grid::Grid;
use crate::spectral::PoissonInverse;

pub const DEFAULT_LERAY_TOL: f64 = 1e-10;

/// Reusable projector: the spectral preconditioner is built once per grid.
#[derive(Debug, Clone)]
pub struct Projector {
    grid: Grid,
    inverse: PoissonInverse,
}

impl Projector {
    pub fn new(grid: &Grid) -> Self {
        Self { grid: *grid, inverse: PoissonInverse::new(grid) }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// Solve `div grad phi = rhs` (mean of `rhs` removed), max-norm residual `<= tol`.
    pub fn solve_poisson(&self, rhs: &ScalarField, tol: f64) -> Result<(ScalarField, CgOutcome)> {
        if !(tol > 0.0) {
            return Err(Error::Argument(format!("tolerance must be positive, got {tol}")));
        }
        let g = self.grid;
        let mean = rhs.mean();
        // -L is positive semidefinite; solve -L phi = -(rhs - mean)
        let b: Vec<f64> = rhs.values().iter().map(|v| -(v - mean)).collect();
        let mut x = vec![0.0; b.len()];
        let out = pcg(
            "pressure Poisson solve",
            |v, o| {
                let phi = ScalarField::from_values(&g, v.to_vec()).expect("length");
                let l = divergence(&gradient(&phi));
                for (oi, li) in o.iter_mut().zip(l.values()) {
                    *oi = -li;
                }
            },
            |r, z| {
                z.copy_from_slice(r);
                self.inverse.solve(z);
                z.iter_mut().for_each(|v| *v = -*v);
            },
            &b,
            &mut x,
            tol,
            10 * b.len(),
        )?;
        Ok((ScalarField::from_values(&g, x)?, out))
    }

    /// `u - grad phi` with `div grad phi = div u`; returns the projected field and `phi`.
    pub fn project(&self, u: &VectorField, tol: f64) -> Result<(VectorField, ScalarField)> {
        if u.grid() != &self.grid {
            return Err(Error::Argument("field lives on a different grid than the projector".into()));
        }
        let (phi, _) = self.solve_poisson(&divergence(u), tol)?;
        let mut out = u.clone();
        out.axpy(-1.0, &gradient(&phi));
        Ok((out, phi))
    }
}

/// One-shot Leray projection; prefer [`Projector`] when projecting repeatedly.
pub fn leray_project(u: &VectorField, tol: f64) -> Result<(VectorField, ScalarField)> {
    Projector::new(u.grid()).project(u, tol)
}
