//! Self-similar near-wall patches for concentration sequences.

use alloc::format;
use alloc::vec::Vec;

use crate::diff::divergence;
use crate::error::{Error, Result};
use crate::family::TestFunctionFamily;
use crate::field::VectorField;
use crate::geometry::Domain;
use crate::grid::Grid;
use crate::projection::{Projector, DEFAULT_LERAY_TOL};

/// Patches touching the lower walls at the origin, shrinking by
/// `2^-bits_per_level` per level with a fixed number of cells per axis.
///
/// Scaling by a power of two is exact in floating point, so level `k` is an
/// exact dilation of level 0 and the family fields on it are exact rescalings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PatchLevels {
    pub domain: Domain,
    pub bits_per_level: u32,
    pub cells: usize,
}

impl Default for PatchLevels {
    fn default() -> Self {
        Self { domain: Domain::channel(1.0, 1.0, 1.0).expect("unit channel"), bits_per_level: 6, cells: 8 }
    }
}

impl PatchLevels {
    pub fn side(&self, level: u32) -> f64 {
        let ext = self.domain.extents();
        let s0 = 0.5 * ext[..self.domain.dims()].iter().cloned().fold(f64::INFINITY, f64::min);
        s0 * libm::exp2(-((self.bits_per_level * level) as f64))
    }

    pub fn grid(&self, level: u32) -> Result<Grid> {
        if self.domain.wall_axes().next().is_none() {
            return Err(Error::Domain("concentration patches need a wall".into()));
        }
        if self.bits_per_level == 0 || self.bits_per_level * level > 900 {
            return Err(Error::Argument(format!("unusable patch scale 2^-{} at level {level}", self.bits_per_level)));
        }
        let s = self.side(level);
        Grid::patch(self.domain, [0.0; 3], [s; 3], [self.cells; 3])
    }

    pub fn n_cells(&self) -> usize {
        self.cells.pow(self.domain.dims() as u32)
    }

    /// Leray-projected family fields at each of `family.concentration_levels` levels.
    pub fn fields(&self, family: &TestFunctionFamily) -> Result<Vec<Vec<VectorField>>> {
        (0..family.concentration_levels)
            .map(|k| {
                let g = self.grid(k)?;
                let pr = Projector::new(&g);
                (0..family.count)
                    .map(|i| {
                        let u = family.vector_field(&g, i);
                        // the divergence grows like 1/side; keep the tolerance relative
                        let tol = DEFAULT_LERAY_TOL * divergence(&u).max_abs().max(f64::MIN_POSITIVE);
                        Ok(pr.project(&u, tol)?.0)
                    })
                    .collect()
            })
            .collect()
    }

    /// Per-level supremum of `ratio` over the family; fields with a zero
    /// denominator (reported as `Error::Argument`) are skipped.
    pub fn sup_levels(&self, family: &TestFunctionFamily, ratio: impl Fn(&VectorField) -> Result<f64>) -> Result<Vec<f64>> {
        self.fields(family)?
            .iter()
            .map(|level| {
                let mut best = 0.0f64;
                for u in level {
                    match ratio(u) {
                        Ok(v) => best = best.max(v),
                        Err(Error::Argument(_)) => {}
                        Err(e) => return Err(e),
                    }
                }
                Ok(best)
            })
            .collect()
    }
}

/// Grids of the default layout on `domain` for `levels` levels.
pub fn concentrating_patches(domain: Domain, levels: u32) -> Result<Vec<Grid>> {
    let pl = PatchLevels { domain, ..PatchLevels::default() };
    (0..levels).map(|k| pl.grid(k)).collect()
}
