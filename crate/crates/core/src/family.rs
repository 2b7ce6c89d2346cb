//! Deterministic families of compactly supported test fields.
//!
//! Fields are generated in coordinates relative to the grid's own box, so
//! the same family fills a whole domain or a small near-wall patch. Every
//! field vanishes within one cell of each wall of the grid.

use alloc::vec::Vec;
use core::f64::consts::PI;

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use crate::field::{ScalarField, VectorField};
use crate::grid::Grid;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FamilyKind {
    RandomBumps,
    /// Random bumps placed on a sequence of shrinking near-wall patches by the estimators.
    NearWallConcentrating,
    TensorPolynomial,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TestFunctionFamily {
    pub kind: FamilyKind,
    pub seed: u64,
    pub count: usize,
    /// Highest modulation wavenumber per bump.
    pub band_limit: u32,
    pub concentration_levels: u32,
}

pub(crate) struct Uniform(ChaCha8Rng);

impl Uniform {
    pub(crate) fn new(seed: u64, stream: u64) -> Self {
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        r.set_stream(stream);
        Self(r)
    }

    /// Uniform in `[0, 1)`.
    pub(crate) fn next(&mut self) -> f64 {
        (self.0.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub(crate) fn range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next()
    }

    pub(crate) fn below(&mut self, n: u32) -> u32 {
        (self.next() * n as f64) as u32
    }
}

#[derive(Debug, Clone)]
struct Bump {
    center: [f64; 3],
    radius: [f64; 3],
    freq: [f64; 3],
    phase: [f64; 3],
    amp: [f64; 3],
}

/// `(1 - t^2)^3` on `|t| < 1`: C^2 with compact support.
fn profile(t: f64) -> f64 {
    if t.abs() >= 1.0 {
        0.0
    } else {
        let s = 1.0 - t * t;
        s * s * s
    }
}

impl Bump {
    fn eval(&self, t: [f64; 3], dims: usize) -> f64 {
        let mut v = 1.0;
        for a in 0..dims {
            let s = (t[a] - self.center[a]) / self.radius[a];
            v *= profile(s);
            if v == 0.0 {
                return 0.0;
            }
            v *= libm::cos(self.freq[a] * s + self.phase[a]);
        }
        v
    }
}

impl TestFunctionFamily {
    pub fn random_bumps(seed: u64, count: usize) -> Self {
        Self { kind: FamilyKind::RandomBumps, seed, count, band_limit: 2, concentration_levels: 0 }
    }

    pub fn near_wall_concentrating(seed: u64, count: usize, levels: u32) -> Self {
        Self { kind: FamilyKind::NearWallConcentrating, seed, count, band_limit: 1, concentration_levels: levels }
    }

    pub fn tensor_polynomial(seed: u64, count: usize) -> Self {
        Self { kind: FamilyKind::TensorPolynomial, seed, count, band_limit: 0, concentration_levels: 0 }
    }

    fn bumps(&self, grid: &Grid, index: usize) -> Vec<Bump> {
        let mut rng = Uniform::new(self.seed, index as u64);
        let dims = grid.dims();
        let cells = grid.cells();
        let n = 1 + rng.below(3) as usize;
        (0..n)
            .map(|_| {
                let mut b = Bump { center: [0.5; 3], radius: [1.0; 3], freq: [0.0; 3], phase: [0.0; 3], amp: [0.0; 3] };
                for a in 0..dims {
                    // relative coordinates: one cell is 1/cells[a]; keep a cell of clearance
                    let cell = 1.0 / cells[a] as f64;
                    let rmax = (0.5 - cell).max(cell);
                    let rmin = (2.0 * cell).min(rmax);
                    let r = rng.range(rmin.max(0.5 * rmax), rmax);
                    b.radius[a] = r;
                    b.center[a] = rng.range(cell + r, (1.0 - cell - r).max(cell + r));
                    b.freq[a] = PI * rng.below(self.band_limit + 1) as f64;
                    b.phase[a] = rng.range(0.0, 2.0 * PI);
                    b.amp[a] = rng.range(-1.0, 1.0);
                }
                b
            })
            .collect()
    }

    fn relative(grid: &Grid, x: [f64; 3]) -> [f64; 3] {
        let o = grid.origin();
        let h = grid.spacing();
        let c = grid.cells();
        let mut t = [0.0; 3];
        for a in 0..grid.dims() {
            t[a] = (x[a] - o[a]) / (h[a] * c[a] as f64);
        }
        t
    }

    /// Polynomial `prod_a (t_a (1 - t_a))^m` on the cell-clearance box, zero outside.
    fn poly(grid: &Grid, t: [f64; 3], m: i32) -> f64 {
        let mut v = 1.0;
        for a in 0..grid.dims() {
            let cell = 1.0 / grid.cells()[a] as f64;
            let s = (t[a] - cell) / (1.0 - 2.0 * cell);
            if !(s > 0.0 && s < 1.0) {
                return 0.0;
            }
            v *= libm::pow(s * (1.0 - s), m as f64);
        }
        v
    }

    /// Sample number `index` as a vector field (not projected).
    pub fn vector_field(&self, grid: &Grid, index: usize) -> VectorField {
        let dims = grid.dims();
        match self.kind {
            FamilyKind::TensorPolynomial => {
                let mut rng = Uniform::new(self.seed, index as u64);
                let m = 2 + (index % 3) as i32;
                let amp = [rng.range(-1.0, 1.0), rng.range(-1.0, 1.0), rng.range(-1.0, 1.0)];
                let shift = [rng.range(0.0, 1.0), rng.range(0.0, 1.0), rng.range(0.0, 1.0)];
                VectorField::from_fn(grid, |x| {
                    let t = Self::relative(grid, x);
                    let base = Self::poly(grid, t, m);
                    let mut v = [0.0; 3];
                    for a in 0..dims {
                        v[a] = amp[a] * base * (t[(a + 1) % dims] - shift[a]);
                    }
                    v
                })
            }
            _ => {
                let bumps = self.bumps(grid, index);
                VectorField::from_fn(grid, |x| {
                    let t = Self::relative(grid, x);
                    let mut v = [0.0; 3];
                    for b in &bumps {
                        let s = b.eval(t, dims);
                        for a in 0..dims {
                            v[a] += b.amp[a] * s;
                        }
                    }
                    v
                })
            }
        }
    }

    /// Sample number `index` as a cell-centered scalar.
    pub fn scalar_field(&self, grid: &Grid, index: usize) -> ScalarField {
        let dims = grid.dims();
        match self.kind {
            FamilyKind::TensorPolynomial => {
                let m = 2 + (index % 3) as i32;
                ScalarField::from_fn(grid, |x| Self::poly(grid, Self::relative(grid, x), m))
            }
            _ => {
                let bumps = self.bumps(grid, index);
                ScalarField::from_fn(grid, |x| {
                    let t = Self::relative(grid, x);
                    bumps.iter().map(|b| b.amp[0] * b.eval(t, dims)).sum()
                })
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Domain;
    use crate::grid::indices;

    #[test]
    fn deterministic_per_seed() {
        let g = Grid::new(Domain::channel(1.0, 1.0, 1.0).unwrap(), [6, 6, 8]).unwrap();
        let f = TestFunctionFamily::random_bumps(11, 4);
        assert_eq!(f.vector_field(&g, 2), f.vector_field(&g, 2));
        assert_ne!(f.vector_field(&g, 2), f.vector_field(&g, 3));
        let f2 = TestFunctionFamily::random_bumps(12, 4);
        assert_ne!(f.vector_field(&g, 2), f2.vector_field(&g, 2));
    }

    #[test]
    fn support_keeps_a_cell_from_the_walls() {
        let g = Grid::new(Domain::box3d(1.0, 1.0, 1.0).unwrap(), [8, 8, 8]).unwrap();
        for kind in [FamilyKind::RandomBumps, FamilyKind::TensorPolynomial] {
            let fam = TestFunctionFamily { kind, ..TestFunctionFamily::random_bumps(5, 10) };
            for i in 0..10 {
                let s = fam.scalar_field(&g, i);
                let cs = g.cell_shape();
                let mut nonzero = false;
                for c in indices(cs) {
                    let v = s.values()[cs.idx(c[0], c[1], c[2])];
                    nonzero |= v != 0.0;
                    if c.iter().any(|&i| i == 0 || i == 7) {
                        assert_eq!(v, 0.0);
                    }
                }
                assert!(nonzero);
            }
        }
    }
}
