//! Staggered field containers.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::grid::{indices, Grid};

/// Face-centered vector field (MAC layout), one array per spatial component.
///
/// Boundary faces of wall axes are stored and always hold zero.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField {
    grid: Grid,
    comps: Vec<Vec<f64>>,
}

/// Curl samples: edges in 3D (three components), nodes in 2D (one component).
#[derive(Debug, Clone, PartialEq)]
pub struct CurlField {
    grid: Grid,
    comps: Vec<Vec<f64>>,
}

/// Cell-centered scalar.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    grid: Grid,
    values: Vec<f64>,
}

impl VectorField {
    pub fn zeros(grid: &Grid) -> Self {
        let comps = (0..grid.dims()).map(|a| vec![0.0; grid.face_shape(a).len()]).collect();
        Self { grid: *grid, comps }
    }

    /// Sample `f` at face centers; wall faces are left at zero.
    pub fn from_fn(grid: &Grid, f: impl Fn([f64; 3]) -> [f64; 3]) -> Self {
        let mut u = Self::zeros(grid);
        for a in 0..grid.dims() {
            let shape = grid.face_shape(a);
            for idx in indices(shape) {
                if grid.is_wall_face(a, idx[a]) {
                    continue;
                }
                u.comps[a][shape.idx(idx[0], idx[1], idx[2])] = f(grid.face_center(a, idx))[a];
            }
        }
        u
    }

    pub fn from_components(grid: &Grid, comps: Vec<Vec<f64>>) -> Result<Self> {
        if comps.len() != grid.dims() {
            return Err(Error::Argument("component count does not match grid dimension".into()));
        }
        for (a, c) in comps.iter().enumerate() {
            if c.len() != grid.face_shape(a).len() {
                return Err(Error::Argument("component length does not match the staggered layout".into()));
            }
        }
        let mut u = Self { grid: *grid, comps };
        u.clear_wall_faces();
        Ok(u)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn component(&self, a: usize) -> &[f64] {
        &self.comps[a]
    }

    pub fn component_mut(&mut self, a: usize) -> &mut [f64] {
        &mut self.comps[a]
    }

    pub fn components(&self) -> &[Vec<f64>] {
        &self.comps
    }

    pub(crate) fn clear_wall_faces(&mut self) {
        let g = self.grid;
        for a in 0..g.dims() {
            if !g.is_wall(a) {
                continue;
            }
            let shape = g.face_shape(a);
            let [nx, ny, nz] = shape.0;
            let n = g.cells()[a];
            for ia in [0, n] {
                let mut lo = [0usize; 3];
                let mut hi = [nx, ny, nz];
                lo[a] = ia;
                hi[a] = ia + 1;
                for k in lo[2]..hi[2] {
                    for j in lo[1]..hi[1] {
                        for i in lo[0]..hi[0] {
                            self.comps[a][shape.idx(i, j, k)] = 0.0;
                        }
                    }
                }
            }
        }
    }

    /// L2 inner product; each interior face carries one cell volume.
    pub fn dot(&self, other: &Self) -> f64 {
        let s: f64 = self
            .comps
            .iter()
            .zip(&other.comps)
            .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>())
            .sum();
        s * self.grid.cell_volume()
    }

    pub fn norm_l2(&self) -> f64 {
        libm::sqrt(self.dot(self))
    }

    pub fn max_abs(&self) -> f64 {
        self.comps.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.comps.iter().flatten().all(|v| v.is_finite())
    }

    pub fn scale(&mut self, s: f64) {
        self.comps.iter_mut().flatten().for_each(|v| *v *= s);
    }

    pub fn scaled(&self, s: f64) -> Self {
        let mut u = self.clone();
        u.scale(s);
        u
    }

    /// `self += s * other`
    pub fn axpy(&mut self, s: f64, other: &Self) {
        for (a, b) in self.comps.iter_mut().zip(&other.comps) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += s * y;
            }
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        let mut u = self.clone();
        u.axpy(-1.0, other);
        u
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut u = self.clone();
        u.axpy(1.0, other);
        u
    }

    pub fn n_values(&self) -> usize {
        self.comps.iter().map(Vec::len).sum()
    }
}

impl CurlField {
    pub fn zeros(grid: &Grid) -> Self {
        let comps = (0..grid.curl_components())
            .map(|c| {
                let cc = if grid.dims() == 2 { 0 } else { c };
                vec![0.0; grid.edge_shape(cc).len()]
            })
            .collect();
        Self { grid: *grid, comps }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn component(&self, c: usize) -> &[f64] {
        &self.comps[c]
    }

    pub fn components(&self) -> &[Vec<f64>] {
        &self.comps
    }

    pub(crate) fn components_mut(&mut self) -> &mut [Vec<f64>] {
        &mut self.comps
    }

    pub fn max_abs(&self) -> f64 {
        self.comps.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// Curl vector at a corner (only the first `curl_components` entries are meaningful).
    #[inline(always)]
    pub(crate) fn at_corner(&self, edge: &[usize; 3]) -> [f64; 3] {
        if self.comps.len() == 3 {
            [self.comps[0][edge[0]], self.comps[1][edge[1]], self.comps[2][edge[2]]]
        } else {
            [self.comps[0][edge[0]], 0.0, 0.0]
        }
    }
}

impl ScalarField {
    pub fn zeros(grid: &Grid) -> Self {
        Self { grid: *grid, values: vec![0.0; grid.n_cells()] }
    }

    pub fn from_fn(grid: &Grid, f: impl Fn([f64; 3]) -> f64) -> Self {
        let values = indices(grid.cell_shape()).map(|c| f(grid.cell_center(c))).collect();
        Self { grid: *grid, values }
    }

    pub fn from_values(grid: &Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.n_cells() {
            return Err(Error::Argument("scalar length does not match cell count".into()));
        }
        Ok(Self { grid: *grid, values })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    pub fn dot(&self, other: &Self) -> f64 {
        self.values.iter().zip(&other.values).map(|(a, b)| a * b).sum::<f64>() * self.grid.cell_volume()
    }

    pub fn scale(&mut self, s: f64) {
        self.values.iter_mut().for_each(|v| *v *= s);
    }

    pub fn axpy(&mut self, s: f64, other: &Self) {
        for (x, y) in self.values.iter_mut().zip(&other.values) {
            *x += s * y;
        }
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }
}
