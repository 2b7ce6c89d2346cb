//! Uniform staggered (MAC) grid over a box or channel.
//!
//! Layout: scalars live at cell centers, the `a`-component of a vector field
//! on `a`-faces, and the `c`-component of a curl on `c`-edges (edges parallel
//! to axis `c`, sitting on nodes in the two other axes). In two dimensions
//! the only curl component is the scalar vorticity on nodes.
//!
//! Along a wall axis faces and nodes include both boundary positions
//! (`n + 1` of them); along a periodic axis there are `n` and index `n`
//! wraps to `0`.
//!
//! Every quadrature in the crate uses the same *corner rule*: each cell is
//! split into `2^dims` sub-cells, one per cell corner, and each sub-cell is
//! a quadrature point located at its own midpoint. At a corner every face
//! and edge quantity of the owning cell that touches that corner is
//! available, so all vector components are collocated and no quadrature
//! point ever sits on a wall.

use alloc::format;

use crate::error::{Error, Result};
use crate::geometry::Domain;

/// Minimal number of cells along a wall axis.
pub const MIN_WALL_CELLS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    domain: Domain,
    dims: usize,
    cells: [usize; 3],
    spacing: [f64; 3],
    origin: [f64; 3],
    walls: [bool; 3],
}

/// Flat index helper for an array with the given extents (x fastest).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Shape(pub [usize; 3]);

impl Shape {
    #[inline(always)]
    pub fn idx(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.0[0] * (j + self.0[1] * k)
    }

    #[inline(always)]
    pub fn stride(&self, a: usize) -> usize {
        match a {
            0 => 1,
            1 => self.0[0],
            _ => self.0[0] * self.0[1],
        }
    }

    pub fn len(&self) -> usize {
        self.0.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Indices of the staggered unknowns seen from one cell corner.
#[derive(Debug, Clone, Copy)]
pub struct CornerIdx {
    /// Flat index into each face component.
    pub face: [usize; 3],
    /// Flat index into each edge component (`[0]` holds the node index in 2D).
    pub edge: [usize; 3],
}

impl Grid {
    /// Grid covering the whole domain.
    pub fn new(domain: Domain, cells: [usize; 3]) -> Result<Self> {
        let dims = domain.dims();
        let ext = domain.extents();
        let mut cells = cells;
        if dims == 2 {
            cells[2] = 1;
        }
        let mut spacing = [1.0; 3];
        for a in 0..dims {
            if cells[a] == 0 {
                return Err(Error::Argument(format!("axis {a} needs at least one cell")));
            }
            if domain.is_wall(a) && cells[a] < MIN_WALL_CELLS {
                return Err(Error::Argument(format!(
                    "wall axis {a} needs at least {MIN_WALL_CELLS} cells, got {}",
                    cells[a]
                )));
            }
            spacing[a] = ext[a] / cells[a] as f64;
        }
        Ok(Self { domain, dims, cells, spacing, origin: [0.0; 3], walls: domain.walls() })
    }

    /// A sub-box of the domain on which fields vanish at every patch face.
    ///
    /// Distances (and therefore weights) are still measured to the walls of
    /// `domain`; the patch only restricts where fields may be supported.
    pub fn patch(domain: Domain, origin: [f64; 3], extent: [f64; 3], cells: [usize; 3]) -> Result<Self> {
        let dims = domain.dims();
        let ext = domain.extents();
        let mut g = Self::new(domain, cells)?;
        for a in 0..dims {
            if g.cells[a] < MIN_WALL_CELLS {
                return Err(Error::Argument(format!("patch axis {a} needs at least {MIN_WALL_CELLS} cells")));
            }
            let hi = origin[a] + extent[a];
            if !(extent[a] > 0.0) || origin[a] < 0.0 || (domain.is_wall(a) && hi > ext[a]) {
                return Err(Error::Domain(format!("patch does not fit inside the domain along axis {a}")));
            }
            g.spacing[a] = extent[a] / g.cells[a] as f64;
            g.origin[a] = origin[a];
            g.walls[a] = true;
        }
        Ok(g)
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }
    pub fn dims(&self) -> usize {
        self.dims
    }
    pub fn cells(&self) -> [usize; 3] {
        self.cells
    }
    pub fn spacing(&self) -> [f64; 3] {
        self.spacing
    }
    pub fn origin(&self) -> [f64; 3] {
        self.origin
    }
    /// Axes on which the grid's own boundary is a Dirichlet wall.
    pub fn walls(&self) -> [bool; 3] {
        self.walls
    }
    pub fn is_wall(&self, a: usize) -> bool {
        self.walls[a]
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing.iter().take(self.dims).product()
    }

    pub fn n_cells(&self) -> usize {
        self.cells.iter().product()
    }

    pub fn corners_per_cell(&self) -> usize {
        1 << self.dims
    }

    pub fn n_corners(&self) -> usize {
        self.n_cells() * self.corners_per_cell()
    }

    pub fn corner_volume(&self) -> f64 {
        self.cell_volume() / self.corners_per_cell() as f64
    }

    /// Number of curl components: 3 in 3D, 1 (scalar vorticity) in 2D.
    pub fn curl_components(&self) -> usize {
        if self.dims == 3 {
            3
        } else {
            1
        }
    }

    /// Faces or nodes along axis `a`.
    #[inline]
    pub fn n_staggered(&self, a: usize) -> usize {
        self.cells[a] + self.walls[a] as usize
    }

    pub fn cell_shape(&self) -> Shape {
        Shape(self.cells)
    }

    pub fn face_shape(&self, a: usize) -> Shape {
        let mut s = self.cells;
        s[a] = self.n_staggered(a);
        Shape(s)
    }

    /// Shape of curl component `c`; in 2D component 0 is the node field.
    pub fn edge_shape(&self, c: usize) -> Shape {
        let mut s = self.cells;
        if self.dims == 2 {
            s[0] = self.n_staggered(0);
            s[1] = self.n_staggered(1);
            return Shape(s);
        }
        for a in 0..3 {
            if a != c {
                s[a] = self.n_staggered(a);
            }
        }
        Shape(s)
    }

    /// Wrap a staggered index `i + 1` across a periodic boundary.
    #[inline(always)]
    pub fn wrap(&self, a: usize, i: usize) -> usize {
        if !self.walls[a] && i == self.cells[a] {
            0
        } else {
            i
        }
    }

    pub fn cell_center(&self, c: [usize; 3]) -> [f64; 3] {
        let mut x = [0.0; 3];
        for a in 0..3 {
            x[a] = self.origin[a] + (c[a] as f64 + 0.5) * self.spacing[a];
        }
        x
    }

    /// Midpoint of the sub-cell of `cell` adjacent to corner `b`.
    pub fn corner_point(&self, cell: [usize; 3], b: [usize; 3]) -> [f64; 3] {
        let mut x = [0.0; 3];
        for a in 0..3 {
            x[a] = self.origin[a] + (cell[a] as f64 + 0.25 + 0.5 * b[a] as f64) * self.spacing[a];
        }
        x
    }

    /// Corner bits for corner number `q` in `0..corners_per_cell()`.
    #[inline(always)]
    pub fn corner_bits(&self, q: usize) -> [usize; 3] {
        [q & 1, (q >> 1) & 1, if self.dims == 3 { (q >> 2) & 1 } else { 0 }]
    }

    /// Staggered indices touching corner `b` of `cell`.
    #[inline(always)]
    pub fn corner_idx(&self, cell: [usize; 3], b: [usize; 3]) -> CornerIdx {
        let [i, j, k] = cell;
        let ni = self.wrap(0, i + b[0]);
        let nj = self.wrap(1, j + b[1]);
        let nk = if self.dims == 3 { self.wrap(2, k + b[2]) } else { k };
        let face = [
            self.face_shape(0).idx(ni, j, k),
            self.face_shape(1).idx(i, nj, k),
            if self.dims == 3 { self.face_shape(2).idx(i, j, nk) } else { 0 },
        ];
        let edge = if self.dims == 3 {
            [
                self.edge_shape(0).idx(i, nj, nk),
                self.edge_shape(1).idx(ni, j, nk),
                self.edge_shape(2).idx(ni, nj, k),
            ]
        } else {
            [self.edge_shape(0).idx(ni, nj, k), 0, 0]
        };
        CornerIdx { face, edge }
    }

    /// Visit every (cell, corner) pair in a fixed order; `q` is the flat corner index.
    #[inline]
    pub fn for_each_corner(&self, mut f: impl FnMut(usize, [usize; 3], [usize; 3])) {
        let cpc = self.corners_per_cell();
        let mut q = 0;
        for k in 0..self.cells[2] {
            for j in 0..self.cells[1] {
                for i in 0..self.cells[0] {
                    for c in 0..cpc {
                        f(q, [i, j, k], self.corner_bits(c));
                        q += 1;
                    }
                }
            }
        }
    }

    /// Position of an `a`-face.
    pub fn face_center(&self, a: usize, idx: [usize; 3]) -> [f64; 3] {
        let mut x = self.cell_center(idx);
        x[a] = self.origin[a] + idx[a] as f64 * self.spacing[a];
        x
    }

    /// Position of a curl sample (edge midpoint in 3D, node in 2D).
    pub fn edge_center(&self, c: usize, idx: [usize; 3]) -> [f64; 3] {
        let mut x = [0.0; 3];
        for a in 0..3 {
            let staggered = if self.dims == 2 { a < 2 } else { a != c };
            let off = if staggered { 0.0 } else { 0.5 };
            x[a] = self.origin[a] + (idx[a] as f64 + off) * self.spacing[a];
        }
        x
    }

    /// Is this face a boundary face of a wall axis (value pinned to zero)?
    #[inline]
    pub fn is_wall_face(&self, a: usize, ia: usize) -> bool {
        self.walls[a] && (ia == 0 || ia == self.cells[a])
    }
}

/// Visit `[i, j, k]` over a shape in storage order (loop form of [`indices`]).
#[inline(always)]
pub fn for_each_index(shape: Shape, mut f: impl FnMut([usize; 3])) {
    let [nx, ny, nz] = shape.0;
    for k in 0..nz {
        for j in 0..ny {
            for i in 0..nx {
                f([i, j, k]);
            }
        }
    }
}

/// Iterate `[i, j, k]` over a shape in storage order.
pub fn indices(shape: Shape) -> impl Iterator<Item = [usize; 3]> {
    let [nx, ny, nz] = shape.0;
    (0..nz).flat_map(move |k| (0..ny).flat_map(move |j| (0..nx).map(move |i| [i, j, k])))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spacing_is_extent_over_cells() {
        let g = Grid::new(Domain::channel(2.0, 1.0, 1.0).unwrap(), [8, 4, 16]).unwrap();
        assert_eq!(g.spacing(), [0.25, 0.25, 1.0 / 16.0]);
        assert_eq!(g.face_shape(2).0, [8, 4, 17]);
        assert_eq!(g.face_shape(0).0, [8, 4, 16]);
        assert_eq!(g.edge_shape(2).0, [8, 4, 16]);
        assert_eq!(g.edge_shape(0).0, [8, 4, 17]);
    }

    #[test]
    fn too_few_wall_cells() {
        assert!(Grid::new(Domain::channel(1.0, 1.0, 1.0).unwrap(), [2, 2, 3]).is_err());
        assert!(Grid::new(Domain::channel(1.0, 1.0, 1.0).unwrap(), [1, 1, 4]).is_ok());
    }

    #[test]
    fn corner_points_are_interior() {
        let d = Domain::box3d(1.0, 1.0, 1.0).unwrap();
        let g = Grid::new(d, [4, 4, 4]).unwrap();
        let mut n = 0;
        g.for_each_corner(|_, c, b| {
            let x = g.corner_point(c, b);
            assert!(d.distance(x).unwrap() >= 0.25 * 0.25 - 1e-15);
            n += 1;
        });
        assert_eq!(n, g.n_corners());
    }
}
