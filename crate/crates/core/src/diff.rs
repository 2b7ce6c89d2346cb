//! Discrete curl, divergence and gradients on the MAC grid.
//!
//! The tangential no-slip condition enters only through the curl: on a wall
//! node the one-sided difference uses the odd reflection `u_ghost = -u`, i.e.
//! the tangential velocity vanishes on the wall itself.

use alloc::vec;
use alloc::vec::Vec;

use crate::field::{CurlField, ScalarField, VectorField};
use crate::grid::{indices, Grid, Shape};

/// Terms of `d u_b / d x_a` at a position `p` that is a node along `a`
/// and a face along `b`, emitted as `(b, flat face index, coefficient)`.
#[inline(always)]
pub(crate) fn d_node_terms(g: &Grid, a: usize, b: usize, p: [usize; 3], sign: f64, f: &mut impl FnMut(usize, usize, f64)) {
    if g.is_wall_face(b, p[b]) {
        return;
    }
    let shape = g.face_shape(b);
    let n = g.cells()[a];
    let h = g.spacing()[a];
    let at = |ia: usize| {
        let mut q = p;
        q[a] = ia;
        shape.idx(q[0], q[1], q[2])
    };
    let pa = p[a];
    if g.is_wall(a) {
        if pa == 0 {
            f(b, at(0), sign * 2.0 / h);
        } else if pa == n {
            f(b, at(n - 1), -sign * 2.0 / h);
        } else {
            f(b, at(pa), sign / h);
            f(b, at(pa - 1), -sign / h);
        }
    } else if n > 1 {
        f(b, at(pa), sign / h);
        f(b, at((pa + n - 1) % n), -sign / h);
    }
}

/// Axes `(a, b)` with `curl_c = d_a u_b - d_b u_a`.
#[inline(always)]
fn cyclic(c: usize) -> (usize, usize) {
    ((c + 1) % 3, (c + 2) % 3)
}

/// The `(storage slot, geometric component)` pairs of the curl.
fn curl_slots(g: &Grid) -> Vec<(usize, usize)> {
    if g.dims() == 3 {
        vec![(0, 0), (1, 1), (2, 2)]
    } else {
        vec![(0, 2)]
    }
}

/// `d u_b / d x_a` on the positions of a curl component with shape `es`,
/// emitted as `(edge index, face index of u_b, coefficient)` in storage order.
#[inline(always)]
fn node_diff_terms(g: &Grid, a: usize, b: usize, es: Shape, mut f: impl FnMut(usize, usize, f64)) {
    let fs = g.face_shape(b);
    let st = [1, fs.0[0], fs.0[0] * fs.0[1]];
    let n = g.cells()[a];
    let inv = 1.0 / g.spacing()[a];
    let (wall_a, wall_b) = (g.is_wall(a), g.is_wall(b));
    let nb = g.cells()[b];
    let sa = st[a];
    let [ex, ey, ez] = es.0;
    let mut e = 0;
    for k in 0..ez {
        for j in 0..ey {
            for i in 0..ex {
                let p = [i, j, k];
                let pb = p[b];
                if !(wall_b && (pb == 0 || pb == nb)) {
                    let pa = p[a];
                    let base = i * st[0] + j * st[1] + k * st[2] - pa * sa;
                    if wall_a {
                        if pa == 0 {
                            f(e, base, 2.0 * inv);
                        } else if pa == n {
                            f(e, base + (n - 1) * sa, -2.0 * inv);
                        } else {
                            f(e, base + pa * sa, inv);
                            f(e, base + (pa - 1) * sa, -inv);
                        }
                    } else if n > 1 {
                        f(e, base + pa * sa, inv);
                        f(e, base + ((pa + n - 1) % n) * sa, -inv);
                    }
                }
                e += 1;
            }
        }
    }
}

/// Discrete curl; exact for affine fields away from walls.
pub fn curl(u: &VectorField) -> CurlField {
    let g = *u.grid();
    let mut w = CurlField::zeros(&g);
    for (slot, c) in curl_slots(&g) {
        let (a, b) = cyclic(c);
        let es = g.edge_shape(slot);
        let out = &mut w.components_mut()[slot];
        let ub = u.component(b);
        node_diff_terms(&g, a, b, es, |e, fi, coef| out[e] += coef * ub[fi]);
        let ua = u.component(a);
        node_diff_terms(&g, b, a, es, |e, fi, coef| out[e] -= coef * ua[fi]);
    }
    w
}

/// Plain transpose of the curl stencil: maps edge values to face values.
///
/// If `e` holds edge *masses* times a curl-space quantity, dividing the
/// result by the cell volume yields the Riesz representer in the face L2
/// inner product.
pub fn curl_transpose(g: &Grid, e: &[Vec<f64>]) -> VectorField {
    let mut out: Vec<Vec<f64>> = (0..g.dims()).map(|a| vec![0.0; g.face_shape(a).len()]).collect();
    for (slot, c) in curl_slots(g) {
        let (a, b) = cyclic(c);
        let es = g.edge_shape(slot);
        let src = &e[slot];
        let ob = &mut out[b];
        node_diff_terms(g, a, b, es, |ei, fi, coef| ob[fi] += coef * src[ei]);
        let oa = &mut out[a];
        node_diff_terms(g, b, a, es, |ei, fi, coef| oa[fi] -= coef * src[ei]);
    }
    VectorField::from_components(g, out).expect("layout matches")
}

/// Cell-centered divergence.
pub fn divergence(u: &VectorField) -> ScalarField {
    let g = *u.grid();
    let mut d = ScalarField::zeros(&g);
    let cs = g.cell_shape();
    let [nx, ny, nz] = cs.0;
    let h = g.spacing();
    let vals = d.values_mut();
    for a in 0..g.dims() {
        let fs = g.face_shape(a);
        let sf = fs.stride(a);
        let n = g.cells()[a];
        // periodic: the face above the last cell is face 0
        let back = if g.is_wall(a) { 0 } else { n * sf };
        let comp = u.component(a);
        let inv = 1.0 / h[a];
        for k in 0..nz {
            for j in 0..ny {
                let cb = cs.idx(0, j, k);
                let fb = fs.idx(0, j, k);
                let row = &mut vals[cb..cb + nx];
                for (i, v) in row.iter_mut().enumerate() {
                    let ia = [i, j, k][a];
                    let lo = fb + i;
                    let hi = if ia + 1 == n { lo + sf - back } else { lo + sf };
                    *v += (comp[hi] - comp[lo]) * inv;
                }
            }
        }
    }
    d
}

/// Face gradient of a cell scalar with homogeneous Neumann walls
/// (boundary faces are zero); the negative adjoint of [`divergence`].
pub fn gradient(phi: &ScalarField) -> VectorField {
    let g = *phi.grid();
    let mut u = VectorField::zeros(&g);
    let cs = g.cell_shape();
    let h = g.spacing();
    let vals = phi.values();
    for a in 0..g.dims() {
        let fs = g.face_shape(a);
        let [nx, ny, nz] = fs.0;
        let sc = cs.stride(a);
        let n = g.cells()[a];
        let wall = g.is_wall(a);
        let out = u.component_mut(a);
        let inv = 1.0 / h[a];
        for k in 0..nz {
            for j in 0..ny {
                let fb = fs.idx(0, j, k);
                for i in 0..nx {
                    let p = [i, j, k];
                    let ia = p[a];
                    if wall && (ia == 0 || ia == n) {
                        continue;
                    }
                    let hi = cs.idx(i, j, k);
                    let lo = if ia == 0 { hi + (n - 1) * sc } else { hi - sc };
                    out[fb + i] = (vals[hi] - vals[lo]) * inv;
                }
            }
        }
    }
    u
}

/// Gradient of a cell scalar with homogeneous Dirichlet walls, sampled on
/// faces including wall faces (odd reflection across the wall).
pub fn gradient_dirichlet(f: &ScalarField) -> Vec<Vec<f64>> {
    let g = *f.grid();
    let cs = g.cell_shape();
    let h = g.spacing();
    let vals = f.values();
    (0..g.dims())
        .map(|a| {
            let fs = g.face_shape(a);
            let n = g.cells()[a];
            let mut out = vec![0.0; fs.len()];
            for p in indices(fs) {
                let cell = |ia: usize| {
                    let mut q = p;
                    q[a] = ia;
                    vals[cs.idx(q[0], q[1], q[2])]
                };
                let v = if g.is_wall(a) {
                    if p[a] == 0 {
                        2.0 * cell(0) / h[a]
                    } else if p[a] == n {
                        -2.0 * cell(n - 1) / h[a]
                    } else {
                        (cell(p[a]) - cell(p[a] - 1)) / h[a]
                    }
                } else {
                    (cell(p[a]) - cell((p[a] + n - 1) % n)) / h[a]
                };
                out[fs.idx(p[0], p[1], p[2])] = v;
            }
            out
        })
        .collect()
}

/// Full velocity gradient `G[a][b] = d u_a / d x_b` at a corner.
///
/// Diagonal entries are the cell-centered differences, off-diagonal entries
/// the node differences on the edge touching the corner, so that
/// `curl = G[b][a] - G[a][b]` holds exactly at every corner.
pub fn gradient_at_corner(u: &VectorField, cell: [usize; 3], bits: [usize; 3]) -> [[f64; 3]; 3] {
    let g = u.grid();
    let dims = g.dims();
    let h = g.spacing();
    let mut out = [[0.0; 3]; 3];
    for a in 0..dims {
        let fs = g.face_shape(a);
        let mut up = cell;
        up[a] = g.wrap(a, cell[a] + 1);
        out[a][a] = (u.component(a)[fs.idx(up[0], up[1], up[2])] - u.component(a)[fs.idx(cell[0], cell[1], cell[2])]) / h[a];
        for b in 0..dims {
            if b == a {
                continue;
            }
            let mut p = cell;
            p[a] = g.wrap(a, cell[a] + bits[a]);
            p[b] = g.wrap(b, cell[b] + bits[b]);
            let mut s = 0.0;
            d_node_terms(g, b, a, p, 1.0, &mut |comp, fi, coef| s += coef * u.component(comp)[fi]);
            out[a][b] = s;
        }
    }
    out
}
