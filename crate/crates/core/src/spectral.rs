//! Exact separable inverse of the cell-centered Laplacian.
//!
//! Along a periodic axis the 1D three-point Laplacian is diagonalized by
//! the discrete Fourier basis, along a wall axis (homogeneous Neumann,
//! zero flux through the boundary face) by the DCT-II basis. Power-of-two
//! axes go through a radix-2 FFT; other lengths use the dense orthonormal
//! matrix. Either way the summation order is fixed.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::grid::{Grid, Shape};

#[derive(Debug, Clone)]
pub(crate) struct AxisBasis {
    n: usize,
    /// `q[i * n + k]`: mode `k` at point `i`.
    q: Vec<f64>,
    lambda: Vec<f64>,
    fast: Option<FastAxis>,
}

#[derive(Debug, Clone)]
enum FastAxis {
    Periodic(Fft),
    /// DCT-II by reordering the input and one complex FFT of length `n`.
    Neumann { fft: Fft, shift: Vec<(f64, f64)> },
}

/// Radix-2 complex FFT applied to `n` rows of `b` lines at once, so every
/// butterfly runs over a contiguous row.
#[derive(Debug, Clone)]
struct Fft {
    n: usize,
    /// `exp(-2 pi i k / n)` for `k < n/2`.
    tw: Vec<(f64, f64)>,
    rev: Vec<usize>,
}

fn two_rows(v: &mut [f64], lo: usize, hi: usize, b: usize) -> (&mut [f64], &mut [f64]) {
    let (x, y) = v.split_at_mut(hi * b);
    (&mut x[lo * b..(lo + 1) * b], &mut y[..b])
}

impl Fft {
    fn new(n: usize) -> Self {
        let tw = (0..n / 2)
            .map(|k| {
                let t = -2.0 * PI * k as f64 / n as f64;
                (libm::cos(t), libm::sin(t))
            })
            .collect();
        let bits = n.trailing_zeros();
        let rev = (0..n).map(|i| if bits == 0 { 0 } else { i.reverse_bits() >> (usize::BITS - bits) }).collect();
        Self { n, tw, rev }
    }

    /// Forward, or unnormalized inverse, transform along the row index.
    fn run(&self, re: &mut [f64], im: &mut [f64], b: usize, inverse: bool) {
        let n = self.n;
        for i in 0..n {
            let j = self.rev[i];
            if j > i {
                let (x, y) = two_rows(re, i, j, b);
                x.swap_with_slice(y);
                let (x, y) = two_rows(im, i, j, b);
                x.swap_with_slice(y);
            }
        }
        let mut len = 2;
        while len <= n {
            let half = len / 2;
            let step = n / len;
            for start in (0..n).step_by(len) {
                for k in 0..half {
                    let (wr, wi) = self.tw[k * step];
                    let wi = if inverse { -wi } else { wi };
                    let (ra, rb) = two_rows(re, start + k, start + k + half, b);
                    let (ia, ib) = two_rows(im, start + k, start + k + half, b);
                    for (((ar, br), ai), bi) in ra.iter_mut().zip(rb.iter_mut()).zip(ia.iter_mut()).zip(ib.iter_mut()) {
                        let xr = *br * wr - *bi * wi;
                        let xi = *br * wi + *bi * wr;
                        *br = *ar - xr;
                        *bi = *ai - xi;
                        *ar += xr;
                        *ai += xi;
                    }
                }
            }
            len *= 2;
        }
    }
}

impl FastAxis {
    fn for_basis(n: usize, periodic: bool) -> Option<Self> {
        if n < 4 || !n.is_power_of_two() {
            return None;
        }
        Some(if periodic {
            FastAxis::Periodic(Fft::new(n))
        } else {
            let shift = (0..n)
                .map(|k| {
                    let t = PI * k as f64 / (2 * n) as f64;
                    (libm::cos(t), libm::sin(t))
                })
                .collect();
            FastAxis::Neumann { fft: Fft::new(n), shift }
        })
    }

    /// `x` holds `n` rows of `b` lines; applies `Q^T` when `forward`, else `Q`.
    fn apply(&self, x: &mut [f64], b: usize, forward: bool) {
        let n = x.len() / b;
        let nf = n as f64;
        let mut re = vec![0.0; n * b];
        let mut im = vec![0.0; n * b];
        let row = |r: usize| r * b..(r + 1) * b;
        let scale_into = |dst: &mut [f64], src: &[f64], c: f64| {
            for (d, s) in dst.iter_mut().zip(src) {
                *d = c * s;
            }
        };
        match self {
            FastAxis::Periodic(fft) => {
                let c0 = libm::sqrt(1.0 / nf);
                let c1 = libm::sqrt(2.0 / nf);
                if forward {
                    re.copy_from_slice(x);
                    fft.run(&mut re, &mut im, b, false);
                    scale_into(&mut x[row(0)], &re[row(0)], c0);
                    for k in 1..n / 2 {
                        scale_into(&mut x[row(2 * k - 1)], &re[row(k)], c1);
                        scale_into(&mut x[row(2 * k)], &im[row(k)], -c1);
                    }
                    scale_into(&mut x[row(n - 1)], &re[row(n / 2)], c0);
                } else {
                    let s = libm::sqrt(nf / 2.0);
                    scale_into(&mut re[row(0)], &x[row(0)], libm::sqrt(nf));
                    scale_into(&mut re[row(n / 2)], &x[row(n - 1)], libm::sqrt(nf));
                    for k in 1..n / 2 {
                        scale_into(&mut re[row(k)], &x[row(2 * k - 1)], s);
                        scale_into(&mut re[row(n - k)], &x[row(2 * k - 1)], s);
                        scale_into(&mut im[row(k)], &x[row(2 * k)], -s);
                        scale_into(&mut im[row(n - k)], &x[row(2 * k)], s);
                    }
                    fft.run(&mut re, &mut im, b, true);
                    scale_into(x, &re, 1.0 / nf);
                }
            }
            FastAxis::Neumann { fft, shift } => {
                let s0 = libm::sqrt(1.0 / nf);
                let s1 = libm::sqrt(2.0 / nf);
                if forward {
                    for i in 0..n / 2 {
                        re[row(i)].copy_from_slice(&x[row(2 * i)]);
                        re[row(n - 1 - i)].copy_from_slice(&x[row(2 * i + 1)]);
                    }
                    fft.run(&mut re, &mut im, b, false);
                    for k in 0..n {
                        let (c, sn) = shift[k];
                        let w = if k == 0 { s0 } else { s1 };
                        let r = row(k);
                        for ((o, vr), vi) in x[r.clone()].iter_mut().zip(&re[r.clone()]).zip(&im[r]) {
                            *o = w * (c * vr + sn * vi);
                        }
                    }
                } else {
                    let d0 = 1.0 / libm::sqrt(nf);
                    let d1 = 1.0 / libm::sqrt(2.0 * nf);
                    scale_into(&mut re[row(0)], &x[row(0)], d0);
                    for k in 1..n {
                        let (c, sn) = shift[k];
                        let (rk, rm) = (row(k), row(n - k));
                        let (ro, io) = (&mut re[rk.clone()], &mut im[rk.clone()]);
                        for (((o, oi), xk), xm) in ro.iter_mut().zip(io.iter_mut()).zip(&x[rk.clone()]).zip(&x[rm]) {
                            let (a, m) = (d1 * xk, d1 * xm);
                            *o = c * a + sn * m;
                            *oi = sn * a - c * m;
                        }
                    }
                    fft.run(&mut re, &mut im, b, true);
                    for i in 0..n / 2 {
                        x[row(2 * i)].copy_from_slice(&re[row(i)]);
                        x[row(2 * i + 1)].copy_from_slice(&re[row(n - 1 - i)]);
                    }
                }
            }
        }
    }
}

impl AxisBasis {
    pub(crate) fn neumann(n: usize, h: f64) -> Self {
        let mut q = vec![0.0; n * n];
        let mut lambda = vec![0.0; n];
        for k in 0..n {
            let c = if k == 0 { libm::sqrt(1.0 / n as f64) } else { libm::sqrt(2.0 / n as f64) };
            for i in 0..n {
                q[i * n + k] = c * libm::cos(PI * k as f64 * (i as f64 + 0.5) / n as f64);
            }
            lambda[k] = -(2.0 - 2.0 * libm::cos(PI * k as f64 / n as f64)) / (h * h);
        }
        Self { n, q, lambda, fast: FastAxis::for_basis(n, false) }
    }

    pub(crate) fn periodic(n: usize, h: f64) -> Self {
        let mut q = vec![0.0; n * n];
        let mut lambda = vec![0.0; n];
        let nf = n as f64;
        // modes: 0 | cos k, sin k for 1 <= k < n/2 | alternating (n even)
        let mut col = 0;
        let mut push = |q: &mut Vec<f64>, lambda: &mut Vec<f64>, k: usize, f: &dyn Fn(usize) -> f64| {
            for i in 0..n {
                q[i * n + col] = f(i);
            }
            lambda[col] = -(2.0 - 2.0 * libm::cos(2.0 * PI * k as f64 / nf)) / (h * h);
            col += 1;
        };
        let c0 = libm::sqrt(1.0 / nf);
        let c1 = libm::sqrt(2.0 / nf);
        push(&mut q, &mut lambda, 0, &|_| c0);
        for k in 1..n.div_ceil(2) {
            let w = 2.0 * PI * k as f64 / nf;
            push(&mut q, &mut lambda, k, &|i| c1 * libm::cos(w * i as f64));
            push(&mut q, &mut lambda, k, &|i| c1 * libm::sin(w * i as f64));
        }
        if n % 2 == 0 && n > 1 {
            push(&mut q, &mut lambda, n / 2, &|i| if i % 2 == 0 { c0 } else { -c0 });
        }
        Self { n, q, lambda, fast: FastAxis::for_basis(n, true) }
    }

    pub(crate) fn lambda(&self) -> &[f64] {
        &self.lambda
    }
}

/// Apply `Q` (or `Q^T`) of one axis to every line of a 3D array in place.
pub(crate) fn transform_axis(data: &mut [f64], shape: Shape, a: usize, basis: &AxisBasis, transpose: bool) {
    let n = basis.n;
    if n == 1 {
        return;
    }
    if let Some(fast) = &basis.fast {
        let inner = shape.stride(a);
        let outer = shape.len() / (inner * n);
        let b = inner * outer;
        if outer == 1 {
            fast.apply(data, b, transpose);
            return;
        }
        // rows along `a`, every other index flattened into one batch index
        let mut rows = vec![0.0; data.len()];
        for o in 0..outer {
            for r in 0..n {
                let src = inner * (r + n * o);
                rows[r * b + o * inner..r * b + (o + 1) * inner].copy_from_slice(&data[src..src + inner]);
            }
        }
        fast.apply(&mut rows, b, transpose);
        for o in 0..outer {
            for r in 0..n {
                let dst = inner * (r + n * o);
                data[dst..dst + inner].copy_from_slice(&rows[r * b + o * inner..r * b + (o + 1) * inner]);
            }
        }
        return;
    }
    let dims = shape.0;
    let stride = match a {
        0 => 1,
        1 => dims[0],
        _ => dims[0] * dims[1],
    };
    let mut line = vec![0.0; n];
    let mut out = vec![0.0; n];
    let (o1, o2) = match a {
        0 => (1, 2),
        1 => (0, 2),
        _ => (0, 1),
    };
    for j2 in 0..dims[o2] {
        for j1 in 0..dims[o1] {
            let mut base = [0usize; 3];
            base[o1] = j1;
            base[o2] = j2;
            let start = shape.idx(base[0], base[1], base[2]);
            for (i, l) in line.iter_mut().enumerate() {
                *l = data[start + i * stride];
            }
            if transpose {
                out.iter_mut().for_each(|v| *v = 0.0);
                for (i, &l) in line.iter().enumerate() {
                    let row = &basis.q[i * n..(i + 1) * n];
                    for (o, &qv) in out.iter_mut().zip(row) {
                        *o += qv * l;
                    }
                }
            } else {
                for (i, o) in out.iter_mut().enumerate() {
                    let row = &basis.q[i * n..(i + 1) * n];
                    *o = row.iter().zip(&line).map(|(q, l)| q * l).sum();
                }
            }
            for (i, &o) in out.iter().enumerate() {
                data[start + i * stride] = o;
            }
        }
    }
}

/// Spectral inverse of `div grad` on cell centers (Neumann walls, periodic elsewhere).
#[derive(Debug, Clone)]
pub(crate) struct PoissonInverse {
    shape: Shape,
    axes: Vec<AxisBasis>,
}

impl PoissonInverse {
    pub(crate) fn new(grid: &Grid) -> Self {
        let cells = grid.cells();
        let h = grid.spacing();
        let axes = (0..3)
            .map(|a| {
                if grid.is_wall(a) {
                    AxisBasis::neumann(cells[a], h[a])
                } else {
                    AxisBasis::periodic(cells[a], h[a])
                }
            })
            .collect();
        Self { shape: grid.cell_shape(), axes }
    }

    /// Solve `L x = r` on the mean-free subspace; the mean of `r` is dropped.
    pub(crate) fn solve(&self, r: &mut [f64]) {
        for a in 0..3 {
            transform_axis(r, self.shape, a, &self.axes[a], true);
        }
        let [nx, ny, nz] = self.shape.0;
        let (lx, ly, lz) = (self.axes[0].lambda(), self.axes[1].lambda(), self.axes[2].lambda());
        for k in 0..nz {
            for j in 0..ny {
                for i in 0..nx {
                    let lam = lx[i] + ly[j] + lz[k];
                    let id = self.shape.idx(i, j, k);
                    r[id] = if lam < 0.0 { r[id] / lam } else { 0.0 };
                }
            }
        }
        for a in 0..3 {
            transform_axis(r, self.shape, a, &self.axes[a], false);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn orthonormal(b: &AxisBasis) {
        let n = b.n;
        for k in 0..n {
            for l in 0..n {
                let s: f64 = (0..n).map(|i| b.q[i * n + k] * b.q[i * n + l]).sum();
                let want = if k == l { 1.0 } else { 0.0 };
                assert!((s - want).abs() < 1e-12, "{n} {k} {l} {s}");
            }
        }
    }

    fn eigen(b: &AxisBasis, h: f64, periodic: bool) {
        let n = b.n;
        for k in 0..n {
            for i in 0..n {
                let v = |j: isize| -> f64 {
                    let jj = if periodic {
                        j.rem_euclid(n as isize) as usize
                    } else {
                        j.clamp(0, n as isize - 1) as usize
                    };
                    b.q[jj * n + k]
                };
                let i = i as isize;
                let lap = (v(i + 1) - 2.0 * v(i) + v(i - 1)) / (h * h);
                assert!((lap - b.lambda[k] * v(i)).abs() < 1e-9 * (1.0 + b.lambda[k].abs()));
            }
        }
    }

    #[test]
    fn fast_transforms_match_dense() {
        for (b, n) in [8usize, 16, 64].iter().flat_map(|&n| [(AxisBasis::periodic(n, 0.1), n), (AxisBasis::neumann(n, 0.1), n)]) {
            let fast = b.fast.as_ref().unwrap();
            let x: Vec<f64> = (0..n).map(|i| libm::sin(1.7 * i as f64 * i as f64 + 0.3)).collect();
            for forward in [true, false] {
                let mut y = x.clone();
                fast.apply(&mut y, 1, forward);
                for (r, yr) in y.iter().enumerate() {
                    let want: f64 = if forward {
                        (0..n).map(|i| b.q[i * n + r] * x[i]).sum()
                    } else {
                        (0..n).map(|k| b.q[r * n + k] * x[k]).sum()
                    };
                    assert!((yr - want).abs() < 1e-12, "{n} {forward} {r}");
                }
            }
        }
    }

    #[test]
    fn bases_are_orthonormal_eigenbases() {
        for n in [1usize, 2, 5, 8] {
            let p = AxisBasis::periodic(n, 0.3);
            orthonormal(&p);
            eigen(&p, 0.3, true);
        }
        for n in [4usize, 7] {
            let b = AxisBasis::neumann(n, 0.2);
            orthonormal(&b);
            eigen(&b, 0.2, false);
        }
    }
}
