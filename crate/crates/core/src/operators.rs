//! The weighted curl-curl operator `S`, the rotational convection `B` and `A = S + B`.
//!
//! All three are assembled as Riesz representers in the face L2 inner
//! product from the corner quadrature:
//!
//! * `<S v, w> = sum_q |Q_q| K_q curl v(q) . curl w(q)` with
//!   `K_q = c l(q)^alpha (|curl v(q)|^2 + eps^2)^{(p-2)/2}`,
//! * `<B v, w> = sum_q |Q_q| (curl v(q) x v(q)) . w(q)`.
//!
//! Because `B` is assembled per quadrature point, `<B v, v>` vanishes up to
//! rounding for every field.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::diff::{curl, curl_transpose, divergence};
use crate::error::{Error, Result};
use crate::field::{CurlField, VectorField};
use crate::geometry::MixingLength;
use crate::grid::Grid;
use crate::norms::{norm3, powp, velocity_at_corner, NormId, NormReport};
use crate::weight::{power_samples, SampleLocation};

/// Auxiliary closure constants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AuxParams {
    /// Friction velocity `v_*`.
    pub v_star: f64,
    /// Exponent of `v_*`; `3 - p` under the dimensional closure.
    pub theta: f64,
    pub ell0: f64,
}

impl Default for AuxParams {
    fn default() -> Self {
        Self { v_star: 1.0, theta: 0.0, ell0: 1.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    pub alpha: f64,
    pub p: f64,
    pub c_alpha: f64,
    pub eps_reg: f64,
    pub mixing: MixingLength,
    pub aux: AuxParams,
    /// Dimensional-closure mode: requires `theta = 3 - p`.
    pub closure: bool,
}

impl ModelParams {
    /// Checked constructor: `0 <= alpha < p - 1`.
    pub fn new(alpha: f64, p: f64) -> Result<Self> {
        let m = Self::unchecked(alpha, p);
        m.validate()?;
        Ok(m)
    }

    /// No range checks on `(alpha, p)`; for probing supercritical exponents.
    pub fn unchecked(alpha: f64, p: f64) -> Self {
        Self {
            alpha,
            p,
            c_alpha: 1.0,
            eps_reg: 0.0,
            mixing: MixingLength::default(),
            aux: AuxParams { theta: 3.0 - p, ..Default::default() },
            closure: false,
        }
    }

    pub fn with_c_alpha(mut self, c: f64) -> Self {
        self.c_alpha = c;
        self
    }

    pub fn with_eps(mut self, eps: f64) -> Self {
        self.eps_reg = eps;
        self
    }

    pub fn with_mixing(mut self, ml: MixingLength) -> Self {
        self.mixing = ml;
        self
    }

    /// Everything except the `alpha < p - 1` range.
    pub fn validate_basic(&self) -> Result<()> {
        if !(self.p > 1.0) || !self.p.is_finite() {
            return Err(Error::Argument(format!("p must be finite and > 1, got {}", self.p)));
        }
        if !(self.alpha >= 0.0) || !self.alpha.is_finite() {
            return Err(Error::Argument(format!("alpha must be finite and >= 0, got {}", self.alpha)));
        }
        if !(self.c_alpha > 0.0) || !self.c_alpha.is_finite() {
            return Err(Error::Argument(format!("C_alpha must be positive, got {}", self.c_alpha)));
        }
        if !(self.eps_reg >= 0.0) {
            return Err(Error::Argument(format!("eps_reg must be >= 0, got {}", self.eps_reg)));
        }
        if !(self.aux.v_star > 0.0) || !(self.aux.ell0 > 0.0) {
            return Err(Error::Argument("v_star and ell0 must be positive".into()));
        }
        if self.closure && (self.aux.theta - (3.0 - self.p)).abs() > 1e-12 {
            return Err(Error::Argument(format!(
                "closure mode requires theta = 3 - p = {}, got {}",
                3.0 - self.p,
                self.aux.theta
            )));
        }
        self.mixing.validate()
    }

    pub fn validate(&self) -> Result<()> {
        self.validate_basic()?;
        if !(self.alpha < self.p - 1.0) {
            return Err(Error::Argument(format!(
                "alpha = {} must satisfy 0 <= alpha < p - 1 = {}",
                self.alpha,
                self.p - 1.0
            )));
        }
        Ok(())
    }

    /// Time-stepping additionally needs `p >= 3`.
    pub fn validate_solver(&self) -> Result<()> {
        self.validate()?;
        if !(self.p >= 3.0) {
            return Err(Error::Argument(format!("the solver needs p >= 3, got {}", self.p)));
        }
        Ok(())
    }

    /// Scalar prefactor `C_alpha v_*^theta`.
    pub fn coefficient(&self) -> f64 {
        if self.aux.theta == 0.0 {
            self.c_alpha
        } else {
            self.c_alpha * libm::pow(self.aux.v_star, self.aux.theta)
        }
    }
}

/// `ModelParams` bound to a grid, with the weight precomputed at the corners.
#[derive(Debug, Clone)]
pub struct ModelOperator {
    grid: Grid,
    params: ModelParams,
    /// `l^alpha` at the corner points.
    weight: Vec<f64>,
}

impl ModelOperator {
    /// Accepts any `alpha >= 0`; range checks are the caller's business.
    pub fn new(grid: &Grid, params: &ModelParams) -> Result<Self> {
        params.validate_basic()?;
        let weight = power_samples(grid, &params.mixing, params.alpha, SampleLocation::Corners).values;
        Ok(Self { grid: *grid, params: *params, weight })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn weight(&self) -> &[f64] {
        &self.weight
    }

    fn check(&self, u: &VectorField) -> Result<()> {
        if u.grid() != &self.grid {
            return Err(Error::Argument("field lives on a different grid than the operator".into()));
        }
        Ok(())
    }

    /// `(s^2 + eps^2)^{(p-2)/2}`.
    #[inline(always)]
    fn g(&self, s: f64) -> f64 {
        let p = self.params.p;
        let eps = self.params.eps_reg;
        if eps == 0.0 {
            if p == 3.0 {
                s
            } else if p == 2.0 {
                1.0
            } else if s == 0.0 {
                0.0
            } else {
                libm::pow(s, p - 2.0)
            }
        } else {
            libm::pow(s * s + eps * eps, 0.5 * (p - 2.0))
        }
    }

    /// Frozen coefficients `K_q` of `u` at every corner.
    pub fn frozen_coefficients(&self, u: &VectorField) -> Result<Vec<f64>> {
        self.check(u)?;
        let om = curl(u);
        let c = self.params.coefficient();
        let g = self.grid;
        let mut k = vec![0.0; g.n_corners()];
        g.for_each_corner(|q, cell, b| {
            let w = om.at_corner(&g.corner_idx(cell, b).edge);
            k[q] = c * self.weight[q] * self.g(norm3(&w));
        });
        Ok(k)
    }

    /// Linear curl-curl operator with frozen coefficients: `curl^T (K curl v)`.
    pub fn apply_frozen(&self, k: &[f64], v: &VectorField) -> VectorField {
        let om = curl(v);
        self.curl_weighted_transpose(&om, |q, _| k[q])
    }

    fn curl_weighted_transpose(&self, om: &CurlField, kq: impl Fn(usize, &[f64; 3]) -> f64) -> VectorField {
        let g = self.grid;
        let vol = g.corner_volume();
        let mut e: Vec<Vec<f64>> = om.components().iter().map(|c| vec![0.0; c.len()]).collect();
        let nc = g.curl_components();
        g.for_each_corner(|q, cell, b| {
            let idx = g.corner_idx(cell, b);
            let w = om.at_corner(&idx.edge);
            let s = vol * kq(q, &w);
            for c in 0..nc {
                e[c][idx.edge[c]] += s * w[c];
            }
        });
        let mut out = curl_transpose(&g, &e);
        out.scale(1.0 / g.cell_volume());
        out
    }

    pub fn apply_s(&self, u: &VectorField) -> Result<VectorField> {
        self.check(u)?;
        let om = curl(u);
        let c = self.params.coefficient();
        Ok(self.curl_weighted_transpose(&om, |q, w| c * self.weight[q] * self.g(norm3(w))))
    }

    /// Convection without the divergence check.
    pub fn apply_b_unchecked(&self, u: &VectorField) -> Result<VectorField> {
        self.check(u)?;
        Ok(convection(u))
    }

    pub fn apply_b(&self, u: &VectorField, tol: f64) -> Result<VectorField> {
        self.check(u)?;
        apply_b(u, tol)
    }

    pub fn apply_a(&self, u: &VectorField, tol: f64) -> Result<VectorField> {
        let mut s = self.apply_s(u)?;
        s.axpy(1.0, &apply_b(u, tol)?);
        Ok(s)
    }

    /// `int l^alpha |curl u|^p`.
    pub fn v_integral(&self, u: &VectorField) -> Result<f64> {
        self.check(u)?;
        let om = curl(u);
        let g = self.grid;
        let p = self.params.p;
        let mut s = 0.0;
        g.for_each_corner(|q, cell, b| {
            s += self.weight[q] * powp(norm3(&om.at_corner(&g.corner_idx(cell, b).edge)), p);
        });
        Ok(s * g.corner_volume())
    }

    pub fn v_norm(&self, u: &VectorField) -> Result<NormReport> {
        let p = self.params.p;
        Ok(NormReport { value: libm::pow(self.v_integral(u)?, 1.0 / p), norm_id: NormId::V { p, alpha: self.params.alpha } })
    }

    /// Pointwise minimum of `(K(w1) w1 - K(w2) w2) . (w1 - w2)` over the corners, `eps = 0`.
    pub fn monotonicity_gap(&self, u: &VectorField, v: &VectorField) -> Result<f64> {
        self.check(u)?;
        self.check(v)?;
        let (ou, ov) = (curl(u), curl(v));
        let g = self.grid;
        let c = self.params.coefficient();
        let p = self.params.p;
        let mut best = f64::INFINITY;
        g.for_each_corner(|q, cell, b| {
            let e = g.corner_idx(cell, b).edge;
            let (w1, w2) = (ou.at_corner(&e), ov.at_corner(&e));
            let val = c * self.weight[q] * monotonicity_product(&w1, &w2, p);
            best = best.min(val);
        });
        Ok(best)
    }
}

/// `(|a|^{p-2} a - |b|^{p-2} b) . (a - b)` for vectors.
pub fn monotonicity_product(a: &[f64; 3], b: &[f64; 3], p: f64) -> f64 {
    let fa = if p == 2.0 { 1.0 } else { libm::pow(norm3(a), p - 2.0) };
    let fb = if p == 2.0 { 1.0 } else { libm::pow(norm3(b), p - 2.0) };
    (0..3).map(|i| (fa * a[i] - fb * b[i]) * (a[i] - b[i])).sum()
}

/// Representer of `w -> sum_q |Q_q| (curl u x u)(q) . w(q)`.
pub(crate) fn convection(u: &VectorField) -> VectorField {
    let g = *u.grid();
    let om = curl(u);
    let vol = g.corner_volume();
    let mut out: Vec<Vec<f64>> = (0..g.dims()).map(|a| vec![0.0; g.face_shape(a).len()]).collect();
    let dims = g.dims();
    g.for_each_corner(|_, cell, b| {
        let idx = g.corner_idx(cell, b);
        let v = velocity_at_corner(u, &idx.face);
        let w = om.at_corner(&idx.edge);
        let x = if dims == 3 {
            [w[1] * v[2] - w[2] * v[1], w[2] * v[0] - w[0] * v[2], w[0] * v[1] - w[1] * v[0]]
        } else {
            // w[0] is the out-of-plane vorticity
            [-w[0] * v[1], w[0] * v[0], 0.0]
        };
        for a in 0..dims {
            out[a][idx.face[a]] += vol * x[a];
        }
    });
    let mut f = VectorField::from_components(&g, out).expect("layout matches");
    f.scale(1.0 / g.cell_volume());
    f
}

pub fn apply_s(u: &VectorField, params: &ModelParams) -> Result<VectorField> {
    ModelOperator::new(u.grid(), params)?.apply_s(u)
}

/// Convection `B(u)`; `u` must be divergence-free to within `tol` (max norm).
pub fn apply_b(u: &VectorField, tol: f64) -> Result<VectorField> {
    let d = divergence(u).max_abs();
    if !(d <= tol) {
        return Err(Error::Precondition(format!("max |div u| = {d:.3e} exceeds {tol:.3e}")));
    }
    Ok(convection(u))
}

pub fn apply_a(u: &VectorField, params: &ModelParams, tol: f64) -> Result<VectorField> {
    ModelOperator::new(u.grid(), params)?.apply_a(u, tol)
}

pub fn v_norm(u: &VectorField, params: &ModelParams) -> Result<NormReport> {
    ModelOperator::new(u.grid(), params)?.v_norm(u)
}

pub fn monotonicity_gap(u: &VectorField, v: &VectorField, params: &ModelParams) -> Result<f64> {
    if params.eps_reg != 0.0 {
        return Err(Error::Argument("the monotonicity certificate is defined for eps_reg = 0".into()));
    }
    ModelOperator::new(u.grid(), params)?.monotonicity_gap(u, v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conditions::ProjectedSampler;
    use crate::diff::gradient;
    use crate::family::TestFunctionFamily;
    use crate::geometry::Domain;
    use crate::grid::indices;
    use crate::diff::gradient_at_corner;

    fn channel(n: usize) -> Grid {
        Grid::new(Domain::channel(1.0, 1.0, 1.0).unwrap(), [n, n, n]).unwrap()
    }

    /// Divergence-free field from a stream function sampled on nodes (2D).
    pub(crate) fn stream_field(g: &Grid, psi: impl Fn([f64; 3]) -> f64) -> VectorField {
        let s = g.edge_shape(0);
        let mut a = vec![0.0; s.len()];
        for p in indices(s) {
            let wall = (0..2).any(|ax| g.is_wall(ax) && (p[ax] == 0 || p[ax] == g.cells()[ax]));
            if !wall {
                a[s.idx(p[0], p[1], p[2])] = psi(g.edge_center(0, p));
            }
        }
        curl_transpose(g, &[a])
    }

    #[test]
    fn curl_free_field_gives_zero_s() {
        let g = channel(8);
        let phi = TestFunctionFamily::random_bumps(3, 1).scalar_field(&g, 0);
        let u = gradient(&phi);
        assert!(u.max_abs() > 0.0);
        let s = apply_s(&u, &ModelParams::new(1.0, 3.0).unwrap()).unwrap();
        assert!(s.max_abs() < 1e-10 * u.max_abs().powi(2));
    }

    #[test]
    fn s_pairing_is_v_norm_power_and_homogeneous() {
        let g = channel(8);
        let sampler = ProjectedSampler::new(&g, TestFunctionFamily::random_bumps(9, 4));
        for (alpha, p) in [(1.0, 3.0), (2.5, 4.0), (0.0, 3.5)] {
            let params = ModelParams::new(alpha, p).unwrap().with_c_alpha(1.7);
            let op = ModelOperator::new(&g, &params).unwrap();
            for i in 0..4 {
                let u = sampler.sample(i).unwrap();
                let su = op.apply_s(&u).unwrap();
                let vn = op.v_norm(&u).unwrap().value;
                let lhs = su.dot(&u);
                assert!((lhs - 1.7 * vn.powf(p)).abs() <= 1e-13 * lhs.abs());
                let lam = 2.5;
                let sl = op.apply_s(&u.scaled(lam)).unwrap();
                let want = su.scaled(lam.powf(p - 1.0));
                assert!(sl.sub(&want).max_abs() <= 1e-13 * want.max_abs());
            }
        }
    }

    #[test]
    fn b_is_skew_and_quadratic() {
        let g = channel(8);
        let sampler = ProjectedSampler::new(&g, TestFunctionFamily::random_bumps(1, 6));
        for i in 0..6 {
            let u = sampler.sample(i).unwrap();
            let b = apply_b(&u, 1e-9).unwrap();
            assert!(b.dot(&u).abs() <= 1e-13 * u.norm_l2() * b.norm_l2());
            let b2 = apply_b(&u.scaled(-3.0), 1e-8).unwrap();
            assert!(b2.sub(&b.scaled(9.0)).max_abs() <= 1e-13 * b2.max_abs());
        }
    }

    #[test]
    fn b_rejects_divergent_fields() {
        let g = channel(6);
        let u = VectorField::from_fn(&g, |x| [libm::sin(6.0 * x[0]), 0.0, 0.0]);
        assert!(matches!(apply_b(&u, 1e-10), Err(Error::Precondition(_))));
        assert_eq!(apply_b(&VectorField::zeros(&g), 1e-12).unwrap().max_abs(), 0.0);
    }

    #[test]
    fn a_pairing_equals_s_pairing() {
        let g = channel(8);
        let params = ModelParams::new(1.0, 3.0).unwrap();
        let u = ProjectedSampler::new(&g, TestFunctionFamily::random_bumps(4, 1)).sample(0).unwrap();
        let a = apply_a(&u, &params, 1e-9).unwrap().dot(&u);
        let s = apply_s(&u, &params).unwrap().dot(&u);
        assert!((a - s).abs() <= 1e-13 * s);
    }

    #[test]
    fn b_weak_form_matches_convective_form() {
        // <B u, w> = -int (u (x) u) : grad w for divergence-free Dirichlet u, w
        let pi = core::f64::consts::PI;
        let mut vals = Vec::new();
        for n in [16, 32, 64] {
            let g = Grid::new(Domain::box2d(1.0, 1.0).unwrap(), [n, n, 1]).unwrap();
            let u = stream_field(&g, |x| libm::pow(libm::sin(pi * x[0]) * libm::sin(pi * x[1]), 2.0) * (1.0 + x[0]));
            let w = stream_field(&g, |x| {
                libm::pow(libm::sin(pi * x[0]) * libm::sin(pi * x[1]), 2.0) * (x[0] - x[1] * x[1])
            });
            let lhs = apply_b(&u, 1e-9).unwrap().dot(&w);
            let mut rhs = 0.0;
            g.for_each_corner(|_, c, b| {
                let idx = g.corner_idx(c, b);
                let v = velocity_at_corner(&u, &idx.face);
                let gw = gradient_at_corner(&w, c, b);
                for i in 0..2 {
                    for j in 0..2 {
                        rhs -= v[i] * v[j] * gw[i][j];
                    }
                }
            });
            rhs *= g.corner_volume();
            assert!((lhs - rhs).abs() <= 1e-11 * lhs.abs(), "{lhs} vs {rhs}");
            vals.push(lhs);
        }
        // both sides converge together under refinement
        assert!((vals[2] - vals[1]).abs() < 0.5 * (vals[1] - vals[0]).abs());
    }

    #[test]
    fn monotonicity_scalar_and_pairs() {
        assert_eq!(monotonicity_product(&[2.0, 0.0, 0.0], &[1.0, 0.0, 0.0], 3.0), 3.0);
        let g = channel(6);
        let fam = TestFunctionFamily::random_bumps(2, 8);
        for p in [3.0, 4.0] {
            let params = ModelParams::new(1.0, p).unwrap();
            for i in 0..4 {
                let u = fam.vector_field(&g, 2 * i);
                let v = fam.vector_field(&g, 2 * i + 1);
                assert_eq!(monotonicity_gap(&u, &u, &params).unwrap(), 0.0);
                let scale = u.max_abs().max(v.max_abs()) * g.cells()[0] as f64;
                assert!(monotonicity_gap(&u, &v, &params).unwrap() >= -1e-12 * scale.powi(3));
            }
        }
    }

    #[test]
    fn parameter_ranges() {
        assert!(ModelParams::new(2.0, 3.0).is_err());
        assert!(ModelParams::new(1.99, 3.0).is_ok());
        assert!(ModelParams::new(1.0, 2.5).unwrap().validate_solver().is_err());
        let mut m = ModelParams::new(1.0, 3.0).unwrap();
        m.closure = true;
        m.aux.theta = 0.5;
        assert!(m.validate().is_err());
        m.aux.theta = 0.0;
        assert!(m.validate().is_ok());
        assert!(ModelParams::unchecked(2.0, 3.0).validate_basic().is_ok());
    }
}
