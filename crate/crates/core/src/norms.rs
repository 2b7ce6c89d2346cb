//! Weighted Lebesgue and Sobolev norms in the shared corner quadrature.

use alloc::format;

use crate::diff::{curl, gradient_at_corner};
use crate::error::{Error, Result};
use crate::field::{CurlField, VectorField};
use crate::grid::Grid;
use crate::weight::{SampleLocation, WeightSamples};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NormId {
    /// Unweighted L2.
    H,
    /// `(int l^alpha |curl u|^p)^{1/p}`.
    V { p: f64, alpha: f64 },
    LpWeighted { p: f64, alpha: f64 },
    W1pWeighted { p: f64, alpha: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormReport {
    pub value: f64,
    pub norm_id: NormId,
}

/// Anything with a collocated vector value at every corner quadrature point.
#[derive(Debug, Clone, Copy)]
pub enum Integrand<'a> {
    Velocity(&'a VectorField),
    Curl(&'a CurlField),
}

impl Integrand<'_> {
    fn grid(&self) -> &Grid {
        match self {
            Integrand::Velocity(u) => u.grid(),
            Integrand::Curl(w) => w.grid(),
        }
    }
}

/// Collocated velocity vector at a corner.
#[inline(always)]
pub(crate) fn velocity_at_corner(u: &VectorField, face: &[usize; 3]) -> [f64; 3] {
    let mut v = [0.0; 3];
    for (a, vi) in v.iter_mut().enumerate().take(u.grid().dims()) {
        *vi = u.component(a)[face[a]];
    }
    v
}

#[inline(always)]
pub(crate) fn norm3(v: &[f64; 3]) -> f64 {
    libm::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2])
}

#[inline(always)]
pub(crate) fn powp(s: f64, p: f64) -> f64 {
    if p == 2.0 {
        s * s
    } else if p == 3.0 {
        s * s * s
    } else if s == 0.0 {
        0.0
    } else {
        libm::pow(s, p)
    }
}

fn check_weight(g: &Grid, w: &WeightSamples) -> Result<()> {
    if w.location != SampleLocation::Corners {
        return Err(Error::Argument("weight must be sampled at the corner quadrature points".into()));
    }
    if w.grid() != g || w.values.len() != g.n_corners() {
        return Err(Error::Argument("weight and integrand live on different grids".into()));
    }
    Ok(())
}

fn check_p(p: f64) -> Result<()> {
    if !(p >= 1.0) || !p.is_finite() {
        return Err(Error::Argument(format!("p must be finite and >= 1, got {p}")));
    }
    Ok(())
}

/// `int w |f|^p` by the corner rule, without the root.
pub fn weighted_integral(f: Integrand<'_>, w: &WeightSamples, p: f64) -> Result<f64> {
    let g = *f.grid();
    check_weight(&g, w)?;
    let vol = g.corner_volume();
    let mut s = 0.0;
    g.for_each_corner(|q, c, b| {
        let idx = g.corner_idx(c, b);
        let v = match f {
            Integrand::Velocity(u) => velocity_at_corner(u, &idx.face),
            Integrand::Curl(om) => om.at_corner(&idx.edge),
        };
        s += w.values[q] * powp(norm3(&v), p);
    });
    Ok(s * vol)
}

pub fn weighted_lp_norm(f: Integrand<'_>, w: &WeightSamples, p: f64) -> Result<NormReport> {
    check_p(p)?;
    let value = libm::pow(weighted_integral(f, w, p)?, 1.0 / p);
    Ok(NormReport { value, norm_id: NormId::LpWeighted { p, alpha: w.alpha } })
}

/// `int w |grad u|^p` with the Frobenius norm of the corner gradient.
pub fn weighted_gradient_integral(u: &VectorField, w: &WeightSamples, p: f64) -> Result<f64> {
    let g = *u.grid();
    check_weight(&g, w)?;
    let mut s = 0.0;
    g.for_each_corner(|q, c, b| {
        let gr = gradient_at_corner(u, c, b);
        let f2: f64 = gr.iter().flatten().map(|v| v * v).sum();
        s += w.values[q] * powp(libm::sqrt(f2), p);
    });
    Ok(s * g.corner_volume())
}

pub fn weighted_w1p_norm(u: &VectorField, w: &WeightSamples, p: f64) -> Result<NormReport> {
    check_p(p)?;
    let value = libm::pow(weighted_gradient_integral(u, w, p)?, 1.0 / p);
    Ok(NormReport { value, norm_id: NormId::W1pWeighted { p, alpha: w.alpha } })
}

/// `(int l^alpha |curl u|^p)^{1/p}` for an explicit weight.
pub fn v_norm_with(u: &VectorField, w: &WeightSamples, p: f64) -> Result<NormReport> {
    let om = curl(u);
    let r = weighted_lp_norm(Integrand::Curl(&om), w, p)?;
    Ok(NormReport { value: r.value, norm_id: NormId::V { p, alpha: w.alpha } })
}

pub fn h_norm(u: &VectorField) -> NormReport {
    NormReport { value: u.norm_l2(), norm_id: NormId::H }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Domain, MixingLength};
    use crate::weight::{weight_field, weight_field_at};

    #[test]
    fn zero_field_has_zero_norms() {
        let g = Grid::new(Domain::channel(1.0, 1.0, 1.0).unwrap(), [4, 4, 4]).unwrap();
        let w = weight_field(&g, &MixingLength::default(), 1.0).unwrap();
        let u = VectorField::zeros(&g);
        assert_eq!(v_norm_with(&u, &w, 3.0).unwrap().value, 0.0);
        assert_eq!(weighted_lp_norm(Integrand::Velocity(&u), &w, 2.0).unwrap().value, 0.0);
    }

    #[test]
    fn unit_field_unweighted_is_volume_root() {
        let g = Grid::new(Domain::channel(2.0, 1.0, 1.5).unwrap(), [4, 4, 6]).unwrap();
        let u = VectorField::from_fn(&g, |_| [1.0, 0.0, 0.0]);
        let w = weight_field(&g, &MixingLength::default(), 0.0).unwrap();
        let n = weighted_lp_norm(Integrand::Velocity(&u), &w, 3.0).unwrap().value;
        assert!((n - libm::cbrt(3.0)).abs() < 1e-14);
    }

    #[test]
    fn l2_quadrature_matches_face_inner_product() {
        let g = Grid::new(Domain::box3d(1.0, 1.0, 1.0).unwrap(), [4, 5, 6]).unwrap();
        let u = VectorField::from_fn(&g, |x| [libm::sin(3.0 * x[1]), x[0] * x[2], libm::cos(x[0])]);
        let w = weight_field(&g, &MixingLength::default(), 0.0).unwrap();
        let n = weighted_lp_norm(Integrand::Velocity(&u), &w, 2.0).unwrap().value;
        assert!((n - u.norm_l2()).abs() < 1e-14);
    }

    #[test]
    fn weighted_unit_field_converges_to_closed_form() {
        // 2 int_0^{1/2} z^2 dz = 1/12
        let exact = libm::cbrt(1.0 / 12.0);
        let mut prev = f64::INFINITY;
        for n in [8, 16, 32, 64] {
            let g = Grid::new(Domain::channel(1.0, 1.0, 1.0).unwrap(), [2, 2, n]).unwrap();
            let u = VectorField::from_fn(&g, |_| [1.0, 0.0, 0.0]);
            let w = weight_field(&g, &MixingLength::default(), 2.0).unwrap();
            let err = (weighted_lp_norm(Integrand::Velocity(&u), &w, 3.0).unwrap().value - exact).abs();
            assert!(err < prev / 3.5);
            prev = err;
        }
        assert!(prev < 1e-4);
    }

    #[test]
    fn location_mismatch_rejected() {
        let g = Grid::new(Domain::channel(1.0, 1.0, 1.0).unwrap(), [4, 4, 4]).unwrap();
        let w = weight_field_at(&g, &MixingLength::default(), 1.0, SampleLocation::CellCenters).unwrap();
        let u = VectorField::zeros(&g);
        assert!(matches!(weighted_lp_norm(Integrand::Velocity(&u), &w, 2.0), Err(Error::Argument(_))));
    }
}
