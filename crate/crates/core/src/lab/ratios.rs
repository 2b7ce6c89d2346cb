//! Curl–gradient equivalence and embedding ratios.

use alloc::format;
use alloc::vec::Vec;

use crate::diff::{curl, divergence};
use crate::error::{Error, Result};
use crate::field::VectorField;
use crate::geometry::MixingLength;
use crate::grid::Grid;
use crate::norms::{weighted_gradient_integral, weighted_integral, Integrand};
use crate::weight::{power_samples, SampleLocation, WeightSamples};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EmbeddingTarget {
    L1,
    /// Unweighted `L^q` with `1 <= q < p/(1+alpha)`.
    Lq(f64),
    /// `||u||_{L^2} / ||u||_V` for a velocity, `p = 3`, `alpha < 2`.
    L2FromV,
}

fn corner_weight(g: &Grid, e: f64) -> WeightSamples {
    power_samples(g, &MixingLength::default(), e, SampleLocation::Corners)
}

pub(crate) fn require_divergence_free(u: &VectorField) -> Result<()> {
    let g = u.grid();
    let h = g.spacing()[..g.dims()].iter().cloned().fold(f64::INFINITY, f64::min);
    let d = divergence(u).max_abs() * h;
    if !(d <= 1e-8 * u.max_abs()) {
        return Err(Error::Precondition(format!("field is not divergence-free (max |div| h = {d:.3e})")));
    }
    Ok(())
}

pub(crate) fn curl_grad_unchecked(u: &VectorField, p: f64, alpha: f64) -> Result<f64> {
    let w = corner_weight(u.grid(), alpha);
    let om = curl(u);
    let c = weighted_integral(Integrand::Curl(&om), &w, p)?;
    if !(c > 0.0) {
        return Err(Error::Argument("field has zero weighted curl".into()));
    }
    Ok(weighted_gradient_integral(u, &w, p)? / c)
}

/// `int d^alpha |grad u|^p / int d^alpha |curl u|^p` for a divergence-free
/// field vanishing at the walls, `-1 < alpha < p - 1`.
pub fn curl_grad_ratio(u: &VectorField, p: f64, alpha: f64) -> Result<f64> {
    if !(p > 1.0) || !p.is_finite() {
        return Err(Error::Argument(format!("p must be finite and > 1, got {p}")));
    }
    if !(alpha > -1.0 && alpha < p - 1.0) {
        return Err(Error::Precondition(format!("need -1 < alpha < p - 1, got alpha = {alpha}, p = {p}")));
    }
    require_divergence_free(u)?;
    curl_grad_unchecked(u, p, alpha)
}

pub(crate) fn embedding_unchecked(f: Integrand<'_>, p: f64, alpha: f64, target: EmbeddingTarget) -> Result<f64> {
    let g = *match f {
        Integrand::Velocity(u) => u.grid(),
        Integrand::Curl(w) => w.grid(),
    };
    let ones = corner_weight(&g, 0.0);
    let root = |s: f64, r: f64| libm::pow(s, 1.0 / r);
    let (num, den) = match target {
        EmbeddingTarget::L1 => (weighted_integral(f, &ones, 1.0)?, root(weighted_integral(f, &corner_weight(&g, alpha), p)?, p)),
        EmbeddingTarget::Lq(q) => (root(weighted_integral(f, &ones, q)?, q), root(weighted_integral(f, &corner_weight(&g, alpha), p)?, p)),
        EmbeddingTarget::L2FromV => {
            let Integrand::Velocity(u) = f else {
                return Err(Error::Argument("the V-norm needs a velocity field".into()));
            };
            let om = curl(u);
            (u.norm_l2(), root(weighted_integral(Integrand::Curl(&om), &corner_weight(&g, alpha), p)?, p))
        }
    };
    if !(den > 0.0) {
        return Err(Error::Argument("source norm vanishes".into()));
    }
    let r = num / den;
    if !r.is_finite() {
        return Err(Error::Numeric("non-finite embedding ratio".into()));
    }
    Ok(r)
}

/// Target norm over the source norm `(int d^alpha |f|^p)^{1/p}`, or over
/// `||u||_V` for [`EmbeddingTarget::L2FromV`].
pub fn embedding_ratio(f: Integrand<'_>, p: f64, alpha: f64, target: EmbeddingTarget) -> Result<f64> {
    if !(p >= 1.0) || !p.is_finite() || !alpha.is_finite() {
        return Err(Error::Argument(format!("need finite p >= 1 and alpha, got p = {p}, alpha = {alpha}")));
    }
    match target {
        EmbeddingTarget::L1 if !(alpha < p - 1.0) => {
            return Err(Error::Precondition(format!("L1 embedding needs alpha < p - 1, got alpha = {alpha}, p = {p}")))
        }
        EmbeddingTarget::Lq(q) if !(q >= 1.0 && q < p / (1.0 + alpha)) => {
            return Err(Error::Precondition(format!("L^q embedding needs 1 <= q < p/(1+alpha) = {}, got q = {q}", p / (1.0 + alpha))))
        }
        EmbeddingTarget::L2FromV if p != 3.0 || !(alpha < 2.0) => {
            return Err(Error::Precondition(format!("L2 from V needs p = 3 and alpha < 2, got p = {p}, alpha = {alpha}")))
        }
        _ => {}
    }
    embedding_unchecked(f, p, alpha, target)
}

/// Exact `sup ||f||_{L1} / ||f||_{L^p(x^alpha)}` over `(eps_k, 1)`, which by
/// duality is `(int x^{-alpha p'/p})^{1/p'}`, for `eps_k = e^{-4^(k+1)}`.
pub fn embedding_l1_oracle(p: f64, alpha: f64, levels: u32) -> Result<Vec<f64>> {
    if !(p > 1.0) || !p.is_finite() || !alpha.is_finite() {
        return Err(Error::Argument(format!("need finite p > 1 and alpha, got p = {p}, alpha = {alpha}")));
    }
    let dual = p / (p - 1.0);
    let s = alpha / (p - 1.0);
    (0..levels)
        .map(|k| {
            let l = libm::pow(4.0, (k + 1) as f64);
            // int_eps^1 x^{-s} dx with eps = e^{-l}
            let integral = if (s - 1.0).abs() < 1e-12 { l } else { -libm::expm1(-l * (1.0 - s)) / (1.0 - s) };
            let v = libm::pow(integral, 1.0 / dual);
            if v.is_finite() {
                Ok(v)
            } else {
                Err(Error::Numeric(format!("L1 oracle overflows at level {k}")))
            }
        })
        .collect()
}
