//! Empirical boundedness and coercivity constants of `A = S + B`.

use alloc::format;
use alloc::vec::Vec;

use crate::diff::divergence;
use crate::error::{Error, Result};
use crate::family::TestFunctionFamily;
use crate::field::VectorField;
use crate::grid::Grid;
use crate::operators::{ModelOperator, ModelParams};
use crate::projection::{Projector, DEFAULT_LERAY_TOL};

/// Source of divergence-free, wall-Dirichlet sample fields.
pub trait FieldSampler {
    fn grid(&self) -> &Grid;
    /// `Ok(None)` when exhausted.
    fn next_field(&mut self) -> Result<Option<VectorField>>;
}

/// Family samples pushed through the Leray projection.
pub struct ProjectedSampler {
    family: TestFunctionFamily,
    projector: Projector,
    tol: f64,
    index: usize,
}

impl ProjectedSampler {
    pub fn new(grid: &Grid, family: TestFunctionFamily) -> Self {
        Self { family, projector: Projector::new(grid), tol: DEFAULT_LERAY_TOL, index: 0 }
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn tol(&self) -> f64 {
        self.tol
    }

    pub fn sample(&self, index: usize) -> Result<VectorField> {
        let u = self.family.vector_field(self.projector.grid(), index);
        Ok(self.projector.project(&u, self.tol)?.0)
    }
}

impl FieldSampler for ProjectedSampler {
    fn grid(&self) -> &Grid {
        self.projector.grid()
    }

    fn next_field(&mut self) -> Result<Option<VectorField>> {
        if self.index >= self.family.count {
            return Ok(None);
        }
        let u = self.sample(self.index)?;
        self.index += 1;
        Ok(Some(u))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OperatorConditionReport {
    /// Lower bound for `sup ||A v||_{V*} / ||v||_V^{p-1}` from sampled Riesz ratios.
    pub c0_hat: f64,
    /// `min <A v, v> / ||v||_V^p` over the samples.
    pub c1_hat: f64,
    pub sample_count: usize,
    /// Samples dropped for having zero V-norm.
    pub skipped: usize,
    pub p: f64,
    pub alpha: f64,
}

/// Draw `n` fields, normalize each to `||u||_V = 1` and evaluate
/// `c1 = min <A u, u>` and `c0 = max_{u, w} <A u, w> / ||w||_V`.
pub fn check_conditions(params: &ModelParams, sampler: &mut dyn FieldSampler, n: usize) -> Result<OperatorConditionReport> {
    if n == 0 {
        return Err(Error::Argument("need at least one sample".into()));
    }
    params.validate()?;
    let op = ModelOperator::new(sampler.grid(), params)?;
    let p = params.p;
    let div_tol = 1e-8;
    let mut fields: Vec<VectorField> = Vec::with_capacity(n);
    let mut images: Vec<VectorField> = Vec::with_capacity(n);
    let mut skipped = 0;
    let mut c1 = f64::INFINITY;
    while fields.len() < n {
        let Some(u) = sampler.next_field()? else { break };
        let scale = u.max_abs();
        let d = divergence(&u).max_abs();
        if !(d <= div_tol * scale.max(1.0)) {
            return Err(Error::Precondition(format!("sample is not divergence-free (max |div| = {d:.3e})")));
        }
        let vn = op.v_norm(&u)?.value;
        if !(vn > 0.0) {
            skipped += 1;
            continue;
        }
        let u = u.scaled(1.0 / vn);
        let mut a = op.apply_s(&u)?;
        a.axpy(1.0, &op.apply_b_unchecked(&u)?);
        c1 = c1.min(a.dot(&u));
        fields.push(u);
        images.push(a);
    }
    if fields.is_empty() {
        return Err(Error::Argument("sampler produced no nonzero field".into()));
    }
    let mut c0 = 0.0f64;
    for a in &images {
        for w in &fields {
            c0 = c0.max(a.dot(w).abs());
        }
    }
    if !c0.is_finite() || !c1.is_finite() {
        return Err(Error::Numeric("non-finite operator constants".into()));
    }
    Ok(OperatorConditionReport { c0_hat: c0, c1_hat: c1, sample_count: fields.len(), skipped, p, alpha: params.alpha })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Domain;

    struct Fixed(Grid, Vec<VectorField>);

    impl FieldSampler for Fixed {
        fn grid(&self) -> &Grid {
            &self.0
        }
        fn next_field(&mut self) -> Result<Option<VectorField>> {
            Ok(self.1.pop())
        }
    }

    #[test]
    fn coercivity_constant_is_recovered() {
        let g = Grid::new(Domain::channel(1.0, 1.0, 1.0).unwrap(), [6, 6, 8]).unwrap();
        for (alpha, p, c) in [(1.0, 3.0, 1.0), (2.5, 4.0, 0.7)] {
            let params = ModelParams::new(alpha, p).unwrap().with_c_alpha(c);
            let mut s = ProjectedSampler::new(&g, TestFunctionFamily::random_bumps(3, 12));
            let rep = check_conditions(&params, &mut s, 12).unwrap();
            assert_eq!(rep.sample_count, 12);
            assert!((rep.c1_hat - c).abs() <= 1e-10 * c, "{}", rep.c1_hat);
            assert!(rep.c0_hat.is_finite() && rep.c0_hat >= rep.c1_hat * (1.0 - 1e-10));
        }
    }

    #[test]
    fn zero_samples_are_skipped_and_divergent_rejected() {
        let g = Grid::new(Domain::box2d(1.0, 1.0).unwrap(), [8, 8, 1]).unwrap();
        let params = ModelParams::new(0.0, 3.0).unwrap();
        let good = ProjectedSampler::new(&g, TestFunctionFamily::random_bumps(1, 1)).sample(0).unwrap();
        let mut s = Fixed(g, alloc::vec![good, VectorField::zeros(&g)]);
        let rep = check_conditions(&params, &mut s, 2).unwrap();
        assert_eq!((rep.sample_count, rep.skipped), (1, 1));

        let bad = VectorField::from_fn(&g, |x| [x[0], 0.0, 0.0]);
        let mut s = Fixed(g, alloc::vec![bad]);
        assert!(matches!(check_conditions(&params, &mut s, 1), Err(Error::Precondition(_))));
        let mut s = Fixed(g, alloc::vec![]);
        assert!(check_conditions(&params, &mut s, 0).is_err());
    }
}
