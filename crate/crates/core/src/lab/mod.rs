//! Estimators for the weighted inequalities and their critical exponents.
//!
//! Every estimator returns a ratio whose supremum over a family is a lower
//! bound for the true constant. Along a sequence of concentration levels the
//! values are classified as bounded or growing by [`classify`].

mod ap;
mod bbound;
mod hardy;
mod patches;
mod ratios;

use alloc::string::String;
use alloc::vec::Vec;

use crate::error::Result;
use crate::family::TestFunctionFamily;
use crate::norms::Integrand;
use crate::weight::ap_levels;

pub use ap::ap_sweep;
pub use bbound::{b_bound_levels, b_bound_sweep};
pub use hardy::{hardy_oracle, hardy_oracle_levels, hardy_ratio, hardy_sobolev_ratio, sobolev_weight_exponent, HardyOracle, LabField};
pub use patches::{concentrating_patches, PatchLevels};
pub use ratios::{curl_grad_ratio, embedding_l1_oracle, embedding_ratio, EmbeddingTarget};

/// Growth factor per level at or above which a level is counted as growing.
pub const GROWTH_FACTOR: f64 = 1.5;
/// Largest level-to-level factor still counted as bounded.
pub const BOUNDED_FACTOR: f64 = 1.2;
/// Fewest levels that can certify growth.
pub const MIN_GROWTH_LEVELS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EstimatorId {
    Hardy,
    HardySobolev { q: f64 },
    CurlGrad,
    EmbedL1,
    GelfandL2,
    BBound,
    Ap,
}

impl EstimatorId {
    pub fn name(&self) -> &'static str {
        match self {
            EstimatorId::Hardy => "hardy",
            EstimatorId::HardySobolev { .. } => "hardy_sobolev",
            EstimatorId::CurlGrad => "curl_grad_equiv",
            EstimatorId::EmbedL1 => "embed_L1",
            EstimatorId::GelfandL2 => "gelfand_L2",
            EstimatorId::BBound => "B_bound",
            EstimatorId::Ap => "A_p",
        }
    }

    pub fn q(&self) -> Option<f64> {
        match self {
            EstimatorId::HardySobolev { q } => Some(*q),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Verdict {
    Bounded,
    Growing,
    Inconclusive,
    PreconditionViolated,
}

impl Verdict {
    pub fn name(&self) -> &'static str {
        match self {
            Verdict::Bounded => "bounded",
            Verdict::Growing => "growing",
            Verdict::Inconclusive => "inconclusive",
            Verdict::PreconditionViolated => "precondition-violated",
        }
    }
}

/// Trend of a level sequence: growing needs at least [`MIN_GROWTH_LEVELS`]
/// levels with every factor `>= GROWTH_FACTOR`; bounded needs every factor
/// `< BOUNDED_FACTOR`.
pub fn classify(values: &[f64]) -> Verdict {
    if values.len() < 2 || values.iter().any(|v| !v.is_finite() || *v < 0.0) {
        return Verdict::Inconclusive;
    }
    let factors: Vec<f64> = values.windows(2).map(|w| w[1] / w[0]).collect();
    if values.len() >= MIN_GROWTH_LEVELS && factors.iter().all(|&f| f >= GROWTH_FACTOR) {
        Verdict::Growing
    } else if factors.iter().all(|&f| f < BOUNDED_FACTOR) {
        Verdict::Bounded
    } else {
        Verdict::Inconclusive
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub estimator: EstimatorId,
    pub p: f64,
    pub alpha: f64,
    pub level: u32,
    pub value: f64,
    /// Verdict of the whole level sequence this row belongs to.
    pub verdict: Verdict,
    pub seed: u64,
    /// Resolution at this level (grid cells or 1D nodes).
    pub cells: usize,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SweepReport {
    pub rows: Vec<SweepRow>,
}

impl SweepReport {
    pub const HEADER: &'static str = "estimator,p,alpha,q,level,value,verdict,seed,cells";

    /// Rows of one level sequence; `cells[k]` is the resolution of level `k`.
    pub fn push_levels(&mut self, estimator: EstimatorId, p: f64, alpha: f64, values: &[f64], verdict: Verdict, seed: u64, cells: &[usize]) {
        for (k, (&value, &c)) in values.iter().zip(cells).enumerate() {
            self.rows.push(SweepRow { estimator, p, alpha, level: k as u32, value, verdict, seed, cells: c });
        }
    }

    pub fn extend(&mut self, other: SweepReport) {
        self.rows.extend(other.rows);
    }

    /// Verdict of the `(p, alpha)` cell for `estimator`, if present.
    pub fn verdict(&self, estimator: &str, p: f64, alpha: f64) -> Option<Verdict> {
        self.rows.iter().find(|r| r.estimator.name() == estimator && r.p == p && r.alpha == alpha).map(|r| r.verdict)
    }

    /// CSV with [`Self::HEADER`]; floats use the shortest round-trip form.
    pub fn to_csv(&self) -> String {
        use core::fmt::Write;
        let mut s = String::from(Self::HEADER);
        s.push('\n');
        for r in &self.rows {
            let q = r.estimator.q().map(|q| alloc::format!("{q}")).unwrap_or_default();
            let _ = writeln!(s, "{},{},{},{},{},{:e},{},{},{}", r.estimator.name(), r.p, r.alpha, q, r.level, r.value, r.verdict.name(), r.seed, r.cells);
        }
        s
    }
}

/// One `(estimator, p, alpha)` cell of a sweep over `family.concentration_levels` levels.
///
/// Hardy and the L1 embedding use their 1D oracles, `A_p` the near-wall cube
/// family on `patches.domain`, and the rest take the family supremum on the
/// concentration patches. Cells outside an estimator's admissible range are
/// still evaluated but carry [`Verdict::PreconditionViolated`].
pub fn sweep_cell(estimator: EstimatorId, p: f64, alpha: f64, family: &TestFunctionFamily, patches: &PatchLevels) -> Result<SweepReport> {
    let levels = family.concentration_levels;
    let seed = family.seed;
    let mut report = SweepReport::default();
    let patch_cells = alloc::vec![patches.n_cells(); levels as usize];
    let (values, cells, admissible): (Vec<f64>, Vec<usize>, bool) = match estimator {
        EstimatorId::BBound => return b_bound_sweep(family, patches, &[p], &[alpha]),
        EstimatorId::Hardy => {
            let o = hardy_oracle_levels(p, alpha, levels)?;
            (o.iter().map(|o| o.value).collect(), o.iter().map(|o| o.nodes).collect(), true)
        }
        EstimatorId::EmbedL1 => (embedding_l1_oracle(p, alpha, levels)?, alloc::vec![0; levels as usize], true),
        EstimatorId::Ap => (ap_levels(&patches.domain, alpha, p, levels)?, (0..levels).map(|k| 2 * 8usize.pow(k)).collect(), true),
        EstimatorId::CurlGrad => {
            let v = patches.sup_levels(family, |u| ratios::curl_grad_unchecked(u, p, alpha))?;
            (v, patch_cells, alpha > -1.0 && alpha < p - 1.0)
        }
        EstimatorId::GelfandL2 => {
            let v = patches.sup_levels(family, |u| ratios::embedding_unchecked(Integrand::Velocity(u), p, alpha, EmbeddingTarget::L2FromV))?;
            (v, patch_cells, p == 3.0 && alpha >= 0.0 && alpha < 2.0)
        }
        EstimatorId::HardySobolev { q } => {
            let v = patches.sup_levels(family, |u| hardy::hardy_sobolev_unchecked(LabField::Vector(u), p, alpha, q))?;
            (v, patch_cells, hardy::sobolev_constraints(patches.domain.dims(), p, alpha, q).is_ok())
        }
    };
    let verdict = if admissible { classify(&values) } else { Verdict::PreconditionViolated };
    report.push_levels(estimator, p, alpha, &values, verdict, seed, &cells);
    Ok(report)
}
