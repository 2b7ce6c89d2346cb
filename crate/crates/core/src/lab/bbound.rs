//! Boundedness of the convective form in the weighted V-norm.

use alloc::vec;
use alloc::vec::Vec;

use crate::diff::curl;
use crate::error::{Error, Result};
use crate::family::TestFunctionFamily;
use crate::field::VectorField;
use crate::geometry::MixingLength;
use crate::lab::{classify, EstimatorId, PatchLevels, SweepReport, Verdict};
use crate::norms::{norm3, powp, velocity_at_corner};
use crate::weight::{power_samples, SampleLocation};

struct LevelData {
    distance: Vec<f64>,
    /// `|curl u_i|` per corner.
    vorticity: Vec<Vec<f64>>,
    /// `<B u_i, u_j>`.
    pairing: Vec<Vec<f64>>,
    volume: f64,
}

fn level_data(fields: &[VectorField]) -> Result<LevelData> {
    let g = *fields.first().ok_or_else(|| Error::Argument("empty family".into()))?.grid();
    let dims = g.dims();
    let mut vel = Vec::with_capacity(fields.len());
    let mut conv = Vec::with_capacity(fields.len());
    let mut vorticity = Vec::with_capacity(fields.len());
    for u in fields {
        let om = curl(u);
        let (mut v, mut c, mut m) = (Vec::new(), Vec::new(), Vec::new());
        g.for_each_corner(|_, cell, b| {
            let idx = g.corner_idx(cell, b);
            let x = velocity_at_corner(u, &idx.face);
            let w = om.at_corner(&idx.edge);
            let y = if dims == 3 {
                [w[1] * x[2] - w[2] * x[1], w[2] * x[0] - w[0] * x[2], w[0] * x[1] - w[1] * x[0]]
            } else {
                [-w[0] * x[1], w[0] * x[0], 0.0]
            };
            v.push(x);
            c.push(y);
            m.push(norm3(&w));
        });
        vel.push(v);
        conv.push(c);
        vorticity.push(m);
    }
    let volume = g.corner_volume();
    let pairing = conv
        .iter()
        .map(|c| vel.iter().map(|v| volume * c.iter().zip(v).map(|(a, b)| a[0] * b[0] + a[1] * b[1] + a[2] * b[2]).sum::<f64>()).collect())
        .collect();
    let distance = power_samples(&g, &MixingLength::default(), 1.0, SampleLocation::Corners).values;
    Ok(LevelData { distance, vorticity, pairing, volume })
}

impl LevelData {
    /// `max_{i != j} |<B u_i, u_j>| / (||u_i||_V^2 ||u_j||_V)`.
    fn ratio(&self, p: f64, alpha: f64) -> f64 {
        let w: Vec<f64> = self.distance.iter().map(|&d| if alpha == 0.0 { 1.0 } else { libm::pow(d, alpha) }).collect();
        let norms: Vec<f64> = self
            .vorticity
            .iter()
            .map(|m| libm::pow(self.volume * m.iter().zip(&w).map(|(s, w)| w * powp(*s, p)).sum::<f64>(), 1.0 / p))
            .collect();
        let mut best = 0.0f64;
        for (i, row) in self.pairing.iter().enumerate() {
            for (j, d) in row.iter().enumerate() {
                if i != j && norms[i] > 0.0 && norms[j] > 0.0 {
                    best = best.max(d.abs() / (norms[i] * norms[i] * norms[j]));
                }
            }
        }
        best
    }
}

/// Whether `(p, alpha)` lies where the weighted V-space is defined: `0 <= alpha < p - 1`.
pub(crate) fn admissible(p: f64, alpha: f64) -> bool {
    alpha >= 0.0 && alpha < p - 1.0 - 1e-12
}

fn levels_for(data: &[LevelData], p: f64, alpha: f64) -> Vec<f64> {
    data.iter().map(|d| d.ratio(p, alpha)).collect()
}

fn prepare(family: &TestFunctionFamily, patches: &PatchLevels) -> Result<Vec<LevelData>> {
    if family.count < 2 || family.concentration_levels == 0 {
        return Err(Error::Argument("B sweep needs at least two fields and one level".into()));
    }
    patches.fields(family)?.iter().map(|f| level_data(f)).collect()
}

/// Per-level supremum of the B ratio for one `(p, alpha)`.
pub fn b_bound_levels(family: &TestFunctionFamily, patches: &PatchLevels, p: f64, alpha: f64) -> Result<Vec<f64>> {
    Ok(levels_for(&prepare(family, patches)?, p, alpha))
}

/// B ratio along the concentration sequence for every `(p, alpha)` pair;
/// pairs outside `0 <= alpha < p - 1` are reported as precondition-violated.
pub fn b_bound_sweep(family: &TestFunctionFamily, patches: &PatchLevels, p_grid: &[f64], alpha_grid: &[f64]) -> Result<SweepReport> {
    if p_grid.iter().chain(alpha_grid).any(|v| !v.is_finite()) || p_grid.iter().any(|&p| !(p > 1.0)) {
        return Err(Error::Argument("p and alpha grids must be finite with p > 1".into()));
    }
    let data = prepare(family, patches)?;
    let cells = vec![patches.n_cells(); data.len()];
    let mut report = SweepReport::default();
    for &p in p_grid {
        for &alpha in alpha_grid {
            let values = levels_for(&data, p, alpha);
            let verdict = if admissible(p, alpha) { classify(&values) } else { Verdict::PreconditionViolated };
            report.push_levels(EstimatorId::BBound, p, alpha, &values, verdict, family.seed, &cells);
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn family(count: usize) -> TestFunctionFamily {
        TestFunctionFamily::near_wall_concentrating(17, count, 5)
    }

    #[test]
    fn verdicts_follow_the_critical_lines() {
        let r = b_bound_sweep(&family(6), &PatchLevels::default(), &[3.0, 2.5, 4.0], &[1.5, 1.45, 2.5]).unwrap();
        assert_eq!(r.verdict("B_bound", 3.0, 1.5), Some(Verdict::Bounded));
        assert_eq!(r.verdict("B_bound", 2.5, 1.45), Some(Verdict::Growing));
        assert_eq!(r.verdict("B_bound", 4.0, 2.5), Some(Verdict::Bounded));
        assert_eq!(r.verdict("B_bound", 3.0, 2.5), Some(Verdict::PreconditionViolated));
        assert_eq!(r.rows.len(), 9 * 5);
        assert!(r.rows.iter().all(|row| row.value >= 0.0 && row.value.is_finite()));
    }

    #[test]
    fn enlarging_the_family_never_lowers_the_sup() {
        let pl = PatchLevels::default();
        let small = b_bound_levels(&family(3), &pl, 2.5, 1.0).unwrap();
        let large = b_bound_levels(&family(6), &pl, 2.5, 1.0).unwrap();
        for (s, l) in small.iter().zip(&large) {
            assert!(l >= s);
        }
    }

    #[test]
    fn convective_form_is_skew_on_each_sample() {
        let pl = PatchLevels::default();
        let f = pl.fields(&family(3)).unwrap();
        let d = level_data(&f[1]).unwrap();
        for i in 0..3 {
            let scale = d.pairing[i].iter().fold(0.0f64, |m, v| m.max(v.abs()));
            assert!(d.pairing[i][i].abs() <= 1e-10 * scale, "{:?}", d.pairing[i]);
        }
    }
}
