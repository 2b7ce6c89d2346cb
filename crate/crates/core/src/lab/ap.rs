use alloc::vec::Vec;

use crate::error::Result;
use crate::geometry::Domain;
use crate::lab::{classify, EstimatorId, SweepReport};
use crate::weight::ap_levels;

/// `A_p` constants of `d^alpha` on the refinement levels of the near-wall
/// cube family, one level sequence per `(p, alpha)`.
pub fn ap_sweep(domain: &Domain, p_grid: &[f64], alpha_grid: &[f64], levels: u32) -> Result<SweepReport> {
    let cells: Vec<usize> = (0..levels).map(|k| 2 * 8usize.pow(k)).collect();
    let mut report = SweepReport::default();
    for &p in p_grid {
        for &alpha in alpha_grid {
            let values = ap_levels(domain, alpha, p, levels)?;
            report.push_levels(EstimatorId::Ap, p, alpha, &values, classify(&values), 0, &cells);
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lab::Verdict;

    #[test]
    fn boundary_of_the_class() {
        let d = Domain::channel(1.0, 1.0, 1.0).unwrap();
        let r = ap_sweep(&d, &[3.0], &[1.0, 2.0], 5).unwrap();
        assert_eq!(r.verdict("A_p", 3.0, 2.0), Some(Verdict::Growing));
        let stable: Vec<f64> = r.rows.iter().filter(|x| x.alpha == 1.0).map(|x| x.value).collect();
        assert_eq!(stable.len(), 5);
        assert!(stable[4] < 2.0 * stable[3]);
        assert_eq!(r.rows[4].cells, 8192);
    }
}
