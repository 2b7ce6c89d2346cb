//! Preconditioned conjugate gradients on flat arrays.

use alloc::vec;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CgOutcome {
    pub iterations: usize,
    /// Max-norm of the final residual.
    pub residual: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn max_abs(a: &[f64]) -> f64 {
    a.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

/// Solve `A x = b` for symmetric positive (semi)definite `A`, starting from `x`.
///
/// Stops when the max-norm residual drops to `tol`.
pub fn pcg(
    what: &'static str,
    mut apply: impl FnMut(&[f64], &mut [f64]),
    mut precond: impl FnMut(&[f64], &mut [f64]),
    b: &[f64],
    x: &mut [f64],
    tol: f64,
    max_iter: usize,
) -> Result<CgOutcome> {
    let n = b.len();
    let mut r = vec![0.0; n];
    let mut ap = vec![0.0; n];
    apply(x, &mut ap);
    for i in 0..n {
        r[i] = b[i] - ap[i];
    }
    let mut res = max_abs(&r);
    if !res.is_finite() {
        return Err(Error::Numeric(alloc::format!("{what}: non-finite residual")));
    }
    if res <= tol {
        return Ok(CgOutcome { iterations: 0, residual: res });
    }
    let mut z = vec![0.0; n];
    precond(&r, &mut z);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    for it in 1..=max_iter {
        apply(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            return Err(Error::Solver { what, iterations: it, residual: res });
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        res = max_abs(&r);
        if !res.is_finite() {
            return Err(Error::Numeric(alloc::format!("{what}: non-finite residual")));
        }
        if res <= tol {
            return Ok(CgOutcome { iterations: it, residual: res });
        }
        precond(&r, &mut z);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(Error::Solver { what, iterations: max_iter, residual: res })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_small_spd_system() {
        let a = [[4.0, 1.0, 0.0], [1.0, 3.0, 1.0], [0.0, 1.0, 2.0]];
        let b = [1.0, 2.0, 3.0];
        let mut x = [0.0; 3];
        let out = pcg(
            "test",
            |v, o| {
                for i in 0..3 {
                    o[i] = (0..3).map(|j| a[i][j] * v[j]).sum();
                }
            },
            |r, z| z.copy_from_slice(r),
            &b,
            &mut x,
            1e-13,
            10,
        )
        .unwrap();
        assert!(out.iterations <= 3);
        for i in 0..3 {
            let ax: f64 = (0..3).map(|j| a[i][j] * x[j]).sum();
            assert!((ax - b[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn reports_cap() {
        let mut x = [0.0; 2];
        let e = pcg("test", |v, o| o.copy_from_slice(v), |r, z| z.copy_from_slice(r), &[1.0, 1.0], &mut x, 1e-12, 0);
        assert!(matches!(e, Err(Error::Solver { .. })));
    }
}
