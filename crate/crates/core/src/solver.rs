//! Implicit time stepping with an energy ledger.
//!
//! Each step solves
//! `(u+ - u)/dt + S(u+) + B(u°) + grad q = f`, `div u+ = 0`,
//! with `u° = u+` (implicit Euler) or `u° = u` (semi-implicit), by damped
//! Picard iteration on the frozen-coefficient problem
//! `(I + dt curl^T K curl) u~ = P(u + dt (f - B(u_k)))` in the divergence-free
//! subspace. The damped update `u_k + theta (u~ - u_k)` is Anderson-mixed
//! with the last few iterates; the accepted state is the final `u~`.
//!
//! Testing the step with `u+` gives the discrete energy identity
//! `1/2|u+|^2 + 1/2|u+ - u|^2 + dt C ||u+||_V^p = 1/2|u|^2 + dt <f, u+>`,
//! which the ledger records step by step.

use alloc::format;
use alloc::vec::Vec;

use crate::diff::divergence;
use crate::error::{Error, Result};
use crate::family::TestFunctionFamily;
use crate::field::{ScalarField, VectorField};
use crate::grid::Grid;
use crate::operators::{ModelOperator, ModelParams};
use crate::projection::{Projector, DEFAULT_LERAY_TOL};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    ImplicitEuler,
    /// `S` implicit, `B` explicit.
    SemiImplicit,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Damping {
    /// `theta = 2/p`.
    Auto,
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    pub dt: f64,
    pub t_end: f64,
    pub scheme: Scheme,
    /// Relative L2 residual of the nonlinear step equation at which the step is accepted.
    pub picard_tol: f64,
    pub picard_max: usize,
    pub damping: Damping,
    /// Anderson history length (0: plain damped Picard).
    pub anderson_depth: usize,
    pub leray_tol: f64,
    /// Emit a snapshot every this many steps (0: never).
    pub snapshot_every: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            dt: 1e-3,
            t_end: 1e-1,
            scheme: Scheme::ImplicitEuler,
            picard_tol: 1e-10,
            picard_max: 200,
            damping: Damping::Auto,
            anderson_depth: 3,
            leray_tol: DEFAULT_LERAY_TOL,
            snapshot_every: 0,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::Argument(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.t_end >= 0.0) || !self.t_end.is_finite() {
            return Err(Error::Argument(format!("t_end must be >= 0, got {}", self.t_end)));
        }
        if !(self.picard_tol > 0.0) {
            return Err(Error::Argument(format!("picard_tol must be positive, got {}", self.picard_tol)));
        }
        if self.picard_max == 0 {
            return Err(Error::Argument("picard_max must be at least 1".into()));
        }
        if let Damping::Fixed(t) = self.damping {
            if !(t > 0.0 && t <= 1.0) {
                return Err(Error::Argument(format!("damping must lie in (0, 1], got {t}")));
            }
        }
        if !(self.leray_tol > 0.0) {
            return Err(Error::Argument(format!("leray_tol must be positive, got {}", self.leray_tol)));
        }
        self.n_steps().map(|_| ())
    }

    /// `t_end / dt`, which must be an integer up to rounding.
    pub fn n_steps(&self) -> Result<usize> {
        let r = self.t_end / self.dt;
        let n = libm::round(r);
        if (r - n).abs() > 1e-9 * n.max(1.0) {
            return Err(Error::Argument(format!("t_end / dt = {r} is not an integer")));
        }
        Ok(n as usize)
    }

    pub fn theta(&self, p: f64) -> f64 {
        match self.damping {
            Damping::Auto => (2.0 / p).min(1.0),
            Damping::Fixed(t) => t,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EnergyLedgerRow {
    pub step: usize,
    pub t: f64,
    /// `1/2 |u^n|^2` after the step.
    pub kinetic: f64,
    pub dissipation_increment: f64,
    pub work_increment: f64,
    pub scheme_dissipation: f64,
    /// Per-step defect of the discrete energy identity.
    pub balance_residual: f64,
    pub picard_iters: usize,
    pub cg_iters: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct EnergyLedger {
    pub kinetic0: f64,
    pub rows: Vec<EnergyLedgerRow>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Cumulative {
    pub dissipation: f64,
    pub work: f64,
    pub work_abs: f64,
    pub scheme_dissipation: f64,
}

impl EnergyLedger {
    /// Sums over the first `n` rows.
    pub fn cumulative(&self, n: usize) -> Cumulative {
        let mut c = Cumulative::default();
        for r in &self.rows[..n] {
            c.dissipation += r.dissipation_increment;
            c.work += r.work_increment;
            c.work_abs += r.work_increment.abs();
            c.scheme_dissipation += r.scheme_dissipation;
        }
        c
    }

    pub fn max_residual(&self) -> f64 {
        (0..=self.rows.len()).map(|i| energy_residual(self, i)).fold(0.0, f64::max)
    }
}

/// Normalized defect of the energy identity after `t_index` steps (0 = initial state).
pub fn energy_residual(ledger: &EnergyLedger, t_index: usize) -> f64 {
    if t_index == 0 {
        return 0.0;
    }
    let t_index = t_index.min(ledger.rows.len());
    let c = ledger.cumulative(t_index);
    let k = ledger.rows[t_index - 1].kinetic;
    let num = (k + c.dissipation + c.scheme_dissipation - c.work - ledger.kinetic0).abs();
    let den = ledger.kinetic0 + c.work_abs;
    if den == 0.0 {
        num
    } else {
        num / den
    }
}

#[derive(Debug, Clone)]
pub enum InitialData {
    /// `(A sin(kx x) cos(ky y), -A (kx/ky) cos(kx x) sin(ky y))` with `k = pi / L`.
    TaylorGreen2d { amplitude: f64 },
    RandomBumpProjected { amplitude: f64, seed: u64 },
    Field(VectorField),
}

#[derive(Debug, Clone)]
pub enum ForcingSpec {
    Zero,
    Steady(VectorField),
}

pub fn taylor_green(grid: &Grid, amplitude: f64) -> VectorField {
    let ext = grid.domain().extents();
    let kx = core::f64::consts::PI / ext[0];
    let ky = core::f64::consts::PI / ext[1];
    VectorField::from_fn(grid, |x| {
        [
            amplitude * libm::sin(kx * x[0]) * libm::cos(ky * x[1]),
            -amplitude * (kx / ky) * libm::cos(kx * x[0]) * libm::sin(ky * x[1]),
            0.0,
        ]
    })
}

/// Steady no-slip solution with its forcing, for `alpha = 0` on a 2D wall-bounded box.
///
/// `u* = curl psi` with `psi = A sin^2(kx x) sin^2(ky y)`, `k = pi / L`, and
/// `f = S(u*) + (u* . grad) u*` in closed form (the convective form differs
/// from the skew form by a gradient, absorbed by the pressure).
pub fn manufactured_steady(grid: &Grid, params: &ModelParams, amplitude: f64) -> Result<(VectorField, VectorField)> {
    if grid.dims() != 2 || !grid.is_wall(0) || !grid.is_wall(1) {
        return Err(Error::Argument("the manufactured solution needs a 2D grid with walls on both axes".into()));
    }
    if params.alpha != 0.0 {
        return Err(Error::Argument(format!("the manufactured solution is closed-form only for alpha = 0, got {}", params.alpha)));
    }
    let ext = grid.domain().extents();
    let (kx, ky) = (core::f64::consts::PI / ext[0], core::f64::consts::PI / ext[1]);
    let a = amplitude;
    // sin^2 and its first three derivatives
    let s0 = |t: f64| libm::sin(t) * libm::sin(t);
    let s1 = |t: f64| libm::sin(2.0 * t);
    let s2 = |t: f64| 2.0 * libm::cos(2.0 * t);
    let s3 = |t: f64| -4.0 * libm::sin(2.0 * t);
    let vel = |x: f64, y: f64| (a * ky * s0(x) * s1(y), -a * kx * s1(x) * s0(y));
    let u = VectorField::from_fn(grid, |p| {
        let (ux, uy) = vel(kx * p[0], ky * p[1]);
        [ux, uy, 0.0]
    });
    let c = params.coefficient();
    let pp = params.p;
    let f = VectorField::from_fn(grid, |p| {
        let (x, y) = (kx * p[0], ky * p[1]);
        let w = -a * (kx * kx * s2(x) * s0(y) + ky * ky * s0(x) * s2(y));
        let wx = -a * (kx * kx * kx * s3(x) * s0(y) + kx * ky * ky * s1(x) * s2(y));
        let wy = -a * (kx * kx * ky * s2(x) * s1(y) + ky * ky * ky * s0(x) * s3(y));
        // S u = curl^T (c |w|^{p-2} w), grad of the flux is c (p-1) |w|^{p-2} grad w
        let g = if w == 0.0 { 0.0 } else { c * (pp - 1.0) * libm::pow(w.abs(), pp - 2.0) };
        let (ux, uy) = vel(x, y);
        let (dxux, dyux) = (a * kx * ky * s1(x) * s1(y), a * ky * ky * s0(x) * s2(y));
        let (dxuy, dyuy) = (-a * kx * kx * s2(x) * s0(y), -a * kx * ky * s1(x) * s1(y));
        [g * wy + ux * dxux + uy * dyux, -g * wx + ux * dxuy + uy * dyuy, 0.0]
    });
    Ok((u, f))
}

#[derive(Debug, Clone)]
pub struct SteadyOutput {
    pub u: VectorField,
    pub steps: usize,
    /// `|u^{n+1} - u^n| / |u^{n+1}|` at the last step.
    pub change: f64,
}

/// March implicit steps with steady forcing until the relative change per step drops below `tol`.
pub fn march_to_steady(stepper: &Stepper, u0: &VectorField, f: &VectorField, tol: f64, max_steps: usize) -> Result<SteadyOutput> {
    if !(tol > 0.0) {
        return Err(Error::Argument(format!("steady tolerance must be positive, got {tol}")));
    }
    let mut u = stepper.project(u0)?;
    let mut change = f64::INFINITY;
    for n in 1..=max_steps {
        let out = stepper.step(&u, f)?;
        let size = out.u.norm_l2();
        change = if size > 0.0 { out.u.sub(&u).norm_l2() / size } else { 0.0 };
        u = out.u;
        if change < tol {
            return Ok(SteadyOutput { u, steps: n, change });
        }
    }
    Err(Error::Solver { what: "steady-state march", iterations: max_steps, residual: change })
}

impl InitialData {
    /// The Leray-projected initial field.
    pub fn build(&self, grid: &Grid, projector: &Projector, tol: f64) -> Result<VectorField> {
        let u = match self {
            InitialData::TaylorGreen2d { amplitude } => {
                if grid.dims() != 2 {
                    return Err(Error::Argument("Taylor-Green data needs a 2D grid".into()));
                }
                taylor_green(grid, *amplitude)
            }
            InitialData::RandomBumpProjected { amplitude, seed } => {
                TestFunctionFamily::random_bumps(*seed, 1).vector_field(grid, 0).scaled(*amplitude)
            }
            InitialData::Field(f) => {
                if f.grid() != grid {
                    return Err(Error::Argument("initial field lives on a different grid".into()));
                }
                f.clone()
            }
        };
        if !u.is_finite() {
            return Err(Error::Numeric("initial data is not finite".into()));
        }
        Ok(projector.project(&u, tol)?.0)
    }
}

/// Output of one time step.
#[derive(Debug, Clone)]
pub struct StepOutput {
    pub u: VectorField,
    pub q: ScalarField,
    pub row: EnergyLedgerRow,
    /// Relative nonlinear residual at the start of every Picard iterate.
    pub picard_residuals: Vec<f64>,
}

/// Operators and the projector bound to one grid.
pub struct Stepper {
    op: ModelOperator,
    projector: Projector,
    cfg: SolverConfig,
}

impl Stepper {
    pub fn new(grid: &Grid, params: &ModelParams, cfg: &SolverConfig) -> Result<Self> {
        params.validate_solver()?;
        cfg.validate()?;
        Ok(Self { op: ModelOperator::new(grid, params)?, projector: Projector::new(grid), cfg: *cfg })
    }

    pub fn projector(&self) -> &Projector {
        &self.projector
    }

    pub fn operator(&self) -> &ModelOperator {
        &self.op
    }

    pub fn config(&self) -> &SolverConfig {
        &self.cfg
    }

    fn project(&self, v: &VectorField) -> Result<VectorField> {
        Ok(self.projector.project(v, self.cfg.leray_tol)?.0)
    }

    /// CG for `P (I + dt L_K) x = b` in the divergence-free subspace, from `x`.
    ///
    /// `target(|r0|, |b|)` gives the absolute residual to reach. Below the
    /// projection's round-off the residual stalls; the best iterate is kept
    /// once it stops improving. Returns the iteration count and `|r0| / |b|`.
    fn solve_frozen(&self, k: &[f64], b: &VectorField, x: &mut VectorField, target: impl Fn(f64, f64) -> f64) -> Result<(usize, f64)> {
        const STALL: usize = 100;
        let dt = self.cfg.dt;
        let apply = |v: &VectorField| -> Result<VectorField> {
            let mut w = self.op.apply_frozen(k, v);
            w.scale(dt);
            w.axpy(1.0, v);
            self.project(&w)
        };
        let bn = b.norm_l2();
        let mut r = b.sub(&apply(x)?);
        let mut rr = r.dot(&r);
        let r0 = libm::sqrt(rr);
        let rel0 = if bn > 0.0 { r0 / bn } else { r0 };
        let target = target(r0, bn);
        if r0 <= target {
            return Ok((0, rel0));
        }
        let mut best = (r0, x.clone());
        let mut since_best = 0;
        let stalled = |best: (f64, VectorField), x: &mut VectorField, it: usize| -> Result<(usize, f64)> {
            if best.0 <= 1e-8 * bn {
                *x = best.1;
                Ok((it, rel0))
            } else {
                Err(Error::Solver { what: "frozen-coefficient CG", iterations: it, residual: best.0 })
            }
        };
        let mut p = r.clone();
        let cap = 10 * x.n_values().max(100);
        for it in 1..=cap {
            let ap = apply(&p)?;
            let pap = p.dot(&ap);
            if !(pap > 0.0) {
                return stalled(best, x, it);
            }
            let a = rr / pap;
            x.axpy(a, &p);
            r.axpy(-a, &ap);
            let rr_new = r.dot(&r);
            if !rr_new.is_finite() {
                return Err(Error::Numeric("non-finite residual in the implicit solve".into()));
            }
            let rn = libm::sqrt(rr_new);
            if rn <= target {
                return Ok((it, rel0));
            }
            if rn < best.0 {
                best.0 = rn;
                best.1.clone_from(x);
                since_best = 0;
            } else if best.0 <= 1e-8 * bn {
                since_best += 1;
                if since_best >= STALL {
                    return stalled(best, x, it);
                }
            }
            p.scale(rr_new / rr);
            p.axpy(1.0, &r);
            rr = rr_new;
        }
        Err(Error::Solver { what: "frozen-coefficient CG", iterations: cap, residual: libm::sqrt(rr) })
    }

    /// One step from `u` with forcing `f_next` evaluated at the new time.
    pub fn step(&self, u: &VectorField, f_next: &VectorField) -> Result<StepOutput> {
        self.step_from(u, f_next, u)
    }

    /// [`Stepper::step`] with the Picard loop started at `guess` (divergence-free).
    pub fn step_from(&self, u: &VectorField, f_next: &VectorField, guess: &VectorField) -> Result<StepOutput> {
        let cfg = &self.cfg;
        let dt = cfg.dt;
        let d = divergence(u).max_abs();
        if !(d <= cfg.leray_tol * u.max_abs().max(1.0) * 10.0) {
            return Err(Error::Precondition(format!("input field is not divergence-free (max |div| = {d:.3e})")));
        }
        let theta0 = cfg.theta(self.op.params().p);
        let mut theta = theta0;
        let explicit_b = match cfg.scheme {
            Scheme::SemiImplicit => Some(self.op.apply_b_unchecked(u)?),
            Scheme::ImplicitEuler => None,
        };
        let bound = (u.norm_l2() + dt * f_next.norm_l2()).max(f64::MIN_POSITIVE);
        let mut uk = guess.clone();
        let mut mixer = Anderson::new(cfg.anderson_depth);
        let mut iters = 0;
        let mut cg_iters = 0;
        let mut last = f64::INFINITY;
        let mut solved = None;
        let mut history = Vec::new();
        while iters < cfg.picard_max {
            iters += 1;
            let k = self.op.frozen_coefficients(&uk)?;
            let conv = match &explicit_b {
                Some(b) => b.clone(),
                None => self.op.apply_b_unchecked(&uk)?,
            };
            let mut rhs = u.clone();
            rhs.axpy(dt, f_next);
            rhs.axpy(-dt, &conv);
            let rhs = self.project(&rhs)?;
            let mut x = uk.clone();
            let tol = cfg.picard_tol;
            // a converged iterate still gets one tight solve, so the accepted
            // state satisfies the linear system to well below the tolerance
            let (its, rel0) = self.solve_frozen(&k, &rhs, &mut x, |r0, bn| {
                if r0 <= tol * bn {
                    1e-2 * tol * bn
                } else {
                    (0.05 * r0).max(1e-2 * tol * bn)
                }
            })?;
            cg_iters += its;
            history.push(rel0);
            if !x.is_finite() {
                return Err(Error::Numeric("non-finite iterate in the Picard loop".into()));
            }
            if rel0 > 2.0 * last {
                // residual blow-up: shorter steps and a fresh history
                theta = (0.5 * theta).max(theta0 / 16.0);
                mixer.reset();
            }
            if !(rel0 < 1e8) {
                return Err(Error::Solver { what: "Picard iteration (diverged)", iterations: iters, residual: rel0 });
            }
            last = rel0;
            if rel0 <= tol {
                // CG updates accumulate projection round-off in the divergence
                solved = Some(self.project(&x)?);
                break;
            }
            let f = x.sub(&uk);
            uk = mixer.next(uk, f, theta);
            // the exact step obeys |u+| <= |u| + dt |f|
            if !(uk.norm_l2() <= 4.0 * bound) {
                if theta <= theta0 / 16.0 {
                    return Err(Error::Solver { what: "Picard iteration (diverged)", iterations: iters, residual: last });
                }
                theta = (0.5 * theta).max(theta0 / 16.0);
                mixer.reset();
                uk = u.clone();
                last = f64::INFINITY;
            }
        }
        let Some(u_new) = solved else {
            return Err(Error::Solver { what: "Picard iteration", iterations: iters, residual: last });
        };
        let conv = match explicit_b {
            Some(b) => b,
            None => self.op.apply_b_unchecked(&u_new)?,
        };
        let s = self.op.apply_s(&u_new)?;
        let mut residual_force = f_next.sub(&s);
        residual_force.axpy(-1.0, &conv);
        let (q, _) = self.projector.solve_poisson(&divergence(&residual_force), cfg.leray_tol)?;

        let kin_old = 0.5 * u.dot(u);
        let kin_new = 0.5 * u_new.dot(&u_new);
        let diss = dt * s.dot(&u_new);
        let work = dt * f_next.dot(&u_new);
        let jump = u_new.sub(u);
        let scheme = 0.5 * jump.dot(&jump);
        let row = EnergyLedgerRow {
            step: 0,
            t: 0.0,
            kinetic: kin_new,
            dissipation_increment: diss,
            work_increment: work,
            scheme_dissipation: scheme,
            balance_residual: kin_new + diss + scheme - work - kin_old,
            picard_iters: iters,
            cg_iters,
        };
        Ok(StepOutput { u: u_new, q, row, picard_residuals: history })
    }
}

/// Anderson mixing of a damped fixed-point iteration `u -> u + theta f(u)`.
struct Anderson {
    depth: usize,
    /// `(u_{i+1} - u_i, f_{i+1} - f_i)`, oldest first.
    history: Vec<(VectorField, VectorField)>,
    prev: Option<(VectorField, VectorField, f64)>,
}

impl Anderson {
    fn new(depth: usize) -> Self {
        Self { depth, history: Vec::new(), prev: None }
    }

    fn reset(&mut self) {
        self.history.clear();
        self.prev = None;
    }

    fn next(&mut self, u: VectorField, f: VectorField, theta: f64) -> VectorField {
        let fnorm = f.norm_l2();
        if let Some((pu, pf, pnorm)) = self.prev.take() {
            if fnorm > pnorm {
                self.history.clear();
            } else if self.depth > 0 {
                self.history.push((u.sub(&pu), f.sub(&pf)));
                if self.history.len() > self.depth {
                    self.history.remove(0);
                }
            }
        }
        let mut next = u.clone();
        next.axpy(theta, &f);
        if let Some(gamma) = self.coefficients(&f) {
            for ((du, df), g) in self.history.iter().zip(gamma) {
                next.axpy(-g, du);
                next.axpy(-theta * g, df);
            }
        }
        self.prev = Some((u, f, fnorm));
        next
    }

    /// Least-squares `argmin |f - sum gamma_i df_i|` by the normal equations.
    fn coefficients(&self, f: &VectorField) -> Option<Vec<f64>> {
        let m = self.history.len();
        if m == 0 {
            return None;
        }
        let mut a = alloc::vec![0.0; m * m];
        let mut b = alloc::vec![0.0; m];
        for i in 0..m {
            b[i] = self.history[i].1.dot(f);
            for j in 0..=i {
                let v = self.history[i].1.dot(&self.history[j].1);
                a[i * m + j] = v;
                a[j * m + i] = v;
            }
        }
        let scale = (0..m).map(|i| a[i * m + i]).fold(0.0, f64::max);
        if !(scale > 0.0) {
            return None;
        }
        for i in 0..m {
            a[i * m + i] += 1e-12 * scale;
        }
        // Cholesky
        for j in 0..m {
            let mut d = a[j * m + j];
            for k in 0..j {
                d -= a[j * m + k] * a[j * m + k];
            }
            if !(d > 0.0) {
                return None;
            }
            let d = libm::sqrt(d);
            a[j * m + j] = d;
            for i in j + 1..m {
                let mut v = a[i * m + j];
                for k in 0..j {
                    v -= a[i * m + k] * a[j * m + k];
                }
                a[i * m + j] = v / d;
            }
        }
        for i in 0..m {
            let mut v = b[i];
            for k in 0..i {
                v -= a[i * m + k] * b[k];
            }
            b[i] = v / a[i * m + i];
        }
        for i in (0..m).rev() {
            let mut v = b[i];
            for k in i + 1..m {
                v -= a[k * m + i] * b[k];
            }
            b[i] = v / a[i * m + i];
        }
        b.iter().all(|g| g.is_finite()).then_some(b)
    }
}

/// One step with freshly built operators; prefer [`Stepper`] inside loops.
pub fn step(u: &VectorField, f_next: &VectorField, params: &ModelParams, cfg: &SolverConfig) -> Result<StepOutput> {
    Stepper::new(u.grid(), params, cfg)?.step(u, f_next)
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub u: VectorField,
    pub q: ScalarField,
    pub ledger: EnergyLedger,
}

/// Integrate to `t_end`; `observer(step, t, u)` sees the initial state and every snapshot.
pub fn run(
    grid: &Grid,
    init: &InitialData,
    forcing: &ForcingSpec,
    params: &ModelParams,
    cfg: &SolverConfig,
    mut observer: impl FnMut(usize, f64, &VectorField),
) -> Result<RunOutput> {
    let stepper = Stepper::new(grid, params, cfg)?;
    let n = cfg.n_steps()?;
    let mut u = init.build(grid, stepper.projector(), cfg.leray_tol)?;
    let f = match forcing {
        ForcingSpec::Zero => VectorField::zeros(grid),
        ForcingSpec::Steady(f) => {
            if f.grid() != grid {
                return Err(Error::Argument("forcing lives on a different grid".into()));
            }
            f.clone()
        }
    };
    let mut ledger = EnergyLedger { kinetic0: 0.5 * u.dot(&u), rows: Vec::with_capacity(n) };
    let mut q = ScalarField::zeros(grid);
    if cfg.snapshot_every > 0 {
        observer(0, 0.0, &u);
    }
    let mut previous: Option<VectorField> = None;
    for i in 1..=n {
        // linear extrapolation in time as the first Picard iterate
        let guess = match &previous {
            Some(p) => {
                let mut g = u.scaled(2.0);
                g.axpy(-1.0, p);
                g
            }
            None => u.clone(),
        };
        let out = stepper.step_from(&u, &f, &guess)?;
        let mut row = out.row;
        row.step = i;
        row.t = i as f64 * cfg.dt;
        ledger.rows.push(row);
        previous = Some(core::mem::replace(&mut u, out.u));
        q = out.q;
        if cfg.snapshot_every > 0 && i % cfg.snapshot_every == 0 {
            observer(i, row.t, &u);
        }
    }
    Ok(RunOutput { u, q, ledger })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Domain;
    use core::f64::consts::PI;

    fn box2d(n: usize) -> Grid {
        Grid::new(Domain::box2d(PI, PI).unwrap(), [n, n, 1]).unwrap()
    }

    fn cfg(dt: f64, steps: usize) -> SolverConfig {
        SolverConfig { dt, t_end: dt * steps as f64, ..Default::default() }
    }

    #[test]
    fn zero_data_stays_zero() {
        let g = Grid::new(Domain::channel(1.0, 1.0, 1.0).unwrap(), [4, 4, 4]).unwrap();
        let params = ModelParams::new(1.0, 3.0).unwrap();
        let out = run(&g, &InitialData::Field(VectorField::zeros(&g)), &ForcingSpec::Zero, &params, &cfg(1e-2, 3), |_, _, _| {}).unwrap();
        assert_eq!(out.u.max_abs(), 0.0);
        assert_eq!(out.ledger.rows.len(), 3);
        for r in &out.ledger.rows {
            assert_eq!((r.kinetic, r.dissipation_increment, r.work_increment, r.balance_residual), (0.0, 0.0, 0.0, 0.0));
        }
        assert_eq!(out.ledger.max_residual(), 0.0);
    }

    #[test]
    fn unforced_energy_decays_and_balances() {
        let g = box2d(16);
        for alpha in [0.0, 1.0] {
            let params = ModelParams::new(alpha, 3.0).unwrap();
            let c = cfg(2e-3, 10);
            let out = run(&g, &InitialData::TaylorGreen2d { amplitude: 1.0 }, &ForcingSpec::Zero, &params, &c, |_, _, _| {}).unwrap();
            let mut prev = out.ledger.kinetic0;
            for r in &out.ledger.rows {
                assert!(r.kinetic <= prev);
                assert!(r.dissipation_increment >= 0.0);
                prev = r.kinetic;
            }
            assert!(out.ledger.max_residual() <= 10.0 * c.picard_tol, "{}", out.ledger.max_residual());
        }
    }

    #[test]
    fn semi_implicit_residual_is_reported() {
        let g = box2d(12);
        let params = ModelParams::new(0.0, 3.0).unwrap();
        let c = SolverConfig { scheme: Scheme::SemiImplicit, ..cfg(5e-3, 4) };
        let out = run(&g, &InitialData::TaylorGreen2d { amplitude: 1.0 }, &ForcingSpec::Zero, &params, &c, |_, _, _| {}).unwrap();
        let r = out.ledger.max_residual();
        assert!(r.is_finite() && r > 0.0);
    }

    #[test]
    fn forced_energy_identity_includes_work() {
        let g = box2d(12);
        let params = ModelParams::new(0.0, 3.0).unwrap();
        let (_, f) = manufactured_steady(&g, &params, 1.0).unwrap();
        let c = cfg(1e-2, 5);
        let out = run(&g, &InitialData::Field(VectorField::zeros(&g)), &ForcingSpec::Steady(f), &params, &c, |_, _, _| {}).unwrap();
        assert!(out.ledger.rows.iter().all(|r| r.work_increment > 0.0));
        assert!(out.ledger.max_residual() <= 10.0 * c.picard_tol);
    }

    #[test]
    fn steady_march_recovers_the_manufactured_solution() {
        let params = ModelParams::new(0.0, 3.0).unwrap();
        let mut errs = Vec::new();
        for n in [16, 32] {
            let g = box2d(n);
            let (us, f) = manufactured_steady(&g, &params, 1.0).unwrap();
            let st = Stepper::new(&g, &params, &cfg(5e-2, 1)).unwrap();
            let out = march_to_steady(&st, &us, &f, 1e-8, 500).unwrap();
            errs.push(out.u.sub(&us).norm_l2() / us.norm_l2());
        }
        assert!(errs[1] < errs[0] / 2.0, "{errs:?}");
        assert!(errs[1] < 0.02);
    }

    #[test]
    fn halving_dt_changes_terminal_energy_at_first_order() {
        let g = box2d(12);
        let params = ModelParams::new(0.0, 3.0).unwrap();
        let (_, f) = manufactured_steady(&g, &params, 1.0).unwrap();
        let e: Vec<f64> = [0.04, 0.02, 0.01]
            .iter()
            .map(|&dt| {
                let c = SolverConfig { dt, t_end: 0.2, ..Default::default() };
                let out = run(&g, &InitialData::Field(VectorField::zeros(&g)), &ForcingSpec::Steady(f.clone()), &params, &c, |_, _, _| {}).unwrap();
                out.ledger.rows.last().unwrap().kinetic
            })
            .collect();
        let ratio = (e[0] - e[1]) / (e[1] - e[2]);
        assert!(ratio > 1.6 && ratio < 2.6, "{ratio}");
    }

    #[test]
    fn divergent_input_is_rejected() {
        let g = box2d(8);
        let params = ModelParams::new(0.0, 3.0).unwrap();
        let st = Stepper::new(&g, &params, &cfg(1e-3, 1)).unwrap();
        let u = VectorField::from_fn(&g, |x| [x[0] * x[1], 0.0, 0.0]);
        assert!(matches!(st.step(&u, &VectorField::zeros(&g)), Err(Error::Precondition(_))));
    }

    #[test]
    fn solver_rejects_subcritical_p_and_bad_config() {
        let g = box2d(8);
        assert!(Stepper::new(&g, &ModelParams::unchecked(0.0, 2.5), &cfg(1e-3, 1)).is_err());
        let bad = SolverConfig { dt: 0.3, t_end: 1.0, ..Default::default() };
        assert!(bad.validate().is_err());
        let bad = SolverConfig { damping: Damping::Fixed(1.5), ..Default::default() };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn auto_damping_is_two_over_p() {
        let c = SolverConfig::default();
        assert_eq!(c.theta(3.0), 2.0 / 3.0);
        assert_eq!(c.theta(4.0), 0.5);
    }

    #[test]
    fn ledger_residual_normalization() {
        let ledger = EnergyLedger {
            kinetic0: 2.0,
            rows: alloc::vec![EnergyLedgerRow { kinetic: 1.5, dissipation_increment: 0.25, work_increment: -0.5, ..Default::default() }],
        };
        // |1.5 + 0.25 + 0.5 - 2| / (2 + 0.5)
        assert!((energy_residual(&ledger, 1) - 0.1).abs() < 1e-15);
        assert_eq!(energy_residual(&ledger, 0), 0.0);
    }
}
