//! Dispatch of a validated configuration and emission of its reports.

use std::cell::RefCell;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use rotsmag_core::conditions::{check_conditions, ProjectedSampler};
use rotsmag_core::family::TestFunctionFamily;
use rotsmag_core::lab::{sweep_cell, EstimatorId, SweepReport};
use rotsmag_core::operators::ModelParams;
use rotsmag_core::solver::{self, EnergyLedger, ForcingSpec, InitialData, SolverConfig, Stepper};
use rotsmag_core::{Domain, Grid, VectorField};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::{Command, ConfigError, ConvergenceSettings, ForcingKind, InitialSpec, RunConfig, SweepSettings};
use crate::snapshot;

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("{0}")]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Core(#[from] rotsmag_core::Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("{} of {total} campaign cells failed; first: {first}", failed)]
    Cells { failed: usize, total: usize, first: String, code: i32 },
}

impl RunError {
    /// 2 configuration, 3 solver, 4 numeric, 1 anything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => 2,
            RunError::Core(e) => core_code(e),
            RunError::Io(_) => 1,
            RunError::Cells { code, .. } => *code,
        }
    }
}

fn core_code(e: &rotsmag_core::Error) -> i32 {
    use rotsmag_core::Error as E;
    match e {
        E::Argument(_) | E::Domain(_) | E::Precondition(_) => 2,
        E::Solver { .. } => 3,
        E::Numeric(_) => 4,
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct GridInfo {
    pub dims: usize,
    pub cells: [usize; 3],
    pub spacing: [f64; 3],
}

#[derive(Debug, Clone, Serialize)]
pub struct CellInfo {
    pub estimator: String,
    pub q: Option<f64>,
    pub p: f64,
    pub alpha: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct CellFailure {
    pub cell: CellInfo,
    pub error: String,
}

/// Run record written to `manifest.json`; the only output that varies between reruns is `wall_time_s`.
#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub version: &'static str,
    pub command: &'static str,
    pub config_hash: String,
    pub seed: u64,
    pub threads: usize,
    pub wall_time_s: f64,
    pub outputs: Vec<String>,
    pub partial: bool,
    pub error: Option<String>,
    pub grid: Option<GridInfo>,
    pub picard_tol: f64,
    pub leray_tol: f64,
    pub cells: Vec<CellInfo>,
    pub failures: Vec<CellFailure>,
    pub config: serde_json::Value,
}

/// SHA-256 of the parsed configuration (with the effective seed) in canonical JSON.
pub fn config_hash(cfg: &RunConfig) -> String {
    let mut raw = cfg.raw.clone();
    raw.seed = Some(cfg.seed);
    raw.output = None;
    let text = serde_json::to_string(&raw).expect("config serializes");
    let mut h = Sha256::new();
    h.update(cfg.command.name().as_bytes());
    h.update(text.as_bytes());
    hex::encode(h.finalize())
}

struct Sink {
    dir: PathBuf,
    outputs: Vec<String>,
}

impl Sink {
    fn write(&mut self, name: &str, text: &str) -> Result<(), RunError> {
        fs::write(self.dir.join(name), text)?;
        self.outputs.push(name.to_string());
        Ok(())
    }
}

/// Run `cfg`, writing reports and `manifest.json` into `out`.
///
/// The manifest is written even when the run fails, flagged as partial.
pub fn execute(cfg: &RunConfig, out: &Path, threads: Option<usize>) -> Result<Manifest, RunError> {
    fs::create_dir_all(out)?;
    let start = Instant::now();
    let mut sink = Sink { dir: out.to_path_buf(), outputs: Vec::new() };
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads.unwrap_or(0)).build().map_err(|e| std::io::Error::other(e.to_string()))?;
    let mut failures = Vec::new();
    let result = match cfg.command {
        Command::Simulate => simulate(cfg, &mut sink),
        Command::Check => check(cfg, &mut sink),
        Command::Sweep => pool.install(|| sweep(cfg, &mut sink, &mut failures)),
        Command::Convergence => convergence(cfg, &mut sink),
    };
    let manifest = Manifest {
        version: env!("CARGO_PKG_VERSION"),
        command: cfg.command.name(),
        config_hash: config_hash(cfg),
        seed: cfg.seed,
        threads: pool.current_num_threads(),
        wall_time_s: start.elapsed().as_secs_f64(),
        outputs: sink.outputs.clone(),
        partial: result.is_err(),
        error: result.as_ref().err().map(|e| e.to_string()),
        grid: cfg.grid.map(|g| GridInfo { dims: g.dims(), cells: g.cells(), spacing: g.spacing() }),
        picard_tol: cfg.solver.picard_tol,
        leray_tol: cfg.solver.leray_tol,
        cells: cfg.sweep.as_ref().map(campaign_cells).unwrap_or_default().iter().map(cell_info).collect(),
        failures,
        config: serde_json::to_value(&cfg.raw).expect("config serializes"),
    };
    fs::write(out.join("manifest.json"), serde_json::to_string_pretty(&manifest).expect("manifest serializes") + "\n")?;
    result.map(|_| manifest)
}

fn params_of(cfg: &RunConfig) -> Result<ModelParams, RunError> {
    cfg.params.ok_or_else(|| ConfigError::Invalid(vec!["model: block is required".into()]).into())
}

fn grid_of(cfg: &RunConfig) -> Result<Grid, RunError> {
    cfg.grid.ok_or_else(|| ConfigError::Invalid(vec!["domain: block is required".into()]).into())
}

pub const LEDGER_HEADER: &str = "step,t,kinetic,dissipation_cum,work_cum,scheme_dissipation_cum,residual,picard_iters";

/// Ledger CSV with a step-0 row for the initial state; cumulative columns and
/// the normalized residual follow the running sums.
pub fn ledger_csv(ledger: &EnergyLedger) -> String {
    let mut s = String::from(LEDGER_HEADER);
    s.push('\n');
    let _ = writeln!(s, "0,0,{:e},0,0,0,0,0", ledger.kinetic0);
    let (mut d, mut w, mut wa, mut sd) = (0.0, 0.0, 0.0, 0.0);
    for r in &ledger.rows {
        d += r.dissipation_increment;
        w += r.work_increment;
        wa += r.work_increment.abs();
        sd += r.scheme_dissipation;
        let num = (r.kinetic + d + sd - w - ledger.kinetic0).abs();
        let den = ledger.kinetic0 + wa;
        let res = if den == 0.0 { num } else { num / den };
        let _ = writeln!(s, "{},{},{:e},{:e},{:e},{:e},{:e},{}", r.step, r.t, r.kinetic, d, w, sd, res, r.picard_iters);
    }
    s
}

fn simulate(cfg: &RunConfig, sink: &mut Sink) -> Result<(), RunError> {
    let grid = grid_of(cfg)?;
    let params = params_of(cfg)?;
    let init = match &cfg.initial {
        InitialSpec::Zero => InitialData::Field(VectorField::zeros(&grid)),
        InitialSpec::TaylorGreen { amplitude } => InitialData::TaylorGreen2d { amplitude: *amplitude },
        InitialSpec::RandomBump { amplitude, seed } => InitialData::RandomBumpProjected { amplitude: *amplitude, seed: seed.unwrap_or(cfg.seed) },
        InitialSpec::File { path } => InitialData::Field(snapshot::read_field(Path::new(path), &grid)?),
    };
    let forcing = match cfg.forcing {
        ForcingKind::Zero => ForcingSpec::Zero,
        ForcingKind::Manufactured { amplitude } => ForcingSpec::Steady(solver::manufactured_steady(&grid, &params, amplitude)?.1),
    };
    let snaps = sink.dir.join("snapshots");
    if cfg.solver.snapshot_every > 0 {
        fs::create_dir_all(&snaps)?;
    }
    let written = RefCell::new(Vec::new());
    let io_err = RefCell::new(None);
    let run = solver::run(&grid, &init, &forcing, &params, &cfg.solver, |step, _, u| {
        if io_err.borrow().is_some() {
            return;
        }
        match snapshot::write_field(&snaps.join(format!("snap_{step:06}")), u) {
            Ok(files) => written.borrow_mut().extend(files),
            Err(e) => *io_err.borrow_mut() = Some(e),
        }
    });
    for f in written.into_inner() {
        sink.outputs.push(f.strip_prefix(&sink.dir).unwrap_or(&f).display().to_string());
    }
    if let Some(e) = io_err.into_inner() {
        return Err(e.into());
    }
    let run = run?;
    sink.write("ledger.csv", &ledger_csv(&run.ledger))
}

fn check(cfg: &RunConfig, sink: &mut Sink) -> Result<(), RunError> {
    let grid = grid_of(cfg)?;
    let params = params_of(cfg)?;
    let mut s = String::from("p,alpha,n,seed,c0_hat,c1_hat,sample_count,skipped\n");
    for &n in &cfg.samples {
        let family = match cfg.check_family.as_str() {
            "tensor_polynomial" => TestFunctionFamily::tensor_polynomial(cfg.seed, n),
            _ => TestFunctionFamily::random_bumps(cfg.seed, n),
        };
        let mut sampler = ProjectedSampler::new(&grid, family).with_tol(cfg.solver.leray_tol);
        let r = check_conditions(&params, &mut sampler, n)?;
        let _ = writeln!(s, "{},{},{},{},{:e},{:e},{},{}", r.p, r.alpha, n, cfg.seed, r.c0_hat, r.c1_hat, r.sample_count, r.skipped);
    }
    sink.write("conditions.csv", &s)
}

/// Campaign cells in estimator-major, then p, then alpha order.
pub fn campaign_cells(s: &SweepSettings) -> Vec<(EstimatorId, f64, f64)> {
    let mut v = Vec::with_capacity(s.estimators.len() * s.p.len() * s.alpha.len());
    for &e in &s.estimators {
        for &p in &s.p {
            for &a in &s.alpha {
                v.push((e, p, a));
            }
        }
    }
    v
}

fn cell_info(c: &(EstimatorId, f64, f64)) -> CellInfo {
    CellInfo { estimator: c.0.name().to_string(), q: c.0.q(), p: c.1, alpha: c.2 }
}

fn sweep(cfg: &RunConfig, sink: &mut Sink, failures: &mut Vec<CellFailure>) -> Result<(), RunError> {
    let s = cfg.sweep.as_ref().ok_or_else(|| ConfigError::Invalid(vec!["sweep: block is required".into()]))?;
    let family = TestFunctionFamily::near_wall_concentrating(cfg.seed, s.count, s.levels);
    let cells = campaign_cells(s);
    // cells run in parallel; collecting keeps campaign order, so output is thread-count independent
    let results: Vec<_> = cells.par_iter().map(|&(e, p, a)| sweep_cell(e, p, a, &family, &s.patches)).collect();
    let mut report = SweepReport::default();
    let mut code = 0;
    for (c, r) in cells.iter().zip(results) {
        match r {
            Ok(r) => report.extend(r),
            Err(e) => {
                code = code.max(core_code(&e));
                failures.push(CellFailure { cell: cell_info(c), error: e.to_string() });
            }
        }
    }
    sink.write("sweep.csv", &report.to_csv())?;
    if let Some(f) = failures.first() {
        return Err(RunError::Cells { failed: failures.len(), total: cells.len(), first: f.error.clone(), code });
    }
    Ok(())
}

fn order(a: f64, b: f64, c: f64) -> f64 {
    ((a - b) / (b - c)).abs().log2()
}

/// Spatial study on the steady manufactured solution and a temporal Richardson
/// study of the terminal kinetic energy, forced from rest.
pub fn convergence_rows(domain: Domain, params: &ModelParams, base: &SolverConfig, c: &ConvergenceSettings) -> Result<String, RunError> {
    let mut s = String::from("study,resolution,value,order,steps\n");
    let mut errs: Vec<f64> = Vec::new();
    for (i, &n) in c.grids.iter().enumerate() {
        let g = Grid::new(domain, [n, n, 1])?;
        let (exact, f) = solver::manufactured_steady(&g, params, c.amplitude)?;
        let step_cfg = SolverConfig { dt: c.steady_dt, t_end: c.steady_dt, ..*base };
        let st = Stepper::new(&g, params, &step_cfg)?;
        let out = solver::march_to_steady(&st, &exact, &f, c.steady_tol, c.max_steps)?;
        let e = out.u.sub(&exact).norm_l2();
        let ord = if i > 0 { format!("{}", (errs[i - 1] / e).log2() / (n as f64 / c.grids[i - 1] as f64).log2()) } else { String::new() };
        let _ = writeln!(s, "spatial,{n},{e:e},{ord},{}", out.steps);
        errs.push(e);
    }
    let g = Grid::new(domain, [c.richardson_cells, c.richardson_cells, 1])?;
    let f = solver::manufactured_steady(&g, params, c.amplitude)?.1;
    let mut energies = Vec::new();
    for &dt in &c.richardson_dt {
        let cfg = SolverConfig { dt, t_end: c.richardson_t_end, snapshot_every: 0, ..*base };
        let out = solver::run(&g, &InitialData::Field(VectorField::zeros(&g)), &ForcingSpec::Steady(f.clone()), params, &cfg, |_, _, _| {})?;
        let k = out.ledger.rows.last().map(|r| r.kinetic).unwrap_or(out.ledger.kinetic0);
        energies.push(k);
        let m = energies.len();
        let ord = if m >= 3 { format!("{}", order(energies[m - 3], energies[m - 2], energies[m - 1]) / (c.richardson_dt[m - 2] / dt).log2()) } else { String::new() };
        let _ = writeln!(s, "temporal,{dt},{k:e},{ord},{}", out.ledger.rows.len());
    }
    Ok(s)
}

fn convergence(cfg: &RunConfig, sink: &mut Sink) -> Result<(), RunError> {
    let params = params_of(cfg)?;
    let c = cfg.convergence.as_ref().ok_or_else(|| ConfigError::Invalid(vec!["convergence: block is required".into()]))?;
    let domain = match cfg.grid {
        Some(g) => *g.domain(),
        None => Domain::box2d(std::f64::consts::PI, std::f64::consts::PI)?,
    };
    let rows = convergence_rows(domain, &params, &cfg.solver, c)?;
    sink.write("convergence.csv", &rows)
}
