//! JSON run configuration with two validation profiles.
//!
//! Solver-facing runs (`simulate`, `convergence`) enforce `0 <= alpha < p - 1`
//! and `p >= 3`; `check` enforces `0 <= alpha < p - 1`; `sweep` only needs
//! finite exponents with `p > 1`, so supercritical probes can be expressed.

use std::fmt;

use rotsmag_core::geometry::{Domain, MixingLength, MixingVariant};
use rotsmag_core::grid::Grid;
use rotsmag_core::lab::{EstimatorId, PatchLevels};
use rotsmag_core::operators::ModelParams;
use rotsmag_core::solver::{Damping, Scheme, SolverConfig};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    Simulate,
    ConditionCheck,
    InequalitySweep,
    ApSweep,
    ConvergenceStudy,
}

/// Which subcommand is reading the file.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Simulate,
    Check,
    Sweep,
    Convergence,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::Check => "check",
            Command::Sweep => "sweep",
            Command::Convergence => "convergence",
        }
    }

    fn accepts(self, e: Experiment) -> bool {
        matches!(
            (self, e),
            (Command::Simulate, Experiment::Simulate)
                | (Command::Check, Experiment::ConditionCheck)
                | (Command::Sweep, Experiment::InequalitySweep | Experiment::ApSweep)
                | (Command::Convergence, Experiment::ConvergenceStudy)
        )
    }
}

/// A length: a number, or a multiple of pi written `"pi"`, `"2pi"`, `"0.5pi"`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Length {
    Value(f64),
    Expr(String),
}

impl Length {
    fn value(&self) -> Option<f64> {
        match self {
            Length::Value(v) => Some(*v),
            Length::Expr(s) => {
                let s = s.trim();
                let head = s.strip_suffix("pi")?.trim();
                let k = if head.is_empty() { 1.0 } else { head.parse::<f64>().ok()? };
                Some(k * std::f64::consts::PI)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainBlock {
    /// `channel`, `box3d`, `box2d` or `channel2d`.
    pub kind: String,
    pub extents: Vec<Length>,
    #[serde(default)]
    pub cells: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MixingBlock {
    /// `distance`, `obukhov` or `van_driest`.
    pub variant: Option<String>,
    pub kappa: Option<f64>,
    pub damping: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelBlock {
    pub alpha: f64,
    pub p: f64,
    pub c_alpha: Option<f64>,
    pub eps: Option<f64>,
    pub mixing: Option<MixingBlock>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DampingValue {
    Fixed(f64),
    /// Only `"auto"`.
    Named(String),
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverBlock {
    pub dt: Option<f64>,
    pub t_end: Option<f64>,
    /// `implicit_euler` or `semi_implicit`.
    pub scheme: Option<String>,
    pub picard_tol: Option<f64>,
    pub picard_max: Option<usize>,
    pub damping: Option<DampingValue>,
    pub anderson_depth: Option<usize>,
    pub leray_tol: Option<f64>,
    pub snapshot_every: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialBlock {
    /// `taylor_green_2d`, `random_bump_projected`, `file` or `zero`.
    pub kind: String,
    pub amplitude: Option<f64>,
    pub seed: Option<u64>,
    /// Snapshot prefix for `file`: components are read from `<path>_u<a>.bin`.
    pub path: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ForcingBlock {
    /// `zero` or `manufactured` (the steady solution's forcing; 2D walls, alpha = 0).
    pub kind: String,
    pub amplitude: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckBlock {
    /// Sample counts; one report row each.
    pub samples: Option<Vec<usize>>,
    /// `random_bumps` or `tensor_polynomial`.
    pub family: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum EstimatorSpec {
    Name(String),
    /// `{"hardy_sobolev": q}`.
    Param(std::collections::BTreeMap<String, f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GridSpec {
    List(Vec<f64>),
    Range { from: f64, to: f64, step: f64 },
}

impl GridSpec {
    /// Points `from + k step` up to `to` inclusive, computed without accumulation.
    fn expand(&self) -> Option<Vec<f64>> {
        match self {
            GridSpec::List(v) => Some(v.clone()),
            GridSpec::Range { from, to, step } => {
                if !(*step > 0.0) || !(to >= from) || !from.is_finite() || !to.is_finite() {
                    return None;
                }
                let n = ((to - from) / step + 1e-9).floor() as usize;
                if n > 100_000 {
                    return None;
                }
                // round to 12 digits so 0.1 steps print as 0.3, not 0.30000000000000004
                Some((0..=n).map(|k| ((from + k as f64 * step) * 1e12).round() / 1e12).collect())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepBlock {
    pub estimators: Option<Vec<EstimatorSpec>>,
    pub p: Option<GridSpec>,
    pub alpha: Option<GridSpec>,
    pub levels: Option<u32>,
    pub count: Option<usize>,
    pub bits_per_level: Option<u32>,
    pub patch_cells: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvergenceBlock {
    pub grids: Option<Vec<usize>>,
    pub amplitude: Option<f64>,
    pub steady_dt: Option<f64>,
    pub steady_tol: Option<f64>,
    pub max_steps: Option<usize>,
    pub richardson_cells: Option<usize>,
    pub richardson_dt: Option<Vec<f64>>,
    pub richardson_t_end: Option<f64>,
}

/// The file as written.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    pub experiment: Option<Experiment>,
    pub seed: Option<u64>,
    pub output: Option<String>,
    pub domain: Option<DomainBlock>,
    pub model: Option<ModelBlock>,
    pub solver: Option<SolverBlock>,
    pub initial: Option<InitialBlock>,
    pub forcing: Option<ForcingBlock>,
    pub check: Option<CheckBlock>,
    pub sweep: Option<SweepBlock>,
    pub convergence: Option<ConvergenceBlock>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum InitialSpec {
    Zero,
    TaylorGreen { amplitude: f64 },
    /// `seed: None` follows the run seed.
    RandomBump { amplitude: f64, seed: Option<u64> },
    File { path: String },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ForcingKind {
    Zero,
    Manufactured { amplitude: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSettings {
    pub estimators: Vec<EstimatorId>,
    pub p: Vec<f64>,
    pub alpha: Vec<f64>,
    pub levels: u32,
    pub count: usize,
    pub patches: PatchLevels,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceSettings {
    pub grids: Vec<usize>,
    pub amplitude: f64,
    pub steady_dt: f64,
    pub steady_tol: f64,
    pub max_steps: usize,
    pub richardson_cells: usize,
    pub richardson_dt: Vec<f64>,
    pub richardson_t_end: f64,
}

/// A fully validated configuration with every default filled in.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub command: Command,
    pub experiment: Experiment,
    pub seed: u64,
    pub output: Option<String>,
    pub grid: Option<Grid>,
    pub params: Option<ModelParams>,
    pub solver: SolverConfig,
    pub initial: InitialSpec,
    pub forcing: ForcingKind,
    pub samples: Vec<usize>,
    pub check_family: String,
    pub sweep: Option<SweepSettings>,
    pub convergence: Option<ConvergenceSettings>,
    /// The file as parsed, echoed into the manifest.
    pub raw: RawConfig,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ConfigError {
    /// Malformed JSON or a schema mismatch, with position.
    Syntax { message: String, line: usize, column: usize },
    /// Every semantic violation found.
    Invalid(Vec<String>),
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConfigError::Syntax { message, line, column } => write!(f, "config syntax error at line {line}, column {column}: {message}"),
            ConfigError::Invalid(v) => {
                write!(f, "config has {} violation(s):", v.len())?;
                for m in v {
                    write!(f, "\n  - {m}")?;
                }
                Ok(())
            }
        }
    }
}

impl std::error::Error for ConfigError {}

fn domain_from(b: &DomainBlock, errs: &mut Vec<String>) -> Option<Grid> {
    let dims = match b.kind.as_str() {
        "channel" | "box3d" => 3,
        "box2d" | "channel2d" => 2,
        other => {
            errs.push(format!("domain.kind: unknown kind '{other}' (expected channel, box3d, box2d or channel2d)"));
            return None;
        }
    };
    if b.extents.len() != dims {
        errs.push(format!("domain.extents: expected {dims} entries, got {}", b.extents.len()));
        return None;
    }
    if b.cells.len() != dims {
        errs.push(format!("domain.cells: expected {dims} entries, got {}", b.cells.len()));
        return None;
    }
    let mut ext = [1.0; 3];
    for (a, l) in b.extents.iter().enumerate() {
        match l.value() {
            Some(v) => ext[a] = v,
            None => {
                errs.push(format!("domain.extents[{a}]: cannot read {l:?} as a length"));
                return None;
            }
        }
    }
    let dom = match b.kind.as_str() {
        "channel" => Domain::channel(ext[0], ext[1], ext[2]),
        "box3d" => Domain::box3d(ext[0], ext[1], ext[2]),
        "box2d" => Domain::box2d(ext[0], ext[1]),
        _ => Domain::channel2d(ext[0], ext[1]),
    };
    let mut cells = [1; 3];
    cells[..dims].copy_from_slice(&b.cells);
    match dom.and_then(|d| Grid::new(d, cells)) {
        Ok(g) => Some(g),
        Err(e) => {
            errs.push(format!("domain: {e}"));
            None
        }
    }
}

fn mixing_from(b: &MixingBlock, errs: &mut Vec<String>) -> MixingLength {
    let mut ml = MixingLength::default();
    match b.variant.as_deref() {
        None | Some("distance") => {}
        Some("obukhov") => ml.variant = MixingVariant::Obukhov,
        Some("van_driest") => ml.variant = MixingVariant::VanDriest,
        Some(o) => errs.push(format!("model.mixing.variant: unknown variant '{o}'")),
    }
    if let Some(k) = b.kappa {
        ml.kappa = k;
    }
    if let Some(d) = b.damping {
        ml.damping = d;
    }
    if let Err(e) = ml.validate() {
        errs.push(format!("model.mixing: {e}"));
    }
    ml
}

fn model_from(b: &ModelBlock, command: Command, errs: &mut Vec<String>) -> ModelParams {
    let mut m = ModelParams::unchecked(b.alpha, b.p).with_c_alpha(b.c_alpha.unwrap_or(1.0)).with_eps(b.eps.unwrap_or(0.0));
    if let Some(ml) = &b.mixing {
        m = m.with_mixing(mixing_from(ml, errs));
    }
    let (alpha, p) = (b.alpha, b.p);
    match command {
        Command::Sweep => {
            if !(p > 1.0) || !p.is_finite() || !alpha.is_finite() {
                errs.push(format!("model: lab probes need finite alpha and p > 1, got alpha = {alpha}, p = {p}"));
            }
        }
        _ => {
            if let Err(e) = m.validate_basic() {
                errs.push(format!("model: {e}"));
            } else if !(alpha < p - 1.0) {
                errs.push(format!("model: alpha = {alpha} violates the existence range alpha in [0, p-1) = [0, {})", p - 1.0));
            }
            if matches!(command, Command::Simulate | Command::Convergence) && !(p >= 3.0) {
                errs.push(format!("model: the time integrator needs p >= 3, got p = {p}"));
            }
        }
    }
    m
}

fn solver_from(b: &SolverBlock, errs: &mut Vec<String>) -> SolverConfig {
    let mut c = SolverConfig::default();
    macro_rules! set {
        ($f:ident) => {
            if let Some(v) = b.$f {
                c.$f = v;
            }
        };
    }
    set!(dt);
    set!(t_end);
    set!(picard_tol);
    set!(picard_max);
    set!(anderson_depth);
    set!(leray_tol);
    set!(snapshot_every);
    match b.scheme.as_deref() {
        None | Some("implicit_euler") => {}
        Some("semi_implicit") => c.scheme = Scheme::SemiImplicit,
        Some(o) => errs.push(format!("solver.scheme: unknown scheme '{o}' (expected implicit_euler or semi_implicit)")),
    }
    match &b.damping {
        None => {}
        Some(DampingValue::Named(s)) if s == "auto" => c.damping = Damping::Auto,
        Some(DampingValue::Named(s)) => errs.push(format!("solver.damping: expected a number in (0, 1] or \"auto\", got '{s}'")),
        Some(DampingValue::Fixed(t)) => c.damping = Damping::Fixed(*t),
    }
    if let Err(e) = c.validate() {
        errs.push(format!("solver: {e}"));
    }
    c
}

fn estimator_from(s: &EstimatorSpec, errs: &mut Vec<String>) -> Option<EstimatorId> {
    let id = match s {
        EstimatorSpec::Name(n) => match n.as_str() {
            "hardy" => EstimatorId::Hardy,
            "curl_grad_equiv" => EstimatorId::CurlGrad,
            "embed_L1" => EstimatorId::EmbedL1,
            "gelfand_L2" => EstimatorId::GelfandL2,
            "B_bound" => EstimatorId::BBound,
            "A_p" => EstimatorId::Ap,
            "hardy_sobolev" => {
                errs.push("sweep.estimators: hardy_sobolev needs q, write {\"hardy_sobolev\": q}".into());
                return None;
            }
            o => {
                errs.push(format!("sweep.estimators: unknown estimator '{o}'"));
                return None;
            }
        },
        EstimatorSpec::Param(m) => match (m.len(), m.get("hardy_sobolev")) {
            (1, Some(&q)) if q.is_finite() && q >= 1.0 => EstimatorId::HardySobolev { q },
            _ => {
                errs.push(format!("sweep.estimators: expected {{\"hardy_sobolev\": q}} with q >= 1, got {m:?}"));
                return None;
            }
        },
    };
    Some(id)
}

fn sweep_from(b: &SweepBlock, experiment: Experiment, model: Option<&ModelBlock>, domain: Option<Domain>, errs: &mut Vec<String>) -> SweepSettings {
    let default_est = if experiment == Experiment::ApSweep { vec![EstimatorId::Ap] } else { vec![EstimatorId::BBound] };
    let estimators = match &b.estimators {
        Some(v) if v.is_empty() => {
            errs.push("sweep.estimators: list is empty".into());
            vec![]
        }
        Some(v) => v.iter().filter_map(|s| estimator_from(s, errs)).collect(),
        None => default_est,
    };
    let mut axis = |name: &str, spec: &Option<GridSpec>, fallback: Option<f64>| -> Vec<f64> {
        match (spec, fallback) {
            (Some(s), _) => match s.expand() {
                Some(v) if !v.is_empty() && v.iter().all(|x| x.is_finite()) => v,
                _ => {
                    errs.push(format!("sweep.{name}: need a nonempty finite list or a range with step > 0"));
                    vec![]
                }
            },
            (None, Some(x)) => vec![x],
            (None, None) => {
                errs.push(format!("sweep.{name}: missing (and no model block to fall back on)"));
                vec![]
            }
        }
    };
    let p = axis("p", &b.p, model.map(|m| m.p));
    let alpha = axis("alpha", &b.alpha, model.map(|m| m.alpha));
    if p.iter().any(|&x| !(x > 1.0)) {
        errs.push("sweep.p: every p must exceed 1".into());
    }
    let levels = b.levels.unwrap_or(5);
    if !(2..=12).contains(&levels) {
        errs.push(format!("sweep.levels: need 2..=12 levels, got {levels}"));
    }
    let count = b.count.unwrap_or(8);
    if count < 2 {
        errs.push(format!("sweep.count: need at least 2 fields, got {count}"));
    }
    let mut patches = PatchLevels::default();
    if let Some(d) = domain {
        if d.wall_axes().next().is_none() {
            errs.push("domain: sweeps need a domain with a wall".into());
        }
        patches.domain = d;
    }
    patches.bits_per_level = b.bits_per_level.unwrap_or(patches.bits_per_level);
    patches.cells = b.patch_cells.unwrap_or(patches.cells);
    if patches.bits_per_level == 0 || patches.bits_per_level * levels > 900 {
        errs.push(format!("sweep.bits_per_level: {} is unusable with {levels} levels", patches.bits_per_level));
    }
    if patches.cells < 4 {
        errs.push(format!("sweep.patch_cells: need at least 4, got {}", patches.cells));
    }
    SweepSettings { estimators, p, alpha, levels, count, patches }
}

fn convergence_from(b: &ConvergenceBlock, errs: &mut Vec<String>) -> ConvergenceSettings {
    let c = ConvergenceSettings {
        grids: b.grids.clone().unwrap_or_else(|| vec![32, 64, 128]),
        amplitude: b.amplitude.unwrap_or(1.0),
        steady_dt: b.steady_dt.unwrap_or(0.05),
        steady_tol: b.steady_tol.unwrap_or(1e-8),
        max_steps: b.max_steps.unwrap_or(5000),
        richardson_cells: b.richardson_cells.unwrap_or(32),
        richardson_dt: b.richardson_dt.clone().unwrap_or_else(|| vec![0.02, 0.01, 0.005]),
        richardson_t_end: b.richardson_t_end.unwrap_or(0.4),
    };
    if c.grids.len() < 2 || c.grids.iter().any(|&n| n < 4) {
        errs.push("convergence.grids: need at least two grids of >= 4 cells".into());
    }
    if c.richardson_dt.len() < 3 || c.richardson_dt.iter().any(|&d| !(d > 0.0)) {
        errs.push("convergence.richardson_dt: need at least three positive steps".into());
    }
    for &dt in &c.richardson_dt {
        let r = c.richardson_t_end / dt;
        if dt > 0.0 && (r - r.round()).abs() > 1e-9 * r.max(1.0) {
            errs.push(format!("convergence: richardson_t_end / {dt} is not an integer"));
        }
    }
    if !(c.steady_dt > 0.0) || !(c.steady_tol > 0.0) || !(c.amplitude.is_finite()) || c.richardson_cells < 4 {
        errs.push("convergence: steady_dt, steady_tol must be positive, amplitude finite, richardson_cells >= 4".into());
    }
    c
}

/// Parse and validate `text` for `command`, reporting every violation at once.
pub fn parse_config(text: &str, command: Command) -> Result<RunConfig, ConfigError> {
    let raw: RawConfig =
        serde_json::from_str(text).map_err(|e| ConfigError::Syntax { message: e.to_string(), line: e.line(), column: e.column() })?;
    let mut errs = Vec::new();
    let experiment = match (raw.experiment, command) {
        (Some(e), c) if c.accepts(e) => e,
        (Some(e), c) => {
            errs.push(format!("experiment: {e:?} cannot run under the '{}' subcommand", c.name()));
            e
        }
        (None, Command::Simulate) => Experiment::Simulate,
        (None, Command::Check) => Experiment::ConditionCheck,
        (None, Command::Sweep) => Experiment::InequalitySweep,
        (None, Command::Convergence) => Experiment::ConvergenceStudy,
    };
    let seed = raw.seed.unwrap_or(0);
    let grid = raw.domain.as_ref().and_then(|d| domain_from(d, &mut errs));
    if raw.domain.is_none() && matches!(command, Command::Simulate | Command::Check) {
        errs.push("domain: block is required".into());
    }
    let params = raw.model.as_ref().map(|m| model_from(m, command, &mut errs));
    if raw.model.is_none() && command != Command::Sweep {
        errs.push("model: block is required".into());
    }
    let solver = solver_from(raw.solver.as_ref().unwrap_or(&SolverBlock::default()), &mut errs);
    let initial = match &raw.initial {
        None if grid.map(|g| g.dims()) == Some(3) => InitialSpec::RandomBump { amplitude: 1.0, seed: None },
        None => InitialSpec::TaylorGreen { amplitude: 1.0 },
        Some(b) => {
            let amplitude = b.amplitude.unwrap_or(1.0);
            match b.kind.as_str() {
                "zero" => InitialSpec::Zero,
                "taylor_green_2d" => {
                    if grid.is_some_and(|g| g.dims() != 2) {
                        errs.push("initial: taylor_green_2d needs a 2D domain".into());
                    }
                    InitialSpec::TaylorGreen { amplitude }
                }
                "random_bump_projected" => InitialSpec::RandomBump { amplitude, seed: b.seed },
                "file" => match &b.path {
                    Some(p) => InitialSpec::File { path: p.clone() },
                    None => {
                        errs.push("initial.path: required for kind 'file'".into());
                        InitialSpec::Zero
                    }
                },
                o => {
                    errs.push(format!("initial.kind: unknown kind '{o}'"));
                    InitialSpec::Zero
                }
            }
        }
    };
    let forcing = match &raw.forcing {
        None => ForcingKind::Zero,
        Some(b) => match b.kind.as_str() {
            "zero" => ForcingKind::Zero,
            "manufactured" => {
                if params.is_some_and(|m| m.alpha != 0.0) || grid.is_some_and(|g| g.dims() != 2 || !g.is_wall(0) || !g.is_wall(1)) {
                    errs.push("forcing: manufactured forcing needs alpha = 0 on a 2D box".into());
                }
                ForcingKind::Manufactured { amplitude: b.amplitude.unwrap_or(1.0) }
            }
            o => {
                errs.push(format!("forcing.kind: unknown kind '{o}'"));
                ForcingKind::Zero
            }
        },
    };
    let check = raw.check.clone().unwrap_or_default();
    let samples = check.samples.unwrap_or_else(|| vec![200]);
    if samples.is_empty() || samples.contains(&0) {
        errs.push("check.samples: need positive sample counts".into());
    }
    let check_family = check.family.unwrap_or_else(|| "random_bumps".into());
    if !matches!(check_family.as_str(), "random_bumps" | "tensor_polynomial") {
        errs.push(format!("check.family: unknown family '{check_family}'"));
    }
    let sweep = (command == Command::Sweep)
        .then(|| sweep_from(&raw.sweep.clone().unwrap_or_default(), experiment, raw.model.as_ref(), grid.map(|g| *g.domain()), &mut errs));
    if command == Command::Convergence {
        if params.is_some_and(|m| m.alpha != 0.0) {
            errs.push("model: the manufactured solution is closed-form only for alpha = 0".into());
        }
        if grid.is_some_and(|g| g.dims() != 2 || !g.is_wall(0) || !g.is_wall(1)) {
            errs.push("domain: the convergence study runs on a 2D box".into());
        }
    }
    let convergence = (command == Command::Convergence).then(|| convergence_from(&raw.convergence.clone().unwrap_or_default(), &mut errs));
    if !errs.is_empty() {
        return Err(ConfigError::Invalid(errs));
    }
    Ok(RunConfig {
        command,
        experiment,
        seed,
        output: raw.output.clone(),
        grid,
        params,
        solver,
        initial,
        forcing,
        samples,
        check_family,
        sweep,
        convergence,
        raw,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{"domain": {"kind": "box2d", "extents": ["pi", "pi"], "cells": [16, 16]},
                              "model": {"alpha": 1, "p": 3}}"#;

    #[test]
    fn minimal_simulate_gets_defaults() {
        let c = parse_config(MINIMAL, Command::Simulate).unwrap();
        assert_eq!(c.solver, SolverConfig::default());
        assert_eq!(c.initial, InitialSpec::TaylorGreen { amplitude: 1.0 });
        assert_eq!(c.forcing, ForcingKind::Zero);
        assert_eq!(c.seed, 0);
        let g = c.grid.unwrap();
        assert!((g.domain().extents()[0] - std::f64::consts::PI).abs() < 1e-15);
    }

    #[test]
    fn profiles_differ_on_the_critical_exponent() {
        let text = r#"{"domain": {"kind": "channel", "extents": [1, 1, 1], "cells": [8, 8, 8]},
                       "model": {"alpha": 2, "p": 3}}"#;
        match parse_config(text, Command::Simulate) {
            Err(ConfigError::Invalid(v)) => assert!(v.iter().any(|m| m.contains("[0, 2)")), "{v:?}"),
            other => panic!("{other:?}"),
        }
        let c = parse_config(text, Command::Sweep).unwrap();
        assert_eq!(c.sweep.unwrap().alpha, vec![2.0]);
    }

    #[test]
    fn every_violation_is_listed() {
        let text = r#"{"domain": {"kind": "torus", "extents": [1], "cells": [8]},
                       "model": {"alpha": -1, "p": 3},
                       "solver": {"dt": -1, "scheme": "rk4"}}"#;
        match parse_config(text, Command::Simulate) {
            Err(ConfigError::Invalid(v)) => {
                assert!(v.len() >= 4, "{v:?}");
                for key in ["domain.kind", "model", "solver.scheme", "solver:"] {
                    assert!(v.iter().any(|m| m.starts_with(key)), "{key} missing from {v:?}");
                }
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn syntax_and_unknown_keys() {
        match parse_config("{\n  \"seed\": 1,\n  oops\n}", Command::Sweep) {
            Err(ConfigError::Syntax { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        match parse_config(r#"{"model": {"alpha": 1, "p": 3, "gamma": 2}}"#, Command::Sweep) {
            Err(ConfigError::Syntax { message, .. }) => assert!(message.contains("gamma")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn ranges_expand_without_drift() {
        let r = GridSpec::Range { from: 0.0, to: 1.0, step: 0.1 }.expand().unwrap();
        assert_eq!(r.len(), 11);
        assert_eq!(r[3], 0.3);
        assert_eq!(r[10], 1.0);
    }

    #[test]
    fn experiment_must_match_the_subcommand() {
        let text = r#"{"experiment": "ap_sweep", "sweep": {"p": [3], "alpha": [1]}}"#;
        assert_eq!(parse_config(text, Command::Sweep).unwrap().sweep.unwrap().estimators, vec![EstimatorId::Ap]);
        assert!(parse_config(text, Command::Simulate).is_err());
    }
}
