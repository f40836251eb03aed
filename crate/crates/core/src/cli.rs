//! Experiment runner: `key = value` configuration with flag overrides, one
//! subcommand per experiment, CSV and JSON artifacts.

use std::fmt;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;
use std::time::Instant;

use clap::Parser;
use serde::Serialize;
use serde_json::{json, Value};

use crate::abp::{abp_measure_estimate, certify_supersolution, localization_check, make_params};
use crate::dyadic::{integrate_in_time, select, Alternative, FixedTimeAlternative};
use crate::error::{Error, Result};
use crate::experiments::{
    barenblatt_bench, dented_supersolution_run, front_bench, hoelder_scales,
    plateau_subsolution_run, random_hoelder_fits, refinement_rate,
};
use crate::grid::{GridFunction, SpatialGrid};
use crate::oscillation::{
    exp_transform_constant, improvement_from_above_check, improvement_from_below_check,
    oscillation_decay,
};
use crate::paraboloid::contact_tolerance;
use crate::pucci::{EllipticityInterval, Sign};
use crate::refsol::{BarenblattPressure, FrontSolution};
use crate::scheme::{solve, Boundary, RunMetadata, Snapshots, SolverConfig, Trajectory};

pub const VERSION: &str = concat!(env!("CARGO_PKG_NAME"), " ", env!("CARGO_PKG_VERSION"));

/// Keys accepted in a config file.
pub const VALID_KEYS: &[&str] = &[
    "command", "lambda", "Lambda", "b", "sign", "dim", "nx", "cfl", "t_final", "ic", "k_max",
    "eta", "out", "seed",
];

/// Shifts used by `time-integrate`.
const N_SHIFTS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Solve,
    FrontBench,
    BarenblattBench,
    AbpCheck,
    DyadicSelect,
    TimeIntegrate,
    HoelderFit,
    OscLemmas,
}

impl Command {
    pub const ALL: [Command; 8] = [
        Command::Solve,
        Command::FrontBench,
        Command::BarenblattBench,
        Command::AbpCheck,
        Command::DyadicSelect,
        Command::TimeIntegrate,
        Command::HoelderFit,
        Command::OscLemmas,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Command::Solve => "solve",
            Command::FrontBench => "front-bench",
            Command::BarenblattBench => "barenblatt-bench",
            Command::AbpCheck => "abp-check",
            Command::DyadicSelect => "dyadic-select",
            Command::TimeIntegrate => "time-integrate",
            Command::HoelderFit => "hoelder-fit",
            Command::OscLemmas => "osc-lemmas",
        }
    }
}

impl FromStr for Command {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Command::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| {
                let names: Vec<_> = Command::ALL.iter().map(|c| c.name()).collect();
                Error::Config(format!(
                    "unknown command '{s}', expected one of {}",
                    names.join(", ")
                ))
            })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum InitialCondition {
    Front,
    Barenblatt,
    File(PathBuf),
    Constant(f64),
}

impl FromStr for InitialCondition {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "front" => Ok(Self::Front),
            "barenblatt" => Ok(Self::Barenblatt),
            _ => {
                if let Some(p) = s.strip_prefix("file:") {
                    Ok(Self::File(PathBuf::from(p)))
                } else if let Some(c) = s.strip_prefix("constant:") {
                    let c: f64 = c
                        .parse()
                        .map_err(|_| Error::Config(format!("bad constant in ic '{s}'")))?;
                    if !(c >= 0.0) || !c.is_finite() {
                        return Err(Error::Config(format!(
                            "constant initial data must be finite and >= 0, got {c}"
                        )));
                    }
                    Ok(Self::Constant(c))
                } else {
                    Err(Error::Config(format!(
                        "unknown ic '{s}', expected front, barenblatt, file:PATH or constant:C"
                    )))
                }
            }
        }
    }
}

impl fmt::Display for InitialCondition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Front => f.write_str("front"),
            Self::Barenblatt => f.write_str("barenblatt"),
            Self::File(p) => write!(f, "file:{}", p.display()),
            Self::Constant(c) => write!(f, "constant:{c}"),
        }
    }
}

impl Serialize for InitialCondition {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

/// Unvalidated settings from one source. Later layers override earlier ones.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConfigLayer {
    pub command: Option<String>,
    pub lambda: Option<f64>,
    pub big_lambda: Option<f64>,
    pub b: Option<f64>,
    pub sign: Option<String>,
    pub dim: Option<usize>,
    pub nx: Option<usize>,
    pub cfl: Option<f64>,
    pub t_final: Option<f64>,
    pub ic: Option<String>,
    pub k_max: Option<u32>,
    pub eta: Option<f64>,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
}

fn parse_value<T: FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse()
        .map_err(|_| Error::Config(format!("bad value '{v}' for key '{key}'")))
}

impl ConfigLayer {
    /// Parses `key = value` lines. `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut layer = Self::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!(
                    "line {}: expected 'key = value', got '{line}'",
                    i + 1
                ))
            })?;
            let (key, v) = (key.trim(), value.trim());
            match key {
                "command" => layer.command = Some(v.to_string()),
                "lambda" => layer.lambda = Some(parse_value(key, v)?),
                "Lambda" => layer.big_lambda = Some(parse_value(key, v)?),
                "b" => layer.b = Some(parse_value(key, v)?),
                "sign" => layer.sign = Some(v.to_string()),
                "dim" => layer.dim = Some(parse_value(key, v)?),
                "nx" => layer.nx = Some(parse_value(key, v)?),
                "cfl" => layer.cfl = Some(parse_value(key, v)?),
                "t_final" => layer.t_final = Some(parse_value(key, v)?),
                "ic" => layer.ic = Some(v.to_string()),
                "k_max" => layer.k_max = Some(parse_value(key, v)?),
                "eta" => layer.eta = Some(parse_value(key, v)?),
                "out" => layer.out = Some(PathBuf::from(v)),
                "seed" => layer.seed = Some(parse_value(key, v)?),
                _ => {
                    return Err(Error::Config(format!(
                        "line {}: unknown key '{key}', valid keys are {}",
                        i + 1,
                        VALID_KEYS.join(", ")
                    )))
                }
            }
        }
        Ok(layer)
    }

    pub fn overridden_by(self, top: ConfigLayer) -> Self {
        Self {
            command: top.command.or(self.command),
            lambda: top.lambda.or(self.lambda),
            big_lambda: top.big_lambda.or(self.big_lambda),
            b: top.b.or(self.b),
            sign: top.sign.or(self.sign),
            dim: top.dim.or(self.dim),
            nx: top.nx.or(self.nx),
            cfl: top.cfl.or(self.cfl),
            t_final: top.t_final.or(self.t_final),
            ic: top.ic.or(self.ic),
            k_max: top.k_max.or(self.k_max),
            eta: top.eta.or(self.eta),
            out: top.out.or(self.out),
            seed: top.seed.or(self.seed),
        }
    }
}

pub fn load_config(path: &Path) -> Result<ConfigLayer> {
    ConfigLayer::parse(&fs::read_to_string(path)?)
}

/// Fully resolved and validated settings.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub command: Command,
    pub lambda: f64,
    #[serde(rename = "Lambda")]
    pub big_lambda: f64,
    pub b_coeff: f64,
    pub sign: Sign,
    pub dim: usize,
    pub nx: usize,
    pub cfl_safety: f64,
    pub t_final: f64,
    pub initial_condition: InitialCondition,
    pub k_max: u32,
    pub eta: f64,
    pub out_dir: PathBuf,
    pub seed: u64,
}

impl ExperimentConfig {
    /// Fills defaults and checks every invariant.
    pub fn resolve(layer: ConfigLayer) -> Result<Self> {
        let command: Command = layer
            .command
            .ok_or_else(|| Error::Config("no command given".into()))?
            .parse()?;
        let lambda = layer.lambda.unwrap_or(1.0);
        let big_lambda = layer.big_lambda.unwrap_or(1.0);
        EllipticityInterval::new(lambda, big_lambda).map_err(|e| Error::Config(e.to_string()))?;
        let b_coeff = layer.b.unwrap_or(1.0);
        if !(lambda..=big_lambda).contains(&b_coeff) {
            return Err(Error::Config(format!(
                "b = {b_coeff} must lie in [lambda, Lambda] = [{lambda}, {big_lambda}]"
            )));
        }
        let sign = match layer.sign.as_deref().unwrap_or("+") {
            "+" | "plus" => Sign::Plus,
            "-" | "minus" => Sign::Minus,
            s => return Err(Error::Config(format!("sign must be + or -, got '{s}'"))),
        };
        let dim = layer.dim.unwrap_or(1);
        if !(1..=2).contains(&dim) {
            return Err(Error::Config(format!("dim must be 1 or 2, got {dim}")));
        }
        let nx = layer.nx.unwrap_or(129);
        if nx < 17 || !(nx - 1).is_power_of_two() {
            return Err(Error::Config(format!(
                "nx must be 2^k + 1 and at least 17, got {nx}"
            )));
        }
        let cfl_safety = layer.cfl.unwrap_or(0.9);
        if !(cfl_safety > 0.0 && cfl_safety <= 1.0) {
            return Err(Error::Config(format!(
                "cfl must lie in (0, 1], got {cfl_safety}"
            )));
        }
        let t_final = layer.t_final.unwrap_or(0.25);
        if !(t_final > 0.0) || !t_final.is_finite() {
            return Err(Error::Config(format!(
                "t_final must be positive, got {t_final}"
            )));
        }
        let initial_condition = layer.ic.as_deref().unwrap_or("front").parse()?;
        let k_max = layer.k_max.unwrap_or(6);
        if k_max > 12 {
            return Err(Error::Config(format!(
                "k_max must be at most 12, got {k_max}"
            )));
        }
        let eta = layer.eta.unwrap_or(0.1);
        if !(eta > 0.0 && eta <= 1.0) {
            return Err(Error::Config(format!("eta must lie in (0, 1], got {eta}")));
        }
        Ok(Self {
            command,
            lambda,
            big_lambda,
            b_coeff,
            sign,
            dim,
            nx,
            cfl_safety,
            t_final,
            initial_condition,
            k_max,
            eta,
            out_dir: layer.out.unwrap_or_else(|| PathBuf::from("pmelab-out")),
            seed: layer.seed.unwrap_or(0),
        })
    }

    pub fn ell(&self) -> EllipticityInterval {
        EllipticityInterval::new(self.lambda, self.big_lambda).expect("validated")
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "pmelab",
    version,
    about = "Degenerate parabolic experiment runner",
    allow_negative_numbers = true
)]
pub struct Flags {
    /// solve, front-bench, barenblatt-bench, abp-check, dyadic-select,
    /// time-integrate, hoelder-fit or osc-lemmas
    pub command: Option<String>,
    /// `key = value` file; flags take precedence
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long = "Lambda")]
    pub big_lambda: Option<f64>,
    #[arg(long)]
    pub b: Option<f64>,
    /// Pucci operator of the solved equation, + or -
    #[arg(long)]
    pub sign: Option<String>,
    #[arg(long)]
    pub dim: Option<usize>,
    /// Nodes per axis, 2^k + 1
    #[arg(long)]
    pub nx: Option<usize>,
    #[arg(long)]
    pub cfl: Option<f64>,
    #[arg(long)]
    pub t_final: Option<f64>,
    /// front, barenblatt, file:PATH or constant:C
    #[arg(long)]
    pub ic: Option<String>,
    #[arg(long)]
    pub k_max: Option<u32>,
    /// Measure fraction for the density alternative and the oscillation lemmas
    #[arg(long)]
    pub eta: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
}

impl Flags {
    fn layer(&self) -> ConfigLayer {
        ConfigLayer {
            command: self.command.clone(),
            lambda: self.lambda,
            big_lambda: self.big_lambda,
            b: self.b,
            sign: self.sign.clone(),
            dim: self.dim,
            nx: self.nx,
            cfl: self.cfl,
            t_final: self.t_final,
            ic: self.ic.clone(),
            k_max: self.k_max,
            eta: self.eta,
            out: self.out.clone(),
            seed: self.seed,
        }
    }
}

/// Resolves a config from parsed flags and the optional file they name.
pub fn config_from_flags(flags: &Flags) -> Result<ExperimentConfig> {
    let base = match &flags.config {
        Some(p) => load_config(p)?,
        None => ConfigLayer::default(),
    };
    ExperimentConfig::resolve(base.overridden_by(flags.layer()))
}

/// Result of one command before it is written out.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub report: Value,
    /// A hypothesis or selection diagnostic fired; exit code 2.
    pub diagnostic: bool,
    /// Solver run to dump as snapshots, if any.
    pub solver: Option<(SolverConfig, Trajectory)>,
}

impl Outcome {
    fn report(report: Value, diagnostic: bool) -> Self {
        Self {
            report,
            diagnostic,
            solver: None,
        }
    }
}

/// Initial data on a space-time setup.
struct Setup {
    space: SpatialGrid,
    init: Vec<f64>,
    cfg: SolverConfig,
    t_start: f64,
    t_end: f64,
    /// Closed form when the data is an exact solution.
    exact: Option<Arc<dyn Fn(&[f64], f64) -> f64 + Send + Sync>>,
}

fn snapshot_spacing(dim: usize) -> f64 {
    if dim == 1 {
        1.0 / 1024.0
    } else {
        1.0 / 256.0
    }
}

/// Reads the earliest slice of a `t,x1[,x2],u` file.
pub fn read_initial_csv(path: &Path, dim: usize) -> Result<(SpatialGrid, Vec<f64>, f64)> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines
        .next()
        .ok_or_else(|| Error::Config(format!("{} is empty", path.display())))?;
    let want = if dim == 1 { "t,x1,u" } else { "t,x1,x2,u" };
    if header.replace(' ', "") != want {
        return Err(Error::Config(format!(
            "{}: header must be '{want}'",
            path.display()
        )));
    }
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for l in lines {
        let row: Vec<f64> = l
            .split(',')
            .map(|v| v.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::Config(format!("{}: bad row '{l}'", path.display())))?;
        if row.len() != dim + 2 {
            return Err(Error::Config(format!("{}: bad row '{l}'", path.display())));
        }
        rows.push(row);
    }
    let t0 = rows.iter().map(|r| r[0]).fold(f64::INFINITY, f64::min);
    rows.retain(|r| r[0] == t0);
    let mut axes: Vec<Vec<f64>> = (0..dim)
        .map(|a| {
            let mut v: Vec<f64> = rows.iter().map(|r| r[1 + a]).collect();
            v.sort_by(f64::total_cmp);
            v.dedup();
            v
        })
        .collect();
    if axes.iter().any(|v| v.len() < 2) {
        return Err(Error::Config(format!(
            "{}: need at least two nodes per axis",
            path.display()
        )));
    }
    let h = axes[0][1] - axes[0][0];
    for v in &mut axes {
        if v.windows(2).any(|w| ((w[1] - w[0]) - h).abs() > 1e-9 * h) {
            return Err(Error::Config(format!(
                "{}: nodes are not on a uniform lattice",
                path.display()
            )));
        }
    }
    let origin: Vec<f64> = axes.iter().map(|v| v[0]).collect();
    let extent: Vec<f64> = axes.iter().map(|v| (v.len() - 1) as f64 * h).collect();
    let space = SpatialGrid::new(&origin, &extent, h)?;
    if rows.len() != space.len() {
        return Err(Error::Config(format!(
            "{}: {} rows at t = {t0} but the lattice has {} nodes",
            path.display(),
            rows.len(),
            space.len()
        )));
    }
    let mut init = vec![f64::NAN; space.len()];
    for r in &rows {
        let f = space.locate(&r[1..=dim]).ok_or_else(|| {
            Error::Config(format!(
                "{}: node {:?} is off the lattice",
                path.display(),
                &r[1..=dim]
            ))
        })?;
        init[f] = r[dim + 1];
    }
    if init.iter().any(|v| v.is_nan()) {
        return Err(Error::Config(format!(
            "{}: duplicate nodes",
            path.display()
        )));
    }
    Ok((space, init, t0))
}

/// `long` setups cover `[-2 tau - 1/2, 1]` on a box holding `B_R`; the
/// others run `t_final` from the natural start of the data.
fn setup(c: &ExperimentConfig, long: bool) -> Result<Setup> {
    let ell = c.ell();
    let mut cfg = SolverConfig::new(ell, c.b_coeff, c.sign, c.dim)?.with_cfl(c.cfl_safety)?;
    let tau = c.dim as f64;
    let natural_start = if c.initial_condition == InitialCondition::Barenblatt {
        1.0
    } else {
        0.0
    };
    let (t_start, t_end) = if long {
        (-2.0 * tau - 0.5, 1.0)
    } else {
        (natural_start, natural_start + c.t_final)
    };
    let half_width = |short: f64| if long { [5.0, 8.0][c.dim - 1] } else { short };
    let mut direction = vec![0.0; c.dim];
    direction[0] = 1.0;
    let (space, init, t_start, exact): (
        _,
        _,
        _,
        Option<Arc<dyn Fn(&[f64], f64) -> f64 + Send + Sync>>,
    ) = match &c.initial_condition {
        InitialCondition::Front => {
            if !(c.b_coeff > 0.0) {
                return Err(Error::Config("the front needs b > 0".into()));
            }
            let space = SpatialGrid::centered(c.dim, half_width(1.0), c.nx)?;
            let front = FrontSolution::new(&direction, c.b_coeff)?;
            let init = (0..space.len())
                .map(|f| front.eval(&space.point(f), t_start))
                .collect();
            let f2 = front.clone();
            cfg = cfg.with_boundary(Boundary::Exact(Arc::new(move |x, t| f2.eval(x, t))));
            (
                space,
                init,
                t_start,
                Some(Arc::new(move |x: &[f64], t: f64| front.eval(x, t)) as _),
            )
        }
        InitialCondition::Barenblatt => {
            let space = SpatialGrid::centered(c.dim, half_width(6.0), c.nx)?;
            let p = BarenblattPressure::new(c.dim, 1.0)?;
            // Pressure clock starts at one whatever the run's start time.
            let shift = 1.0 - t_start;
            let init = (0..space.len())
                .map(|f| p.eval_unchecked(&space.point(f), 1.0))
                .collect();
            (
                space,
                init,
                t_start,
                Some(Arc::new(move |x: &[f64], t: f64| p.eval_unchecked(x, t + shift)) as _),
            )
        }
        InitialCondition::Constant(v) => {
            let space = SpatialGrid::centered(c.dim, half_width(1.0), c.nx)?;
            let v = *v;
            (
                space.clone(),
                vec![v; space.len()],
                t_start,
                Some(Arc::new(move |_: &[f64], _: f64| v) as _),
            )
        }
        InitialCondition::File(p) => {
            let (space, init, t0) = read_initial_csv(p, c.dim)?;
            if space.shape().iter().any(|&n| n != c.nx) {
                return Err(Error::Config(format!(
                    "{} has {:?} nodes per axis but nx = {}",
                    p.display(),
                    space.shape(),
                    c.nx
                )));
            }
            let t_start = if long { t_start } else { t0 };
            (space, init, t_start, None)
        }
    };
    let t_end = if long || !matches!(c.initial_condition, InitialCondition::File(_)) {
        t_end
    } else {
        t_start + c.t_final
    };
    // The pressure is exact only for unit coefficients.
    let exact = match (&c.initial_condition, exact) {
        (InitialCondition::Barenblatt, e)
            if c.lambda == 1.0 && c.big_lambda == 1.0 && c.b_coeff == 1.0 =>
        {
            e
        }
        (InitialCondition::Barenblatt, _) => None,
        (_, e) => e,
    };
    Ok(Setup {
        space,
        init,
        cfg,
        t_start,
        t_end,
        exact,
    })
}

fn run_setup(s: &Setup) -> Result<Trajectory> {
    solve(
        &s.space,
        &s.init,
        &s.cfg,
        s.t_start,
        s.t_end,
        &Snapshots::Every(snapshot_spacing(s.space.dim())),
    )
}

/// Metadata without the wall time, which goes to `run.json` instead.
fn run_summary(cfg: &SolverConfig, traj: &Trajectory) -> Result<Value> {
    let mut v = serde_json::to_value(RunMetadata::new(cfg, traj, 0.0))?;
    if let Value::Object(m) = &mut v {
        m.remove("wall_time_seconds");
    }
    Ok(v)
}

fn exact_error(u: &GridFunction, exact: &(dyn Fn(&[f64], f64) -> f64 + Send + Sync)) -> f64 {
    let space = u.space();
    let mut err: f64 = 0.0;
    for (k, &t) in u.grid().times().iter().enumerate() {
        for f in 0..space.len() {
            err = err.max((u.at(k, f) - exact(&space.point(f), t)).abs());
        }
    }
    err
}

fn require_dim1(c: &ExperimentConfig) -> Result<()> {
    if c.dim != 1 {
        return Err(Error::Config(format!(
            "{} runs in one dimension only",
            c.command.name()
        )));
    }
    Ok(())
}

fn cmd_solve(c: &ExperimentConfig) -> Result<Outcome> {
    let s = setup(c, false)?;
    let traj = run_setup(&s)?;
    let u = &traj.snapshots;
    let last = u.grid().n_times() - 1;
    let mut report = json!({
        "run": run_summary(&s.cfg, &traj)?,
        "t_start": s.t_start,
        "t_end": s.t_end,
        "snapshots": u.grid().n_times(),
        "final_min": u.slice(last).iter().copied().fold(f64::INFINITY, f64::min),
        "final_max": u.slice(last).iter().copied().fold(f64::NEG_INFINITY, f64::max),
    });
    if let Some(e) = &s.exact {
        report["linf_error_vs_exact"] = json!(exact_error(u, e.as_ref()));
    }
    Ok(Outcome {
        report,
        diagnostic: false,
        solver: Some((s.cfg, traj)),
    })
}

fn cmd_front_bench(c: &ExperimentConfig) -> Result<Outcome> {
    require_dim1(c)?;
    let (coarse, _) = front_bench(c.nx, c.t_final, c.cfl_safety)?;
    let (fine, _) = front_bench(2 * c.nx - 1, c.t_final, c.cfl_safety)?;
    let report = json!({
        "coarse": coarse,
        "fine": fine,
        "linf_rate": refinement_rate(coarse.linf_error, fine.linf_error),
        "interface_cells": [coarse.interface_error / coarse.h, fine.interface_error / fine.h],
    });
    Ok(Outcome::report(report, false))
}

fn cmd_barenblatt_bench(c: &ExperimentConfig) -> Result<Outcome> {
    require_dim1(c)?;
    let (coarse, _) = barenblatt_bench(c.nx, c.cfl_safety)?;
    let (fine, _) = barenblatt_bench(2 * c.nx - 1, c.cfl_safety)?;
    let report = json!({
        "coarse": coarse,
        "fine": fine,
        "relative_error_rate": refinement_rate(coarse.relative_error, fine.relative_error),
        "support_excess_cells": [coarse.support_excess / coarse.h, fine.support_excess / fine.h],
    });
    Ok(Outcome::report(report, false))
}

fn abp_family_data(c: &ExperimentConfig) -> Result<(Setup, Trajectory)> {
    let s = setup(c, true)?;
    let traj = run_setup(&s)?;
    Ok((s, traj))
}

fn cmd_abp_check(c: &ExperimentConfig) -> Result<Outcome> {
    let (s, traj) = abp_family_data(c)?;
    let params = make_params(c.ell(), c.dim)?.with_bounds(1.0, c.eta)?;
    let u = &traj.snapshots;
    let abp = abp_measure_estimate(u, &params)?;
    let loc = localization_check(u, &params)?;
    let (min_residual, certified) = certify_supersolution(u, &s.cfg)?;
    let diagnostic = !abp.passed || (loc.hypothesis_met && !loc.all_localized);
    let report = json!({
        "run": run_summary(&s.cfg, &traj)?,
        "params": params,
        "abp": abp,
        "localization": loc,
        "supersolution_residual_min": min_residual,
        "supersolution_certified": certified,
    });
    Ok(Outcome::report(report, diagnostic))
}

fn cmd_dyadic_select(c: &ExperimentConfig) -> Result<Outcome> {
    let (s, traj) = abp_family_data(c)?;
    let params = make_params(c.ell(), c.dim)?.with_bounds(1.0, c.eta)?;
    let sel = select(&traj.snapshots, &params, c.k_max)?;
    let diagnostic = sel.alternative == Alternative::Neither || !sel.is_non_nested();
    let report = json!({
        "run": run_summary(&s.cfg, &traj)?,
        "params": params,
        "non_nested": sel.is_non_nested(),
        "selection": sel,
    });
    Ok(Outcome::report(report, diagnostic))
}

fn cmd_time_integrate(c: &ExperimentConfig) -> Result<Outcome> {
    let (s, traj) = abp_family_data(c)?;
    let params = make_params(c.ell(), c.dim)?.with_bounds(1.0, c.eta)?;
    let rep = integrate_in_time(&traj.snapshots, &params, c.k_max, N_SHIFTS)?;
    let diagnostic = rep
        .shifts
        .iter()
        .any(|s| s.alternative == FixedTimeAlternative::Neither);
    let report = json!({
        "run": run_summary(&s.cfg, &traj)?,
        "params": params,
        "integration": rep,
    });
    Ok(Outcome::report(report, diagnostic))
}

fn cmd_hoelder_fit(c: &ExperimentConfig) -> Result<Outcome> {
    let s = setup(c, false)?;
    let traj = run_setup(&s)?;
    let u = &traj.snapshots;
    let scales = hoelder_scales(u);
    let k_start = *scales.start();
    let k_end = c.k_max.min(*scales.end());
    if k_end < k_start + 2 {
        return Err(Error::Config(format!(
            "scales 2^-{k_start} .. 2^-{k_end} are fewer than three; raise nx, t_final or k_max"
        )));
    }
    let fits = random_hoelder_fits(u, k_start..=k_end, 10, c.seed)?;
    let interface = match c.initial_condition {
        InitialCondition::Front => Some(-c.b_coeff.sqrt() * (s.t_end - s.t_start)),
        InitialCondition::Barenblatt => {
            Some(BarenblattPressure::new(c.dim, 1.0)?.support_radius(s.t_end))
        }
        _ => None,
    };
    let interface_fit = match interface {
        Some(x) => {
            let h = s.space.h();
            let mut center = vec![0.0; c.dim];
            center[0] = (x / h).round() * h;
            match oscillation_decay(u, &center, s.t_end, k_start..=k_end) {
                Ok(r) => Some(r),
                Err(Error::Insufficient(_)) | Err(Error::InvalidParameter(_)) => None,
                Err(e) => return Err(e),
            }
        }
        None => None,
    };
    let min_alpha = fits
        .iter()
        .map(|r| r.fitted_alpha)
        .fold(f64::INFINITY, f64::min);
    let report = json!({
        "run": run_summary(&s.cfg, &traj)?,
        "k_range": [k_start, k_end],
        "fits": fits,
        "min_alpha_hat": if fits.is_empty() { Value::Null } else { json!(min_alpha) },
        "interface_fit": interface_fit,
    });
    Ok(Outcome::report(report, fits.is_empty()))
}

fn cmd_osc_lemmas(c: &ExperimentConfig) -> Result<Outcome> {
    let ell = c.ell();
    let (_, sub) = plateau_subsolution_run(ell, c.dim, c.nx)?;
    let (_, sup) = dented_supersolution_run(ell, c.dim, c.nx)?;
    let above = improvement_from_above_check(&sub.snapshots, c.eta)?;
    let below = improvement_from_below_check(&sup.snapshots, c.eta)?;
    let diagnostic = !above.consistent() || !below.consistent();
    let report = json!({
        "exp_transform_constant": exp_transform_constant(ell),
        "eta": c.eta,
        "contact_tolerance": contact_tolerance(sub.grid().h()),
        "from_above": above,
        "from_below": below,
    });
    Ok(Outcome::report(report, diagnostic))
}

/// Executes the configured command without touching the filesystem.
pub fn execute(c: &ExperimentConfig) -> Result<Outcome> {
    match c.command {
        Command::Solve => cmd_solve(c),
        Command::FrontBench => cmd_front_bench(c),
        Command::BarenblattBench => cmd_barenblatt_bench(c),
        Command::AbpCheck => cmd_abp_check(c),
        Command::DyadicSelect => cmd_dyadic_select(c),
        Command::TimeIntegrate => cmd_time_integrate(c),
        Command::HoelderFit => cmd_hoelder_fit(c),
        Command::OscLemmas => cmd_osc_lemmas(c),
    }
}

fn write_json(path: &Path, v: &Value) -> Result<()> {
    let mut text = serde_json::to_string_pretty(v)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

fn write_snapshots(dir: &Path, u: &GridFunction) -> Result<()> {
    let space = u.space();
    let header = if space.dim() == 1 {
        "t,x1,u"
    } else {
        "t,x1,x2,u"
    };
    let points: Vec<Vec<f64>> = (0..space.len()).map(|f| space.point(f)).collect();
    for (k, &t) in u.grid().times().iter().enumerate() {
        let mut out = BufWriter::new(fs::File::create(dir.join(format!("snapshot_{k:04}.csv")))?);
        writeln!(out, "{header}")?;
        for (f, x) in points.iter().enumerate() {
            write!(out, "{t:.16e}")?;
            for v in x {
                write!(out, ",{v:.16e}")?;
            }
            writeln!(out, ",{:.16e}", u.at(k, f))?;
        }
        out.flush()?;
    }
    Ok(())
}

/// Runs the command and writes `report.json`, `run.json` and any
/// snapshots into the output directory. Returns the exit code.
pub fn run(c: &ExperimentConfig) -> Result<i32> {
    let started = Instant::now();
    let result = execute(c);
    let wall = started.elapsed().as_secs_f64();
    fs::create_dir_all(&c.out_dir)?;
    let mut run_info =
        json!({ "version": VERSION, "command": c.command, "wall_time_seconds": wall });
    let (body, code) = match result {
        Ok(o) => {
            if let Some((cfg, traj)) = &o.solver {
                write_snapshots(&c.out_dir, &traj.snapshots)?;
                run_info["solver"] = serde_json::to_value(RunMetadata::new(cfg, traj, wall))?;
            }
            (o.report, if o.diagnostic { 2 } else { 0 })
        }
        Err(e) if e.is_diagnostic() => (json!({ "diagnostic": e.to_string() }), 2),
        Err(e) => return Err(e),
    };
    let report = json!({
        "version": VERSION,
        "config": c,
        "result": body,
        "exit_code": code,
    });
    write_json(&c.out_dir.join("report.json"), &report)?;
    write_json(&c.out_dir.join("run.json"), &run_info)?;
    Ok(code)
}

/// Entry point of the binary.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let flags = match Flags::try_parse_from(args) {
        Ok(f) => f,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let outcome = config_from_flags(&flags).and_then(|c| run(&c));
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("pmelab: {e}");
            1
        }
    }
}
