//! Explicit monotone scheme for `u_t = u M(D^2 u) + b |Du|^2`.
//!
//! The interior update is
//! `u' = u + dt [ max(u, 0) P(u) + b H(u) ]`
//! with `P` the wide-stencil extremal operator (or a sampled coefficient
//! field) and `H = sum_i (D_i^+ u)_+^2 + (D_i^- u)_-^2` the Godunov upwind
//! form of `|Du|^2`. Off-centre coefficients are nonnegative for every `dt`;
//! the centre coefficient is nonnegative under [`cfl_dt`].

use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{GridFunction, SpaceTimeGrid, SpatialGrid};
use crate::pucci::{
    directional_second_difference, discrete_pucci_slice, DirectionStencil, EllipticityInterval,
    Sign,
};

const EPS_GUARD: f64 = 1e-12;

pub type ExactFn = Arc<dyn Fn(&[f64], f64) -> f64 + Send + Sync>;

/// Dirichlet data on the nodes the stencil cannot reach past.
#[derive(Clone)]
pub enum Boundary {
    /// Keep the initial values.
    Frozen,
    /// Evaluate a closed-form function at the new time.
    Exact(ExactFn),
}

impl std::fmt::Debug for Boundary {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Boundary::Frozen => f.write_str("Frozen"),
            Boundary::Exact(_) => f.write_str("Exact(..)"),
        }
    }
}

/// Per-node coefficients with eigenvalues in `[lambda, Lambda]`.
///
/// In 2D each node picks one orthogonal pair `(v, w)` of the stencil and
/// weights `a1, a2`, giving `a1 d_vv u + a2 d_ww u`; the gradient coefficient
/// is the scalar `b`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientField {
    pair: Vec<usize>,
    a1: Vec<f64>,
    a2: Vec<f64>,
    b: Vec<f64>,
}

impl CoefficientField {
    pub fn random<R: Rng>(
        space: &SpatialGrid,
        ell: EllipticityInterval,
        stencil: &DirectionStencil,
        rng: &mut R,
    ) -> Self {
        let n = space.len();
        let mut draw = || {
            if ell.lambda() == ell.Lambda() {
                ell.lambda()
            } else {
                rng.gen_range(ell.lambda()..=ell.Lambda())
            }
        };
        let a1 = (0..n).map(|_| draw()).collect();
        let a2 = (0..n).map(|_| draw()).collect();
        let b = (0..n).map(|_| draw()).collect();
        let pairs = stencil.pairs().len();
        let pair = (0..n).map(|_| rng.gen_range(0..pairs)).collect();
        Self { pair, a1, a2, b }
    }

    pub fn max_b(&self) -> f64 {
        self.b.iter().copied().fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone)]
pub struct SolverConfig {
    pub ell: EllipticityInterval,
    pub b_coeff: f64,
    pub pucci_sign: Sign,
    pub stencil: DirectionStencil,
    pub cfl_safety: f64,
    pub boundary: Boundary,
    /// When set, replaces the extremal operator and `b_coeff`.
    pub coefficients: Option<CoefficientField>,
}

impl SolverConfig {
    pub fn new(
        ell: EllipticityInterval,
        b_coeff: f64,
        pucci_sign: Sign,
        dim: usize,
    ) -> Result<Self> {
        let cfg = Self {
            ell,
            b_coeff,
            pucci_sign,
            stencil: DirectionStencil::default_for(dim),
            cfl_safety: 0.9,
            boundary: Boundary::Frozen,
            coefficients: None,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_boundary(mut self, boundary: Boundary) -> Self {
        self.boundary = boundary;
        self
    }

    pub fn with_cfl(mut self, cfl_safety: f64) -> Result<Self> {
        self.cfl_safety = cfl_safety;
        self.validate()?;
        Ok(self)
    }

    pub fn with_coefficients(mut self, field: CoefficientField) -> Self {
        self.coefficients = Some(field);
        self
    }

    pub fn validate(&self) -> Result<()> {
        let tol = 1e-12 * self.ell.Lambda();
        if !(self.b_coeff >= self.ell.lambda() - tol && self.b_coeff <= self.ell.Lambda() + tol) {
            return Err(Error::InvalidParameter(format!(
                "b = {} must lie in [lambda, Lambda] = [{}, {}]",
                self.b_coeff,
                self.ell.lambda(),
                self.ell.Lambda()
            )));
        }
        if !(self.cfl_safety > 0.0 && self.cfl_safety <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "cfl_safety must lie in (0, 1], got {}",
                self.cfl_safety
            )));
        }
        Ok(())
    }

    fn max_b(&self) -> f64 {
        match &self.coefficients {
            Some(f) => f.max_b(),
            None => self.b_coeff,
        }
    }

    fn reach(&self) -> usize {
        self.stencil.reach().max(1)
    }
}

/// Godunov upwind approximation of `|Du|^2` at an interior node.
#[inline]
pub fn godunov_gradient_sq(space: &SpatialGrid, slice: &[f64], flat: usize) -> f64 {
    let h = space.h();
    let mut acc = 0.0;
    let mut stride = 1usize;
    for a in 0..space.dim() {
        let c = slice[flat];
        let fwd = (slice[flat + stride] - c) / h;
        let bwd = (c - slice[flat - stride]) / h;
        acc += fwd.max(0.0).powi(2) + (-bwd).max(0.0).powi(2);
        stride *= space.shape()[a];
    }
    acc
}

/// `sum_i |D_i^+ u| + |D_i^- u|` at an interior node.
fn gradient_l1(space: &SpatialGrid, slice: &[f64], flat: usize) -> f64 {
    let h = space.h();
    let mut acc = 0.0;
    let mut stride = 1usize;
    for a in 0..space.dim() {
        let c = slice[flat];
        acc += ((slice[flat + stride] - c) / h).abs() + ((c - slice[flat - stride]) / h).abs();
        stride *= space.shape()[a];
    }
    acc
}

/// Second-order operator value (without the degenerate factor).
#[inline]
fn second_order(space: &SpatialGrid, slice: &[f64], flat: usize, cfg: &SolverConfig) -> f64 {
    match &cfg.coefficients {
        None => discrete_pucci_slice(space, slice, flat, cfg.ell, cfg.pucci_sign, &cfg.stencil),
        Some(field) => {
            let (v, w) = cfg.stencil.pairs()[field.pair[flat]];
            let dv = directional_second_difference(space, slice, flat, v);
            if space.dim() == 1 {
                field.a1[flat] * dv
            } else {
                field.a1[flat] * dv
                    + field.a2[flat] * directional_second_difference(space, slice, flat, w)
            }
        }
    }
}

/// Right-hand side `max(u,0) P(u) + b H(u)` at an interior node.
#[inline]
fn rhs(space: &SpatialGrid, slice: &[f64], flat: usize, cfg: &SolverConfig) -> f64 {
    let b = match &cfg.coefficients {
        Some(field) => field.b[flat],
        None => cfg.b_coeff,
    };
    slice[flat].max(0.0) * second_order(space, slice, flat, cfg)
        + b * godunov_gradient_sq(space, slice, flat)
}

fn check_slice(space: &SpatialGrid, slice: &[f64], t: f64) -> Result<()> {
    if slice.len() != space.len() {
        return Err(Error::GridMismatch(format!(
            "slice has {} values, grid has {} nodes",
            slice.len(),
            space.len()
        )));
    }
    match slice.iter().position(|v| !v.is_finite()) {
        Some(i) => Err(Error::NonFinite {
            x: space.point(i),
            t,
            value: slice[i],
        }),
        None => Ok(()),
    }
}

/// Unscaled monotonicity limit `h^2 / (4 n Lambda max u + 2 h b G + eps)`.
fn monotone_limit(space: &SpatialGrid, slice: &[f64], cfg: &SolverConfig) -> f64 {
    let h = space.h();
    let reach = cfg.reach();
    let umax = slice.iter().copied().fold(0.0, f64::max);
    let g = (0..space.len())
        .filter(|&f| space.is_interior(f, reach))
        .map(|f| gradient_l1(space, slice, f))
        .fold(0.0, f64::max);
    let diffusion = 4.0 * space.dim() as f64 * cfg.ell.Lambda() * umax;
    h * h / (diffusion + 2.0 * h * cfg.max_b() * g + EPS_GUARD)
}

/// Largest monotone forward-Euler step for `slice`, scaled by `cfl_safety`.
pub fn cfl_dt(space: &SpatialGrid, slice: &[f64], cfg: &SolverConfig) -> Result<f64> {
    check_slice(space, slice, f64::NAN)?;
    Ok(cfg.cfl_safety * monotone_limit(space, slice, cfg))
}

/// One forward-Euler step to time `t_new`.
pub fn step(
    space: &SpatialGrid,
    slice: &[f64],
    cfg: &SolverConfig,
    dt: f64,
    t_new: f64,
) -> Result<Vec<f64>> {
    check_slice(space, slice, t_new - dt)?;
    let limit = monotone_limit(space, slice, cfg);
    if !(dt > 0.0) || dt > limit * (1.0 + 1e-12) {
        return Err(Error::CflViolated { dt, limit });
    }
    Ok(step_unchecked(space, slice, cfg, dt, t_new, None))
}

fn step_unchecked(
    space: &SpatialGrid,
    slice: &[f64],
    cfg: &SolverConfig,
    dt: f64,
    t_new: f64,
    frozen: Option<&[f64]>,
) -> Vec<f64> {
    let reach = cfg.reach();
    let mut out = vec![0.0; slice.len()];
    for (f, o) in out.iter_mut().enumerate() {
        *o = if space.is_interior(f, reach) {
            slice[f] + dt * rhs(space, slice, f, cfg)
        } else {
            match (&cfg.boundary, frozen) {
                (Boundary::Exact(g), _) => g(&space.point(f), t_new),
                (Boundary::Frozen, Some(init)) => init[f],
                (Boundary::Frozen, None) => slice[f],
            }
        };
    }
    out
}

fn check_output(space: &SpatialGrid, out: &[f64], t: f64) -> Result<()> {
    match out.iter().position(|v| !v.is_finite()) {
        Some(i) => Err(Error::NonFinite {
            x: space.point(i),
            t,
            value: out[i],
        }),
        None => Ok(()),
    }
}

/// Which time slices a solve keeps.
#[derive(Debug, Clone, PartialEq)]
pub enum Snapshots {
    /// Every completed step.
    EveryStep,
    /// The listed times (steps are shortened to land on them exactly).
    At(Vec<f64>),
    /// A uniform lattice of this spacing from the start time.
    Every(f64),
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub snapshots: GridFunction,
    pub dt_used: Vec<f64>,
}

impl Trajectory {
    pub fn grid(&self) -> &SpaceTimeGrid {
        self.snapshots.grid()
    }

    pub fn steps(&self) -> usize {
        self.dt_used.len()
    }
}

fn snapshot_targets(s: &Snapshots, t_start: f64, t_final: f64) -> Result<Vec<f64>> {
    let mut targets = match s {
        Snapshots::EveryStep => Vec::new(),
        Snapshots::At(ts) => ts.clone(),
        Snapshots::Every(dt) => {
            if !(*dt > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "snapshot spacing must be positive, got {dt}"
                )));
            }
            let n = ((t_final - t_start) / dt - 1e-9).ceil() as usize;
            (1..=n)
                .map(|i| (t_start + i as f64 * dt).min(t_final))
                .collect()
        }
    };
    if targets.iter().any(|&t| !(t > t_start && t <= t_final)) {
        return Err(Error::InvalidParameter(
            "snapshot times must lie in (t_start, t_final]".into(),
        ));
    }
    if targets.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidParameter(
            "snapshot times must be increasing".into(),
        ));
    }
    if targets.last().map_or(true, |&t| t < t_final) {
        targets.push(t_final);
    }
    Ok(targets)
}

/// Advances one or more initial slices in lockstep with a shared step size
/// (the minimum of their monotonicity limits).
pub fn solve_lockstep(
    space: &SpatialGrid,
    initials: &[Vec<f64>],
    cfg: &SolverConfig,
    t_start: f64,
    t_final: f64,
    snapshots: &Snapshots,
) -> Result<Vec<Trajectory>> {
    cfg.validate()?;
    if cfg.stencil.dim() != space.dim() {
        return Err(Error::InvalidParameter(
            "stencil dimension does not match the grid".into(),
        ));
    }
    if !(t_final > t_start) {
        return Err(Error::InvalidParameter(format!(
            "t_final {t_final} must exceed t_start {t_start}"
        )));
    }
    for init in initials {
        check_slice(space, init, t_start)?;
        if let Some(i) = init.iter().position(|&v| v < 0.0) {
            return Err(Error::InvalidParameter(format!(
                "initial data must be non-negative (u = {} at x = {:?})",
                init[i],
                space.point(i)
            )));
        }
    }
    let targets = snapshot_targets(snapshots, t_start, t_final)?;
    let every = matches!(snapshots, Snapshots::EveryStep);

    let mut current: Vec<Vec<f64>> = initials.to_vec();
    let mut stored: Vec<Vec<Vec<f64>>> = initials.iter().map(|s| vec![s.clone()]).collect();
    let mut snap_dts = Vec::new();
    let mut dt_used = Vec::new();
    let mut t = t_start;
    let mut last_snap = t_start;
    let mut next = 0usize;
    while next < targets.len() {
        let target = targets[next];
        let limit = current
            .iter()
            .map(|s| cfg.cfl_safety * monotone_limit(space, s, cfg))
            .fold(f64::INFINITY, f64::min);
        let remaining = target - t;
        // Avoid a sliver step right before a snapshot.
        let dt = if limit >= remaining || remaining - limit < 1e-9 * limit {
            remaining
        } else {
            limit
        };
        let landing = dt == remaining;
        let t_new = if landing { target } else { t + dt };
        for (s, init) in current.iter_mut().zip(initials) {
            let out = step_unchecked(space, s, cfg, dt, t_new, Some(init));
            check_output(space, &out, t_new)?;
            *s = out;
        }
        dt_used.push(dt);
        t = t_new;
        if landing {
            next += 1;
        }
        if landing || every {
            for (st, s) in stored.iter_mut().zip(&current) {
                st.push(s.clone());
            }
            snap_dts.push(t - last_snap);
            last_snap = t;
        }
    }
    let grid = SpaceTimeGrid::new(space.clone(), t_start, snap_dts)?;
    stored
        .into_iter()
        .map(|slices| {
            Ok(Trajectory {
                snapshots: GridFunction::from_slices(grid.clone(), &slices)?,
                dt_used: dt_used.clone(),
            })
        })
        .collect()
}

/// Advances `initial` from `t_start` to `t_final` with adaptive monotone steps.
pub fn solve(
    space: &SpatialGrid,
    initial: &[f64],
    cfg: &SolverConfig,
    t_start: f64,
    t_final: f64,
    snapshots: &Snapshots,
) -> Result<Trajectory> {
    let mut out = solve_lockstep(space, &[initial.to_vec()], cfg, t_start, t_final, snapshots)?;
    Ok(out.pop().expect("one trajectory"))
}

/// Replays a prescribed step sequence, storing every step. Each step is
/// still checked against the monotonicity limit.
pub fn solve_with_steps(
    space: &SpatialGrid,
    initial: &[f64],
    cfg: &SolverConfig,
    t_start: f64,
    dt_list: &[f64],
) -> Result<Trajectory> {
    cfg.validate()?;
    check_slice(space, initial, t_start)?;
    let mut slices = vec![initial.to_vec()];
    let mut t = t_start;
    for &dt in dt_list {
        let cur = slices.last().expect("non-empty");
        let limit = monotone_limit(space, cur, cfg);
        if !(dt > 0.0) || dt > limit * (1.0 + 1e-12) {
            return Err(Error::CflViolated { dt, limit });
        }
        t += dt;
        let out = step_unchecked(space, cur, cfg, dt, t, Some(initial));
        check_output(space, &out, t)?;
        slices.push(out);
    }
    let grid = SpaceTimeGrid::new(space.clone(), t_start, dt_list.to_vec())?;
    Ok(Trajectory {
        snapshots: GridFunction::from_slices(grid, &slices)?,
        dt_used: dt_list.to_vec(),
    })
}

fn residual(u: &GridFunction, cfg: &SolverConfig, sign: Sign, b: f64) -> Result<GridFunction> {
    let space = u.space();
    let reach = cfg.stencil.reach().max(1);
    if u.grid().n_times() < 2 {
        return Err(Error::Insufficient(
            "residual needs at least two time slices".into(),
        ));
    }
    if space.shape().iter().any(|&n| n < 2 * reach + 1) {
        return Err(Error::Insufficient("grid too small for the stencil".into()));
    }
    let n = space.len();
    let mut values = vec![0.0; n * u.grid().n_times()];
    for k in 1..u.grid().n_times() {
        let prev = u.slice(k - 1);
        let dt = u.grid().dt_list()[k - 1];
        for f in (0..n).filter(|&f| space.is_interior(f, reach)) {
            let dtu = (u.at(k, f) - prev[f]) / dt;
            let op = prev[f].max(0.0)
                * discrete_pucci_slice(space, prev, f, cfg.ell, sign, &cfg.stencil)
                + b * godunov_gradient_sq(space, prev, f);
            values[k * n + f] = dtu - op;
        }
    }
    GridFunction::from_values(u.grid().clone(), values)
}

/// `D_t u - [u P^-(u) + lambda H(u)]` with a backward time difference and
/// spatial terms on the earlier slice. Nonnegative values certify a discrete
/// supersolution. Boundary nodes and slice 0 are reported as 0.
pub fn residual_supersolution(u: &GridFunction, cfg: &SolverConfig) -> Result<GridFunction> {
    residual(u, cfg, Sign::Minus, cfg.ell.lambda())
}

/// `D_t u - [u P^+(u) + Lambda H(u)]`; nonpositive values certify a discrete subsolution.
pub fn residual_subsolution(u: &GridFunction, cfg: &SolverConfig) -> Result<GridFunction> {
    residual(u, cfg, Sign::Plus, cfg.ell.Lambda())
}

/// Run description written next to solver artifacts.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunMetadata {
    pub lambda: f64,
    #[serde(rename = "Lambda")]
    pub big_lambda: f64,
    pub b: f64,
    pub sign: Sign,
    pub h: f64,
    pub cfl_safety: f64,
    pub dims: usize,
    pub steps: usize,
    pub wall_time_seconds: f64,
}

impl RunMetadata {
    pub fn new(cfg: &SolverConfig, traj: &Trajectory, wall_time_seconds: f64) -> Self {
        Self {
            lambda: cfg.ell.lambda(),
            big_lambda: cfg.ell.Lambda(),
            b: cfg.b_coeff,
            sign: cfg.pucci_sign,
            h: traj.grid().h(),
            cfl_safety: cfg.cfl_safety,
            dims: traj.grid().dim(),
            steps: traj.steps(),
            wall_time_seconds,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_cfg(dim: usize) -> SolverConfig {
        SolverConfig::new(
            EllipticityInterval::new(1.0, 1.0).unwrap(),
            1.0,
            Sign::Plus,
            dim,
        )
        .unwrap()
    }

    #[test]
    fn config_validation() {
        let ell = EllipticityInterval::new(1.0, 2.0).unwrap();
        assert!(SolverConfig::new(ell, 3.0, Sign::Plus, 1).is_err());
        assert!(SolverConfig::new(ell, 1.5, Sign::Plus, 1)
            .unwrap()
            .with_cfl(1.5)
            .is_err());
    }

    #[test]
    fn cfl_examples() {
        let space = SpatialGrid::centered(1, 1.0, 101).unwrap();
        let cfg = unit_cfg(1);
        let h = space.h();
        let zero = vec![0.0; space.len()];
        let dt0 = cfl_dt(&space, &zero, &cfg).unwrap();
        assert!((dt0 - 0.9 * h * h / EPS_GUARD).abs() / dt0 < 1e-12);
        // Constant one: 4 n Lambda max u = 4, G = 0.
        let one = vec![1.0; space.len()];
        let dt1 = cfl_dt(&space, &one, &cfg).unwrap();
        assert!((dt1 - 0.9 * h * h / (4.0 + EPS_GUARD)).abs() < 1e-18);
        let mut bad = one.clone();
        bad[3] = f64::NAN;
        assert!(cfl_dt(&space, &bad, &cfg).is_err());
    }

    #[test]
    fn constant_is_stationary() {
        let space = SpatialGrid::centered(2, 1.0, 9).unwrap();
        let cfg = unit_cfg(2);
        let c = vec![0.7; space.len()];
        let dt = cfl_dt(&space, &c, &cfg).unwrap();
        assert_eq!(step(&space, &c, &cfg, dt, dt).unwrap(), c);
    }

    #[test]
    fn step_rejects_large_dt_and_nan() {
        let space = SpatialGrid::centered(1, 1.0, 9).unwrap();
        let cfg = unit_cfg(1);
        let u = vec![1.0; space.len()];
        let dt = cfl_dt(&space, &u, &cfg).unwrap();
        assert!(matches!(
            step(&space, &u, &cfg, 2.0 * dt, 0.0),
            Err(Error::CflViolated { .. })
        ));
        let mut bad = u.clone();
        bad[4] = f64::INFINITY;
        assert!(matches!(
            step(&space, &bad, &cfg, dt, 0.0),
            Err(Error::NonFinite { .. })
        ));
    }

    /// On the front slice, raising any single node never lowers any updated value.
    #[test]
    fn monotonicity_probe_on_front() {
        let space = SpatialGrid::centered(1, 1.0, 201).unwrap();
        let cfg = unit_cfg(1);
        let u: Vec<f64> = (0..space.len())
            .map(|i| space.point(i)[0].max(0.0))
            .collect();
        let dt = cfl_dt(&space, &u, &cfg).unwrap();
        let base = step(&space, &u, &cfg, dt, dt).unwrap();
        for j in (1..space.len() - 1).step_by(7) {
            let mut p = u.clone();
            p[j] += 1e-3;
            let dt_p = cfl_dt(&space, &p, &cfg).unwrap().min(dt);
            let a = step(&space, &u, &cfg, dt_p, dt_p).unwrap();
            let b = step(&space, &p, &cfg, dt_p, dt_p).unwrap();
            assert!(a.iter().zip(&b).all(|(x, y)| y >= x), "node {j}");
        }
        assert!(base.iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn quadratic_rate_converges_to_six() {
        // u = x^2: u u'' + (u')^2 = 2x^2 + 4x^2 = 6 at x = 1.
        let mut errs = Vec::new();
        for h in [0.02, 0.01, 0.005] {
            let space = SpatialGrid::new(&[0.5], &[1.0], h).unwrap();
            let u: Vec<f64> = (0..space.len())
                .map(|i| space.point(i)[0].powi(2))
                .collect();
            let cfg = unit_cfg(1);
            let dt = cfl_dt(&space, &u, &cfg).unwrap();
            let next = step(&space, &u, &cfg, dt, dt).unwrap();
            let at = space.locate(&[1.0]).unwrap();
            errs.push(((next[at] - u[at]) / dt - 6.0).abs());
        }
        assert!(
            errs[0] < 0.2 && errs[2] < errs[1] && errs[1] < errs[0],
            "{errs:?}"
        );
    }

    #[test]
    fn zero_initial_stays_zero() {
        let space = SpatialGrid::centered(1, 1.0, 33).unwrap();
        let traj = solve(
            &space,
            &vec![0.0; 33],
            &unit_cfg(1),
            0.0,
            1.0,
            &Snapshots::At(vec![0.5]),
        )
        .unwrap();
        assert!(traj.snapshots.values().iter().all(|&v| v == 0.0));
        assert_eq!(traj.grid().n_times(), 3);
    }

    #[test]
    fn snapshots_land_exactly() {
        let space = SpatialGrid::centered(1, 1.0, 33).unwrap();
        let u0: Vec<f64> = (0..33)
            .map(|i| (1.0 - space.point(i)[0].powi(2)).max(0.0))
            .collect();
        let traj = solve(
            &space,
            &u0,
            &unit_cfg(1),
            0.0,
            0.1,
            &Snapshots::Every(0.025),
        )
        .unwrap();
        let expect = [0.0, 0.025, 0.05, 0.075, 0.1];
        assert_eq!(traj.grid().n_times(), 5);
        for (t, e) in traj.grid().times().iter().zip(expect) {
            assert!((t - e).abs() < 1e-12);
        }
        let total: f64 = traj.dt_used.iter().sum();
        assert!((total - 0.1).abs() < 1e-12);
    }

    #[test]
    fn residual_of_increasing_constant_is_one() {
        use crate::grid::{sample, SpaceTimeGrid};
        let space = SpatialGrid::centered(1, 1.0, 17).unwrap();
        let g = SpaceTimeGrid::uniform(space, 0.0, 1.0, 8).unwrap();
        let u = sample(|_, t| t, &g).unwrap();
        let r = residual_supersolution(&u, &unit_cfg(1)).unwrap();
        for k in 1..g.n_times() {
            for f in 1..16 {
                assert!((r.at(k, f) - 1.0).abs() < 1e-12);
            }
        }
        let c = sample(|_, _| 2.0, &g).unwrap();
        assert!(residual_subsolution(&c, &unit_cfg(1))
            .unwrap()
            .values()
            .iter()
            .all(|&v| v == 0.0));
    }
}
