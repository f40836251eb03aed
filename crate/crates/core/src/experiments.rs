//! Benchmark runs and the seeded supersolution battery shared by the CLI
//! and the test suites.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::abp::{make_params, AbpParams};
use crate::error::{Error, Result};
use crate::grid::{GridFunction, SpaceTimeGrid, SpatialGrid};
use crate::oscillation::{oscillation_decay, HoelderReport};
use crate::paraboloid::contact_tolerance;
use crate::pucci::{EllipticityInterval, Sign};
use crate::refsol::{BarenblattPressure, FrontSolution};
use crate::scheme::{solve, Boundary, CoefficientField, Snapshots, SolverConfig, Trajectory};

/// `log2(e_coarse / e_fine)`.
pub fn refinement_rate(coarse: f64, fine: f64) -> f64 {
    (coarse / fine).log2()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrontBench {
    pub nx: usize,
    pub h: f64,
    pub t_final: f64,
    /// Max error over stored times, away from a `3h` band around the interface.
    pub linf_error: f64,
    pub interface_exact: f64,
    /// Leftmost node with `u > 10 h^2` at the final time.
    pub interface_numeric: f64,
    pub interface_error: f64,
    pub steps: usize,
}

/// `(x + t)_+` on `[-1, 1]` with `lambda = Lambda = b = 1` and exact
/// boundary values.
pub fn front_bench(nx: usize, t_final: f64, cfl: f64) -> Result<(FrontBench, Trajectory)> {
    let space = SpatialGrid::centered(1, 1.0, nx)?;
    let ell = EllipticityInterval::new(1.0, 1.0)?;
    let front = FrontSolution::new(&[1.0], 1.0)?;
    let exact = front.clone();
    let cfg = SolverConfig::new(ell, 1.0, Sign::Plus, 1)?
        .with_cfl(cfl)?
        .with_boundary(Boundary::Exact(Arc::new(move |x, t| exact.eval(x, t))));
    let init: Vec<f64> = (0..space.len())
        .map(|f| front.eval(&space.point(f), 0.0))
        .collect();
    let traj = solve(
        &space,
        &init,
        &cfg,
        0.0,
        t_final,
        &Snapshots::Every(t_final / 16.0),
    )?;
    let h = space.h();
    let u = &traj.snapshots;
    let mut err: f64 = 0.0;
    for (k, &t) in u.grid().times().iter().enumerate().skip(1) {
        for f in 0..space.len() {
            let x = space.point(f);
            if (x[0] + t).abs() > 3.0 * h {
                err = err.max((u.at(k, f) - front.eval(&x, t)).abs());
            }
        }
    }
    let last = u.grid().n_times() - 1;
    let eps = contact_tolerance(h);
    let numeric = (0..space.len())
        .find(|&f| u.at(last, f) > eps)
        .map(|f| space.point(f)[0])
        .ok_or(Error::EmptyRegion)?;
    let interface_exact = -t_final;
    Ok((
        FrontBench {
            nx,
            h,
            t_final,
            linf_error: err,
            interface_exact,
            interface_numeric: numeric,
            interface_error: (numeric - interface_exact).abs(),
            steps: traj.steps(),
        },
        traj,
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BarenblattBench {
    pub nx: usize,
    pub h: f64,
    /// Max error on the exact support over stored times, divided by the
    /// largest exact value.
    pub relative_error: f64,
    /// Largest `|x|` with `u > 10 h^2` over stored times, minus the exact
    /// support radius at that time (max over times).
    pub support_excess: f64,
    pub steps: usize,
}

/// Pressure with `C = 1` in 1D from `t = 1` to `t = 2` on `[-6, 6]`.
pub fn barenblatt_bench(nx: usize, cfl: f64) -> Result<(BarenblattBench, Trajectory)> {
    let space = SpatialGrid::centered(1, 6.0, nx)?;
    let ell = EllipticityInterval::new(1.0, 1.0)?;
    let p = BarenblattPressure::new(1, 1.0)?;
    let cfg = SolverConfig::new(ell, 1.0, Sign::Plus, 1)?.with_cfl(cfl)?;
    let init: Vec<f64> = (0..space.len())
        .map(|f| p.eval_unchecked(&space.point(f), 1.0))
        .collect();
    let traj = solve(&space, &init, &cfg, 1.0, 2.0, &Snapshots::Every(1.0 / 16.0))?;
    let u = &traj.snapshots;
    let h = space.h();
    let eps = contact_tolerance(h);
    let (mut err, mut peak, mut excess) = (0.0f64, 0.0f64, f64::NEG_INFINITY);
    for (k, &t) in u.grid().times().iter().enumerate() {
        let radius = p.support_radius(t);
        for f in 0..space.len() {
            let x = space.point(f);
            let e = p.eval_unchecked(&x, t);
            peak = peak.max(e);
            if e > 0.0 {
                err = err.max((u.at(k, f) - e).abs());
            }
            if u.at(k, f) > eps {
                excess = excess.max(x[0].abs() - radius);
            }
        }
    }
    Ok((
        BarenblattBench {
            nx,
            h,
            relative_error: err / peak,
            support_excess: excess,
            steps: traj.steps(),
        },
        traj,
    ))
}

/// Members of the supersolution battery.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum BatteryKind {
    /// `(x + t + c)_+` with `c <= 0`.
    Front { c: f64 },
    /// Pressure with constant `C` at time `t + 3.5`.
    Barenblatt { c: f64 },
    /// Random coefficients and random compactly supported data.
    Random { seed: u64 },
}

impl BatteryKind {
    pub fn name(&self) -> String {
        match self {
            BatteryKind::Front { c } => format!("front(c={c})"),
            BatteryKind::Barenblatt { c } => format!("barenblatt(C={c})"),
            BatteryKind::Random { seed } => format!("random(seed={seed})"),
        }
    }
}

/// Three fronts, two pressures and `n_random` random runs. The fronts sit
/// behind `(x + t)_+` so the numerical front, which runs slightly ahead,
/// still has `u(0, 1) <= 1`.
pub fn standard_battery(n_random: u64) -> Vec<BatteryKind> {
    let mut v = vec![
        BatteryKind::Front { c: -0.125 },
        BatteryKind::Front { c: -0.5 },
        BatteryKind::Front { c: -1.0 },
        BatteryKind::Barenblatt { c: 0.25 },
        BatteryKind::Barenblatt { c: 0.5 },
    ];
    v.extend((0..n_random).map(|seed| BatteryKind::Random { seed }));
    v
}

/// Ellipticity of the battery: every member is a supersolution for `[1, 2]`.
pub fn battery_ellipticity() -> EllipticityInterval {
    EllipticityInterval::new(1.0, 2.0).expect("valid interval")
}

pub fn battery_params() -> AbpParams {
    make_params(battery_ellipticity(), 1).expect("dimension 1")
}

pub const BATTERY_T0: f64 = -2.5;
pub const BATTERY_T1: f64 = 1.0;
pub const BATTERY_SNAPSHOT: f64 = 1.0 / 1024.0;

pub struct BatteryRun {
    pub kind: BatteryKind,
    pub traj: Trajectory,
    /// Solver configuration the trajectory was produced with.
    pub cfg: SolverConfig,
}

/// Random sum of smooth compactly supported bumps scaled to maximum one, so
/// the maximum principle keeps the run at or below one.
pub fn random_bumps(space: &SpatialGrid, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let count = rng.gen_range(1..=3);
    let bumps: Vec<(f64, f64, f64)> = (0..count)
        .map(|_| {
            (
                rng.gen_range(-2.0..2.0),
                rng.gen_range(0.4..1.5),
                rng.gen_range(0.2..1.0),
            )
        })
        .collect();
    let mut v: Vec<f64> = (0..space.len())
        .map(|f| {
            let x = space.point(f)[0];
            bumps
                .iter()
                .map(|&(c, w, a)| a * (1.0 - ((x - c) / w).powi(2)).max(0.0).powi(2))
                .sum()
        })
        .collect();
    let max = v.iter().copied().fold(0.0, f64::max);
    v.iter_mut().for_each(|x| *x /= max);
    v
}

/// Runs one member on `[-5, 5]` with `h = 2^-(5 + level)` over `[-2.5, 1]`,
/// storing slices every `1/1024`.
pub fn battery_run(kind: BatteryKind, level: u32) -> Result<BatteryRun> {
    let nx = 320 * (1usize << level) + 1;
    let space = SpatialGrid::centered(1, 5.0, nx)?;
    let snaps = Snapshots::Every(BATTERY_SNAPSHOT);
    let unit = EllipticityInterval::new(1.0, 1.0)?;
    match kind {
        BatteryKind::Front { c } => {
            let front = FrontSolution::new(&[1.0], 1.0)?;
            let exact = front.clone();
            let cfg = SolverConfig::new(unit, 1.0, Sign::Minus, 1)?
                .with_boundary(Boundary::Exact(Arc::new(move |x, t| exact.eval(x, t + c))));
            let init: Vec<f64> = (0..space.len())
                .map(|f| front.eval(&space.point(f), BATTERY_T0 + c))
                .collect();
            let traj = solve(&space, &init, &cfg, BATTERY_T0, BATTERY_T1, &snaps)?;
            Ok(BatteryRun { kind, traj, cfg })
        }
        BatteryKind::Barenblatt { c } => {
            let p = BarenblattPressure::new(1, c)?;
            let cfg = SolverConfig::new(unit, 1.0, Sign::Minus, 1)?;
            let init: Vec<f64> = (0..space.len())
                .map(|f| p.eval_unchecked(&space.point(f), 1.0))
                .collect();
            let traj = solve(&space, &init, &cfg, BATTERY_T0, BATTERY_T1, &snaps)?;
            Ok(BatteryRun { kind, traj, cfg })
        }
        BatteryKind::Random { seed } => {
            let ell = battery_ellipticity();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let init = random_bumps(&space, &mut rng);
            let mut cfg = SolverConfig::new(ell, ell.lambda(), Sign::Minus, 1)?;
            let field = CoefficientField::random(&space, ell, &cfg.stencil, &mut rng);
            cfg = cfg.with_coefficients(field);
            let traj = solve(&space, &init, &cfg, BATTERY_T0, BATTERY_T1, &snaps)?;
            Ok(BatteryRun { kind, traj, cfg })
        }
    }
}

/// Grid of the battery at a refinement level.
pub fn battery_grid(level: u32, steps: usize) -> Result<SpaceTimeGrid> {
    let nx = 320 * (1usize << level) + 1;
    SpaceTimeGrid::uniform(
        SpatialGrid::centered(1, 5.0, nx)?,
        BATTERY_T0,
        BATTERY_T1,
        steps,
    )
}

/// `C^1` plateau: one on `|x| <= 1/4`, zero beyond `|x| >= 1/2`.
pub fn smoothed_indicator(r: f64) -> f64 {
    let s = ((r - 0.25) / 0.25).clamp(0.0, 1.0);
    1.0 - s * s * (3.0 - 2.0 * s)
}

/// Subsolution run for the improvement from above: plateau data, sign `+`,
/// `b = Lambda`, frozen boundary on `[-2, 2]`, over the frame `(-1, 0]`.
pub fn plateau_subsolution_run(
    ell: EllipticityInterval,
    dim: usize,
    nx: usize,
) -> Result<(SolverConfig, Trajectory)> {
    let space = SpatialGrid::centered(dim, 2.0, nx)?;
    let cfg = SolverConfig::new(ell, ell.Lambda(), Sign::Plus, dim)?;
    let init: Vec<f64> = (0..space.len())
        .map(|f| smoothed_indicator(space.point(f).iter().map(|x| x * x).sum::<f64>().sqrt()))
        .collect();
    let traj = solve(
        &space,
        &init,
        &cfg,
        -1.0,
        0.0,
        &Snapshots::Every(1.0 / 64.0),
    )?;
    Ok((cfg, traj))
}

/// Supersolution run for the improvement from below: data at least `3/4`
/// with two dents, sign `-`, `b = lambda`, frozen boundary on `[-2, 2]`.
pub fn dented_supersolution_run(
    ell: EllipticityInterval,
    dim: usize,
    nx: usize,
) -> Result<(SolverConfig, Trajectory)> {
    let space = SpatialGrid::centered(dim, 2.0, nx)?;
    let cfg = SolverConfig::new(ell, ell.lambda(), Sign::Minus, dim)?;
    let dent = |x: &[f64], c: f64| {
        let d2: f64 = x
            .iter()
            .enumerate()
            .map(|(a, v)| (v - if a == 0 { c } else { 0.0 }).powi(2))
            .sum();
        (1.0 - d2 / 0.04).max(0.0).powi(2)
    };
    let init: Vec<f64> = (0..space.len())
        .map(|f| {
            let x = space.point(f);
            1.0 - 0.25 * (dent(&x, -0.3) + dent(&x, 0.4)).min(1.0)
        })
        .collect();
    let traj = solve(
        &space,
        &init,
        &cfg,
        -1.0,
        0.0,
        &Snapshots::Every(1.0 / 64.0),
    )?;
    Ok((cfg, traj))
}

/// Up to `count` seeded centers `(x, t)` whose decay fit over `k_range`
/// succeeds, drawing at most `50 count` candidates with room for the
/// largest cylinder.
pub fn random_hoelder_fits(
    u: &GridFunction,
    k_range: std::ops::RangeInclusive<u32>,
    count: usize,
    seed: u64,
) -> Result<Vec<HoelderReport>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let space = u.space();
    let g = u.grid();
    let r = 2f64.powi(-(*k_range.start() as i32));
    let mut out = Vec::new();
    for _ in 0..50 * count {
        if out.len() == count {
            break;
        }
        let x: Vec<f64> = (0..space.dim())
            .map(|a| {
                let lo = space.origin()[a] + r;
                let hi = space.origin()[a] + space.extent()[a] - r;
                rng.gen_range(lo..hi)
            })
            .collect();
        let t = rng.gen_range(g.t_start() + r..=g.t_end());
        // Snap to the nearest node and slice so the center is a grid point.
        let Some(node) = space.locate(
            &x.iter()
                .map(|v| (v / space.h()).round() * space.h())
                .collect::<Vec<_>>(),
        ) else {
            continue;
        };
        let t = g.times()[g
            .nearest_slice(t)
            .max(g.slices_in(g.t_start() + r, g.t_end()).start)];
        match oscillation_decay(u, &space.point(node), t, k_range.clone()) {
            Ok(rep) => out.push(rep),
            Err(Error::Insufficient(_)) | Err(Error::InvalidParameter(_)) => continue,
            Err(e) => return Err(e),
        }
    }
    Ok(out)
}

/// Scales `2^-k` for decay fits on `u`: the largest fits twice in the time
/// span and in the box, the smallest still reaches a neighboring node, and
/// at most five are used.
pub fn hoelder_scales(u: &GridFunction) -> std::ops::RangeInclusive<u32> {
    let g = u.grid();
    let space = u.space();
    let room = (g.t_end() - g.t_start())
        .min(space.extent().iter().copied().fold(f64::INFINITY, f64::min) / 2.0);
    let k_start = (0..).find(|&k| 2f64.powi(-k) <= room / 2.0).unwrap_or(0) as u32;
    let k_end = (k_start + 4).min((1.0 / space.h()).log2().floor().max(0.0) as u32);
    k_start..=k_end
}
