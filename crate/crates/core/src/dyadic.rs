//! Dyadic selection of cubes, maximal time densities, Vitali
//! disjointification and the space-time measure of `{u <= M}`.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::abp::{abp_in_frame, AbpFrame, AbpParams, AbpReport};
use crate::error::{Error, Result};
use crate::grid::{region_measure, sublevel_measure, Cube, Cylinder, GridFunction, SpaceTimeGrid};
use crate::paraboloid::contact_tolerance;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DyadicCube {
    pub k: u32,
    pub center: Vec<f64>,
    pub side: f64,
    pub t_i: f64,
    pub t_f: f64,
    /// Index of the parent among the evaluated cubes of a selection run.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub parent: Option<usize>,
}

impl DyadicCube {
    /// `Q_1` with the window `(0, 1]`.
    pub fn root(dim: usize) -> Self {
        Self {
            k: 0,
            center: vec![0.0; dim],
            side: 1.0,
            t_i: 0.0,
            t_f: 1.0,
            parent: None,
        }
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn cube(&self) -> Cube {
        Cube {
            center: self.center.clone(),
            side: self.side,
        }
    }

    /// Half-open containment `[c - l/2, c + l/2)`.
    pub fn contains(&self, x: &[f64]) -> bool {
        let half = self.side / 2.0;
        let tol = 1e-12;
        x.iter()
            .zip(&self.center)
            .all(|(xi, ci)| *xi >= ci - half - tol && *xi < ci + half - tol)
    }
}

/// `t_i^k = -tau (2 - 2^{1-k})` and `t_f^k = t_i^k + 2^{-k}(2 tau + 2)` for
/// `k >= 1`; `(0, 1]` for `k = 0`.
pub fn time_interval(k: u32, tau: f64) -> (f64, f64) {
    if k == 0 {
        return (0.0, 1.0);
    }
    let p = 2f64.powi(-(k as i32));
    let t_i = -tau * (2.0 - 2.0 * p);
    (t_i, t_i + p * (2.0 * tau + 2.0))
}

/// The `2^n` children, ordered lexicographically by offset sign.
pub fn decompose(c: &DyadicCube, tau: f64) -> Vec<DyadicCube> {
    let n = c.dim();
    let q = c.side / 4.0;
    let (t_i, t_f) = time_interval(c.k + 1, tau);
    (0..1usize << n)
        .map(|bits| {
            let center = (0..n)
                .map(|a| {
                    let sign = if bits >> (n - 1 - a) & 1 == 1 {
                        1.0
                    } else {
                        -1.0
                    };
                    c.center[a] + sign * q
                })
                .collect();
            DyadicCube {
                k: c.k + 1,
                center,
                side: c.side / 2.0,
                t_i,
                t_f,
                parent: None,
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Alternative {
    UnionBig,
    ZeroSetBig,
    /// Neither measure reaches one half.
    Neither,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CubeRecord {
    pub k: u32,
    pub center: Vec<f64>,
    pub t_i: f64,
    pub t_f: f64,
    pub selected_reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionResult {
    pub alternative: Alternative,
    pub union_measure: f64,
    pub zero_set_measure: f64,
    pub cubes: Vec<CubeRecord>,
    /// Measure estimates of the selected cubes, in the order of `cubes`.
    pub reports: Vec<AbpReport>,
    pub evaluated: usize,
    pub deepest_generation: u32,
}

impl SelectionResult {
    /// No selected cube lies inside another selected cube.
    pub fn is_non_nested(&self) -> bool {
        self.cubes.iter().all(|a| {
            let qa = DyadicCube {
                k: a.k,
                center: a.center.clone(),
                side: 2f64.powi(-(a.k as i32)),
                t_i: a.t_i,
                t_f: a.t_f,
                parent: None,
            };
            self.cubes
                .iter()
                .all(|b| b.k <= a.k || !qa.contains(&b.center))
        })
    }
}

/// Picks the alternative from the two measured quantities; ties at one half
/// and double hits with equal margins go to the zero set.
pub fn choose_alternative(union_measure: f64, zero_set_measure: f64) -> Alternative {
    let union_big = union_measure > 0.5;
    let zero_big = zero_set_measure >= 0.5;
    match (union_big, zero_big) {
        (true, false) => Alternative::UnionBig,
        (false, true) => Alternative::ZeroSetBig,
        (true, true) if union_measure - 0.5 > zero_set_measure - 0.5 => Alternative::UnionBig,
        (true, true) => Alternative::ZeroSetBig,
        (false, false) => Alternative::Neither,
    }
}

/// Spatial measure of `{u(., -2 tau) <= eps_c}` in `Q_1`, using the slice
/// nearest to `-2 tau`.
pub fn zero_set_measure(u: &GridFunction, tau: f64) -> Result<f64> {
    let g = u.grid();
    let target = -2.0 * tau;
    if g.t_start() > target + 1e-9 || g.t_end() < target - 1e-9 {
        return Err(Error::InvalidGrid(format!(
            "time {target} is outside the grid range"
        )));
    }
    let k = g.nearest_slice(target);
    let eps = contact_tolerance(u.space().h());
    let q1 = Cube {
        center: vec![0.0; u.space().dim()],
        side: 1.0,
    };
    let count = u
        .space()
        .nodes_in_cube(&q1)
        .into_iter()
        .filter(|&f| u.at(k, f) <= eps)
        .count();
    Ok(count as f64 * u.space().cell_volume())
}

/// Whether every paraboloid of generation `k` can reach zero at some node:
/// its top `alpha window(k)` must cover the drop `(a_k / 2) n (h / 2)^2`
/// to the farthest nearest node.
pub fn resolves_generation(params: &AbpParams, k: u32, h: f64) -> bool {
    let a = 2f64.powi(k as i32) * params.alpha_c;
    params.alpha_c * params.window(k) + contact_tolerance(h)
        >= 0.5 * a * params.n as f64 * 0.25 * h * h
}

/// Breadth-first dyadic selection down to generation `k_max`.
pub fn select(u: &GridFunction, params: &AbpParams, k_max: u32) -> Result<SelectionResult> {
    let dim = u.space().dim();
    if dim != params.n {
        return Err(Error::InvalidParameter(
            "parameter dimension does not match the grid".into(),
        ));
    }
    let eps = contact_tolerance(u.space().h());
    let mut evaluated: Vec<DyadicCube> = Vec::new();
    let mut selected: Vec<(CubeRecord, AbpReport)> = Vec::new();
    let mut queue = VecDeque::from([DyadicCube::root(dim)]);
    let mut deepest = 0;
    while let Some(cube) = queue.pop_front() {
        deepest = deepest.max(cube.k);
        if !resolves_generation(params, cube.k, u.space().h()) {
            return Err(Error::Insufficient(format!(
                "grid spacing {} is too coarse for generation {} cubes; refine the grid or lower k_max",
                u.space().h(),
                cube.k
            )));
        }
        let frame = AbpFrame::generation(params, cube.k, cube.center.clone(), cube.t_i);
        let report = match abp_in_frame(u, params, &frame, cube.k) {
            Ok(r) => r,
            Err(Error::EmptyContactSet(msg)) if cube.k == 0 => return Err(Error::Hypothesis(msg)),
            Err(Error::EmptyContactSet(msg)) => {
                return Err(Error::Invariant(format!(
                    "live cube of generation {} at {:?} has no contact: {msg}",
                    cube.k, cube.center
                )))
            }
            Err(e) => return Err(e),
        };
        let index = evaluated.len();
        evaluated.push(cube.clone());
        if report.contact.2 > frame.threshold + eps {
            let reason = format!(
                "contact u = {:.6e} > 2^-{} m = {:.6e}",
                report.contact.2, cube.k, frame.threshold
            );
            selected.push((
                CubeRecord {
                    k: cube.k,
                    center: cube.center,
                    t_i: cube.t_i,
                    t_f: cube.t_f,
                    selected_reason: reason,
                },
                report,
            ));
        } else if cube.k < k_max {
            for mut child in decompose(&cube, params.tau) {
                child.parent = Some(index);
                queue.push_back(child);
            }
        }
    }
    selected.sort_by(|a, b| {
        a.0.k.cmp(&b.0.k).then_with(|| {
            a.0.center
                .iter()
                .zip(&b.0.center)
                .map(|(x, y)| x.total_cmp(y))
                .find(|o| o.is_ne())
                .unwrap_or(std::cmp::Ordering::Equal)
        })
    });

    let space = u.space();
    let q1 = Cube {
        center: vec![0.0; dim],
        side: 1.0,
    };
    let covered = space
        .nodes_in_cube(&q1)
        .into_iter()
        .filter(|&f| {
            let x = space.point(f);
            selected.iter().any(|(c, _)| {
                let q = DyadicCube {
                    k: c.k,
                    center: c.center.clone(),
                    side: 2f64.powi(-(c.k as i32)),
                    t_i: c.t_i,
                    t_f: c.t_f,
                    parent: None,
                };
                q.contains(&x)
            })
        })
        .count();
    let union_measure = covered as f64 * space.cell_volume();
    let zero = zero_set_measure(u, params.tau)?;
    let (cubes, reports) = selected.into_iter().unzip();
    Ok(SelectionResult {
        alternative: choose_alternative(union_measure, zero),
        union_measure,
        zero_set_measure: zero,
        cubes,
        reports,
        evaluated: evaluated.len(),
        deepest_generation: deepest,
    })
}

/// Largest density and the time attaining it.
fn theta_scan(
    u: &GridFunction,
    flat: usize,
    level: f64,
    t_low: f64,
    horizon: f64,
) -> Result<(f64, f64)> {
    let g = u.grid();
    let slices = g.slices_in(t_low, horizon);
    if slices.is_empty() {
        return Err(Error::EmptyRegion);
    }
    if g.t_start() > t_low + 1e-9 {
        return Err(Error::InvalidGrid(format!(
            "time {t_low} is before the grid start"
        )));
    }
    let (mut hit, mut total) = (0.0, 0.0);
    let mut best = (f64::NEG_INFINITY, t_low);
    for k in slices {
        // The first slice only carries the part of its cell above t_low.
        let w = if total == 0.0 {
            g.times()[k] - t_low
        } else {
            g.time_weight(k)
        };
        total += w;
        if u.at(k, flat) <= level {
            hit += w;
        }
        let d = hit / total;
        if d > best.0 {
            best = (d, g.times()[k]);
        }
    }
    Ok(best)
}

/// `sup_t |{u(x, .) <= M} cap (t_low, t]| / (t - t_low)` over grid times
/// `t_low < t <= horizon`.
pub fn theta_density(
    u: &GridFunction,
    flat: usize,
    level: f64,
    t_low: f64,
    horizon: f64,
) -> Result<f64> {
    Ok(theta_scan(u, flat, level, t_low, horizon)?.0)
}

/// A closed ball (an interval when `center` has one entry).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ball {
    pub center: Vec<f64>,
    pub radius: f64,
}

impl Ball {
    pub fn interval(a: f64, b: f64) -> Self {
        Self {
            center: vec![0.5 * (a + b)],
            radius: 0.5 * (b - a),
        }
    }

    fn overlaps(&self, other: &Ball) -> bool {
        let d2: f64 = self
            .center
            .iter()
            .zip(&other.center)
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        let r = self.radius + other.radius;
        d2 < r * r * (1.0 - 1e-12)
    }
}

/// Greedy largest-first disjoint subfamily, returned as indices in input order.
/// Members that only touch count as disjoint.
pub fn vitali_disjoint(family: &[Ball]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..family.len()).collect();
    order.sort_by(|&a, &b| family[b].radius.total_cmp(&family[a].radius));
    let mut chosen: Vec<usize> = Vec::new();
    for i in order {
        if chosen.iter().all(|&j| !family[i].overlaps(&family[j])) {
            chosen.push(i);
        }
    }
    chosen.sort_unstable();
    chosen
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum FixedTimeAlternative {
    ZeroSet,
    Density,
    /// The selection fired neither alternative on the discrete grid.
    Neither,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixedTimeReport {
    pub alternative: FixedTimeAlternative,
    /// Zero-set measure, or `|{Theta_M >= eta/2} cap B_R|`.
    pub measure: f64,
    pub eta_theta: f64,
    /// `sum |{theta_k > eta/2} cap B_j|` over a Vitali subfamily of the
    /// selected balls (density alternative only).
    pub vitali_lower_bound: f64,
    pub selection: SelectionResult,
}

/// Spatial measure of `{x in set : pred(x)}` with node counting.
fn count_measure(
    u: &GridFunction,
    nodes: &[usize],
    mut pred: impl FnMut(usize) -> Result<bool>,
) -> Result<f64> {
    let mut count = 0usize;
    for &f in nodes {
        if pred(f)? {
            count += 1;
        }
    }
    Ok(count as f64 * u.space().cell_volume())
}

pub fn fixed_time_estimate(
    u: &GridFunction,
    params: &AbpParams,
    k_max: u32,
) -> Result<FixedTimeReport> {
    let selection = select(u, params, k_max)?;
    let dim = u.space().dim();
    let eta_theta = params.eta / 2.0;
    let t_low = -2.0 * params.tau;
    match selection.alternative {
        Alternative::ZeroSetBig => Ok(FixedTimeReport {
            alternative: FixedTimeAlternative::ZeroSet,
            measure: selection.zero_set_measure,
            eta_theta,
            vitali_lower_bound: 0.0,
            selection,
        }),
        Alternative::Neither => Ok(FixedTimeReport {
            alternative: FixedTimeAlternative::Neither,
            measure: 0.0,
            eta_theta,
            vitali_lower_bound: 0.0,
            selection,
        }),
        Alternative::UnionBig => {
            if !(params.eta > 0.0) {
                return Err(Error::InvalidParameter(
                    "the density alternative needs a fitted eta > 0".into(),
                ));
            }
            let space = u.space();
            let ball = space.nodes_in_ball(&vec![0.0; dim], params.big_r);
            let measure = count_measure(u, &ball, |f| {
                Ok(theta_density(u, f, params.m_bound, t_low, 1.0)? >= eta_theta)
            })?;
            let balls: Vec<Ball> = selection
                .cubes
                .iter()
                .map(|c| Ball {
                    center: c.center.clone(),
                    radius: params.big_r / 2f64.powi(c.k as i32),
                })
                .collect();
            let mut bound = 0.0;
            for i in vitali_disjoint(&balls) {
                let nodes = space.nodes_in_ball(&balls[i].center, balls[i].radius);
                let t_f = selection.cubes[i].t_f;
                bound += count_measure(u, &nodes, |f| {
                    Ok(theta_density(u, f, params.m_bound, t_low, t_f)? > eta_theta)
                })?;
            }
            Ok(FixedTimeReport {
                alternative: FixedTimeAlternative::Density,
                measure,
                eta_theta,
                vitali_lower_bound: bound,
                selection,
            })
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShiftRecord {
    pub shift: f64,
    pub alternative: FixedTimeAlternative,
    pub measure: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeIntegrationReport {
    /// `|{u <= M} cap B_R x (-2 tau, 1]|`.
    pub bounded_set_measure: f64,
    pub region_measure: f64,
    pub fraction: f64,
    #[serde(rename = "M_bound")]
    pub m_bound: f64,
    pub shifts: Vec<ShiftRecord>,
    /// `sum_x eta/2 sum |I|` over Vitali subfamilies of the density
    /// intervals at each node; never exceeds `bounded_set_measure`.
    pub vitali_lower_bound: f64,
}

/// Copy of `u` with every grid time moved forward by `shift`.
fn shifted(u: &GridFunction, shift: f64) -> Result<GridFunction> {
    let g = u.grid();
    let grid = SpaceTimeGrid::new(g.space().clone(), g.t_start() + shift, g.dt_list().to_vec())?;
    GridFunction::from_values(grid, u.values().to_vec())
}

/// Runs the fixed-time estimate on `u(x, s - t)` for `n_shifts` equally
/// spaced `t in [0, 1/2]` and measures `{u <= M}` over `B_R x (-2 tau, 1]`.
/// Shifts where the selection fires neither alternative are recorded as such.
pub fn integrate_in_time(
    u: &GridFunction,
    params: &AbpParams,
    k_max: u32,
    n_shifts: usize,
) -> Result<TimeIntegrationReport> {
    if n_shifts < 2 {
        return Err(Error::InvalidParameter(
            "need at least two time shifts".into(),
        ));
    }
    let g = u.grid();
    if g.t_start() > -2.0 * params.tau - 0.5 + 1e-9 || g.t_end() < 1.0 - 1e-9 {
        return Err(Error::InvalidGrid(format!(
            "data must cover [{}, 1], got [{}, {}]",
            -2.0 * params.tau - 0.5,
            g.t_start(),
            g.t_end()
        )));
    }
    let dim = u.space().dim();
    let space = u.space();
    let ball = space.nodes_in_ball(&vec![0.0; dim], params.big_r);
    let eta_theta = params.eta / 2.0;
    let t_low = -2.0 * params.tau;
    let mut shifts = Vec::with_capacity(n_shifts);
    let mut intervals: Vec<Vec<Ball>> = vec![Vec::new(); ball.len()];
    for j in 0..n_shifts {
        let t = 0.5 * j as f64 / (n_shifts - 1) as f64;
        let v = shifted(u, t)?;
        let rep = fixed_time_estimate(&v, params, k_max)?;
        if rep.alternative == FixedTimeAlternative::Density {
            for (slot, &f) in intervals.iter_mut().zip(&ball) {
                let (theta, s) = theta_scan(&v, f, params.m_bound, t_low, 1.0)?;
                if theta >= eta_theta {
                    slot.push(Ball::interval(t_low - t, s - t));
                }
            }
        }
        shifts.push(ShiftRecord {
            shift: t,
            alternative: rep.alternative,
            measure: rep.measure,
        });
    }
    let cell = space.cell_volume();
    let vitali: f64 = intervals
        .iter()
        .map(|fam| {
            vitali_disjoint(fam)
                .into_iter()
                .map(|i| 2.0 * fam[i].radius)
                .sum::<f64>()
        })
        .sum::<f64>()
        * eta_theta
        * cell;
    let region = Cylinder::new(vec![0.0; dim], 1.0, params.big_r, 2.0 * params.tau)?;
    let bounded = sublevel_measure(u, params.m_bound, &region)?;
    let total = region_measure(u, &region)?;
    Ok(TimeIntegrationReport {
        bounded_set_measure: bounded,
        region_measure: total,
        fraction: bounded / total,
        m_bound: params.m_bound,
        shifts,
        vitali_lower_bound: vitali,
    })
}
