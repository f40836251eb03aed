//! Improvement of oscillation from above and below, the exponential change
//! of variables, and empirical Hoelder exponents.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{
    extrema, oscillation, region_measure, sublevel_measure, superlevel_measure, Cylinder,
    GridFunction,
};
use crate::paraboloid::contact_tolerance;
use crate::pucci::EllipticityInterval;

const RANGE_TOL: f64 = 1e-9;

fn check_unit_range(u: &GridFunction) -> Result<()> {
    let space = u.space();
    let n = space.len();
    match u
        .values()
        .iter()
        .position(|&v| !(-RANGE_TOL..=1.0 + RANGE_TOL).contains(&v))
    {
        None => Ok(()),
        Some(i) => Err(Error::OutOfRange {
            x: space.point(i % n),
            t: u.grid().times()[i / n],
            value: u.values()[i],
        }),
    }
}

/// `A = 2 Lambda / lambda`.
pub fn exp_transform_constant(ell: EllipticityInterval) -> f64 {
    2.0 * ell.Lambda() / ell.lambda()
}

/// `v = exp(A max(1/2, u))` for `u` with values in `[0, 1]`.
pub fn truncate_exp_transform(u: &GridFunction, ell: EllipticityInterval) -> Result<GridFunction> {
    check_unit_range(u)?;
    let a = exp_transform_constant(ell);
    u.map(|v| (a * v.max(0.5)).exp())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImprovementReport {
    pub hypothesis_met: bool,
    /// Measure of the sublevel (from above) or superlevel (from below) set
    /// at one half, divided by the frame measure.
    pub measured_fraction: f64,
    pub required_fraction: f64,
    /// `sup` (from above) or `inf` (from below) over the inner cylinder.
    pub inner_extremum: f64,
    /// `1 - sup` or `inf` when the hypothesis holds.
    pub theta_hat: Option<f64>,
}

impl ImprovementReport {
    /// The hypothesis fails, or it holds and `theta_hat > 0`.
    pub fn consistent(&self) -> bool {
        !self.hypothesis_met || self.theta_hat.is_some_and(|t| t > 0.0)
    }
}

fn frames(dim: usize) -> (Cylinder, Cylinder) {
    let outer = Cylinder::unit(dim);
    let inner = Cylinder {
        center: vec![0.0; dim],
        top: 0.0,
        radius: 0.5,
        depth: 0.5,
    };
    (outer, inner)
}

/// For a subsolution with values in `[0, 1]`: if `{u <= 1/2}` fills at least
/// `eta` of `B_1 x (-1, 0]`, then `u <= 1 - theta` on `B_{1/2} x (-1/2, 0]`.
pub fn improvement_from_above_check(u: &GridFunction, eta: f64) -> Result<ImprovementReport> {
    check_unit_range(u)?;
    let (outer, inner) = frames(u.space().dim());
    let fraction = sublevel_measure(u, 0.5, &outer)? / region_measure(u, &outer)?;
    let (_, sup) = extrema(u, &inner)?;
    let met = fraction >= eta;
    Ok(ImprovementReport {
        hypothesis_met: met,
        measured_fraction: fraction,
        required_fraction: eta,
        inner_extremum: sup,
        theta_hat: met.then_some(1.0 - sup),
    })
}

/// For a supersolution with values in `[0, 1]`: if `{u > 1/2}` fills at least
/// `1 - eta` of `B_1 x (-1, 0]`, then `u >= theta` on `B_{1/2} x (-1/2, 0]`.
pub fn improvement_from_below_check(u: &GridFunction, eta: f64) -> Result<ImprovementReport> {
    check_unit_range(u)?;
    let (outer, inner) = frames(u.space().dim());
    let fraction = superlevel_measure(u, 0.5, &outer)? / region_measure(u, &outer)?;
    let (inf, _) = extrema(u, &inner)?;
    let met = fraction >= 1.0 - eta;
    Ok(ImprovementReport {
        hypothesis_met: met,
        measured_fraction: fraction,
        required_fraction: 1.0 - eta,
        inner_extremum: inf,
        theta_hat: met.then_some(inf),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HoelderReport {
    pub center: (Vec<f64>, f64),
    pub scales: Vec<f64>,
    pub oscillations: Vec<f64>,
    #[serde(rename = "alpha_hat")]
    pub fitted_alpha: f64,
    #[serde(rename = "residual")]
    pub fit_residual: f64,
    /// Scales that entered the fit.
    pub used: usize,
}

/// Oscillation over `B_r(x0) x (t0 - r, t0]` for `r = 2^-k`, `k` in
/// `k_range`, and the least-squares slope of `log osc` against `log r` over
/// scales with `osc > 10 eps_c`.
pub fn oscillation_decay(
    u: &GridFunction,
    x0: &[f64],
    t0: f64,
    k_range: std::ops::RangeInclusive<u32>,
) -> Result<HoelderReport> {
    let space = u.space();
    let g = u.grid();
    let r_max = 2f64.powi(-(*k_range.start() as i32));
    for a in 0..space.dim() {
        let lo = space.origin()[a];
        let hi = lo + space.extent()[a];
        if x0[a] - r_max < lo - 1e-12 || x0[a] + r_max > hi + 1e-12 {
            return Err(Error::InvalidParameter(format!(
                "center {x0:?} has no room for radius {r_max}"
            )));
        }
    }
    if t0 - r_max < g.t_start() - 1e-12 || t0 > g.t_end() + 1e-12 {
        return Err(Error::InvalidParameter(format!(
            "time {t0} has no room for depth {r_max}"
        )));
    }
    let floor = 10.0 * contact_tolerance(space.h());
    let mut scales = Vec::new();
    let mut oscs = Vec::new();
    for k in k_range {
        let r = 2f64.powi(-(k as i32));
        let c = Cylinder::new(x0.to_vec(), t0, r, r)?;
        scales.push(r);
        oscs.push(oscillation(u, &c)?);
    }
    let pts: Vec<(f64, f64)> = scales
        .iter()
        .zip(&oscs)
        .filter(|(_, &o)| o > floor)
        .map(|(&r, &o)| (r.ln(), o.ln()))
        .collect();
    if pts.len() < 3 {
        return Err(Error::Insufficient(format!(
            "only {} scales have oscillation above {floor:e}",
            pts.len()
        )));
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let rss: f64 = pts
        .iter()
        .map(|p| (p.1 - my - slope * (p.0 - mx)).powi(2))
        .sum();
    Ok(HoelderReport {
        center: (x0.to_vec(), t0),
        scales,
        oscillations: oscs,
        fitted_alpha: slope,
        fit_residual: (rss / n).sqrt(),
        used: pts.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{sample, SpaceTimeGrid, SpatialGrid};
    use crate::refsol::BarenblattPressure;

    fn ell(l: f64, big: f64) -> EllipticityInterval {
        EllipticityInterval::new(l, big).unwrap()
    }

    fn unit_frame_grid() -> SpaceTimeGrid {
        SpaceTimeGrid::uniform(SpatialGrid::centered(1, 1.0, 65).unwrap(), -1.0, 0.0, 64).unwrap()
    }

    #[test]
    fn exp_transform_examples() {
        let g = unit_frame_grid();
        let e = ell(1.0, 1.0);
        let zero = truncate_exp_transform(&sample(|_, _| 0.0, &g).unwrap(), e).unwrap();
        assert!(zero.values().iter().all(|&v| v == 1f64.exp()));
        let one = truncate_exp_transform(&sample(|_, _| 1.0, &g).unwrap(), e).unwrap();
        assert!(one.values().iter().all(|&v| v == 2f64.exp()));
        assert_eq!(exp_transform_constant(ell(0.5, 3.0)), 12.0);
        let bad = sample(|_, _| 1.5, &g).unwrap();
        assert!(matches!(
            truncate_exp_transform(&bad, e),
            Err(Error::OutOfRange { .. })
        ));
    }

    #[test]
    fn improvement_constants() {
        let g = unit_frame_grid();
        let zero = sample(|_, _| 0.0, &g).unwrap();
        let one = sample(|_, _| 1.0, &g).unwrap();
        let a = improvement_from_above_check(&zero, 0.1).unwrap();
        assert!(a.hypothesis_met && a.inner_extremum == 0.0 && a.theta_hat == Some(1.0));
        let a = improvement_from_above_check(&one, 0.1).unwrap();
        assert!(!a.hypothesis_met && a.theta_hat.is_none());
        let b = improvement_from_below_check(&one, 0.1).unwrap();
        assert!(b.hypothesis_met && b.inner_extremum == 1.0);
        assert!(
            !improvement_from_below_check(&zero, 0.1)
                .unwrap()
                .hypothesis_met
        );
    }

    #[test]
    fn front_decay_is_linear() {
        let space = SpatialGrid::centered(1, 2.0, 1025).unwrap();
        let g = SpaceTimeGrid::uniform(space, -2.0, 0.0, 512).unwrap();
        let u = sample(|x, t| (x[0] + t).max(0.0), &g).unwrap();
        let r = oscillation_decay(&u, &[0.0], 0.0, 0..=6).unwrap();
        for (s, o) in r.scales.iter().zip(&r.oscillations) {
            assert!((s - o).abs() < 1e-12);
        }
        assert!((r.fitted_alpha - 1.0).abs() < 1e-9);
    }

    #[test]
    fn constant_has_no_usable_scales() {
        let space = SpatialGrid::centered(1, 2.0, 129).unwrap();
        let g = SpaceTimeGrid::uniform(space, -2.0, 0.0, 64).unwrap();
        let u = sample(|_, _| 0.3, &g).unwrap();
        assert!(matches!(
            oscillation_decay(&u, &[0.0], 0.0, 0..=4),
            Err(Error::Insufficient(_))
        ));
    }

    #[test]
    fn barenblatt_interface_is_lipschitz() {
        let p = BarenblattPressure::new(1, 1.0).unwrap();
        let x0 = p.support_radius(2.0);
        let space = SpatialGrid::centered(1, 8.0, 4097).unwrap();
        let g = SpaceTimeGrid::uniform(space, 1.0, 2.0, 512).unwrap();
        let u = sample(|x, t| p.eval_unchecked(x, t), &g).unwrap();
        let r = oscillation_decay(&u, &[x0], 2.0, 1..=6).unwrap();
        assert!((0.9..=1.1).contains(&r.fitted_alpha), "{r:?}");
    }
}
