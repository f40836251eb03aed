//! Closed-form reference solutions and the discrete comparison test.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::same_grid;
use crate::scheme::Trajectory;

/// Traveling front `(e.x + t)_+` with `b |e|^2 = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct FrontSolution {
    direction: Vec<f64>,
    b: f64,
}

impl FrontSolution {
    /// Normalizes `direction` so that `b |e|^2 = 1`.
    pub fn new(direction: &[f64], b: f64) -> Result<Self> {
        let norm2: f64 = direction.iter().map(|e| e * e).sum();
        if !(b > 0.0) || !(norm2 > 0.0) || !norm2.is_finite() {
            return Err(Error::InvalidParameter(
                "front needs b > 0 and a nonzero direction".into(),
            ));
        }
        let scale = 1.0 / (b * norm2).sqrt();
        Ok(Self {
            direction: direction.iter().map(|e| e * scale).collect(),
            b,
        })
    }

    pub fn direction(&self) -> &[f64] {
        &self.direction
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn eval(&self, x: &[f64], t: f64) -> f64 {
        traveling_front(&self.direction, x, t)
    }
}

pub fn traveling_front(e: &[f64], x: &[f64], t: f64) -> f64 {
    let ex: f64 = e.iter().zip(x).map(|(a, b)| a * b).sum();
    (ex + t).max(0.0)
}

/// Self-similar pressure of the quadratic porous medium equation, a solution
/// of `p_t = p Lap p + |Dp|^2`:
/// `p = 2 t^{-a} (C - k |x|^2 t^{-2 b})_+` with `a = n/(n+2)`, `b = 1/(n+2)`,
/// `k = 1/(4(n+2))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BarenblattPressure {
    pub n: usize,
    pub c: f64,
}

impl BarenblattPressure {
    pub fn new(n: usize, c: f64) -> Result<Self> {
        if n == 0 || !(c > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "need n >= 1 and C > 0, got {n}, {c}"
            )));
        }
        Ok(Self { n, c })
    }

    pub fn alpha(&self) -> f64 {
        self.n as f64 / (self.n as f64 + 2.0)
    }

    pub fn beta(&self) -> f64 {
        1.0 / (self.n as f64 + 2.0)
    }

    pub fn k(&self) -> f64 {
        1.0 / (4.0 * (self.n as f64 + 2.0))
    }

    pub fn eval(&self, x: &[f64], t: f64) -> Result<f64> {
        if !(t > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "Barenblatt pressure needs t > 0, got {t}"
            )));
        }
        Ok(self.eval_unchecked(x, t))
    }

    /// Same as [`eval`](Self::eval) for callers that already know `t > 0`.
    pub fn eval_unchecked(&self, x: &[f64], t: f64) -> f64 {
        let r2: f64 = x.iter().map(|v| v * v).sum();
        2.0 * t.powf(-self.alpha()) * (self.c - self.k() * r2 * t.powf(-2.0 * self.beta())).max(0.0)
    }

    pub fn support_radius(&self, t: f64) -> f64 {
        (self.c / self.k()).sqrt() * t.powf(self.beta())
    }

    pub fn peak(&self, t: f64) -> f64 {
        2.0 * self.c * t.powf(-self.alpha())
    }
}

pub fn barenblatt_pressure(params: &BarenblattPressure, x: &[f64], t: f64) -> Result<f64> {
    params.eval(x, t)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub holds: bool,
    /// Smallest `super - sub` over interior nodes and times.
    pub worst_gap: f64,
    /// `(x, t)` of the worst gap.
    pub location: (Vec<f64>, f64),
    /// First node (in time order) where `sub > super + tol`, if any.
    pub first_violation: Option<(Vec<f64>, f64)>,
}

/// Checks `sub <= super + tol` on interior nodes at every stored time, given
/// that it holds initially and on the boundary.
pub fn comparison_test(sub: &Trajectory, sup: &Trajectory, tol: f64) -> Result<ComparisonReport> {
    same_grid(&sub.snapshots, &sup.snapshots)?;
    let grid = sub.grid();
    let space = grid.space();
    let (a, b) = (&sub.snapshots, &sup.snapshots);
    for k in 0..grid.n_times() {
        for f in 0..space.len() {
            let boundary = !space.is_interior(f, 1);
            if (k == 0 || boundary) && a.at(k, f) > b.at(k, f) + tol {
                return Err(Error::Hypothesis(format!(
                    "ordering fails on the parabolic boundary at x = {:?}, t = {}",
                    space.point(f),
                    grid.times()[k]
                )));
            }
        }
    }
    let mut worst = f64::INFINITY;
    let mut at = (0, 0);
    let mut first = None;
    for k in 1..grid.n_times() {
        for f in (0..space.len()).filter(|&f| space.is_interior(f, 1)) {
            let gap = b.at(k, f) - a.at(k, f);
            if gap < worst {
                worst = gap;
                at = (k, f);
            }
            if first.is_none() && gap < -tol {
                first = Some((space.point(f), grid.times()[k]));
            }
        }
    }
    if !worst.is_finite() {
        return Err(Error::Insufficient(
            "no interior nodes after the initial time".into(),
        ));
    }
    Ok(ComparisonReport {
        holds: first.is_none(),
        worst_gap: worst,
        location: (space.point(at.1), grid.times()[at.0]),
        first_violation: first,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{sample, SpaceTimeGrid, SpatialGrid};

    #[test]
    fn front_examples() {
        let f = FrontSolution::new(&[1.0], 1.0).unwrap();
        assert_eq!(f.eval(&[0.5], 0.25), 0.75);
        assert_eq!(f.eval(&[-0.5], 0.25), 0.0);
        let g = FrontSolution::new(&[3.0, 4.0], 2.0).unwrap();
        let e2: f64 = g.direction().iter().map(|e| e * e).sum();
        assert!((2.0 * e2 - 1.0).abs() < 1e-12);
        // Residual on the positive phase: u_t - u Lap u - b|Du|^2 = 1 - 0 - b|e|^2.
        assert!((1.0 - 2.0 * e2).abs() < 1e-12);
    }

    #[test]
    fn barenblatt_examples() {
        let p = BarenblattPressure::new(1, 1.0).unwrap();
        assert_eq!(p.eval(&[0.0], 1.0).unwrap(), 2.0);
        assert!((p.support_radius(1.0) - 12f64.sqrt()).abs() < 1e-14);
        assert_eq!(p.eval(&[12f64.sqrt() + 1e-9], 1.0).unwrap(), 0.0);
        assert!(p.eval(&[0.0], 0.0).is_err());
        let p2 = BarenblattPressure::new(2, 1.0).unwrap();
        assert_eq!((p2.alpha(), p2.beta(), p2.k()), (0.5, 0.25, 1.0 / 16.0));
    }

    #[test]
    fn barenblatt_peak_and_support_monotone() {
        for n in [1, 2] {
            let p = BarenblattPressure::new(n, 1.0).unwrap();
            let ts = [1.0, 2.0, 4.0];
            for w in ts.windows(2) {
                assert!(p.peak(w[1]) < p.peak(w[0]));
                assert!(p.support_radius(w[1]) > p.support_radius(w[0]));
            }
            assert_eq!(p.eval(&vec![0.0; n], 2.0).unwrap(), p.peak(2.0));
        }
    }

    fn traj_of(f: impl Fn(&[f64], f64) -> f64) -> Trajectory {
        let space = SpatialGrid::centered(1, 1.0, 21).unwrap();
        let g = SpaceTimeGrid::uniform(space, 0.0, 1.0, 10).unwrap();
        Trajectory {
            snapshots: sample(f, &g).unwrap(),
            dt_used: vec![0.1; 10],
        }
    }

    #[test]
    fn comparison_examples() {
        let zero = traj_of(|_, _| 0.0);
        let one = traj_of(|_, _| 1.0);
        let r = comparison_test(&zero, &one, 0.0).unwrap();
        assert!(r.holds);
        assert_eq!(r.worst_gap, 1.0);

        let a = traj_of(|x, t| (x[0] + t).max(0.0));
        let b = traj_of(|x, t| (x[0] + t + 0.1).max(0.0));
        let r = comparison_test(&a, &b, 0.0).unwrap();
        assert!(r.holds && r.worst_gap >= 0.0);

        assert!(comparison_test(&a, &a, 0.0).unwrap().holds);
        assert!(matches!(
            comparison_test(&one, &zero, 0.0),
            Err(Error::Hypothesis(_))
        ));
    }

    #[test]
    fn comparison_reports_interior_violation() {
        let sup = traj_of(|_, _| 1.0);
        let sub = traj_of(|x, t| {
            if x[0].abs() < 0.2 && t > 0.45 {
                1.5
            } else {
                0.5
            }
        });
        let r = comparison_test(&sub, &sup, 1e-12).unwrap();
        assert!(!r.holds);
        let (x, t) = r.first_violation.unwrap();
        assert!(x[0].abs() < 0.2 && (t - 0.5).abs() < 1e-12);
    }

    #[test]
    fn grid_mismatch_is_error() {
        let a = traj_of(|_, _| 0.0);
        let space = SpatialGrid::centered(1, 1.0, 11).unwrap();
        let g = SpaceTimeGrid::uniform(space, 0.0, 1.0, 10).unwrap();
        let b = Trajectory {
            snapshots: sample(|_, _| 0.0, &g).unwrap(),
            dt_used: vec![],
        };
        assert!(matches!(
            comparison_test(&a, &b, 0.0),
            Err(Error::GridMismatch(_))
        ));
    }
}
