//! Measure estimate for supersolutions touched by a sliding paraboloid in the
//! uniformly elliptic regime, its dyadic rescaling, and the eikonal
//! localization of contacts.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{region_measure, sublevel_measure, Cylinder, GridFunction};
use crate::paraboloid::{contact_set, contact_tolerance};
use crate::pucci::EllipticityInterval;
use crate::scheme::{residual_supersolution, SolverConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AbpParams {
    pub ell: EllipticityInterval,
    pub n: usize,
    pub alpha_c: f64,
    pub m: f64,
    pub tau: f64,
    #[serde(rename = "R")]
    pub big_r: f64,
    #[serde(rename = "T")]
    pub big_t: f64,
    #[serde(rename = "M_bound")]
    pub m_bound: f64,
    pub eta: f64,
}

/// `alpha = 100 max(1, 1/lambda)`, `m = min(1, 1/(n Lambda))`, `tau = n`,
/// `R = 5 sqrt(n)`, `T = 2n`. `M_bound` starts at 1 and `eta` at 0 until fitted.
pub fn make_params(ell: EllipticityInterval, n: usize) -> Result<AbpParams> {
    if !(1..=2).contains(&n) {
        return Err(Error::InvalidParameter(format!(
            "dimension must be 1 or 2, got {n}"
        )));
    }
    let nf = n as f64;
    let p = AbpParams {
        ell,
        n,
        alpha_c: 100.0 * (1.0f64).max(1.0 / ell.lambda()),
        m: (1.0f64).min(1.0 / (nf * ell.Lambda())),
        tau: nf,
        big_r: 5.0 * nf.sqrt(),
        big_t: 2.0 * nf,
        m_bound: 1.0,
        eta: 0.0,
    };
    debug_assert!(p.big_r - 1.0 >= 2.0 * (p.tau + 1.0).sqrt());
    Ok(p)
}

impl AbpParams {
    pub fn with_bounds(mut self, m_bound: f64, eta: f64) -> Result<Self> {
        if !(m_bound > 0.0) || !(0.0..=1.0).contains(&eta) {
            return Err(Error::InvalidParameter(format!(
                "need M > 0 and eta in [0, 1], got {m_bound}, {eta}"
            )));
        }
        self.m_bound = m_bound;
        self.eta = eta;
        Ok(self)
    }

    /// Top of the time window of generation `k`, relative to the vertex time.
    pub fn window(&self, k: u32) -> f64 {
        if k == 0 {
            1.0
        } else {
            (2.0 * self.tau + 2.0) / 2f64.powi(k as i32)
        }
    }

    /// Bound on `|x0|^2` from testing the supersolution inequality with the
    /// paraboloid at a contact where `u <= m`: `(1 + m Lambda n) / (lambda alpha)`.
    pub fn localization_bound(&self) -> f64 {
        (1.0 + self.m * self.ell.Lambda() * self.n as f64) / (self.ell.lambda() * self.alpha_c)
    }
}

/// Geometry of one measure estimate: vertex, openings, threshold, level and
/// the cylinder `B_radius(center) x (vertex_time, t_top]`.
#[derive(Debug, Clone, PartialEq)]
pub struct AbpFrame {
    pub center: Vec<f64>,
    pub vertex_time: f64,
    pub opening_a: f64,
    pub opening_b: f64,
    pub threshold: f64,
    pub level: f64,
    pub radius: f64,
    pub t_top: f64,
}

impl AbpFrame {
    /// The frame of generation `k` at vertex `(center, vertex_time)`.
    pub fn generation(params: &AbpParams, k: u32, center: Vec<f64>, vertex_time: f64) -> Self {
        let scale = 2f64.powi(k as i32);
        Self {
            center,
            vertex_time,
            opening_a: scale * params.alpha_c,
            opening_b: params.alpha_c,
            threshold: params.m / scale,
            level: params.m_bound,
            radius: params.big_r / scale,
            t_top: vertex_time + params.window(k),
        }
    }

    pub fn region(&self) -> Result<Cylinder> {
        Cylinder::new(
            self.center.clone(),
            self.t_top,
            self.radius,
            self.t_top - self.vertex_time,
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AbpReport {
    pub k: u32,
    pub alpha: f64,
    /// Elliptic threshold of this generation.
    pub m: f64,
    #[serde(rename = "M_bound")]
    pub m_bound: f64,
    pub eta_fitted: f64,
    /// `[x, t, u]` of the contact with the largest value.
    pub contact: (Vec<f64>, f64, f64),
    pub contact_count: usize,
    pub overshoot: f64,
    pub elliptic_regime: bool,
    pub sublevel_fraction: f64,
    pub passed: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

fn check_covers(u: &GridFunction, region: &Cylinder, vertex_time: f64) -> Result<()> {
    let g = u.grid();
    let tol = 1e-9;
    if g.t_start() > vertex_time + tol || g.t_end() < region.top - tol {
        return Err(Error::InvalidGrid(format!(
            "time window [{vertex_time}, {}] is not inside the grid range [{}, {}]",
            region.top,
            g.t_start(),
            g.t_end()
        )));
    }
    let space = u.space();
    for a in 0..space.dim() {
        let lo = space.origin()[a];
        let hi = lo + space.extent()[a];
        if region.center[a] - region.radius < lo - tol
            || region.center[a] + region.radius > hi + tol
        {
            return Err(Error::InvalidGrid(format!(
                "ball of radius {} around {:?} leaves the spatial grid",
                region.radius, region.center
            )));
        }
    }
    Ok(())
}

/// Measure estimate in an arbitrary frame.
pub fn abp_in_frame(
    u: &GridFunction,
    params: &AbpParams,
    frame: &AbpFrame,
    k: u32,
) -> Result<AbpReport> {
    let region = frame.region()?;
    check_covers(u, &region, frame.vertex_time)?;
    let contacts = contact_set(
        u,
        &[(frame.center.clone(), frame.vertex_time)],
        frame.opening_a,
        frame.opening_b,
        Some(&region),
    )?;
    let best = contacts.max_u().ok_or_else(|| {
        Error::EmptyContactSet(format!(
            "paraboloid with vertex ({:?}, {}) never touches u in its window",
            frame.center, frame.vertex_time
        ))
    })?;
    let eps = contact_tolerance(u.space().h());
    let elliptic = best.u > frame.threshold + eps;
    let fraction = sublevel_measure(u, frame.level, &region)? / region_measure(u, &region)?;
    Ok(AbpReport {
        k,
        alpha: params.alpha_c,
        m: frame.threshold,
        m_bound: frame.level,
        eta_fitted: params.eta,
        contact: (best.x.clone(), best.t, best.u),
        contact_count: contacts.len(),
        overshoot: contacts.overshoot(),
        elliptic_regime: elliptic,
        sublevel_fraction: fraction,
        passed: !elliptic || fraction >= params.eta,
        note: (!elliptic).then(|| {
            "contact outside the elliptic regime; deferred to the dyadic selection".to_string()
        }),
    })
}

/// `P^{alpha,alpha}` with vertex `(0, 0)` on `B_R x (0, 1]`.
pub fn abp_measure_estimate(u: &GridFunction, params: &AbpParams) -> Result<AbpReport> {
    rescaled_abp(u, 0, params)
}

/// `P^{2^k alpha, alpha}` with vertex `(0, 0)`, threshold `2^-k m`, on
/// `B_{2^-k R} x (0, 2^-k (2 tau + 2)]` (`(0, 1]` when `k = 0`).
pub fn rescaled_abp(u: &GridFunction, k: u32, params: &AbpParams) -> Result<AbpReport> {
    let frame = AbpFrame::generation(params, k, vec![0.0; u.space().dim()], 0.0);
    abp_in_frame(u, params, &frame, k)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalizationReport {
    /// `[x, t, u]` for every contact node.
    pub contacts: Vec<(Vec<f64>, f64, f64)>,
    /// Every contact value is at most `m`.
    pub hypothesis_met: bool,
    pub all_localized: bool,
    pub max_radius: f64,
    pub max_time: f64,
}

/// Contacts of `P^alpha` with vertex `(0, 0)` over `B_R x (0, 2 tau + 2]`
/// and whether they all sit in `B_{1/4} x (0, 1]`.
pub fn localization_check(u: &GridFunction, params: &AbpParams) -> Result<LocalizationReport> {
    let dim = u.space().dim();
    let top = (2.0 * params.tau + 2.0).min(u.grid().t_end());
    let region = Cylinder::new(vec![0.0; dim], top, params.big_r, top)?;
    let cs = contact_set(
        u,
        &[(vec![0.0; dim], 0.0)],
        params.alpha_c,
        params.alpha_c,
        Some(&region),
    )?;
    if cs.is_empty() {
        return Err(Error::EmptyContactSet(
            "no contact for the paraboloid with vertex at the origin".into(),
        ));
    }
    let eps = cs.tolerance;
    let tol = 1e-12;
    let mut max_radius: f64 = 0.0;
    let mut max_time = f64::NEG_INFINITY;
    for e in &cs.entries {
        max_radius = max_radius.max(e.x.iter().map(|v| v * v).sum::<f64>().sqrt());
        max_time = max_time.max(e.t);
    }
    Ok(LocalizationReport {
        hypothesis_met: cs.entries.iter().all(|e| e.u <= params.m + eps),
        all_localized: max_radius <= 0.25 + tol
            && max_time <= 1.0 + tol
            && cs.entries.iter().all(|e| e.t > 0.0),
        contacts: cs.entries.into_iter().map(|e| (e.x, e.t, e.u)).collect(),
        max_radius,
        max_time,
    })
}

/// Smallest supersolution residual over interior nodes, and whether it
/// clears `-C_r h` with `C_r = 10`.
pub fn certify_supersolution(u: &GridFunction, cfg: &SolverConfig) -> Result<(f64, bool)> {
    let res = residual_supersolution(u, cfg)?;
    let worst = res.min();
    Ok((worst, worst >= -10.0 * u.space().h()))
}
