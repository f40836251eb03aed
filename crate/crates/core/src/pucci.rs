//! Pucci extremal operators, exact on symmetric matrices and monotone on grids.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{GridFunction, SpatialGrid};

/// Ellipticity bounds `0 < lambda <= Lambda`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EllipticityInterval {
    lambda: f64,
    #[serde(rename = "Lambda")]
    big_lambda: f64,
}

impl EllipticityInterval {
    pub fn new(lambda: f64, big_lambda: f64) -> Result<Self> {
        if !(lambda > 0.0 && lambda.is_finite() && big_lambda.is_finite() && lambda <= big_lambda) {
            return Err(Error::InvalidParameter(format!(
                "need 0 < lambda <= Lambda, got lambda = {lambda}, Lambda = {big_lambda}"
            )));
        }
        Ok(Self { lambda, big_lambda })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    #[allow(non_snake_case)]
    pub fn Lambda(&self) -> f64 {
        self.big_lambda
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sign {
    Plus,
    Minus,
}

impl std::fmt::Display for Sign {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Sign::Plus => "+",
            Sign::Minus => "-",
        })
    }
}

/// Symmetric 1x1 or 2x2 matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SymmetricMatrix {
    dim: usize,
    a: [[f64; 2]; 2],
}

impl SymmetricMatrix {
    pub fn scalar(v: f64) -> Self {
        Self {
            dim: 1,
            a: [[v, 0.0], [0.0, 0.0]],
        }
    }

    pub fn new_2x2(a11: f64, a12: f64, a22: f64) -> Self {
        Self {
            dim: 2,
            a: [[a11, a12], [a12, a22]],
        }
    }

    /// Builds from a full matrix, rejecting asymmetric input.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        match rows.len() {
            1 if rows[0].len() == 1 => Ok(Self::scalar(rows[0][0])),
            2 if rows.iter().all(|r| r.len() == 2) => {
                if rows[0][1] != rows[1][0] {
                    return Err(Error::InvalidParameter("matrix is not symmetric".into()));
                }
                Ok(Self::new_2x2(rows[0][0], rows[0][1], rows[1][1]))
            }
            _ => Err(Error::InvalidParameter("matrix must be 1x1 or 2x2".into())),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.a[i][j]
    }

    pub fn scaled(&self, c: f64) -> Self {
        let mut out = *self;
        for row in &mut out.a {
            for v in row {
                *v *= c;
            }
        }
        out
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim).map(|i| self.a[i][i]).sum()
    }

    /// `v^T M v`.
    pub fn quadratic_form(&self, v: [f64; 2]) -> f64 {
        (0..self.dim)
            .flat_map(|i| (0..self.dim).map(move |j| (i, j)))
            .map(|(i, j)| v[i] * self.a[i][j] * v[j])
            .sum()
    }

    /// Eigenvalues in closed form; only the first `dim` entries are meaningful.
    pub fn eigenvalues(&self) -> [f64; 2] {
        if self.dim == 1 {
            return [self.a[0][0], 0.0];
        }
        let mean = 0.5 * (self.a[0][0] + self.a[1][1]);
        let half_diff = 0.5 * (self.a[0][0] - self.a[1][1]);
        let rad = half_diff.hypot(self.a[0][1]);
        [mean + rad, mean - rad]
    }
}

#[inline]
fn pos(x: f64) -> f64 {
    x.max(0.0)
}

#[inline]
fn neg(x: f64) -> f64 {
    (-x).max(0.0)
}

/// One-dimensional extremal response to a second derivative `s`.
#[inline]
pub fn pucci_scalar(s: f64, ell: EllipticityInterval, sign: Sign) -> f64 {
    match sign {
        Sign::Plus => ell.big_lambda * pos(s) - ell.lambda * neg(s),
        Sign::Minus => ell.lambda * pos(s) - ell.big_lambda * neg(s),
    }
}

pub fn pucci_plus(m: &SymmetricMatrix, ell: EllipticityInterval) -> f64 {
    m.eigenvalues()[..m.dim]
        .iter()
        .map(|&e| pucci_scalar(e, ell, Sign::Plus))
        .sum()
}

pub fn pucci_minus(m: &SymmetricMatrix, ell: EllipticityInterval) -> f64 {
    -pucci_plus(&m.scaled(-1.0), ell)
}

pub fn pucci(m: &SymmetricMatrix, ell: EllipticityInterval, sign: Sign) -> f64 {
    match sign {
        Sign::Plus => pucci_plus(m, ell),
        Sign::Minus => pucci_minus(m, ell),
    }
}

/// Integer grid directions, grouped into orthogonal pairs in dimension 2.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirectionStencil {
    dim: usize,
    pairs: Vec<([i32; 2], [i32; 2])>,
}

impl DirectionStencil {
    /// Axis pair plus the diagonal pair in 2D; the single axis in 1D.
    pub fn default_for(dim: usize) -> Self {
        match dim {
            1 => Self {
                dim: 1,
                pairs: vec![([1, 0], [0, 0])],
            },
            _ => Self {
                dim: 2,
                pairs: vec![([1, 0], [0, 1]), ([1, 1], [1, -1])],
            },
        }
    }

    /// Axis directions only.
    pub fn axes(dim: usize) -> Self {
        match dim {
            1 => Self::default_for(1),
            _ => Self {
                dim: 2,
                pairs: vec![([1, 0], [0, 1])],
            },
        }
    }

    /// Custom 2D stencil; every pair must be orthogonal and the axis pair present.
    pub fn from_pairs(pairs: Vec<([i32; 2], [i32; 2])>) -> Result<Self> {
        for (v, w) in &pairs {
            if v[0] * w[0] + v[1] * w[1] != 0 || *v == [0, 0] || *w == [0, 0] {
                return Err(Error::InvalidParameter(format!(
                    "pair {v:?}, {w:?} is not orthogonal"
                )));
            }
        }
        let has_axes = pairs.iter().any(|(v, w)| {
            let mut p = [*v, *w].map(|d| [d[0].abs(), d[1].abs()]);
            p.sort();
            p == [[0, 1], [1, 0]]
        });
        if !has_axes {
            return Err(Error::InvalidParameter(
                "stencil must contain the coordinate axes".into(),
            ));
        }
        Ok(Self { dim: 2, pairs })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn pairs(&self) -> &[([i32; 2], [i32; 2])] {
        &self.pairs
    }

    /// Number of distinct directions.
    pub fn num_directions(&self) -> usize {
        if self.dim == 1 {
            1
        } else {
            2 * self.pairs.len()
        }
    }

    /// Largest per-axis offset a node needs on each side.
    pub fn reach(&self) -> usize {
        self.pairs
            .iter()
            .flat_map(|(v, w)| [v[0], v[1], w[0], w[1]])
            .map(|c| c.unsigned_abs() as usize)
            .max()
            .unwrap_or(1)
    }
}

/// Second difference of `slice` at `flat` along `dir`, normalized by `|dir|^2 h^2`.
#[inline]
pub fn directional_second_difference(
    space: &SpatialGrid,
    slice: &[f64],
    flat: usize,
    dir: [i32; 2],
) -> f64 {
    let stride = space.shape()[0] as isize;
    let off = dir[0] as isize
        + if space.dim() == 2 {
            dir[1] as isize * stride
        } else {
            0
        };
    let len2 = (dir[0] * dir[0] + dir[1] * dir[1]) as f64;
    let h = space.h();
    let c = flat as isize;
    (slice[(c + off) as usize] - 2.0 * slice[flat] + slice[(c - off) as usize]) / (len2 * h * h)
}

/// Discrete extremal operator on a spatial slice; `flat` must be interior.
pub fn discrete_pucci_slice(
    space: &SpatialGrid,
    slice: &[f64],
    flat: usize,
    ell: EllipticityInterval,
    sign: Sign,
    stencil: &DirectionStencil,
) -> f64 {
    if space.dim() == 1 {
        let s = directional_second_difference(space, slice, flat, [1, 0]);
        return pucci_scalar(s, ell, sign);
    }
    let per_pair = stencil.pairs.iter().map(|&(v, w)| {
        pucci_scalar(
            directional_second_difference(space, slice, flat, v),
            ell,
            sign,
        ) + pucci_scalar(
            directional_second_difference(space, slice, flat, w),
            ell,
            sign,
        )
    });
    match sign {
        Sign::Plus => per_pair.fold(f64::NEG_INFINITY, f64::max),
        Sign::Minus => per_pair.fold(f64::INFINITY, f64::min),
    }
}

/// Discrete extremal operator of `u` on time slice `k` at spatial node `flat`.
pub fn discrete_pucci(
    u: &GridFunction,
    k: usize,
    flat: usize,
    ell: EllipticityInterval,
    sign: Sign,
    stencil: &DirectionStencil,
) -> Result<f64> {
    let space = u.space();
    if stencil.dim != space.dim() {
        return Err(Error::InvalidParameter(
            "stencil dimension does not match the grid".into(),
        ));
    }
    if !space.is_interior(flat, stencil.reach()) {
        let idx = space.unflat(flat);
        return Err(Error::StencilOutOfBounds(idx[..space.dim()].to_vec()));
    }
    Ok(discrete_pucci_slice(
        space,
        u.slice(k),
        flat,
        ell,
        sign,
        stencil,
    ))
}
