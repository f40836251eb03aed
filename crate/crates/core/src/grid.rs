//! Uniform space-time grids, grid functions and node-counting measures.
//!
//! Spatial nodes sit at `origin + i * h` along every axis. Time slices sit at
//! `t_start + dt_0 + ... + dt_{k-1}`. A node on slice `k > 0` carries the time
//! weight `dt_{k-1}` (the step that produced it); slice 0 carries `dt_0`.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const COORD_TOL: f64 = 1e-9;

/// Spatial part of a grid: `dim` axes with a common step `h`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpatialGrid {
    dim: usize,
    origin: Vec<f64>,
    h: f64,
    shape: Vec<usize>,
}

impl SpatialGrid {
    /// Builds the grid covering `[origin, origin + extent]` per axis.
    /// `extent / h` must be an integer on every axis.
    pub fn new(origin: &[f64], extent: &[f64], h: f64) -> Result<Self> {
        let dim = origin.len();
        if !(1..=2).contains(&dim) || extent.len() != dim {
            return Err(Error::InvalidGrid(format!(
                "dimension must be 1 or 2 (origin {}, extent {})",
                origin.len(),
                extent.len()
            )));
        }
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::InvalidGrid(format!("h must be positive, got {h}")));
        }
        let mut shape = Vec::with_capacity(dim);
        for (&o, &e) in origin.iter().zip(extent) {
            if !o.is_finite() || !(e > 0.0 && e.is_finite()) {
                return Err(Error::InvalidGrid(format!(
                    "bad axis origin {o} extent {e}"
                )));
            }
            let cells = e / h;
            let rounded = cells.round();
            if (cells - rounded).abs() > 1e-9 * cells.max(1.0) {
                return Err(Error::InvalidGrid(format!(
                    "extent {e} is not a multiple of h = {h}"
                )));
            }
            let n = rounded as usize + 1;
            if n < 3 {
                return Err(Error::InvalidGrid(format!(
                    "need at least 3 nodes per axis, got {n}"
                )));
            }
            shape.push(n);
        }
        Ok(Self {
            dim,
            origin: origin.to_vec(),
            h,
            shape,
        })
    }

    /// Symmetric box `[-half_width, half_width]^dim` with `nodes` nodes per axis.
    pub fn centered(dim: usize, half_width: f64, nodes: usize) -> Result<Self> {
        if nodes < 3 {
            return Err(Error::InvalidGrid(format!(
                "need at least 3 nodes, got {nodes}"
            )));
        }
        let h = 2.0 * half_width / (nodes - 1) as f64;
        Self::new(&vec![-half_width; dim], &vec![2.0 * half_width; dim], h)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn origin(&self) -> &[f64] {
        &self.origin
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn extent(&self) -> Vec<f64> {
        self.shape
            .iter()
            .map(|&n| (n - 1) as f64 * self.h)
            .collect()
    }

    /// Number of spatial nodes.
    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Volume of one spatial cell, `h^dim`.
    pub fn cell_volume(&self) -> f64 {
        self.h.powi(self.dim as i32)
    }

    #[inline]
    pub fn flat(&self, idx: &[usize]) -> usize {
        match self.dim {
            1 => idx[0],
            _ => idx[0] + self.shape[0] * idx[1],
        }
    }

    #[inline]
    pub fn unflat(&self, flat: usize) -> [usize; 2] {
        match self.dim {
            1 => [flat, 0],
            _ => [flat % self.shape[0], flat / self.shape[0]],
        }
    }

    /// Coordinate of `idx` along `axis`.
    #[inline]
    pub fn coord(&self, axis: usize, idx: usize) -> f64 {
        self.origin[axis] + idx as f64 * self.h
    }

    /// Coordinates of the node with flat index `flat`.
    pub fn point(&self, flat: usize) -> Vec<f64> {
        let idx = self.unflat(flat);
        (0..self.dim).map(|a| self.coord(a, idx[a])).collect()
    }

    /// Squared distance from node `flat` to `p`.
    #[inline]
    pub fn dist2(&self, flat: usize, p: &[f64]) -> f64 {
        let idx = self.unflat(flat);
        (0..self.dim)
            .map(|a| {
                let d = self.coord(a, idx[a]) - p[a];
                d * d
            })
            .sum()
    }

    /// Whether every axis index of `flat` is at least `reach` away from the edge.
    pub fn is_interior(&self, flat: usize, reach: usize) -> bool {
        let idx = self.unflat(flat);
        (0..self.dim).all(|a| idx[a] >= reach && idx[a] + reach < self.shape[a])
    }

    /// Flat index of the node at `p`, if `p` is a node up to rounding.
    pub fn locate(&self, p: &[f64]) -> Option<usize> {
        if p.len() != self.dim {
            return None;
        }
        let mut idx = [0usize; 2];
        for a in 0..self.dim {
            let s = (p[a] - self.origin[a]) / self.h;
            let r = s.round();
            if (s - r).abs() > COORD_TOL * s.abs().max(1.0)
                || r < 0.0
                || r as usize >= self.shape[a]
            {
                return None;
            }
            idx[a] = r as usize;
        }
        Some(self.flat(&idx[..self.dim]))
    }

    /// Flat indices of nodes in the closed ball `|x - center| <= radius`.
    pub fn nodes_in_ball(&self, center: &[f64], radius: f64) -> Vec<usize> {
        let r2 = radius * radius * (1.0 + 1e-12) + 1e-15;
        (0..self.len())
            .filter(|&f| self.dist2(f, center) <= r2)
            .collect()
    }

    /// Flat indices of nodes in the half-open cube `[c - l/2, c + l/2)^dim`.
    /// Cubes of one dyadic generation then partition the nodes exactly.
    pub fn nodes_in_cube(&self, cube: &Cube) -> Vec<usize> {
        let half = cube.side / 2.0;
        let tol = COORD_TOL * self.h;
        (0..self.len())
            .filter(|&f| {
                let idx = self.unflat(f);
                (0..self.dim).all(|a| {
                    let x = self.coord(a, idx[a]);
                    x >= cube.center[a] - half - tol && x < cube.center[a] + half - tol
                })
            })
            .collect()
    }

    /// Same nodes on a grid scaled by `1/r` about the coordinate origin.
    fn scaled(&self, r: f64) -> Self {
        Self {
            dim: self.dim,
            origin: self.origin.iter().map(|o| o / r).collect(),
            h: self.h / r,
            shape: self.shape.clone(),
        }
    }
}

/// A spatial grid together with an ordered list of time steps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpaceTimeGrid {
    space: SpatialGrid,
    t_start: f64,
    dt_list: Vec<f64>,
    #[serde(skip)]
    times: Vec<f64>,
}

impl SpaceTimeGrid {
    pub fn new(space: SpatialGrid, t_start: f64, dt_list: Vec<f64>) -> Result<Self> {
        if dt_list.is_empty() {
            return Err(Error::InvalidGrid("need at least one time step".into()));
        }
        if !t_start.is_finite() {
            return Err(Error::InvalidGrid("t_start must be finite".into()));
        }
        if let Some(dt) = dt_list.iter().find(|dt| !(**dt > 0.0 && dt.is_finite())) {
            return Err(Error::InvalidGrid(format!(
                "time steps must be positive, got {dt}"
            )));
        }
        let mut times = Vec::with_capacity(dt_list.len() + 1);
        let mut t = t_start;
        times.push(t);
        for dt in &dt_list {
            t += dt;
            times.push(t);
        }
        Ok(Self {
            space,
            t_start,
            dt_list,
            times,
        })
    }

    /// `steps` equal steps from `t_start` to `t_end`.
    pub fn uniform(space: SpatialGrid, t_start: f64, t_end: f64, steps: usize) -> Result<Self> {
        if !(t_end > t_start) || steps == 0 {
            return Err(Error::InvalidGrid(format!(
                "need t_start < t_end and steps > 0 (got {t_start}, {t_end}, {steps})"
            )));
        }
        let dt = (t_end - t_start) / steps as f64;
        Self::new(space, t_start, vec![dt; steps])
    }

    pub fn space(&self) -> &SpatialGrid {
        &self.space
    }

    pub fn dim(&self) -> usize {
        self.space.dim
    }

    pub fn h(&self) -> f64 {
        self.space.h
    }

    pub fn t_start(&self) -> f64 {
        self.t_start
    }

    pub fn t_end(&self) -> f64 {
        *self.times.last().expect("at least two slices")
    }

    pub fn dt_list(&self) -> &[f64] {
        &self.dt_list
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn n_times(&self) -> usize {
        self.times.len()
    }

    /// Weight of slice `k` in time integrals.
    #[inline]
    pub fn time_weight(&self, k: usize) -> f64 {
        if k == 0 {
            self.dt_list[0]
        } else {
            self.dt_list[k - 1]
        }
    }

    /// Slice indices with `t_low < t_k <= t_high` (up to rounding).
    pub fn slices_in(&self, t_low: f64, t_high: f64) -> std::ops::Range<usize> {
        let tol = |t: f64| COORD_TOL * t.abs().max(1.0);
        let lo = self.times.partition_point(|&t| t <= t_low + tol(t_low));
        let hi = self.times.partition_point(|&t| t <= t_high + tol(t_high));
        lo..hi.max(lo)
    }

    /// Index of the slice closest to `t`.
    pub fn nearest_slice(&self, t: f64) -> usize {
        let mut best = 0;
        for (k, &tk) in self.times.iter().enumerate() {
            if (tk - t).abs() < (self.times[best] - t).abs() {
                best = k;
            }
        }
        best
    }

    fn check_same(&self, other: &SpaceTimeGrid) -> Result<()> {
        if self.space != other.space {
            return Err(Error::GridMismatch("spatial grids differ".into()));
        }
        if self.times.len() != other.times.len()
            || self
                .times
                .iter()
                .zip(&other.times)
                .any(|(a, b)| (a - b).abs() > 1e-12 * a.abs().max(1.0))
        {
            return Err(Error::GridMismatch("time lattices differ".into()));
        }
        Ok(())
    }
}

/// Values of a function on every node of a [`SpaceTimeGrid`], slice-major.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    grid: SpaceTimeGrid,
    values: Vec<f64>,
}

impl GridFunction {
    pub fn from_values(grid: SpaceTimeGrid, values: Vec<f64>) -> Result<Self> {
        let n = grid.space.len() * grid.n_times();
        if values.len() != n {
            return Err(Error::GridMismatch(format!(
                "expected {n} values, got {}",
                values.len()
            )));
        }
        let u = Self { grid, values };
        u.check_finite()?;
        Ok(u)
    }

    /// Stacks spatial slices, one per grid time.
    pub fn from_slices(grid: SpaceTimeGrid, slices: &[Vec<f64>]) -> Result<Self> {
        let values: Vec<f64> = slices.iter().flat_map(|s| s.iter().copied()).collect();
        Self::from_values(grid, values)
    }

    pub fn grid(&self) -> &SpaceTimeGrid {
        &self.grid
    }

    pub fn space(&self) -> &SpatialGrid {
        &self.grid.space
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn slice(&self, k: usize) -> &[f64] {
        let n = self.grid.space.len();
        &self.values[k * n..(k + 1) * n]
    }

    #[inline]
    pub fn at(&self, k: usize, flat: usize) -> f64 {
        self.values[k * self.grid.space.len() + flat]
    }

    pub fn is_nonnegative(&self) -> bool {
        self.values.iter().all(|&v| v >= 0.0)
    }

    pub fn max(&self) -> f64 {
        self.values
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::from_values(
            self.grid.clone(),
            self.values.iter().map(|&v| f(v)).collect(),
        )
    }

    fn check_finite(&self) -> Result<()> {
        let n = self.grid.space.len();
        match self.values.iter().position(|v| !v.is_finite()) {
            None => Ok(()),
            Some(i) => Err(Error::NonFinite {
                x: self.grid.space.point(i % n),
                t: self.grid.times[i / n],
                value: self.values[i],
            }),
        }
    }

    /// Calls `f(k, flat, value, time_weight)` for every node of `c`.
    fn for_each_in(&self, c: &Cylinder, mut f: impl FnMut(usize, usize, f64, f64)) -> usize {
        let space = &self.grid.space;
        let nodes = space.nodes_in_ball(&c.center, c.radius);
        let mut count = 0;
        for k in self.grid.slices_in(c.top - c.depth, c.top) {
            let w = self.grid.time_weight(k);
            for &i in &nodes {
                f(k, i, self.at(k, i), w);
                count += 1;
            }
        }
        count
    }

    /// Writes `t,x1[,x2],u` rows for every node, 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let space = &self.grid.space;
        match space.dim {
            1 => writeln!(out, "t,x1,u")?,
            _ => writeln!(out, "t,x1,x2,u")?,
        }
        for (k, &t) in self.grid.times.iter().enumerate() {
            for i in 0..space.len() {
                write!(out, "{t:.16e}")?;
                for x in space.point(i) {
                    write!(out, ",{x:.16e}")?;
                }
                writeln!(out, ",{:.16e}", self.at(k, i))?;
            }
        }
        Ok(())
    }
}

/// `B_radius(center) x (top - depth, top]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cylinder {
    pub center: Vec<f64>,
    pub top: f64,
    pub radius: f64,
    pub depth: f64,
}

impl Cylinder {
    pub fn new(center: Vec<f64>, top: f64, radius: f64, depth: f64) -> Result<Self> {
        if !(radius > 0.0) || !(depth > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "cylinder needs positive radius and depth, got {radius}, {depth}"
            )));
        }
        Ok(Self {
            center,
            top,
            radius,
            depth,
        })
    }

    /// `B_1(0) x (-1, 0]` in dimension `dim`.
    pub fn unit(dim: usize) -> Self {
        Self {
            center: vec![0.0; dim],
            top: 0.0,
            radius: 1.0,
            depth: 1.0,
        }
    }
}

/// Open cube `Q_side(center)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cube {
    pub center: Vec<f64>,
    pub side: f64,
}

impl Cube {
    pub fn new(center: Vec<f64>, side: f64) -> Result<Self> {
        if !(side > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "cube side must be positive, got {side}"
            )));
        }
        Ok(Self { center, side })
    }

    pub fn volume(&self) -> f64 {
        self.side.powi(self.center.len() as i32)
    }
}

/// Evaluates `f(x, t)` on every node.
pub fn sample(f: impl Fn(&[f64], f64) -> f64, grid: &SpaceTimeGrid) -> Result<GridFunction> {
    let space = &grid.space;
    let points: Vec<Vec<f64>> = (0..space.len()).map(|i| space.point(i)).collect();
    let mut values = Vec::with_capacity(points.len() * grid.n_times());
    for &t in &grid.times {
        for p in &points {
            let v = f(p, t);
            if !v.is_finite() {
                return Err(Error::NonFinite {
                    x: p.clone(),
                    t,
                    value: v,
                });
            }
            values.push(v);
        }
    }
    Ok(GridFunction {
        grid: grid.clone(),
        values,
    })
}

/// `max - min` of `u` over the nodes of `c`.
pub fn oscillation(u: &GridFunction, c: &Cylinder) -> Result<f64> {
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    let n = u.for_each_in(c, |_, _, v, _| {
        lo = lo.min(v);
        hi = hi.max(v);
    });
    if n == 0 {
        return Err(Error::EmptyRegion);
    }
    Ok(hi - lo)
}

/// Node-counting measure of `{u <= level}` inside `region`.
pub fn sublevel_measure(u: &GridFunction, level: f64, region: &Cylinder) -> Result<f64> {
    let cell = u.space().cell_volume();
    let mut m = 0.0;
    let n = u.for_each_in(region, |_, _, v, w| {
        if v <= level {
            m += cell * w;
        }
    });
    if n == 0 {
        return Err(Error::EmptyRegion);
    }
    Ok(m)
}

/// Node-counting measure of `{u > level}` inside `region`.
pub fn superlevel_measure(u: &GridFunction, level: f64, region: &Cylinder) -> Result<f64> {
    let cell = u.space().cell_volume();
    let mut m = 0.0;
    let n = u.for_each_in(region, |_, _, v, w| {
        if v > level {
            m += cell * w;
        }
    });
    if n == 0 {
        return Err(Error::EmptyRegion);
    }
    Ok(m)
}

/// Node-counting measure of `region` itself.
pub fn region_measure(u: &GridFunction, region: &Cylinder) -> Result<f64> {
    let cell = u.space().cell_volume();
    let mut m = 0.0;
    let n = u.for_each_in(region, |_, _, _, w| m += cell * w);
    if n == 0 {
        return Err(Error::EmptyRegion);
    }
    Ok(m)
}

/// `sup` and `inf` of `u` over `region`.
pub fn extrema(u: &GridFunction, region: &Cylinder) -> Result<(f64, f64)> {
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    let n = u.for_each_in(region, |_, _, v, _| {
        lo = lo.min(v);
        hi = hi.max(v);
    });
    if n == 0 {
        return Err(Error::EmptyRegion);
    }
    Ok((lo, hi))
}

/// `v(x, t) = r^(-alpha) u(r x, r^(2 - alpha) t)` on the grid obtained by
/// mapping every node `(x, t)` to `(x / r, t / r^(2 - alpha))`.
///
/// The factor `r` must be an integer power of two so the mapped node
/// coordinates are exact.
pub fn scaling_transform(u: &GridFunction, r: f64, alpha: f64) -> Result<GridFunction> {
    if !(r > 0.0 && r.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "scaling factor must be positive, got {r}"
        )));
    }
    if !alpha.is_finite() {
        return Err(Error::InvalidParameter("alpha must be finite".into()));
    }
    let log = r.log2();
    if (log - log.round()).abs() > 1e-12 {
        return Err(Error::InvalidGrid(format!(
            "nodes do not map onto a grid: r = {r} is not a power of two"
        )));
    }
    let beta = 2.0 - alpha;
    let time_factor = r.powf(beta);
    let amp = r.powf(-alpha);
    let grid = SpaceTimeGrid::new(
        u.grid.space.scaled(r),
        u.grid.t_start / time_factor,
        u.grid.dt_list.iter().map(|dt| dt / time_factor).collect(),
    )?;
    GridFunction::from_values(grid, u.values.iter().map(|v| amp * v).collect())
}

/// Checks that `a` and `b` live on the same grid.
pub fn same_grid(a: &GridFunction, b: &GridFunction) -> Result<()> {
    a.grid.check_same(&b.grid)
}
