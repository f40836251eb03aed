//! Concave paraboloids, first-crossing contact sets and the vertex map.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Cylinder, GridFunction, SpatialGrid};

/// `P(x, t) = -(a/2)|x - y|^2 + b (t - s)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Paraboloid {
    pub vertex_y: Vec<f64>,
    pub vertex_s: f64,
    pub opening_a: f64,
    pub opening_b: f64,
}

impl Paraboloid {
    pub fn new(vertex_y: Vec<f64>, vertex_s: f64, opening_a: f64, opening_b: f64) -> Result<Self> {
        if !(opening_a > 0.0 && opening_b > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "paraboloid openings must be positive, got {opening_a}, {opening_b}"
            )));
        }
        Ok(Self {
            vertex_y,
            vertex_s,
            opening_a,
            opening_b,
        })
    }

    pub fn evaluate(&self, x: &[f64], t: f64) -> f64 {
        let d2: f64 = x
            .iter()
            .zip(&self.vertex_y)
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        -0.5 * self.opening_a * d2 + self.opening_b * (t - self.vertex_s)
    }

    /// The paraboloid `Q` with `Q(x, t) = P(r x, r t) / r`: space opening
    /// multiplied by `r`, vertex divided by `r`, time opening unchanged.
    pub fn lipschitz_rescale(&self, r: f64) -> Result<Self> {
        if !(r > 0.0 && r.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "rescale factor must be positive, got {r}"
            )));
        }
        Ok(Self {
            vertex_y: self.vertex_y.iter().map(|y| y / r).collect(),
            vertex_s: self.vertex_s / r,
            opening_a: self.opening_a * r,
            opening_b: self.opening_b,
        })
    }
}

/// Tolerance for discrete touching on a grid of step `h`.
pub fn contact_tolerance(h: f64) -> f64 {
    10.0 * h * h + 1e-12
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContactEntry {
    pub vertex_index: usize,
    pub vertex_y: Vec<f64>,
    pub vertex_s: f64,
    pub slice: usize,
    pub node: usize,
    pub x: Vec<f64>,
    pub t: f64,
    pub u: f64,
    /// `u - P` at the contact node.
    pub gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContactSet {
    pub entries: Vec<ContactEntry>,
    pub opening_a: f64,
    pub opening_b: f64,
    pub tolerance: f64,
    /// For each vertex, the crossing slice (if any).
    pub crossing_slice: Vec<Option<usize>>,
}

impl ContactSet {
    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn max_u(&self) -> Option<&ContactEntry> {
        self.entries.iter().max_by(|a, b| a.u.total_cmp(&b.u))
    }

    /// Distinct `(slice, node)` pairs, sorted.
    pub fn nodes(&self) -> Vec<(usize, usize)> {
        let mut v: Vec<_> = self.entries.iter().map(|e| (e.slice, e.node)).collect();
        v.sort_unstable();
        v.dedup();
        v
    }

    /// Largest amount by which `u - P` drops below `-tolerance` at the
    /// crossing slice. Zero when the time lattice resolves the crossing.
    pub fn overshoot(&self) -> f64 {
        self.entries
            .iter()
            .map(|e| (-self.tolerance - e.gap).max(0.0))
            .fold(0.0, f64::max)
    }

    /// `yx1[,yx2],ys,cx1[,cx2],ct,u_at_contact`.
    pub fn write_csv<W: Write>(&self, mut out: W, dim: usize) -> Result<()> {
        let mut header: Vec<String> = (1..=dim).map(|i| format!("yx{i}")).collect();
        header.push("ys".into());
        header.extend((1..=dim).map(|i| format!("cx{i}")));
        header.extend(["ct".into(), "u_at_contact".into()]);
        writeln!(out, "{}", header.join(","))?;
        for e in &self.entries {
            let mut row: Vec<String> = e.vertex_y.iter().map(|v| format!("{v:.16e}")).collect();
            row.push(format!("{:.16e}", e.vertex_s));
            row.extend(e.x.iter().map(|v| format!("{v:.16e}")));
            row.push(format!("{:.16e}", e.t));
            row.push(format!("{:.16e}", e.u));
            writeln!(out, "{}", row.join(","))?;
        }
        Ok(())
    }
}

/// Spatial nodes and time slices a contact search runs over.
fn region_nodes(
    u: &GridFunction,
    region: Option<&Cylinder>,
) -> (Vec<usize>, std::ops::Range<usize>) {
    match region {
        None => ((0..u.space().len()).collect(), 0..u.grid().n_times()),
        Some(c) => (
            u.space().nodes_in_ball(&c.center, c.radius),
            u.grid().slices_in(c.top - c.depth, c.top),
        ),
    }
}

/// First-crossing contact sets of `P^{a,b}_{y,s}` for each vertex.
///
/// For each vertex the grid times `t >= s` of the region are scanned upward;
/// at the first time where `min_x (u - P) <= eps` every node within `eps` of
/// that minimum, and itself within `eps` of `P`, is a contact point.
pub fn contact_set(
    u: &GridFunction,
    vertices: &[(Vec<f64>, f64)],
    opening_a: f64,
    opening_b: f64,
    region: Option<&Cylinder>,
) -> Result<ContactSet> {
    if !(opening_a > 0.0 && opening_b > 0.0) {
        return Err(Error::InvalidParameter(
            "paraboloid openings must be positive".into(),
        ));
    }
    let (nodes, slices) = region_nodes(u, region);
    if nodes.is_empty() || slices.is_empty() {
        return Err(Error::EmptyRegion);
    }
    let space = u.space();
    let times = u.grid().times();
    let eps = contact_tolerance(space.h());
    let mut entries = Vec::new();
    let mut crossing = Vec::with_capacity(vertices.len());
    let mut gaps = vec![0.0; nodes.len()];
    for (vi, (y, s)) in vertices.iter().enumerate() {
        if y.len() != space.dim() {
            return Err(Error::InvalidParameter(
                "vertex dimension does not match the grid".into(),
            ));
        }
        let d2: Vec<f64> = nodes.iter().map(|&f| space.dist2(f, y)).collect();
        let t_tol = 1e-9 * s.abs().max(1.0);
        let mut found = None;
        for k in slices.clone().filter(|&k| times[k] >= s - t_tol) {
            let lift = opening_b * (times[k] - s);
            let mut min = f64::INFINITY;
            for (g, (&f, &r2)) in gaps.iter_mut().zip(nodes.iter().zip(&d2)) {
                *g = u.at(k, f) + 0.5 * opening_a * r2 - lift;
                min = min.min(*g);
            }
            if min <= eps {
                for (i, &f) in nodes.iter().enumerate() {
                    if gaps[i] <= min + eps && gaps[i] <= eps {
                        entries.push(ContactEntry {
                            vertex_index: vi,
                            vertex_y: y.clone(),
                            vertex_s: *s,
                            slice: k,
                            node: f,
                            x: space.point(f),
                            t: times[k],
                            u: u.at(k, f),
                            gap: gaps[i],
                        });
                    }
                }
                found = Some(k);
                break;
            }
        }
        crossing.push(found);
    }
    Ok(ContactSet {
        entries,
        opening_a,
        opening_b,
        tolerance: eps,
        crossing_slice: crossing,
    })
}

/// Central-difference gradient of slice `k` at an interior node.
pub fn central_gradient(space: &SpatialGrid, slice: &[f64], flat: usize) -> Vec<f64> {
    let h = space.h();
    let mut stride = 1;
    let mut g = Vec::with_capacity(space.dim());
    for a in 0..space.dim() {
        g.push((slice[flat + stride] - slice[flat - stride]) / (2.0 * h));
        stride *= space.shape()[a];
    }
    g
}

/// Centered Hessian (row-major `dim x dim`) at an interior node.
pub fn central_hessian(space: &SpatialGrid, slice: &[f64], flat: usize) -> Vec<f64> {
    let h2 = space.h() * space.h();
    let c = slice[flat];
    if space.dim() == 1 {
        return vec![(slice[flat + 1] - 2.0 * c + slice[flat - 1]) / h2];
    }
    let s = space.shape()[0];
    let dxx = (slice[flat + 1] - 2.0 * c + slice[flat - 1]) / h2;
    let dyy = (slice[flat + s] - 2.0 * c + slice[flat - s]) / h2;
    let dxy = (slice[flat + s + 1] - slice[flat + s - 1] - slice[flat - s + 1]
        + slice[flat - s - 1])
        / (4.0 * h2);
    vec![dxx, dxy, dxy, dyy]
}

/// Vertex of the paraboloid `P^{o,o}` touching a function with value `u`
/// and gradient `du` at `(x, t)`:
/// `y = x + du/o`, `s = t - u/o - |du|^2/(2 o^2)`.
pub fn vertex_from_derivatives(
    x: &[f64],
    t: f64,
    u: f64,
    du: &[f64],
    opening: f64,
) -> (Vec<f64>, f64) {
    let y = x.iter().zip(du).map(|(xi, gi)| xi + gi / opening).collect();
    let g2: f64 = du.iter().map(|g| g * g).sum();
    (y, t - u / opening - g2 / (2.0 * opening * opening))
}

/// Vertex map at the grid node `(slice, flat)` for opening `o` (= 2 alpha).
pub fn vertex_map(
    u: &GridFunction,
    slice: usize,
    flat: usize,
    opening: f64,
) -> Result<(Vec<f64>, f64)> {
    if !(opening > 0.0) {
        return Err(Error::InvalidParameter("opening must be positive".into()));
    }
    let space = u.space();
    if !space.is_interior(flat, 1) {
        let idx = space.unflat(flat);
        return Err(Error::StencilOutOfBounds(idx[..space.dim()].to_vec()));
    }
    let s = u.slice(slice);
    let du = central_gradient(space, s, flat);
    Ok(vertex_from_derivatives(
        &space.point(flat),
        u.grid().times()[slice],
        s[flat],
        &du,
        opening,
    ))
}

/// Lattice of vertices `y_min + i h` (grid step) by `s_min + j ds`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VertexBox {
    pub y_min: Vec<f64>,
    pub y_max: Vec<f64>,
    pub s_min: f64,
    pub s_max: f64,
    pub ds: f64,
}

impl VertexBox {
    /// The lattice points and the node-counting measure of the box.
    pub fn lattice(&self, h: f64) -> Result<(Vec<(Vec<f64>, f64)>, f64)> {
        if self.y_min.len() != self.y_max.len() || !(self.ds > 0.0) || self.s_max < self.s_min {
            return Err(Error::InvalidParameter("malformed vertex box".into()));
        }
        let count = |lo: f64, hi: f64, step: f64| ((hi - lo) / step + 1e-9).floor() as usize + 1;
        let axes: Vec<Vec<f64>> = self
            .y_min
            .iter()
            .zip(&self.y_max)
            .map(|(&lo, &hi)| (0..count(lo, hi, h)).map(|i| lo + i as f64 * h).collect())
            .collect();
        let times: Vec<f64> = (0..count(self.s_min, self.s_max, self.ds))
            .map(|j| self.s_min + j as f64 * self.ds)
            .collect();
        let mut pts = Vec::new();
        for &s in &times {
            match axes.len() {
                1 => pts.extend(axes[0].iter().map(|&x| (vec![x], s))),
                _ => {
                    for &y2 in &axes[1] {
                        pts.extend(axes[0].iter().map(|&x| (vec![x, y2], s)));
                    }
                }
            }
        }
        let measure = pts.len() as f64 * h.powi(axes.len() as i32) * self.ds;
        Ok((pts, measure))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AreaReport {
    pub measure_b: f64,
    pub integral: f64,
    pub ratio: f64,
    pub contact_nodes: usize,
    /// Contact nodes on the grid edge, left out of the integral.
    pub skipped: usize,
}

/// Integrates `(1 - u_t/o) det(I + D^2u/o)` over the contact set of the
/// vertex box and compares with the box measure.
pub fn area_formula_check(
    u: &GridFunction,
    vertices: &VertexBox,
    opening: f64,
) -> Result<AreaReport> {
    let space = u.space();
    let (pts, measure_b) = vertices.lattice(space.h())?;
    let contacts = contact_set(u, &pts, opening, opening, None)?;
    if contacts.is_empty() {
        return Err(Error::EmptyContactSet(
            "no vertex of the box touches u".into(),
        ));
    }
    let nodes = contacts.nodes();
    let cell = space.cell_volume();
    let mut integral = 0.0;
    let mut skipped = 0;
    for &(k, f) in &nodes {
        if !space.is_interior(f, 1) || u.grid().n_times() < 2 {
            skipped += 1;
            continue;
        }
        let ut = if k == 0 {
            (u.at(1, f) - u.at(0, f)) / u.grid().dt_list()[0]
        } else {
            (u.at(k, f) - u.at(k - 1, f)) / u.grid().dt_list()[k - 1]
        };
        let hess = central_hessian(space, u.slice(k), f);
        let det = match space.dim() {
            1 => 1.0 + hess[0] / opening,
            _ => {
                let (a, b, d) = (
                    1.0 + hess[0] / opening,
                    hess[1] / opening,
                    1.0 + hess[3] / opening,
                );
                a * d - b * b
            }
        };
        integral += (1.0 - ut / opening) * det * cell * u.grid().time_weight(k);
    }
    Ok(AreaReport {
        measure_b,
        integral,
        ratio: integral / measure_b,
        contact_nodes: nodes.len(),
        skipped,
    })
}
