//! Independent oracles shared by the integration suites.

#![allow(dead_code)]

use std::collections::BTreeSet;
use std::io::Write;

use pmelab::grid::{sample, Cylinder, GridFunction, SpaceTimeGrid, SpatialGrid};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Writes straight to stderr so the line survives test output capture.
pub fn report_line(criterion: u32, pass: bool, detail: &str) {
    let verdict = if pass { "PASS" } else { "FAIL" };
    let mut err = std::io::stderr().lock();
    let _ = writeln!(err, "[criterion {criterion:>2}] {verdict} {detail}");
}

/// `sup trace(A M)` over `samples` random `A = Q^T diag(a1, a2) Q` with
/// `a_i` in `{lambda, Lambda}` and `Q` a random rotation.
pub fn sampled_pucci_sup(
    m: [[f64; 2]; 2],
    lambda: f64,
    big_lambda: f64,
    samples: usize,
    rng: &mut ChaCha8Rng,
) -> f64 {
    let mut best = f64::NEG_INFINITY;
    for _ in 0..samples {
        let th: f64 = rng.gen_range(0.0..std::f64::consts::PI);
        let (c, s) = (th.cos(), th.sin());
        let a1 = if rng.gen_bool(0.5) {
            lambda
        } else {
            big_lambda
        };
        let a2 = if rng.gen_bool(0.5) {
            lambda
        } else {
            big_lambda
        };
        // A = a1 q1 q1^T + a2 q2 q2^T with q1 = (c, s), q2 = (-s, c).
        let a = [
            [a1 * c * c + a2 * s * s, (a1 - a2) * c * s],
            [(a1 - a2) * c * s, a1 * s * s + a2 * c * c],
        ];
        let tr = a[0][0] * m[0][0] + a[0][1] * m[1][0] + a[1][0] * m[0][1] + a[1][1] * m[1][1];
        best = best.max(tr);
    }
    best
}

/// A random symmetric 2x2 matrix with entries in `[-5, 5]`.
pub fn random_symmetric(rng: &mut ChaCha8Rng) -> [[f64; 2]; 2] {
    let a = rng.gen_range(-5.0..5.0);
    let b = rng.gen_range(-5.0..5.0);
    let d = rng.gen_range(-5.0..5.0);
    [[a, b], [b, d]]
}

fn in_region(x: &[f64], t: f64, c: &Cylinder) -> bool {
    let r2: f64 = x
        .iter()
        .zip(&c.center)
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    r2 <= c.radius * c.radius * (1.0 + 1e-12) && t > c.top - c.depth && t <= c.top
}

/// Every `(vertex, slice, node)` satisfying the touching definition, by an
/// exhaustive pairwise scan: the gap `u - P` is within `eps` at the pair, no
/// earlier admissible pair has gap within `eps`, and no pair of the same
/// slice has a gap smaller by more than `eps`.
pub fn brute_force_contacts(
    u: &GridFunction,
    vertices: &[(Vec<f64>, f64)],
    a: f64,
    b: f64,
    region: Option<&Cylinder>,
) -> BTreeSet<(usize, usize, usize)> {
    let space = u.space();
    let times = u.grid().times();
    let eps = 10.0 * space.h() * space.h() + 1e-12;
    let mut out = BTreeSet::new();
    for (vi, (y, s)) in vertices.iter().enumerate() {
        let mut pairs = Vec::new();
        for (k, &t) in times.iter().enumerate() {
            if t < s - 1e-9 * s.abs().max(1.0) {
                continue;
            }
            for f in 0..space.len() {
                let x = space.point(f);
                if region.is_some_and(|c| !in_region(&x, t, c)) {
                    continue;
                }
                let d2: f64 = x.iter().zip(y).map(|(p, q)| (p - q) * (p - q)).sum();
                let p = -0.5 * a * d2 + b * (t - s);
                pairs.push((k, f, u.at(k, f) - p));
            }
        }
        for &(k, f, g) in &pairs {
            let touches = g <= eps
                && pairs.iter().all(|&(k2, _, g2)| k2 >= k || g2 > eps)
                && pairs.iter().all(|&(k2, _, g2)| k2 != k || g <= g2 + eps);
            if touches {
                out.insert((vi, k, f));
            }
        }
    }
    out
}

/// A seeded contact problem on a grid of at most 33 nodes per axis and 65
/// slices: rough nonnegative data, a few vertices, random openings and
/// sometimes a region.
pub struct ContactCase {
    pub u: GridFunction,
    pub vertices: Vec<(Vec<f64>, f64)>,
    pub a: f64,
    pub b: f64,
    pub region: Option<Cylinder>,
}

pub fn contact_case(seed: u64) -> ContactCase {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dim = if seed % 3 == 2 { 2 } else { 1 };
    let nx = if dim == 1 {
        [9, 17, 33][rng.gen_range(0..3)]
    } else {
        [5, 9][rng.gen_range(0..2)]
    };
    let steps = if dim == 1 {
        [16, 32, 64][rng.gen_range(0..3)]
    } else {
        [8, 16][rng.gen_range(0..2)]
    };
    let space = SpatialGrid::centered(dim, 1.0, nx).unwrap();
    let grid = SpaceTimeGrid::uniform(space, 0.0, 1.0, steps).unwrap();
    let bumps: Vec<(Vec<f64>, f64, f64)> = (0..3)
        .map(|_| {
            let c = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
            (c, rng.gen_range(0.0..1.5), rng.gen_range(-1.0..1.0))
        })
        .collect();
    let base = sample(
        |x, t| {
            bumps
                .iter()
                .map(|(c, amp, speed)| {
                    let d2: f64 = x.iter().zip(c).map(|(p, q)| (p - q) * (p - q)).sum();
                    amp * (1.0 - d2).max(0.0) * (1.0 + speed * t).max(0.0)
                })
                .sum::<f64>()
        },
        &grid,
    )
    .unwrap();
    // Rough data exercises ties and near-ties of the gap.
    let noisy: Vec<f64> = base
        .values()
        .iter()
        .map(|v| (v + rng.gen_range(0.0..0.05)).max(0.0))
        .collect();
    let u = GridFunction::from_values(grid, noisy).unwrap();
    let vertices = (0..rng.gen_range(1..4))
        .map(|_| {
            (
                (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect(),
                rng.gen_range(-0.5..0.9),
            )
        })
        .collect();
    let region = rng.gen_bool(0.5).then(|| {
        Cylinder::new(
            (0..dim).map(|_| rng.gen_range(-0.5..0.5)).collect(),
            rng.gen_range(0.5..1.0),
            rng.gen_range(0.3..1.2),
            rng.gen_range(0.2..0.9),
        )
        .unwrap()
    });
    ContactCase {
        u,
        vertices,
        a: rng.gen_range(0.5..20.0),
        b: rng.gen_range(0.5..20.0),
        region,
    }
}
