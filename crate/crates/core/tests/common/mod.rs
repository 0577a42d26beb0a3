//! Oracles shared by the integration tests and the acceptance suite. None of
//! them call into the library's own membership or area code.

#![allow(dead_code)]

use nalgebra::{DMatrix, DVector, Vector3};
use rand::Rng;
use ssaware::zonoset::Zonotope;

pub fn random_zono(rng: &mut impl Rng, n: usize, gens: std::ops::RangeInclusive<usize>) -> Zonotope {
    let e = rng.gen_range(gens);
    let c = DVector::from_fn(n, |_, _| rng.gen_range(-2.0..2.0));
    let g = DMatrix::from_fn(n, e, |_, _| rng.gen_range(-1.0..1.0));
    Zonotope::new(c, g).unwrap()
}

pub fn random_beta(rng: &mut impl Rng, e: usize) -> DVector<f64> {
    DVector::from_fn(e, |_, _| rng.gen_range(-1.0..=1.0))
}

pub fn sample(rng: &mut impl Rng, z: &Zonotope) -> DVector<f64> {
    z.point_at(&random_beta(rng, z.num_generators()))
}

/// A random vertex candidate: every coefficient is ±1.
pub fn sample_corner(rng: &mut impl Rng, z: &Zonotope) -> DVector<f64> {
    let beta = DVector::from_fn(z.num_generators(), |_, _| if rng.gen() { 1.0 } else { -1.0 });
    z.point_at(&beta)
}

/// Facet normals of a full-dimensional zonotope in two or three dimensions:
/// generator normals in the plane, pairwise cross products in space.
fn facet_normals(g: &DMatrix<f64>) -> Vec<DVector<f64>> {
    let cols: Vec<DVector<f64>> = g.column_iter().map(|c| c.into_owned()).collect();
    let mut out = Vec::new();
    match g.nrows() {
        2 => {
            for c in &cols {
                let nv = DVector::from_vec(vec![-c[1], c[0]]);
                let norm = nv.norm();
                if norm > 1e-12 {
                    out.push(nv / norm);
                }
            }
        }
        3 => {
            for i in 0..cols.len() {
                for j in i + 1..cols.len() {
                    let a = Vector3::new(cols[i][0], cols[i][1], cols[i][2]);
                    let b = Vector3::new(cols[j][0], cols[j][1], cols[j][2]);
                    let nv = a.cross(&b);
                    let norm = nv.norm();
                    if norm > 1e-12 * (a.norm() * b.norm()).max(1e-300) {
                        out.push(DVector::from_column_slice((nv / norm).as_slice()));
                    }
                }
            }
        }
        n => panic!("facet oracle supports two or three dimensions, got {n}"),
    }
    out
}

/// Exact half-space membership test for full-dimensional zonotopes.
pub fn facet_contains(z: &Zonotope, x: &DVector<f64>, tol: f64) -> bool {
    let d = x - z.center();
    let scale = 1.0 + x.amax() + z.center().amax();
    facet_normals(z.generators()).iter().all(|nv| {
        let support: f64 = z.generators().column_iter().map(|g| nv.dot(&g).abs()).sum();
        nv.dot(&d).abs() <= support + tol * scale
    })
}

/// Area of the convex hull of all `2^e` sign combinations of a planar
/// zonotope, by monotone chain and the shoelace formula.
pub fn hull_area(z: &Zonotope) -> f64 {
    let g = z.generators();
    let e = g.ncols();
    let mut pts: Vec<(f64, f64)> = (0..(1u32 << e))
        .map(|mask| {
            (0..e).fold((0.0, 0.0), |p, j| {
                let s = if mask & (1 << j) != 0 { 1.0 } else { -1.0 };
                (p.0 + s * g[(0, j)], p.1 + s * g[(1, j)])
            })
        })
        .collect();
    pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    pts.dedup();
    if pts.len() < 3 {
        return 0.0;
    }
    let cross = |o: (f64, f64), a: (f64, f64), b: (f64, f64)| (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0);
    let mut hull: Vec<(f64, f64)> = Vec::new();
    for &p in &pts {
        while hull.len() >= 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
            hull.pop();
        }
        hull.push(p);
    }
    let lower = hull.len() + 1;
    for &p in pts.iter().rev().skip(1) {
        while hull.len() >= lower && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
            hull.pop();
        }
        hull.push(p);
    }
    hull.windows(2)
        .map(|w| w[0].0 * w[1].1 - w[1].0 * w[0].1)
        .sum::<f64>()
        .abs()
        / 2.0
}

pub fn frobenius(z: &Zonotope) -> f64 {
    z.generators().norm()
}

/// Outcome of one sampled oracle campaign.
#[derive(Debug, Default, Clone)]
pub struct Tally {
    pub samples: usize,
    pub failures: usize,
    pub first_failure: Option<String>,
}

impl Tally {
    fn record(&mut self, ok: bool, what: impl FnOnce() -> String) {
        self.samples += 1;
        if !ok {
            self.failures += 1;
            if self.first_failure.is_none() {
                self.first_failure = Some(what());
            }
        }
    }
}

const TOL: f64 = 1e-9;

/// `x` must lie in `z` by both the facet oracle and the library LP.
fn member(z: &Zonotope, x: &DVector<f64>) -> bool {
    facet_contains(z, x, TOL) && z.contains_point(x).unwrap_or(false)
}

pub fn check_minkowski(rng: &mut impl Rng, target: usize) -> Tally {
    let mut t = Tally::default();
    while t.samples < target {
        let a = random_zono(rng, 3, 1..=4);
        let b = random_zono(rng, 3, 1..=4);
        let s = a.minkowski_sum(&b).unwrap();
        for _ in 0..10 {
            let (ba, bb) = (
                random_beta(rng, a.num_generators()),
                random_beta(rng, b.num_generators()),
            );
            let x = a.point_at(&ba) + b.point_at(&bb);
            let joint = DVector::from_iterator(ba.len() + bb.len(), ba.iter().chain(bb.iter()).copied());
            let exact = (s.point_at(&joint) - &x).amax() <= 1e-12 * (1.0 + x.amax());
            t.record(exact && member(&s, &x), || format!("{a} + {b} misses {x:?}"));
        }
    }
    t
}

pub fn check_linear_map(rng: &mut impl Rng, target: usize) -> Tally {
    let mut t = Tally::default();
    while t.samples < target {
        let z = random_zono(rng, 3, 2..=5);
        let l = DMatrix::from_fn(3, 3, |_, _| rng.gen_range(-2.0..2.0));
        let mapped = z.linear_map(&l).unwrap();
        for _ in 0..10 {
            let beta = random_beta(rng, z.num_generators());
            let x = &l * z.point_at(&beta);
            let exact = (mapped.point_at(&beta) - &x).amax() <= 1e-12 * (1.0 + x.amax());
            t.record(exact && member(&mapped, &x), || format!("L{z} misses {x:?}"));
        }
    }
    t
}

pub fn check_intersect_strip(rng: &mut impl Rng, target: usize) -> Tally {
    let mut t = Tally::default();
    while t.samples < target {
        let z = random_zono(rng, 3, 3..=6);
        let h = DVector::from_fn(3, |_, _| rng.gen_range(-1.0..1.0));
        let y = h.dot(&sample(rng, &z)) + rng.gen_range(-0.3..0.3);
        let strip = ssaware::zonoset::Strip::new(h, y, rng.gen_range(0.05..1.0)).unwrap();
        let lambda = if rng.gen() {
            z.optimal_lambda(&strip).unwrap()
        } else {
            DVector::from_fn(3, |_, _| rng.gen_range(-1.0..1.0))
        };
        let cut = z.intersect_strip(&strip, &lambda).unwrap();
        let mut got = 0;
        for _ in 0..200 {
            if got == 10 {
                break;
            }
            let x = sample(rng, &z);
            if strip.contains(&x) {
                got += 1;
                t.record(member(&cut, &x), || format!("{z} ∩ strip misses {x:?}"));
            }
        }
    }
    t
}

pub fn check_fuse(rng: &mut impl Rng, target: usize) -> Tally {
    let mut t = Tally::default();
    while t.samples < target {
        let x0 = DVector::from_fn(3, |_, _| rng.gen_range(-3.0..3.0));
        let k = rng.gen_range(2..=3);
        let zs: Vec<Zonotope> = (0..k)
            .map(|_| {
                let e = rng.gen_range(3..=4);
                let g = DMatrix::from_fn(3, e, |_, _| rng.gen_range(-1.0..1.0));
                let beta = random_beta(rng, g.ncols());
                Zonotope::new(&x0 - &g * beta, g).unwrap()
            })
            .collect();
        let weights = if rng.gen() {
            ssaware::zonoset::optimal_weights(&zs)
        } else {
            (0..k).map(|_| rng.gen_range(0.05..1.0)).collect()
        };
        let fused = ssaware::zonoset::fuse(&zs, &weights).unwrap();
        t.record(member(&fused, &x0), || {
            format!("fused set misses the common point {x0:?}")
        });
        let mut got = 1;
        for _ in 0..400 {
            if got == 10 {
                break;
            }
            let x = sample(rng, &zs[0]);
            if zs[1..].iter().all(|z| facet_contains(z, &x, 0.0)) {
                got += 1;
                t.record(member(&fused, &x), || format!("fused set misses {x:?}"));
            }
        }
    }
    t
}

pub fn check_reduce_order(rng: &mut impl Rng, target: usize) -> Tally {
    let mut t = Tally::default();
    while t.samples < target {
        let z = random_zono(rng, 3, 6..=14);
        let reduced = z.reduce_order(rng.gen_range(3..=6)).unwrap();
        for i in 0..10 {
            let x = if i % 2 == 0 {
                sample(rng, &z)
            } else {
                sample_corner(rng, &z)
            };
            t.record(member(&reduced, &x), || format!("reduced {z} misses {x:?}"));
        }
    }
    t
}

/// Largest relative deviation of `area_2d` from [`hull_area`] and the number
/// of instances, for generator counts `0..=max_e`.
pub fn check_area(rng: &mut impl Rng, instances: usize, max_e: usize) -> (usize, f64) {
    let mut worst: f64 = 0.0;
    for i in 0..instances {
        let z = {
            let e = i % (max_e + 1);
            random_zono(rng, 2, e..=e)
        };
        let (area, oracle) = (z.area_2d().unwrap(), hull_area(&z));
        let rel = if oracle == 0.0 {
            area.abs()
        } else {
            (area - oracle).abs() / oracle
        };
        worst = worst.max(rel);
    }
    (instances, worst)
}

/// Counts random gains that give a smaller generator Frobenius norm than the
/// closed-form gain.
pub fn lambda_losses(rng: &mut impl Rng, instances: usize, candidates: usize) -> usize {
    let mut losses = 0;
    for _ in 0..instances {
        let z = random_zono(rng, 3, 2..=8);
        let h = DVector::from_fn(3, |_, _| rng.gen_range(-1.0..1.0));
        let strip = ssaware::zonoset::Strip::new(h, rng.gen_range(-2.0..2.0), rng.gen_range(0.01..2.0)).unwrap();
        let best = z.optimal_lambda(&strip).unwrap();
        let best_norm = frobenius(&z.intersect_strip(&strip, &best).unwrap());
        for c in 0..candidates {
            let spread = [0.01, 0.1, 1.0][c % 3];
            let cand = if c % 2 == 0 {
                &best + DVector::from_fn(3, |_, _| rng.gen_range(-spread..spread))
            } else {
                DVector::from_fn(3, |_, _| rng.gen_range(-2.0..2.0))
            };
            if frobenius(&z.intersect_strip(&strip, &cand).unwrap()) < best_norm {
                losses += 1;
            }
        }
    }
    losses
}
