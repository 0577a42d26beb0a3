//! Planar frames, sensor fields of view and occlusion.
//!
//! Three frames are in play: the fixed global frame, each station's local
//! frame (x axis along its heading) and the ego vehicle's frame, which is
//! simply the local frame of the ego pose.

use nalgebra::{Rotation2, Vector2, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::estimator::{wrap_angle, ClassHint, Footprint, Measurement, Provenance};

pub type Point = Vector2<f64>;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose2D {
    pub position: Point,
    /// Radians; the local x axis points along it.
    pub heading: f64,
}

impl Pose2D {
    pub fn new(x: f64, y: f64, heading: f64) -> Self {
        Self {
            position: Point::new(x, y),
            heading: wrap_angle(heading),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FovSector {
    pub origin: Pose2D,
    pub range: f64,
    pub half_angle: f64,
}

/// Oriented rectangle blocking line of sight.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Obstacle {
    pub center: Point,
    pub length: f64,
    pub width: f64,
    pub heading: f64,
}

impl Obstacle {
    /// Closed rectangle membership.
    pub fn contains(&self, p: &Point) -> bool {
        let frame = Pose2D {
            position: self.center,
            heading: self.heading,
        };
        let l = global_to_local(&frame, p);
        l.x.abs() <= self.length / 2.0 && l.y.abs() <= self.width / 2.0
    }
}

pub fn local_to_global(sender: &Pose2D, p: &Point) -> Point {
    sender.position + Rotation2::new(sender.heading) * p
}

pub fn global_to_local(owner: &Pose2D, p: &Point) -> Point {
    Rotation2::new(owner.heading).inverse() * (p - owner.position)
}

/// Moves a pose by `offset`, given in its own body frame.
pub fn reference_offset(sender: &Pose2D, offset: &Point) -> Pose2D {
    Pose2D {
        position: local_to_global(sender, offset),
        heading: sender.heading,
    }
}

/// Closed circular sector test.
pub fn in_fov(fov: &FovSector, p: &Point) -> bool {
    let d = p - fov.origin.position;
    let dist = d.norm();
    if dist > fov.range {
        return false;
    }
    if dist == 0.0 {
        return true;
    }
    let bearing = d.y.atan2(d.x);
    wrap_angle(bearing - fov.origin.heading).abs() <= fov.half_angle
}

/// Parameter interval `(t_in, t_out)` of the segment `a + t (b − a)` inside
/// the rectangle, or `None` if the supporting line misses it.
fn clip_segment(a: &Point, b: &Point, ob: &Obstacle) -> Option<(f64, f64)> {
    let frame = Pose2D {
        position: ob.center,
        heading: ob.heading,
    };
    let la = global_to_local(&frame, a);
    let lb = global_to_local(&frame, b);
    let dir = lb - la;
    let half = [ob.length / 2.0, ob.width / 2.0];
    let (mut t0, mut t1) = (f64::NEG_INFINITY, f64::INFINITY);
    for axis in 0..2 {
        if dir[axis] == 0.0 {
            if la[axis].abs() > half[axis] {
                return None;
            }
            continue;
        }
        let ta = (-half[axis] - la[axis]) / dir[axis];
        let tb = (half[axis] - la[axis]) / dir[axis];
        t0 = t0.max(ta.min(tb));
        t1 = t1.min(ta.max(tb));
    }
    (t0 <= t1).then_some((t0, t1))
}

/// True iff the open segment between sensor and target passes through any
/// obstacle (a crossing of positive length, or an endpoint strictly inside).
pub fn occluded(sensor: &Point, target: &Point, obstacles: &[Obstacle]) -> bool {
    if sensor == target {
        return false;
    }
    obstacles.iter().any(|ob| match clip_segment(sensor, target, ob) {
        Some((t0, t1)) => t0.max(0.0) < t1.min(1.0),
        None => false,
    })
}

/// Ground truth of one road user as seen by the synthetic perception layer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruthObject {
    pub id: u32,
    pub pose: Pose2D,
    pub speed: f64,
    pub footprint: Footprint,
    pub class: ClassHint,
}

/// Synthetic perception: every truth object inside the sector and not
/// occluded yields a measurement with uniform noise inside `half_widths`.
/// An obstacle containing the target's position is the target's own body and
/// does not hide it. Output order follows `truth`; identical seeds give
/// identical output.
pub fn synth_perceive(
    fov: &FovSector,
    truth: &[TruthObject],
    obstacles: &[Obstacle],
    half_widths: &Vector3<f64>,
    source: Provenance,
    timestamp: f64,
    seed: u64,
) -> Vec<Measurement> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sensor = fov.origin.position;
    truth
        .iter()
        .filter(|obj| {
            let p = obj.pose.position;
            let others: Vec<Obstacle> = obstacles.iter().filter(|ob| !ob.contains(&p)).copied().collect();
            in_fov(fov, &p) && !occluded(&sensor, &p, &others)
        })
        .map(|obj| {
            let mut noise = Vector3::zeros();
            for i in 0..3 {
                let r = half_widths[i];
                if r > 0.0 {
                    noise[i] = rng.gen_range(-r..=r);
                }
            }
            Measurement {
                y: Vector3::new(
                    obj.pose.position.x + noise[0],
                    obj.pose.position.y + noise[1],
                    obj.speed + noise[2],
                ),
                heading: obj.pose.heading,
                half_widths: *half_widths,
                timestamp,
                source,
                object_id: Some(obj.id),
                class: obj.class,
                footprint: obj.footprint,
            }
        })
        .collect()
}
