use rand::Rng;
use serde::{Deserialize, Serialize};

use super::config::{ActorConfig, ScenarioConfig};
use crate::estimator::wrap_angle;
use crate::frames::{Obstacle, Pose2D, TruthObject};

/// True state of one actor at one tick.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActorState {
    pub id: u32,
    pub pose: Pose2D,
    pub speed: f64,
}

impl ActorState {
    pub fn initial(a: &ActorConfig) -> Self {
        let (speed, heading) = match a.waypoints.first() {
            Some(w) if w.t <= 0.0 => (a.speed, w.heading),
            _ => (a.speed, a.initial.heading),
        };
        Self {
            id: a.id,
            pose: Pose2D::new(a.initial.x, a.initial.y, heading),
            speed,
        }
    }

    pub fn as_truth(&self, a: &ActorConfig) -> TruthObject {
        TruthObject {
            id: a.id,
            pose: self.pose,
            speed: self.speed,
            footprint: a.footprint,
            class: a.class,
        }
    }

    pub fn obstacle(&self, a: &ActorConfig) -> Obstacle {
        Obstacle {
            center: self.pose.position,
            length: a.footprint.length,
            width: a.footprint.width,
            heading: self.pose.heading,
        }
    }
}

/// Target speed and heading in force at time `t`.
fn target(a: &ActorConfig, t: f64) -> (f64, f64) {
    a.waypoints
        .iter()
        .rev()
        .find(|w| w.t <= t)
        .map_or((a.speed, a.initial.heading), |w| (w.speed, w.heading))
}

/// Advances one tick with the estimator's motion model plus bounded noise.
/// Position noise stays inside `scale · Q`; the speed change (ramp towards the
/// waypoint speed plus noise) stays inside `Q_s`, so every step respects the
/// process-noise bound.
pub fn advance<R: Rng>(cfg: &ScenarioConfig, a: &ActorConfig, s: &ActorState, t_next: f64, rng: &mut R) -> ActorState {
    let dt = cfg.dt();
    let q = cfg.process_noise;
    let scale = a.truth_noise_scale.unwrap_or(cfg.truth_noise_scale);
    let mut draw = |bound: f64| {
        if bound > 0.0 {
            rng.gen_range(-bound..=bound)
        } else {
            0.0
        }
    };

    let (sin, cos) = s.pose.heading.sin_cos();
    let x = s.pose.position.x + dt * cos * s.speed + draw(scale * q[0]);
    let y = s.pose.position.y + dt * sin * s.speed + draw(scale * q[1]);

    let (goal, heading) = target(a, t_next);
    let half = 0.5 * q[2];
    let ramp = (goal - s.speed).clamp(-half, half);
    let speed = (s.speed + ramp + draw(scale * half)).max(0.0);

    ActorState {
        id: s.id,
        pose: Pose2D {
            position: [x, y].into(),
            heading: wrap_angle(heading),
        },
        speed,
    }
}

/// One line of the truth log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthRecord {
    pub time_ms: u64,
    pub actor: u32,
    pub name: String,
    pub x: f64,
    pub y: f64,
    pub speed: f64,
    pub heading: f64,
}
