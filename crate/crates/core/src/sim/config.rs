use std::collections::BTreeSet;
use std::f64::consts::{FRAC_PI_2, FRAC_PI_3};
use std::path::Path;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::estimator::{ClassHint, Footprint, InitialRadii};
use crate::frames::Obstacle;
use crate::wire::StationType;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid `{field}`: {reason}")]
    Invalid { field: String, reason: String },
}

fn invalid(field: impl Into<String>, reason: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        field: field.into(),
        reason: reason.into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PoseConfig {
    pub x: f64,
    pub y: f64,
    #[serde(default)]
    pub heading: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Vec2Config {
    pub x: f64,
    pub y: f64,
}

/// From time `t` on, the actor steers towards `speed` and holds `heading`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Waypoint {
    pub t: f64,
    pub speed: f64,
    pub heading: f64,
}

/// Unset fields take the defaults of the actor's role: ego, roadside unit or
/// other vehicle.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensorConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub range: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub half_angle: Option<f64>,
    /// Measurement half-widths `(x, y, speed)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub measurement_noise: Option<[f64; 3]>,
}

/// Sensor parameters after role defaults are applied.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResolvedSensor {
    pub range: f64,
    pub half_angle: f64,
    pub measurement_noise: [f64; 3],
}

impl SensorConfig {
    pub fn resolve(&self, is_ego: bool, station: Option<StationType>) -> ResolvedSensor {
        let (range, half_angle, noise) = if is_ego {
            (80.0, FRAC_PI_3, [0.3, 0.3, 0.2])
        } else if station == Some(StationType::Rsu) {
            (50.0, FRAC_PI_2, [0.5, 0.5, 0.3])
        } else {
            (60.0, FRAC_PI_3, [0.5, 0.5, 0.3])
        };
        ResolvedSensor {
            range: self.range.unwrap_or(range),
            half_angle: self.half_angle.unwrap_or(half_angle),
            measurement_noise: self.measurement_noise.unwrap_or(noise),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ActorConfig {
    pub id: u32,
    pub name: String,
    pub class: ClassHint,
    /// Stations with a V2X unit; others are silent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub station: Option<StationType>,
    pub initial: PoseConfig,
    #[serde(default)]
    pub speed: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub waypoints: Vec<Waypoint>,
    pub footprint: Footprint,
    /// Body-frame vector from the reference point to the geometric center.
    #[serde(default = "zero_offset")]
    pub ref_point_offset: Vec2Config,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sensor: Option<SensorConfig>,
    /// The footprint blocks line of sight.
    #[serde(default)]
    pub blocks_view: bool,
    /// Overrides the scenario-wide truth noise scale for this actor.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truth_noise_scale: Option<f64>,
}

fn zero_offset() -> Vec2Config {
    Vec2Config { x: 0.0, y: 0.0 }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelSection {
    pub drop_probability: f64,
    pub latency_min_ms: u64,
    pub latency_max_ms: u64,
    pub range_m: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    pub duration_s: f64,
    #[serde(default = "default_tick_rate")]
    pub tick_rate_hz: f64,
    /// CPM rate per sender; must divide the tick rate.
    #[serde(default = "default_tick_rate")]
    pub cpm_rate_hz: f64,
    pub seed: u64,
    #[serde(default = "default_budget")]
    pub generator_budget: usize,
    /// Process-noise bound `Q` per tick, `(x, y, speed)`.
    #[serde(default = "default_process_noise")]
    pub process_noise: [f64; 3],
    #[serde(default)]
    pub initial_radii: InitialRadii,
    /// Fraction of `Q` used when perturbing the truth, in `[0, 1]`.
    #[serde(default = "one")]
    pub truth_noise_scale: f64,
    /// Fraction of each sensor's half-widths used when sampling measurement noise.
    #[serde(default = "one")]
    pub measurement_noise_scale: f64,
    /// Time of the snapshot shown in the report table.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub report_time_s: Option<f64>,
    /// Name of the ego actor.
    pub ego: String,
    pub channel: ChannelSection,
    pub actors: Vec<ActorConfig>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub obstacles: Vec<Obstacle>,
}

fn default_tick_rate() -> f64 {
    10.0
}

fn default_budget() -> usize {
    crate::zonoset::DEFAULT_MAX_GENERATORS
}

fn default_process_noise() -> [f64; 3] {
    [0.05, 0.05, 0.02]
}

fn one() -> f64 {
    1.0
}

impl ScenarioConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let cfg: ScenarioConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<(Self, String), ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Ok((Self::from_toml(&text)?, text))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn dt(&self) -> f64 {
        1.0 / self.tick_rate_hz
    }

    pub fn ticks(&self) -> usize {
        (self.duration_s * self.tick_rate_hz).round() as usize + 1
    }

    /// Ticks between two CPMs of one sender.
    pub fn cpm_interval(&self) -> usize {
        (self.tick_rate_hz / self.cpm_rate_hz).round() as usize
    }

    pub fn ego_actor(&self) -> &ActorConfig {
        self.actors.iter().find(|a| a.name == self.ego).expect("validated")
    }

    pub fn actor(&self, id: u32) -> Option<&ActorConfig> {
        self.actors.iter().find(|a| a.id == id)
    }

    /// Sensor of `actor` with role defaults applied.
    pub fn sensor(&self, actor: &ActorConfig) -> Option<ResolvedSensor> {
        actor
            .sensor
            .as_ref()
            .map(|s| s.resolve(actor.name == self.ego, actor.station))
    }

    pub fn report_time(&self) -> f64 {
        self.report_time_s.unwrap_or(self.duration_s / 2.0)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(self.duration_s > 0.0) || !self.duration_s.is_finite() {
            return Err(invalid("duration_s", "must be positive"));
        }
        if !(self.tick_rate_hz > 0.0) || !self.tick_rate_hz.is_finite() {
            return Err(invalid("tick_rate_hz", "must be positive"));
        }
        let ratio = self.tick_rate_hz / self.cpm_rate_hz;
        if !(self.cpm_rate_hz > 0.0) || ratio < 1.0 || (ratio - ratio.round()).abs() > 1e-9 {
            return Err(invalid("cpm_rate_hz", "must be positive and divide tick_rate_hz"));
        }
        if self.generator_budget < 3 {
            return Err(invalid("generator_budget", "must be at least the state dimension 3"));
        }
        if self.process_noise.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
            return Err(invalid("process_noise", "entries must be finite and non-negative"));
        }
        for (class, r0) in self.initial_radii.iter() {
            if r0.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
                return Err(invalid(
                    format!("initial_radii.{}", class_key(class)),
                    "entries must be finite and positive",
                ));
            }
        }
        for (field, v) in [
            ("truth_noise_scale", self.truth_noise_scale),
            ("measurement_noise_scale", self.measurement_noise_scale),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(invalid(field, "must lie in [0, 1]"));
            }
        }
        if let Some(t) = self.report_time_s {
            if !(0.0..=self.duration_s).contains(&t) {
                return Err(invalid("report_time_s", "must lie within the run"));
            }
        }
        let c = &self.channel;
        if !(0.0..=1.0).contains(&c.drop_probability) {
            return Err(invalid("channel.drop_probability", "must lie in [0, 1]"));
        }
        if c.latency_min_ms > c.latency_max_ms {
            return Err(invalid("channel.latency_min_ms", "exceeds latency_max_ms"));
        }
        if !(c.range_m > 0.0) {
            return Err(invalid("channel.range_m", "must be positive"));
        }

        let mut ids = BTreeSet::new();
        let mut names = BTreeSet::new();
        for (i, a) in self.actors.iter().enumerate() {
            let at = |f: &str| format!("actors[{i}].{f}");
            if a.id > u16::MAX as u32 {
                return Err(invalid(at("id"), "must fit in 16 bits"));
            }
            if !ids.insert(a.id) {
                return Err(invalid(at("id"), format!("duplicate id {}", a.id)));
            }
            if !names.insert(a.name.as_str()) {
                return Err(invalid(at("name"), format!("duplicate name {}", a.name)));
            }
            if ![a.initial.x, a.initial.y, a.initial.heading]
                .iter()
                .all(|v| v.is_finite())
            {
                return Err(invalid(at("initial"), "must be finite"));
            }
            if !(a.speed >= 0.0) {
                return Err(invalid(at("speed"), "must be non-negative"));
            }
            if !(a.footprint.length > 0.0 && a.footprint.width > 0.0) {
                return Err(invalid(at("footprint"), "length and width must be positive"));
            }
            let mut last = f64::NEG_INFINITY;
            for (j, w) in a.waypoints.iter().enumerate() {
                if !(w.t > last) || !(w.speed >= 0.0) || !w.heading.is_finite() {
                    return Err(invalid(
                        at(&format!("waypoints[{j}]")),
                        "times must increase, speeds be non-negative",
                    ));
                }
                last = w.t;
            }
            if a.truth_noise_scale.is_some_and(|v| !(0.0..=1.0).contains(&v)) {
                return Err(invalid(at("truth_noise_scale"), "must lie in [0, 1]"));
            }
            if let Some(s) = self.sensor(a) {
                if !(s.range > 0.0) || !(s.half_angle > 0.0) {
                    return Err(invalid(at("sensor"), "range and half_angle must be positive"));
                }
                if s.measurement_noise.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
                    return Err(invalid(at("sensor.measurement_noise"), "entries must be non-negative"));
                }
                let noise = Vector3::from(s.measurement_noise);
                for (class, r0) in self.initial_radii.iter() {
                    if r0.iter().zip(noise.iter()).any(|(r0, r)| !(r0 >= r)) {
                        return Err(invalid(
                            format!("initial_radii.{}", class_key(class)),
                            format!("must be at least the measurement noise of {}", a.name),
                        ));
                    }
                }
            }
        }
        let Some(ego) = self.actors.iter().find(|a| a.name == self.ego) else {
            return Err(invalid("ego", format!("no actor named {}", self.ego)));
        };
        if ego.sensor.is_none() {
            return Err(invalid("ego", "the ego actor needs a sensor"));
        }
        for (i, o) in self.obstacles.iter().enumerate() {
            if !(o.length > 0.0 && o.width > 0.0) {
                return Err(invalid(format!("obstacles[{i}]"), "length and width must be positive"));
            }
        }
        Ok(())
    }
}

fn class_key(class: ClassHint) -> &'static str {
    match class {
        ClassHint::Vehicle => "vehicle",
        ClassHint::Pedestrian => "pedestrian",
        ClassHint::Unknown => "unknown",
    }
}
