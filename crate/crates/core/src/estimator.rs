//! Per-road-user set-membership filter.
//!
//! State is `(x, y, speed)` in the fixed global frame. Prediction uses the
//! heading-dependent constant-speed model, correction intersects the
//! predicted set with one strip per measured coordinate.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::zonoset::{NoiseBound, Strip, ZonoError, Zonotope, DEFAULT_MAX_GENERATORS};

/// State dimension: x (m), y (m), speed (m/s).
pub const STATE_DIM: usize = 3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EstimatorError {
    #[error("time step must be positive, got {0}")]
    NonPositiveStep(f64),
    #[error("measurement at t={measurement} is older than the track (t={track})")]
    OutOfOrder { track: f64, measurement: f64 },
    #[error("initial radii must cover the measurement half-widths")]
    InitialRadiiTooSmall,
    #[error(transparent)]
    Zono(#[from] ZonoError),
}

/// Where a track's information comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Local,
    External(u32),
    Fused,
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Provenance::Local => write!(f, "local"),
            Provenance::External(id) => write!(f, "external:{id}"),
            Provenance::Fused => write!(f, "fused"),
        }
    }
}

impl FromStr for Provenance {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "local" => Ok(Provenance::Local),
            "fused" => Ok(Provenance::Fused),
            _ => s
                .strip_prefix("external:")
                .and_then(|id| id.parse().ok())
                .map(Provenance::External)
                .ok_or_else(|| format!("unknown provenance {s:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassHint {
    Unknown,
    Vehicle,
    Pedestrian,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Footprint {
    pub length: f64,
    pub width: f64,
}

/// Track identity: the source plus an object number within that source.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct TrackId {
    pub provenance: Provenance,
    pub object: u32,
}

impl fmt::Display for TrackId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.provenance, self.object)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Measurement {
    /// `(x, y, speed)` in the global frame.
    pub y: Vector3<f64>,
    pub heading: f64,
    pub half_widths: Vector3<f64>,
    /// Seconds since scenario start.
    pub timestamp: f64,
    pub source: Provenance,
    /// Sender-assigned identity, if the source provides one.
    pub object_id: Option<u32>,
    pub class: ClassHint,
    pub footprint: Footprint,
}

impl Measurement {
    /// One axis strip per measured coordinate (`H = I`).
    pub fn strips(&self) -> Result<[Strip; STATE_DIM], ZonoError> {
        Ok([
            Strip::axis(STATE_DIM, 0, self.y[0], self.half_widths[0])?,
            Strip::axis(STATE_DIM, 1, self.y[1], self.half_widths[1])?,
            Strip::axis(STATE_DIM, 2, self.y[2], self.half_widths[2])?,
        ])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoadUserTrack {
    pub id: TrackId,
    pub corrected_set: Zonotope,
    pub heading: f64,
    pub last_update: f64,
    pub class: ClassHint,
    pub footprint: Footprint,
}

impl RoadUserTrack {
    pub fn provenance(&self) -> Provenance {
        self.id.provenance
    }
}

/// Filter tuning shared by all tracks of one source.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterConfig {
    pub noise: NoiseBound,
    pub max_generators: usize,
}

impl FilterConfig {
    pub fn new(noise: NoiseBound) -> Self {
        Self {
            noise,
            max_generators: DEFAULT_MAX_GENERATORS,
        }
    }
}

/// Wraps an angle into `(−π, π]`.
pub fn wrap_angle(theta: f64) -> f64 {
    use std::f64::consts::PI;
    let mut a = theta % (2.0 * PI);
    if a <= -PI {
        a += 2.0 * PI;
    } else if a > PI {
        a -= 2.0 * PI;
    }
    a
}

/// Constant-speed transition `[[1,0,Δt cosθ],[0,1,Δt sinθ],[0,0,1]]`.
pub fn state_matrix(heading: f64, dt: f64) -> Result<DMatrix<f64>, EstimatorError> {
    if !(dt > 0.0) {
        return Err(EstimatorError::NonPositiveStep(dt));
    }
    let (sin, cos) = heading.sin_cos();
    Ok(DMatrix::from_row_slice(
        3,
        3,
        &[1.0, 0.0, dt * cos, 0.0, 1.0, dt * sin, 0.0, 0.0, 1.0],
    ))
}

/// Splits `dt` into whole nominal steps. Gaps that are (numerically) integer
/// multiples of the step use the step length exactly; others are split into
/// equal sub-steps no longer than the nominal step.
fn substeps(dt: f64, step: f64) -> (usize, f64) {
    if !(step > 0.0) {
        return (1, dt);
    }
    let ratio = dt / step;
    let rounded = ratio.round();
    if rounded >= 1.0 && (ratio - rounded).abs() <= 1e-6 {
        return (rounded as usize, step);
    }
    let count = ratio.ceil().max(1.0);
    (count as usize, dt / count)
}

/// Predicted set `F Z ⊕ ⟨0, Q⟩`, applied once per nominal step covered by `dt`.
pub fn predict(track: &RoadUserTrack, dt: f64, noise: &NoiseBound) -> Result<Zonotope, EstimatorError> {
    predict_set(&track.corrected_set, track.heading, dt, noise)
}

pub(crate) fn predict_set(
    set: &Zonotope,
    heading: f64,
    dt: f64,
    noise: &NoiseBound,
) -> Result<Zonotope, EstimatorError> {
    if !(dt > 0.0) {
        return Err(EstimatorError::NonPositiveStep(dt));
    }
    let (count, h) = substeps(dt, noise.step);
    let f = state_matrix(heading, h)?;
    let q = noise.process_zonotope();
    let mut z = set.clone();
    for _ in 0..count {
        z = z.linear_map(&f)?.minkowski_sum(&q)?;
    }
    Ok(z)
}

/// Corrected set: one strip per coordinate, each with its Frobenius-optimal
/// gain, then order reduction to the generator budget.
pub fn correct(predicted: &Zonotope, m: &Measurement, max_generators: usize) -> Result<Zonotope, EstimatorError> {
    let mut z = predicted.clone();
    for strip in m.strips()? {
        let lambda = z.optimal_lambda(&strip)?;
        z = z.intersect_strip(&strip, &lambda)?;
    }
    Ok(z.reduce_order(max_generators)?)
}

/// One filter iteration for a track. A measurement stamped at the track's
/// own time skips the prediction.
pub fn step_track(
    track: &RoadUserTrack,
    m: &Measurement,
    config: &FilterConfig,
) -> Result<RoadUserTrack, EstimatorError> {
    if m.timestamp < track.last_update {
        return Err(EstimatorError::OutOfOrder {
            track: track.last_update,
            measurement: m.timestamp,
        });
    }
    let dt = m.timestamp - track.last_update;
    let predicted = if dt > 0.0 {
        predict(track, dt, &config.noise)?
    } else {
        track.corrected_set.clone()
    };
    Ok(RoadUserTrack {
        id: track.id,
        corrected_set: correct(&predicted, m, config.max_generators)?,
        heading: wrap_angle(m.heading),
        last_update: m.timestamp,
        class: track.class,
        footprint: m.footprint,
    })
}

/// Half-widths `(x, y, speed)` of the box a new track starts from, per class.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InitialRadii {
    pub vehicle: [f64; 3],
    pub pedestrian: [f64; 3],
    /// Unclassified objects; the vehicle box when unset.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub unknown: Option<[f64; 3]>,
}

impl Default for InitialRadii {
    fn default() -> Self {
        Self {
            vehicle: [2.0, 2.0, 1.0],
            pedestrian: [1.0, 1.0, 0.8],
            unknown: None,
        }
    }
}

impl InitialRadii {
    pub fn for_class(&self, class: ClassHint) -> Vector3<f64> {
        Vector3::from(match class {
            ClassHint::Vehicle => self.vehicle,
            ClassHint::Pedestrian => self.pedestrian,
            ClassHint::Unknown => self.unknown.unwrap_or(self.vehicle),
        })
    }

    pub fn iter(&self) -> impl Iterator<Item = (ClassHint, Vector3<f64>)> + '_ {
        [ClassHint::Vehicle, ClassHint::Pedestrian, ClassHint::Unknown]
            .into_iter()
            .map(|c| (c, self.for_class(c)))
    }
}

/// New track with the box `⟨y, diag(initial_radii)⟩`.
pub fn init_track(m: &Measurement, initial_radii: &Vector3<f64>, id: TrackId) -> Result<RoadUserTrack, EstimatorError> {
    if initial_radii.iter().zip(m.half_widths.iter()).any(|(r0, r)| !(r0 >= r)) {
        return Err(EstimatorError::InitialRadiiTooSmall);
    }
    let center = DVector::from_column_slice(m.y.as_slice());
    let radii = DVector::from_column_slice(initial_radii.as_slice());
    Ok(RoadUserTrack {
        id,
        corrected_set: Zonotope::from_box(center, &radii),
        heading: wrap_angle(m.heading),
        last_update: m.timestamp,
        class: m.class,
        footprint: m.footprint,
    })
}
