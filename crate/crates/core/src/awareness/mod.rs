//! Ego-side situational awareness: per-source track tables, association of
//! estimate sets across sources and set fusion into a scene map.

mod fusion;
mod metrics;

use std::collections::BTreeMap;

use thiserror::Error;

pub use fusion::{associate, build_scene, fuse_group, FusionReport, SceneMap, TrackRecord};
pub use metrics::{metrics, LabeledEstimate, MetricsRow, MetricsTable, TruthSample};

use crate::estimator::{
    init_track, predict, step_track, EstimatorError, FilterConfig, InitialRadii, Measurement, Provenance,
    RoadUserTrack, TrackId,
};
use crate::zonoset::ZonoError;

/// Position gate for local nearest-neighbour association, in meters.
pub const LOCAL_GATE_M: f64 = 3.0;
/// Tracks not updated for this long are retired, in seconds.
pub const RETIRE_AFTER_S: f64 = 2.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AwarenessError {
    #[error(transparent)]
    Estimator(#[from] EstimatorError),
    #[error(transparent)]
    Zono(#[from] ZonoError),
    #[error("fusion needs at least two members, got {0}")]
    GroupTooSmall(usize),
    #[error("fused tracks cannot be ingested")]
    FusedSource,
}

/// Filter settings of one source.
#[derive(Debug, Clone, PartialEq)]
pub struct SourceConfig {
    pub filter: FilterConfig,
    pub initial_radii: InitialRadii,
}

/// What happened to one ingested measurement.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IngestOutcome {
    Initialized(TrackId),
    Updated(TrackId),
    DroppedOutOfOrder,
}

impl IngestOutcome {
    pub fn track(&self) -> Option<TrackId> {
        match self {
            Self::Initialized(id) | Self::Updated(id) => Some(*id),
            Self::DroppedOutOfOrder => None,
        }
    }
}

/// Tracks of one source, keyed by object id.
#[derive(Debug, Clone)]
pub struct TrackTable {
    source: Provenance,
    config: SourceConfig,
    tracks: BTreeMap<u32, RoadUserTrack>,
    next_id: u32,
    last_time: f64,
    dropped: usize,
}

impl TrackTable {
    pub fn new(source: Provenance, config: SourceConfig) -> Result<Self, AwarenessError> {
        if source == Provenance::Fused {
            return Err(AwarenessError::FusedSource);
        }
        Ok(Self {
            source,
            config,
            tracks: BTreeMap::new(),
            next_id: 0,
            last_time: f64::NEG_INFINITY,
            dropped: 0,
        })
    }

    pub fn source(&self) -> Provenance {
        self.source
    }

    pub fn config(&self) -> &SourceConfig {
        &self.config
    }

    pub fn tracks(&self) -> impl Iterator<Item = &RoadUserTrack> {
        self.tracks.values()
    }

    pub fn get(&self, object: u32) -> Option<&RoadUserTrack> {
        self.tracks.get(&object)
    }

    pub fn len(&self) -> usize {
        self.tracks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tracks.is_empty()
    }

    /// Measurements dropped for arriving out of order.
    pub fn dropped(&self) -> usize {
        self.dropped
    }

    /// Runs one filter step per measurement. Local measurements are matched to
    /// tracks by gating; external ones by the sender's object id.
    pub fn ingest(&mut self, measurements: &[Measurement]) -> Result<Vec<IngestOutcome>, AwarenessError> {
        let mut outcomes = vec![IngestOutcome::DroppedOutOfOrder; measurements.len()];
        let mut accepted = Vec::with_capacity(measurements.len());
        for (i, m) in measurements.iter().enumerate() {
            if m.timestamp < self.last_time {
                self.dropped += 1;
            } else {
                accepted.push(i);
            }
        }
        let keys = if self.source == Provenance::Local {
            self.gate(measurements, &accepted)
        } else {
            accepted
                .iter()
                .map(|&i| match measurements[i].object_id {
                    Some(id) => id,
                    None => self.fresh_id(),
                })
                .collect()
        };
        for (&i, key) in accepted.iter().zip(keys) {
            let m = &measurements[i];
            let id = TrackId {
                provenance: self.source,
                object: key,
            };
            outcomes[i] = match self.tracks.get(&key) {
                Some(track) => match step_track(track, m, &self.config.filter) {
                    Ok(next) => {
                        self.tracks.insert(key, next);
                        IngestOutcome::Updated(id)
                    }
                    Err(EstimatorError::OutOfOrder { .. }) => {
                        self.dropped += 1;
                        continue;
                    }
                    Err(e) => return Err(e.into()),
                },
                None => {
                    self.tracks
                        .insert(key, init_track(m, &self.config.initial_radii.for_class(m.class), id)?);
                    self.next_id = self.next_id.max(key.saturating_add(1));
                    IngestOutcome::Initialized(id)
                }
            };
            self.last_time = self.last_time.max(m.timestamp);
        }
        Ok(outcomes)
    }

    fn fresh_id(&mut self) -> u32 {
        while self.tracks.contains_key(&self.next_id) {
            self.next_id += 1;
        }
        let id = self.next_id;
        self.next_id += 1;
        id
    }

    /// Greedy global nearest-neighbour assignment with a position gate and
    /// class match. Unmatched measurements get fresh ids.
    fn gate(&mut self, measurements: &[Measurement], accepted: &[usize]) -> Vec<u32> {
        let mut pairs = Vec::new();
        for (slot, &i) in accepted.iter().enumerate() {
            let m = &measurements[i];
            for (&key, t) in &self.tracks {
                if t.class != m.class {
                    continue;
                }
                let c = t.corrected_set.center();
                let dt = (m.timestamp - t.last_update).max(0.0);
                let (sin, cos) = t.heading.sin_cos();
                let dx = c[0] + dt * cos * c[2] - m.y[0];
                let dy = c[1] + dt * sin * c[2] - m.y[1];
                let d = dx.hypot(dy);
                if d <= LOCAL_GATE_M {
                    pairs.push((d, slot, key));
                }
            }
        }
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
        let mut assigned: Vec<Option<u32>> = vec![None; accepted.len()];
        let mut taken = std::collections::BTreeSet::new();
        for (_, slot, key) in pairs {
            if assigned[slot].is_none() && !taken.contains(&key) {
                assigned[slot] = Some(key);
                taken.insert(key);
            }
        }
        assigned
            .into_iter()
            .map(|a| a.unwrap_or_else(|| self.fresh_id()))
            .collect()
    }

    /// Every track predicted forward to `time`; tracks already at or past it
    /// are returned unchanged.
    pub fn aligned(&self, time: f64) -> Result<Vec<RoadUserTrack>, AwarenessError> {
        self.tracks
            .values()
            .map(|t| {
                if time > t.last_update {
                    let set = predict(t, time - t.last_update, &self.config.filter.noise)?;
                    Ok(RoadUserTrack {
                        corrected_set: set,
                        last_update: time,
                        ..t.clone()
                    })
                } else {
                    Ok(t.clone())
                }
            })
            .collect()
    }

    /// Drops tracks not updated within the retirement window before `now`.
    pub fn retire(&mut self, now: f64) -> usize {
        let before = self.tracks.len();
        self.tracks.retain(|_, t| now - t.last_update <= RETIRE_AFTER_S);
        before - self.tracks.len()
    }
}

/// All track tables held by the ego, iterated in fixed source order.
#[derive(Debug, Clone, Default)]
pub struct AwarenessEngine {
    tables: BTreeMap<Provenance, TrackTable>,
}

impl AwarenessEngine {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_source(&mut self, source: Provenance, config: SourceConfig) -> Result<(), AwarenessError> {
        self.tables.insert(source, TrackTable::new(source, config)?);
        Ok(())
    }

    pub fn table(&self, source: Provenance) -> Option<&TrackTable> {
        self.tables.get(&source)
    }

    pub fn tables(&self) -> impl Iterator<Item = &TrackTable> {
        self.tables.values()
    }

    /// Ingests measurements for `source`. Sources not registered yet reuse the
    /// configuration passed in `fallback`.
    pub fn ingest(
        &mut self,
        source: Provenance,
        measurements: &[Measurement],
        fallback: &SourceConfig,
    ) -> Result<Vec<IngestOutcome>, AwarenessError> {
        if !self.tables.contains_key(&source) {
            self.add_source(source, fallback.clone())?;
        }
        self.tables.get_mut(&source).expect("registered").ingest(measurements)
    }

    pub fn retire(&mut self, now: f64) -> usize {
        self.tables.values_mut().map(|t| t.retire(now)).sum()
    }

    /// Snapshot of every source's tracks, aligned to `time`.
    pub fn snapshot(&self, time: f64) -> Result<Vec<RoadUserTrack>, AwarenessError> {
        let mut out = Vec::new();
        for table in self.tables.values() {
            out.extend(table.aligned(time)?);
        }
        Ok(out)
    }

    pub fn dropped(&self) -> usize {
        self.tables.values().map(TrackTable::dropped).sum()
    }
}

#[cfg(test)]
mod tests;
