use std::collections::{BTreeMap, BTreeSet, HashMap};

use nalgebra::{DVector, Vector3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::{ActorConfig, ScenarioConfig};
use super::report::{build_report, Report};
use super::truth::{advance, ActorState, TruthRecord};
use super::SimError;
use crate::awareness::{build_scene, AwarenessEngine, SceneMap, SourceConfig, TrackRecord};
use crate::estimator::{FilterConfig, Measurement, Provenance, TrackId};
use crate::frames::{synth_perceive, FovSector, Obstacle, Point, Pose2D};
use crate::wire::{
    build_cpm, decode, encode_cpm, poc_to_measurements, Channel, ChannelConfig, MessageRecord, SenderState, WireMessage,
};
use crate::zonoset::{NoiseBound, Zonotope};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoseRecord {
    pub x: f64,
    pub y: f64,
    pub heading: f64,
}

impl From<Pose2D> for PoseRecord {
    fn from(p: Pose2D) -> Self {
        Self {
            x: p.position.x,
            y: p.position.y,
            heading: p.heading,
        }
    }
}

impl From<PoseRecord> for Pose2D {
    fn from(p: PoseRecord) -> Self {
        Pose2D {
            position: Point::new(p.x, p.y),
            heading: p.heading,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FusionRecord {
    pub group_id: u32,
    pub members: Vec<String>,
    pub weights: Vec<f64>,
    pub area: f64,
    pub center_ev: [f64; 2],
}

/// One line of the scene stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneRecord {
    pub tick: usize,
    pub time_ms: u64,
    pub ego_pose: PoseRecord,
    pub tracks: Vec<TrackRecord>,
    pub associations: Vec<Vec<String>>,
    pub fusion: Vec<FusionRecord>,
}

/// Who saw whom at one tick.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TickObservation {
    pub time_ms: u64,
    /// Targets detected by each sensing actor.
    pub detections: BTreeMap<u32, BTreeSet<u32>>,
    /// Actors with a local ego track.
    pub ego_local: BTreeSet<u32>,
    /// Actors with a fused track.
    pub fused: BTreeSet<u32>,
}

/// Guarantee checks and counters of one run.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunSummary {
    pub ticks: usize,
    /// Corrected sets checked against the truth right after each filter step.
    pub corrected_checks: usize,
    pub corrected_violations: usize,
    /// Source sets predicted to scene time.
    pub aligned_checks: usize,
    pub aligned_violations: usize,
    pub fused_checks: usize,
    pub fused_violations: usize,
    /// Association groups whose members track different actors.
    pub mixed_groups: usize,
    pub messages_sent: usize,
    pub messages_delivered: usize,
    pub out_of_order: usize,
    pub observations: Vec<TickObservation>,
}

impl RunSummary {
    pub fn violations(&self) -> usize {
        self.corrected_violations + self.aligned_violations + self.fused_violations
    }
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub summary: RunSummary,
    pub truth: Vec<TruthRecord>,
    pub messages: Vec<MessageRecord>,
    pub scenes: Vec<SceneRecord>,
    pub report: Report,
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn derive_seed(seed: u64, a: u64, b: u64) -> u64 {
    splitmix(splitmix(seed ^ splitmix(a)) ^ b)
}

pub(crate) fn time_ms(t: f64) -> u64 {
    (t * 1000.0).round() as u64
}

fn source_config(cfg: &ScenarioConfig, actor: &ActorConfig) -> Result<SourceConfig, SimError> {
    let sensor = cfg.sensor(actor).expect("sensing actor");
    let noise = NoiseBound::new(
        DVector::from_row_slice(&cfg.process_noise),
        DVector::from_row_slice(&sensor.measurement_noise),
        cfg.dt(),
    )?;
    Ok(SourceConfig {
        filter: FilterConfig {
            noise,
            max_generators: cfg.generator_budget,
        },
        initial_radii: cfg.initial_radii,
    })
}

fn fov_of(cfg: &ScenarioConfig, actor: &ActorConfig, state: &ActorState) -> Option<FovSector> {
    cfg.sensor(actor).map(|s| FovSector {
        origin: state.pose,
        range: s.range,
        half_angle: s.half_angle,
    })
}

struct Checker<'a> {
    truth: &'a HashMap<(u32, u64), Vector3<f64>>,
}

impl Checker<'_> {
    /// `None` when there is no truth to compare with.
    fn contains(&self, set: &Zonotope, actor: u32, ms: u64) -> Option<bool> {
        let x = self.truth.get(&(actor, ms))?;
        Some(
            set.contains_point(&DVector::from_column_slice(x.as_slice()))
                .unwrap_or(false),
        )
    }
}

/// Runs the scenario and returns every artifact in memory.
pub fn run(cfg: &ScenarioConfig) -> Result<RunOutput, SimError> {
    cfg.validate()?;
    let ego_cfg = cfg.ego_actor();
    let ego_id = ego_cfg.id;
    let channel = Channel::new(ChannelConfig {
        drop_probability: cfg.channel.drop_probability,
        latency_min_ms: cfg.channel.latency_min_ms,
        latency_max_ms: cfg.channel.latency_max_ms,
        range_m: cfg.channel.range_m,
        seed: derive_seed(cfg.seed, 0xC4A7, 0),
    })?;
    let mut truth_rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let mut engine = AwarenessEngine::new();
    engine.add_source(Provenance::Local, source_config(cfg, ego_cfg)?)?;
    let mut external_configs: BTreeMap<u32, SourceConfig> = BTreeMap::new();
    for a in &cfg.actors {
        if a.id != ego_id && a.station.is_some() && a.sensor.is_some() {
            let sc = source_config(cfg, a)?;
            engine.add_source(Provenance::External(a.id), sc.clone())?;
            external_configs.insert(a.id, sc);
        }
    }

    let mut states: Vec<ActorState> = cfg.actors.iter().map(ActorState::initial).collect();
    let mut truth_map: HashMap<(u32, u64), Vector3<f64>> = HashMap::new();
    let mut truth_log = Vec::new();
    let mut messages = Vec::new();
    let mut scenes = Vec::new();
    let mut labels: HashMap<TrackId, u32> = HashMap::new();
    let mut summary = RunSummary::default();

    for tick in 0..cfg.ticks() {
        let t = tick as f64 / cfg.tick_rate_hz;
        let now_ms = time_ms(t);
        if tick > 0 {
            for (state, actor) in states.iter_mut().zip(&cfg.actors) {
                *state = advance(cfg, actor, state, t, &mut truth_rng);
            }
        }
        for (s, a) in states.iter().zip(&cfg.actors) {
            truth_map.insert(
                (a.id, now_ms),
                Vector3::new(s.pose.position.x, s.pose.position.y, s.speed),
            );
            truth_log.push(TruthRecord {
                time_ms: now_ms,
                actor: a.id,
                name: a.name.clone(),
                x: s.pose.position.x,
                y: s.pose.position.y,
                speed: s.speed,
                heading: s.pose.heading,
            });
        }
        let checker = Checker { truth: &truth_map };

        let mut owned: Vec<(Option<u32>, Obstacle)> = cfg.obstacles.iter().map(|o| (None, *o)).collect();
        owned.extend(
            states
                .iter()
                .zip(&cfg.actors)
                .filter(|(_, a)| a.blocks_view)
                .map(|(s, a)| (Some(a.id), s.obstacle(a))),
        );
        let obstacles: Vec<Obstacle> = owned.iter().map(|(_, o)| *o).collect();
        let mut observation = TickObservation {
            time_ms: now_ms,
            ..Default::default()
        };
        let mut fovs = Vec::new();
        let ego_state = states[cfg.actors.iter().position(|a| a.id == ego_id).expect("ego")];

        // Perception and transmission.
        let mut local_measurements = Vec::new();
        for (i, (state, actor)) in states.iter().zip(&cfg.actors).enumerate() {
            let Some(fov) = fov_of(cfg, actor, state) else { continue };
            fovs.push(fov);
            let sensor = cfg.sensor(actor).expect("sensor");
            let targets: Vec<_> = states
                .iter()
                .zip(&cfg.actors)
                .filter(|(_, a)| a.id != actor.id)
                .map(|(s, a)| s.as_truth(a))
                .collect();
            // The own footprint never hides anything from the own sensor.
            let blocking: Vec<Obstacle> = owned
                .iter()
                .filter(|(owner, _)| *owner != Some(actor.id))
                .map(|(_, o)| *o)
                .collect();
            let declared = Vector3::from(sensor.measurement_noise);
            let mut seen = synth_perceive(
                &fov,
                &targets,
                &blocking,
                &(declared * cfg.measurement_noise_scale),
                Provenance::Local,
                t,
                derive_seed(cfg.seed, tick as u64, i as u64 + 1),
            );
            for m in &mut seen {
                m.half_widths = declared;
            }
            observation
                .detections
                .insert(actor.id, seen.iter().filter_map(|m| m.object_id).collect());

            if actor.id == ego_id {
                local_measurements = seen;
            } else if let Some(station_type) = actor.station {
                if tick % cfg.cpm_interval() != 0 {
                    continue;
                }
                let sender = SenderState {
                    station_id: actor.id,
                    station_type,
                    center: state.pose,
                    speed: state.speed,
                    ref_point_offset: Point::new(actor.ref_point_offset.x, actor.ref_point_offset.y),
                };
                let bytes = encode_cpm(&build_cpm(&sender, &seen, now_ms))?;
                let (seq, at) = channel.send(
                    (actor.id, &state.pose),
                    (ego_id, &ego_state.pose),
                    bytes.clone(),
                    now_ms,
                );
                summary.messages_sent += 1;
                messages.push(MessageRecord::new(seq, actor.id, ego_id, now_ms, at, &bytes));
            }
        }

        // Ego ingestion: local first, then deliveries in channel order.
        let mut batches: Vec<(Provenance, Vec<Measurement>)> = vec![(Provenance::Local, local_measurements)];
        for d in channel.deliver_until(now_ms) {
            summary.messages_delivered += 1;
            if let WireMessage::Cpm(msg) = decode(&d.bytes)? {
                batches.push((
                    Provenance::External(msg.management.station_id),
                    poc_to_measurements(&msg),
                ));
            }
        }
        for (source, batch) in batches {
            let fallback = match source {
                Provenance::External(id) => match external_configs.get(&id) {
                    Some(c) => c.clone(),
                    None => continue,
                },
                _ => source_config(cfg, ego_cfg)?,
            };
            let outcomes = engine.ingest(source, &batch, &fallback)?;
            let table = engine.table(source).expect("registered");
            for (m, outcome) in batch.iter().zip(outcomes) {
                let Some(id) = outcome.track() else {
                    summary.out_of_order += 1;
                    continue;
                };
                let Some(actor) = m.object_id else { continue };
                labels.insert(id, actor);
                let track = table.get(id.object).expect("just updated");
                if let Some(ok) = checker.contains(&track.corrected_set, actor, time_ms(m.timestamp)) {
                    summary.corrected_checks += 1;
                    summary.corrected_violations += usize::from(!ok);
                }
            }
        }

        // Scene.
        engine.retire(t);
        let scene = build_scene(t, ego_state.pose, engine.snapshot(t)?, fovs, obstacles)?;
        let record = scene_record(tick, now_ms, &scene, &labels, &checker, &mut summary, &mut observation)?;
        scenes.push(record);
        summary.observations.push(observation);
    }
    summary.ticks = cfg.ticks();

    let report = build_report(cfg, &scenes, &truth_log)?;
    Ok(RunOutput {
        summary,
        truth: truth_log,
        messages,
        scenes,
        report,
    })
}

fn scene_record(
    tick: usize,
    now_ms: u64,
    scene: &SceneMap,
    labels: &HashMap<TrackId, u32>,
    checker: &Checker<'_>,
    summary: &mut RunSummary,
    observation: &mut TickObservation,
) -> Result<SceneRecord, SimError> {
    let mut fused_labels: HashMap<u32, Option<u32>> = HashMap::new();
    for report in &scene.fusion {
        let member_labels: BTreeSet<Option<u32>> = report.members.iter().map(|id| labels.get(id).copied()).collect();
        let label = match member_labels.into_iter().collect::<Vec<_>>().as_slice() {
            [Some(l)] => Some(*l),
            _ => {
                summary.mixed_groups += 1;
                None
            }
        };
        fused_labels.insert(report.group_id, label);
    }

    let mut tracks = Vec::with_capacity(scene.tracks.len());
    for track in &scene.tracks {
        let label = match track.id.provenance {
            Provenance::Fused => fused_labels.get(&track.id.object).copied().flatten(),
            _ => labels.get(&track.id).copied(),
        };
        if let Some(actor) = label {
            if let Some(ok) = checker.contains(&track.corrected_set, actor, now_ms) {
                if track.id.provenance == Provenance::Fused {
                    summary.fused_checks += 1;
                    summary.fused_violations += usize::from(!ok);
                    observation.fused.insert(actor);
                } else {
                    summary.aligned_checks += 1;
                    summary.aligned_violations += usize::from(!ok);
                }
            }
            if track.id.provenance == Provenance::Local {
                observation.ego_local.insert(actor);
            }
        }
        tracks.push(TrackRecord::new(track, &scene.ego_pose, label)?);
    }

    Ok(SceneRecord {
        tick,
        time_ms: now_ms,
        ego_pose: scene.ego_pose.into(),
        tracks,
        associations: scene
            .associations
            .iter()
            .map(|g| g.iter().map(ToString::to_string).collect())
            .collect(),
        fusion: scene
            .fusion
            .iter()
            .map(|f| FusionRecord {
                group_id: f.group_id,
                members: f.members.iter().map(ToString::to_string).collect(),
                weights: f.weights.clone(),
                area: f.area,
                center_ev: [f.center_ev.x, f.center_ev.y],
            })
            .collect(),
    })
}
