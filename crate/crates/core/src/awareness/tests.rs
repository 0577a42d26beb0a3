use nalgebra::{DMatrix, DVector, Vector3};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::estimator::{ClassHint, Footprint, InitialRadii};
use crate::frames::{Point, Pose2D};
use crate::zonoset::{NoiseBound, Zonotope};

fn source_config() -> SourceConfig {
    let noise = NoiseBound::new(
        DVector::from_vec(vec![0.05, 0.05, 0.1]),
        DVector::from_vec(vec![0.3, 0.3, 0.2]),
        0.1,
    )
    .unwrap();
    SourceConfig {
        filter: FilterConfig::new(noise),
        initial_radii: InitialRadii {
            vehicle: [1.0; 3],
            pedestrian: [1.0; 3],
            unknown: None,
        },
    }
}

fn meas(x: f64, y: f64, t: f64, source: Provenance, id: Option<u32>, class: ClassHint) -> Measurement {
    Measurement {
        y: Vector3::new(x, y, 0.0),
        heading: 0.0,
        half_widths: Vector3::new(0.3, 0.3, 0.2),
        timestamp: t,
        source,
        object_id: id,
        class,
        footprint: Footprint {
            length: 4.0,
            width: 2.0,
        },
    }
}

fn local(x: f64, y: f64, t: f64) -> Measurement {
    meas(x, y, t, Provenance::Local, Some(99), ClassHint::Vehicle)
}

fn track(id: TrackId, center: [f64; 3], r: f64) -> RoadUserTrack {
    RoadUserTrack {
        id,
        corrected_set: Zonotope::from_box(DVector::from_row_slice(&center), &DVector::from_element(3, r)),
        heading: 0.0,
        last_update: 0.0,
        class: ClassHint::Vehicle,
        footprint: Footprint {
            length: 4.0,
            width: 2.0,
        },
    }
}

fn lid(object: u32) -> TrackId {
    TrackId {
        provenance: Provenance::Local,
        object,
    }
}

fn xid(station: u32, object: u32) -> TrackId {
    TrackId {
        provenance: Provenance::External(station),
        object,
    }
}

#[test]
fn first_measurement_initializes_then_updates() {
    let mut table = TrackTable::new(Provenance::Local, source_config()).unwrap();
    let out = table.ingest(&[local(0.0, 0.0, 0.0)]).unwrap();
    assert_eq!(out, vec![IngestOutcome::Initialized(lid(0))]);
    for k in 1..20 {
        let out = table.ingest(&[local(0.0, 0.0, k as f64 * 0.1)]).unwrap();
        assert_eq!(out, vec![IngestOutcome::Updated(lid(0))]);
    }
    assert_eq!(table.len(), 1);
}

#[test]
fn local_identity_ignores_sender_ids() {
    let mut table = TrackTable::new(Provenance::Local, source_config()).unwrap();
    table.ingest(&[local(0.0, 0.0, 0.0)]).unwrap();
    let out = table.ingest(&[local(0.2, 0.1, 0.1)]).unwrap();
    assert_eq!(out[0].track(), Some(lid(0)));
}

#[test]
fn gating_respects_distance_and_class() {
    let mut table = TrackTable::new(Provenance::Local, source_config()).unwrap();
    table.ingest(&[local(0.0, 0.0, 0.0), local(20.0, 0.0, 0.0)]).unwrap();
    let out = table
        .ingest(&[
            local(20.3, 0.0, 0.1),
            local(0.1, 0.0, 0.1),
            local(50.0, 0.0, 0.1),
            meas(0.0, 0.2, 0.1, Provenance::Local, None, ClassHint::Pedestrian),
        ])
        .unwrap();
    assert_eq!(out[0], IngestOutcome::Updated(lid(1)));
    assert_eq!(out[1], IngestOutcome::Updated(lid(0)));
    assert_eq!(out[2], IngestOutcome::Initialized(lid(2)));
    assert_eq!(out[3], IngestOutcome::Initialized(lid(3)));
}

#[test]
fn greedy_assignment_prefers_nearest_pair() {
    let mut table = TrackTable::new(Provenance::Local, source_config()).unwrap();
    table.ingest(&[local(0.0, 0.0, 0.0)]).unwrap();
    let out = table.ingest(&[local(2.0, 0.0, 0.1), local(0.5, 0.0, 0.1)]).unwrap();
    assert_eq!(out[1], IngestOutcome::Updated(lid(0)));
    assert_eq!(out[0], IngestOutcome::Initialized(lid(1)));
}

#[test]
fn external_identity_follows_object_id() {
    let src = Provenance::External(4);
    let mut table = TrackTable::new(src, source_config()).unwrap();
    let out = table
        .ingest(&[meas(0.0, 0.0, 0.0, src, Some(17), ClassHint::Vehicle)])
        .unwrap();
    assert_eq!(out, vec![IngestOutcome::Initialized(xid(4, 17))]);
    let out = table
        .ingest(&[meas(0.0, 0.1, 0.1, src, Some(17), ClassHint::Vehicle)])
        .unwrap();
    assert_eq!(out, vec![IngestOutcome::Updated(xid(4, 17))]);
}

#[test]
fn out_of_order_measurements_are_dropped_and_counted() {
    let mut table = TrackTable::new(Provenance::Local, source_config()).unwrap();
    table.ingest(&[local(0.0, 0.0, 1.0)]).unwrap();
    let before = table.get(0).unwrap().clone();
    let out = table.ingest(&[local(0.0, 0.0, 0.5)]).unwrap();
    assert_eq!(out, vec![IngestOutcome::DroppedOutOfOrder]);
    assert_eq!(table.dropped(), 1);
    assert_eq!(table.get(0).unwrap(), &before);
}

#[test]
fn fused_source_is_rejected() {
    assert_eq!(
        TrackTable::new(Provenance::Fused, source_config()).unwrap_err(),
        AwarenessError::FusedSource
    );
}

#[test]
fn stale_tracks_are_retired() {
    let mut table = TrackTable::new(Provenance::Local, source_config()).unwrap();
    table.ingest(&[local(0.0, 0.0, 0.0), local(30.0, 0.0, 0.0)]).unwrap();
    table.ingest(&[local(30.0, 0.0, 1.5)]).unwrap();
    assert_eq!(table.retire(2.0), 0);
    assert_eq!(table.retire(2.1), 1);
    assert!(table.get(0).is_none() && table.get(1).is_some());
}

#[test]
fn aligned_tracks_are_predicted_to_scene_time() {
    let mut table = TrackTable::new(Provenance::Local, source_config()).unwrap();
    let mut m = local(0.0, 0.0, 0.0);
    m.y[2] = 2.0;
    table.ingest(&[m]).unwrap();
    let aligned = table.aligned(0.3).unwrap();
    assert_eq!(aligned[0].last_update, 0.3);
    assert!((aligned[0].corrected_set.center()[0] - 0.6).abs() < 1e-12);
    assert!(aligned[0].corrected_set.generator_trace() > table.get(0).unwrap().corrected_set.generator_trace());
}

#[test]
fn associate_examples() {
    let a = track(lid(0), [0.0, 0.0, 0.0], 1.0);
    let b = track(xid(1, 0), [10.0, 0.0, 0.0], 1.0);
    assert_eq!(associate(&[a.clone(), b]).unwrap(), vec![vec![lid(0)], vec![xid(1, 0)]]);

    // A meets B, B meets C, A and C are disjoint.
    let b = track(xid(1, 0), [1.8, 0.0, 0.0], 1.0);
    let c = track(xid(2, 0), [3.6, 0.0, 0.0], 1.0);
    assert!(!a
        .corrected_set
        .project(&[0, 1])
        .intersects(&c.corrected_set.project(&[0, 1]))
        .unwrap());
    assert_eq!(associate(&[c, a, b]).unwrap(), vec![vec![lid(0), xid(1, 0), xid(2, 0)]]);
}

#[test]
fn association_ignores_speed() {
    let a = track(lid(0), [0.0, 0.0, 0.0], 1.0);
    let b = track(xid(1, 0), [0.5, 0.0, 50.0], 1.0);
    assert_eq!(associate(&[a, b]).unwrap().len(), 1);
}

fn random_tracks(rng: &mut ChaCha8Rng, n: usize) -> Vec<RoadUserTrack> {
    (0..n)
        .map(|i| {
            let mut t = track(
                xid(i as u32 % 3, i as u32),
                [
                    rng.gen_range(-10.0..10.0),
                    rng.gen_range(-10.0..10.0),
                    rng.gen_range(0.0..5.0),
                ],
                1.0,
            );
            let g = DMatrix::from_fn(3, 3, |_, _| rng.gen_range(-1.0..1.0));
            t.corrected_set = Zonotope::new(t.corrected_set.center().clone(), g).unwrap();
            t
        })
        .collect()
}

#[test]
fn association_is_order_independent() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..50 {
        let mut tracks = random_tracks(&mut rng, 8);
        let groups = associate(&tracks).unwrap();
        let flat: Vec<TrackId> = groups.iter().flatten().copied().collect();
        assert_eq!(flat.len(), tracks.len());
        for _ in 0..5 {
            tracks.shuffle(&mut rng);
            assert_eq!(associate(&tracks).unwrap(), groups);
        }
    }
}

#[test]
fn association_is_symmetric() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..200 {
        let t = random_tracks(&mut rng, 2);
        let ab = associate(&t).unwrap().len();
        let ba = associate(&[t[1].clone(), t[0].clone()]).unwrap().len();
        assert_eq!(ab, ba);
    }
}

#[test]
fn fuse_group_examples() {
    let ego = Pose2D::new(0.0, 0.0, 0.0);
    let a = track(lid(0), [1.0, 2.0, 3.0], 0.5);
    let b = track(xid(1, 0), [1.0, 2.0, 3.0], 0.5);
    let r = fuse_group(0, &[a.clone(), b], &ego).unwrap();
    assert_eq!(r.fused_set.center(), a.corrected_set.center());
    assert_eq!(r.fused_set.interval_hull(), a.corrected_set.interval_hull());
    assert!((r.area - 1.0).abs() < 1e-12);

    let a = track(lid(0), [0.0, 0.0, 0.0], 1.0);
    let b = track(xid(1, 0), [1.0, 0.0, 0.0], 1.0);
    let r = fuse_group(3, &[a, b], &ego).unwrap();
    assert_eq!(r.weights, vec![0.5, 0.5]);
    assert_eq!(r.fused_set.center().as_slice(), &[0.5, 0.0, 0.0]);
    assert_eq!(r.fused_set.num_generators(), 6);
    assert!(r.fused_set.generators().iter().all(|v| *v == 0.0 || *v == 0.5));
    assert_eq!(r.center_ev, Point::new(0.5, 0.0));
    assert!((r.weights.iter().sum::<f64>() - 1.0).abs() <= 1e-12);

    assert_eq!(
        fuse_group(0, &[track(lid(0), [0.0; 3], 1.0)], &ego).unwrap_err(),
        AwarenessError::GroupTooSmall(1)
    );
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]
    #[test]
    fn fused_set_contains_member_intersection(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ego = Pose2D::new(0.0, 0.0, 0.0);
        let base = Vector3::new(rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0), rng.gen_range(0.0..3.0));
        let members: Vec<RoadUserTrack> = (0..rng.gen_range(2..4u32))
            .map(|i| {
                let shift = Vector3::new(rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5));
                let g = DMatrix::from_fn(3, 4, |_, _| rng.gen_range(-1.0..1.0));
                let mut t = track(xid(i, 0), [0.0; 3], 1.0);
                t.corrected_set = Zonotope::new(DVector::from_column_slice((base + shift).as_slice()), g).unwrap();
                t
            })
            .collect();
        let report = fuse_group(0, &members, &ego).unwrap();
        let first = &members[0].corrected_set;
        for _ in 0..200 {
            let beta = DVector::from_fn(first.num_generators(), |_, _| rng.gen_range(-1.0..=1.0));
            let x = first.point_at(&beta);
            if members.iter().all(|m| m.corrected_set.contains_point(&x).unwrap()) {
                prop_assert!(report.fused_set.contains_point(&x).unwrap());
            }
        }
    }
}

#[test]
fn scene_without_external_sources_is_local_view() {
    let mut engine = AwarenessEngine::new();
    engine.add_source(Provenance::Local, source_config()).unwrap();
    engine
        .ingest(
            Provenance::Local,
            &[local(0.0, 0.0, 0.0), local(20.0, 0.0, 0.0)],
            &source_config(),
        )
        .unwrap();
    let snap = engine.snapshot(0.0).unwrap();
    let scene = build_scene(0.0, Pose2D::new(0.0, 0.0, 0.0), snap.clone(), vec![], vec![]).unwrap();
    assert_eq!(scene.tracks, snap);
    assert!(scene.associations.is_empty() && scene.fusion.is_empty());
}

#[test]
fn scene_associations_partition_fused_members() {
    let mut engine = AwarenessEngine::new();
    let cfg = source_config();
    engine
        .ingest(Provenance::Local, &[local(0.0, 0.0, 0.0), local(20.0, 0.0, 0.0)], &cfg)
        .unwrap();
    for s in 1..=2 {
        let src = Provenance::External(s);
        let ms = [
            meas(0.2, 0.1, 0.0, src, Some(5), ClassHint::Vehicle),
            meas(40.0, 0.0, 0.0, src, Some(6), ClassHint::Vehicle),
        ];
        engine.ingest(src, &ms, &cfg).unwrap();
    }
    let scene = build_scene(
        0.0,
        Pose2D::new(0.0, 0.0, 0.0),
        engine.snapshot(0.0).unwrap(),
        vec![],
        vec![],
    )
    .unwrap();
    assert_eq!(
        scene.associations,
        vec![vec![lid(0), xid(1, 5), xid(2, 5)], vec![xid(1, 6), xid(2, 6)]]
    );
    let mut seen = std::collections::BTreeSet::new();
    for g in &scene.associations {
        assert!(g.len() >= 2);
        for id in g {
            assert!(seen.insert(*id));
        }
    }
    let fused: Vec<_> = scene
        .tracks
        .iter()
        .filter(|t| t.provenance() == Provenance::Fused)
        .collect();
    assert_eq!(fused.len(), 2);
    assert_eq!(scene.tracks.len(), 6 + 2);
}

#[test]
fn removing_a_source_leaves_others_untouched() {
    let cfg = source_config();
    let run = |with_second: bool| {
        let mut engine = AwarenessEngine::new();
        for k in 0..30 {
            let t = k as f64 * 0.1;
            engine
                .ingest(Provenance::Local, &[local(0.1 * k as f64, 0.0, t)], &cfg)
                .unwrap();
            if with_second {
                let src = Provenance::External(2);
                engine
                    .ingest(
                        src,
                        &[meas(0.1 * k as f64, 0.1, t, src, Some(1), ClassHint::Vehicle)],
                        &cfg,
                    )
                    .unwrap();
            }
        }
        engine
            .table(Provenance::Local)
            .unwrap()
            .tracks()
            .cloned()
            .collect::<Vec<_>>()
    };
    assert_eq!(run(true), run(false));
}

#[test]
fn containment_holds_with_dropped_measurements() {
    let cfg = source_config();
    let noise = &cfg.filter.noise;
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let mut checked = 0;
    for _ in 0..20 {
        let mut table = TrackTable::new(Provenance::External(1), cfg.clone()).unwrap();
        let heading: f64 = rng.gen_range(-3.0..3.0);
        let mut state = Vector3::new(0.0, 0.0, 2.0);
        for k in 0..100 {
            if k > 0 {
                let dt = noise.step;
                let q = Vector3::from_fn(|i, _| rng.gen_range(-noise.process[i]..=noise.process[i]));
                state = Vector3::new(
                    state[0] + dt * heading.cos() * state[2],
                    state[1] + dt * heading.sin() * state[2],
                    state[2],
                ) + q;
            }
            if k > 0 && rng.gen_bool(0.3) {
                continue;
            }
            let r = Vector3::new(0.3, 0.3, 0.2);
            let y = state + Vector3::from_fn(|i, _| rng.gen_range(-r[i]..=r[i]));
            let mut m = meas(
                y[0],
                y[1],
                k as f64 * noise.step,
                Provenance::External(1),
                Some(0),
                ClassHint::Vehicle,
            );
            m.y[2] = y[2];
            m.heading = heading;
            table.ingest(&[m]).unwrap();
            let set = &table.get(0).unwrap().corrected_set;
            assert!(set
                .contains_point(&DVector::from_column_slice(state.as_slice()))
                .unwrap());
            checked += 1;
        }
    }
    assert!(checked > 1000);
}

#[test]
fn metrics_examples() {
    let truth = [TruthSample {
        time_ms: 100,
        actor: 1,
        position: Point::new(3.0, 4.0),
    }];
    let est = |actor, time_ms, c: Point| LabeledEstimate {
        time_ms,
        actor,
        provenance: Provenance::Fused,
        center: c,
        area: 2.0,
    };
    let table = metrics(
        &[
            est(Some(1), 100, Point::zeros()),
            est(None, 100, Point::zeros()),
            est(Some(1), 200, Point::zeros()),
        ],
        &truth,
    );
    assert_eq!(table.excluded, 2);
    let row = table.row(1, Provenance::Fused).unwrap();
    assert_eq!((row.samples, row.rmse_m, row.mean_area_m2), (1, 5.0, 2.0));

    let table = metrics(&[est(Some(1), 100, Point::new(3.0, 4.0))], &truth);
    assert_eq!(table.rows[0].rmse_m, 0.0);
    assert!(table
        .to_csv()
        .starts_with("actor,provenance,samples,rmse_m,mean_area_m2\n1,fused,1,0.000000"));
}
