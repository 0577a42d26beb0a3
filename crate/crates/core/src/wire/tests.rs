use std::f64::consts::{FRAC_PI_2, PI};

use nalgebra::{DMatrix, DVector, Vector3};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::frames::{synth_perceive, FovSector, TruthObject};

fn empty_cpm() -> CpmMessage {
    CpmMessage {
        management: ManagementContainer {
            station_id: 1,
            station_type: StationType::Vehicle,
            reference_position: Point::new(0.0, 0.0),
        },
        station_data: StationDataContainer {
            heading: 0.0,
            speed: 0.0,
            ref_point_offset: Point::zeros(),
        },
        perceived_objects: Vec::new(),
        generation_time_ms: 0,
    }
}

fn object(id: u16, x: f64, y: f64) -> PerceivedObject {
    PerceivedObject {
        object_id: id,
        x,
        y,
        speed: 0.0,
        heading: 0.0,
        length: 4.0,
        width: 2.0,
        half_widths: [0.1, 0.1, 0.1],
        class: ClassHint::Vehicle,
    }
}

fn golden_cpm() -> CpmMessage {
    CpmMessage {
        management: ManagementContainer {
            station_id: 7,
            station_type: StationType::Rsu,
            reference_position: Point::new(12.5, -3.25),
        },
        station_data: StationDataContainer {
            heading: 0.5,
            speed: 0.0,
            ref_point_offset: Point::new(1.0, 0.0),
        },
        perceived_objects: vec![PerceivedObject {
            object_id: 42,
            x: 10.25,
            y: -2.5,
            speed: 1.5,
            heading: FRAC_PI_2,
            length: 0.5,
            width: 0.5,
            half_widths: [0.3, 0.3, 0.2],
            class: ClassHint::Pedestrian,
        }],
        generation_time_ms: 123_400,
    }
}

fn golden_estimate() -> EstimateShare {
    EstimateShare {
        station_id: 3,
        track_id: 9,
        zonotope: Zonotope::new(
            DVector::from_vec(vec![1.0, 2.0, 0.5]),
            DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 2.0, 0.25, 0.0]),
        )
        .unwrap(),
        heading: -0.75,
        generation_time_ms: 500,
    }
}

fn golden_hex(name: &str) -> String {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/golden/");
    std::fs::read_to_string(format!("{path}{name}"))
        .unwrap()
        .trim()
        .to_owned()
}

#[test]
fn empty_message_has_fixed_size() {
    let bytes = encode_cpm(&empty_cpm()).unwrap();
    assert_eq!(bytes.len(), CPM_HEADER_LEN);
    assert_eq!(&bytes[..4], b"CPM1");
    assert_eq!(bytes[4], 1);
    assert_eq!(decode(&bytes).unwrap(), WireMessage::Cpm(empty_cpm()));
}

#[test]
fn one_object_adds_one_record() {
    let mut m = empty_cpm();
    m.perceived_objects.push(object(1, 2.0, 3.0));
    assert_eq!(encode_cpm(&m).unwrap().len(), CPM_HEADER_LEN + OBJECT_RECORD_LEN);
}

#[test]
fn golden_vectors_are_stable() {
    assert_eq!(
        hex::encode(encode_cpm(&golden_cpm()).unwrap()),
        golden_hex("cpm_one_object.hex")
    );
    assert_eq!(
        hex::encode(encode_estimate(&golden_estimate()).unwrap()),
        golden_hex("est_small.hex")
    );
    let bytes = hex::decode(golden_hex("cpm_one_object.hex")).unwrap();
    assert_eq!(decode(&bytes).unwrap(), WireMessage::Cpm(golden_cpm()));
}

#[test]
fn oversize_object_list_is_rejected() {
    let mut m = empty_cpm();
    m.perceived_objects = (0..129).map(|i| object(i, 0.0, 0.0)).collect();
    assert!(matches!(
        encode_cpm(&m),
        Err(WireError::LengthOverrun { declared: 129, .. })
    ));
    m.perceived_objects.pop();
    assert!(encode_cpm(&m).is_ok());
}

#[test]
fn negative_half_width_is_rejected() {
    let mut m = empty_cpm();
    let mut o = object(1, 0.0, 0.0);
    o.half_widths[2] = -0.1;
    m.perceived_objects.push(o);
    assert_eq!(encode_cpm(&m), Err(WireError::InvalidField("halfWidths")));
}

#[test]
fn decode_errors_are_distinct() {
    let bytes = encode_cpm(&golden_cpm()).unwrap();
    assert!(matches!(
        decode(&bytes[..bytes.len() - 1]),
        Err(WireError::Truncated { .. })
    ));
    assert!(matches!(decode(&bytes[..2]), Err(WireError::Truncated { .. })));

    let mut bad = bytes.clone();
    bad[0] = b'X';
    assert_eq!(decode(&bad), Err(WireError::BadMagic(*b"XPM1")));

    let mut bad = bytes.clone();
    bad[4] = 2;
    assert_eq!(decode(&bad), Err(WireError::BadVersion(2)));

    let mut bad = bytes.clone();
    let count_at = CPM_HEADER_LEN - 8 - 2;
    bad[count_at..count_at + 2].copy_from_slice(&200u16.to_le_bytes());
    assert!(matches!(
        decode(&bad),
        Err(WireError::LengthOverrun { declared: 200, .. })
    ));

    let mut bad = bytes.clone();
    bad.push(0);
    assert_eq!(decode(&bad), Err(WireError::TrailingBytes(1)));

    let mut bad = bytes;
    bad[9] = 5;
    assert_eq!(decode(&bad), Err(WireError::InvalidField("stationType")));
}

#[test]
fn estimate_with_huge_column_count_is_rejected() {
    let mut bytes = encode_estimate(&golden_estimate()).unwrap();
    let cols_at = 4 + 1 + 8 + 24 + 2;
    bytes[cols_at..cols_at + 2].copy_from_slice(&u16::MAX.to_le_bytes());
    assert!(matches!(decode(&bytes), Err(WireError::LengthOverrun { .. })));
    bytes[cols_at..cols_at + 2].copy_from_slice(&200u16.to_le_bytes());
    assert!(matches!(decode(&bytes), Err(WireError::Truncated { .. })));
}

#[test]
fn random_bytes_never_panic() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let seed = encode_cpm(&golden_cpm()).unwrap();
    for i in 0..5000 {
        let buf: Vec<u8> = if i % 2 == 0 {
            let len = rng.gen_range(0..300);
            (0..len).map(|_| rng.gen()).collect()
        } else {
            let mut b = seed.clone();
            for _ in 0..rng.gen_range(1..6) {
                let at = rng.gen_range(0..b.len());
                b[at] = rng.gen();
            }
            b.truncate(rng.gen_range(0..=b.len()));
            b
        };
        let _ = decode(&buf);
    }
}

fn arb_f64() -> impl Strategy<Value = f64> {
    prop_oneof![-1e6..1e6f64, Just(0.0), Just(-0.0), Just(f64::MAX), Just(1e-300)]
}

fn arb_class() -> impl Strategy<Value = ClassHint> {
    prop_oneof![
        Just(ClassHint::Unknown),
        Just(ClassHint::Vehicle),
        Just(ClassHint::Pedestrian)
    ]
}

prop_compose! {
    fn arb_object()(
        object_id in any::<u16>(),
        v in prop::array::uniform6(arb_f64()),
        r in prop::array::uniform3(0.0..100.0f64),
        class in arb_class(),
    ) -> PerceivedObject {
        PerceivedObject {
            object_id, x: v[0], y: v[1], speed: v[2], heading: v[3], length: v[4], width: v[5],
            half_widths: r, class,
        }
    }
}

prop_compose! {
    fn arb_cpm()(
        station_id in any::<u32>(),
        rsu in any::<bool>(),
        pos in prop::array::uniform2(-1e6..1e6f64),
        sdc in prop::array::uniform4(arb_f64()),
        objects in prop::collection::vec(arb_object(), 0..12),
        generation_time_ms in any::<u64>(),
    ) -> CpmMessage {
        CpmMessage {
            management: ManagementContainer {
                station_id,
                station_type: if rsu { StationType::Rsu } else { StationType::Vehicle },
                reference_position: Point::new(pos[0], pos[1]),
            },
            station_data: StationDataContainer {
                heading: sdc[0], speed: sdc[1], ref_point_offset: Point::new(sdc[2], sdc[3]),
            },
            perceived_objects: objects,
            generation_time_ms,
        }
    }
}

prop_compose! {
    fn arb_estimate()(
        station_id in any::<u32>(),
        track_id in any::<u32>(),
        center in prop::array::uniform3(arb_f64()),
        cols in 0usize..8,
        heading in arb_f64(),
        generation_time_ms in any::<u64>(),
    )(
        data in prop::collection::vec(-10.0..10.0f64, 3 * cols),
        station_id in Just(station_id), track_id in Just(track_id), center in Just(center),
        cols in Just(cols), heading in Just(heading), generation_time_ms in Just(generation_time_ms),
    ) -> EstimateShare {
        EstimateShare {
            station_id, track_id,
            zonotope: Zonotope::new(DVector::from_row_slice(&center), DMatrix::from_row_slice(3, cols, &data)).unwrap(),
            heading, generation_time_ms,
        }
    }
}

proptest! {
    #[test]
    fn cpm_round_trip(m in arb_cpm()) {
        let bytes = encode_cpm(&m).unwrap();
        prop_assert_eq!(bytes.len(), CPM_HEADER_LEN + m.perceived_objects.len() * OBJECT_RECORD_LEN);
        let back = decode(&bytes).unwrap();
        prop_assert_eq!(encode(&back).unwrap(), bytes);
        prop_assert_eq!(back, WireMessage::Cpm(m));
    }

    #[test]
    fn estimate_round_trip(e in arb_estimate()) {
        let bytes = encode_estimate(&e).unwrap();
        let back = decode(&bytes).unwrap();
        prop_assert_eq!(encode(&back).unwrap(), bytes);
        prop_assert_eq!(back, WireMessage::Estimate(e));
    }

    #[test]
    fn distinct_messages_encode_differently(a in arb_cpm(), b in arb_cpm()) {
        let (ea, eb) = (encode_cpm(&a).unwrap(), encode_cpm(&b).unwrap());
        // Bitwise comparison: 0.0 and -0.0 are distinct messages on the wire.
        prop_assert_eq!(ea == eb, format!("{a:?}") == format!("{b:?}"));
    }
}

#[test]
fn poc_examples() {
    let mut m = empty_cpm();
    m.perceived_objects.push(object(1, 10.0, 0.0));
    let ys = poc_to_measurements(&m);
    assert_eq!(ys[0].y, Vector3::new(10.0, 0.0, 0.0));
    assert_eq!(ys[0].source, Provenance::External(1));

    m.management.reference_position = Point::new(5.0, -2.0);
    m.station_data.heading = FRAC_PI_2;
    let ys = poc_to_measurements(&m);
    assert!((ys[0].y - Vector3::new(5.0, 8.0, 0.0)).norm() < 1e-9);
    assert!((ys[0].heading - FRAC_PI_2).abs() < 1e-12);
}

#[test]
fn reference_offset_is_applied_before_rotation() {
    let mut m = empty_cpm();
    m.station_data.heading = PI;
    m.station_data.ref_point_offset = Point::new(2.0, 0.0);
    m.perceived_objects.push(object(1, 3.0, 0.0));
    let ys = poc_to_measurements(&m);
    assert!((ys[0].y - Vector3::new(-5.0, 0.0, 0.0)).norm() < 1e-9);
}

#[test]
fn build_then_convert_recovers_measurements() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for _ in 0..200 {
        let sender = SenderState {
            station_id: 4,
            station_type: StationType::Vehicle,
            center: Pose2D::new(
                rng.gen_range(-50.0..50.0),
                rng.gen_range(-50.0..50.0),
                rng.gen_range(-PI..PI),
            ),
            speed: 3.0,
            ref_point_offset: Point::new(rng.gen_range(-3.0..3.0), 0.0),
        };
        let truth: Vec<TruthObject> = (0..4)
            .map(|id| TruthObject {
                id,
                pose: Pose2D::new(
                    sender.center.position.x + rng.gen_range(-30.0..30.0),
                    sender.center.position.y + rng.gen_range(-30.0..30.0),
                    rng.gen_range(-PI..PI),
                ),
                speed: rng.gen_range(0.0..10.0),
                footprint: Footprint {
                    length: 4.0,
                    width: 2.0,
                },
                class: ClassHint::Vehicle,
            })
            .collect();
        let fov = FovSector {
            origin: sender.center,
            range: 100.0,
            half_angle: PI,
        };
        let r = Vector3::new(0.4, 0.4, 0.2);
        let seen = synth_perceive(&fov, &truth, &[], &r, Provenance::Local, 1.0, rng.gen());
        let msg = build_cpm(&sender, &seen, 1000);
        let bytes = encode_cpm(&msg).unwrap();
        let WireMessage::Cpm(back) = decode(&bytes).unwrap() else {
            panic!("wrong kind");
        };
        let ys = poc_to_measurements(&back);
        assert_eq!(ys.len(), truth.len());
        for (y, t) in ys.iter().zip(&truth) {
            assert_eq!(y.object_id, Some(t.id));
            assert!((y.y[0] - t.pose.position.x).abs() <= r[0] + 1e-9);
            assert!((y.y[1] - t.pose.position.y).abs() <= r[1] + 1e-9);
            assert!((y.y[2] - t.speed).abs() <= r[2] + 1e-9);
            assert!((wrap_angle(y.heading - t.pose.heading)).abs() < 1e-9);
            assert_eq!(y.timestamp, 1.0);
        }
    }
}

fn cfg(drop_probability: f64, min: u64, max: u64) -> ChannelConfig {
    ChannelConfig {
        drop_probability,
        latency_min_ms: min,
        latency_max_ms: max,
        range_m: 300.0,
        seed: 11,
    }
}

#[test]
fn channel_examples() {
    let a = Pose2D::new(0.0, 0.0, 0.0);
    let b = Pose2D::new(100.0, 0.0, 0.0);
    let far = Pose2D::new(301.0, 0.0, 0.0);
    for seq in 0..500 {
        assert_eq!(channel_send(&cfg(1.0, 0, 50), &a, &b, 1000, seq), None);
        assert_eq!(channel_send(&cfg(0.0, 20, 20), &a, &b, 1000, seq), Some(1020));
        assert_eq!(channel_send(&cfg(0.0, 20, 20), &a, &far, 1000, seq), None);
        let t = channel_send(&cfg(0.0, 10, 40), &a, &b, 1000, seq).unwrap();
        assert!((1010..=1040).contains(&t));
    }
}

#[test]
fn channel_drop_rate_is_close_to_configured() {
    let (a, b) = (Pose2D::new(0.0, 0.0, 0.0), Pose2D::new(10.0, 0.0, 0.0));
    let c = cfg(0.3, 0, 100);
    let dropped = (0..10_000u64)
        .filter(|&s| channel_send(&c, &a, &b, 0, s).is_none())
        .count();
    let rate = dropped as f64 / 10_000.0;
    assert!((rate - 0.3).abs() <= 0.02, "rate {rate}");
}

#[test]
fn channel_queue_orders_by_time_then_seq() {
    let (a, b) = (Pose2D::new(0.0, 0.0, 0.0), Pose2D::new(10.0, 0.0, 0.0));
    let schedule = |seed| {
        let ch = Channel::new(ChannelConfig {
            seed,
            ..cfg(0.2, 0, 30)
        })
        .unwrap();
        for t in 0..50u64 {
            ch.send((1, &a), (2, &b), vec![t as u8], t * 10);
        }
        let out = ch.deliver_until(u64::MAX);
        assert_eq!(ch.pending(), 0);
        out
    };
    let first = schedule(3);
    assert!(first
        .windows(2)
        .all(|w| (w[0].delivery_time_ms, w[0].seq) < (w[1].delivery_time_ms, w[1].seq)));
    assert_eq!(first, schedule(3));
    assert_ne!(first, schedule(4));
}

#[test]
fn channel_rejects_bad_config() {
    assert!(Channel::new(cfg(1.5, 0, 0)).is_err());
    assert!(Channel::new(cfg(0.5, 10, 0)).is_err());
    assert!(Channel::new(ChannelConfig {
        range_m: 0.0,
        ..cfg(0.5, 0, 0)
    })
    .is_err());
}

#[test]
fn message_record_carries_hex() {
    let bytes = encode_cpm(&empty_cpm()).unwrap();
    let rec = MessageRecord::new(3, 1, 2, 100, Some(120), &bytes);
    assert_eq!(rec.kind, "CPM1");
    assert_eq!(hex::decode(&rec.payload_hex).unwrap(), bytes);
}

#[test]
fn fuzz_harness_reports_no_panics() {
    let stats = fuzz_decode(1, 3000);
    assert_eq!(stats.buffers, 3000);
    assert_eq!(stats.panics, 0);
    assert!(stats.errors.len() >= 4, "{stats:?}");
    assert_eq!(fuzz_decode(1, 3000), stats);
}
