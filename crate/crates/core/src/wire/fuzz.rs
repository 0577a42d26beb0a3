use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{
    decode, encode, CpmMessage, EstimateShare, ManagementContainer, PerceivedObject, StationDataContainer, StationType,
    WireError, WireMessage,
};
use crate::estimator::ClassHint;
use crate::frames::Point;
use crate::zonoset::Zonotope;

/// Outcome counts of a fuzzing campaign.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FuzzStats {
    pub buffers: usize,
    pub decoded: usize,
    pub errors: BTreeMap<&'static str, usize>,
    pub panics: usize,
}

fn error_kind(e: &WireError) -> &'static str {
    match e {
        WireError::BadMagic(_) => "bad_magic",
        WireError::BadVersion(_) => "bad_version",
        WireError::Truncated { .. } => "truncated",
        WireError::LengthOverrun { .. } => "length_overrun",
        WireError::InvalidField(_) => "invalid_field",
        WireError::TrailingBytes(_) => "trailing_bytes",
    }
}

fn random_class<R: Rng>(rng: &mut R) -> ClassHint {
    match rng.gen_range(0..3) {
        0 => ClassHint::Unknown,
        1 => ClassHint::Vehicle,
        _ => ClassHint::Pedestrian,
    }
}

/// A random valid message; roughly one in four is an estimate share.
pub fn random_message<R: Rng>(rng: &mut R) -> WireMessage {
    let f = |rng: &mut R| rng.gen_range(-1e4..1e4);
    if rng.gen_bool(0.25) {
        let cols = rng.gen_range(0..12);
        let data: Vec<f64> = (0..3 * cols).map(|_| rng.gen_range(-10.0..10.0)).collect();
        return WireMessage::Estimate(EstimateShare {
            station_id: rng.gen(),
            track_id: rng.gen(),
            zonotope: Zonotope::new(
                DVector::from_fn(3, |_, _| f(rng)),
                DMatrix::from_row_slice(3, cols, &data),
            )
            .expect("three rows"),
            heading: f(rng),
            generation_time_ms: rng.gen(),
        });
    }
    let n = rng.gen_range(0..=16);
    WireMessage::Cpm(CpmMessage {
        management: ManagementContainer {
            station_id: rng.gen(),
            station_type: if rng.gen() {
                StationType::Rsu
            } else {
                StationType::Vehicle
            },
            reference_position: Point::new(f(rng), f(rng)),
        },
        station_data: StationDataContainer {
            heading: f(rng),
            speed: f(rng),
            ref_point_offset: Point::new(f(rng), f(rng)),
        },
        perceived_objects: (0..n)
            .map(|_| PerceivedObject {
                object_id: rng.gen(),
                x: f(rng),
                y: f(rng),
                speed: f(rng),
                heading: f(rng),
                length: f(rng),
                width: f(rng),
                half_widths: [
                    rng.gen_range(0.0..5.0),
                    rng.gen_range(0.0..5.0),
                    rng.gen_range(0.0..5.0),
                ],
                class: random_class(rng),
            })
            .collect(),
        generation_time_ms: rng.gen(),
    })
}

/// Random buffer: pure noise, a mutated valid message, or a truncated or
/// extended valid message, chosen in turn.
pub fn random_buffer<R: Rng>(rng: &mut R, i: usize) -> Vec<u8> {
    match i % 3 {
        0 => {
            let len = rng.gen_range(0..512);
            let mut b: Vec<u8> = (0..len).map(|_| rng.gen()).collect();
            if rng.gen_bool(0.5) && b.len() >= 5 {
                let magic: &[u8; 4] = if rng.gen() { b"CPM1" } else { b"EST1" };
                b[..4].copy_from_slice(magic);
                b[4] = 1;
            }
            b
        }
        1 => {
            let mut b = encode(&random_message(rng)).expect("valid message");
            for _ in 0..rng.gen_range(1..8) {
                let at = rng.gen_range(0..b.len());
                b[at] = rng.gen();
            }
            b
        }
        _ => {
            let mut b = encode(&random_message(rng)).expect("valid message");
            if rng.gen() {
                b.truncate(rng.gen_range(0..b.len()));
            } else {
                b.extend((0..rng.gen_range(1..16)).map(|_| rng.gen::<u8>()));
            }
            b
        }
    }
}

/// Decodes `iterations` random buffers, counting outcomes and panics.
pub fn fuzz_decode(seed: u64, iterations: usize) -> FuzzStats {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut stats = FuzzStats::default();
    for i in 0..iterations {
        let buf = random_buffer(&mut rng, i);
        stats.buffers += 1;
        match catch_unwind(AssertUnwindSafe(|| decode(&buf))) {
            Ok(Ok(_)) => stats.decoded += 1,
            Ok(Err(e)) => *stats.errors.entry(error_kind(&e)).or_default() += 1,
            Err(_) => stats.panics += 1,
        }
    }
    stats
}
