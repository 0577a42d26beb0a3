//! Simplified collaborative perception messages, their binary codec and a
//! simulated lossy broadcast channel.
//!
//! A CPM carries three containers: management (who sent it and where its
//! reference point is), station data (sender heading, speed and the body
//! frame offset from the reference point to the sender's geometric center)
//! and perceived objects. Object positions and headings are expressed in the
//! sender's center frame. Per-object noise half-widths travel with each
//! object and are axis-aligned in the global frame.

mod channel;
mod codec;
mod fuzz;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

pub use channel::{channel_send, Channel, ChannelConfig, ChannelError, Delivery};
pub use codec::{
    decode, encode, encode_cpm, encode_estimate, WireError, CPM_HEADER_LEN, CPM_MAGIC, ESTIMATE_MAGIC,
    MAX_WIRE_GENERATORS, OBJECT_RECORD_LEN, WIRE_VERSION,
};
pub use fuzz::{fuzz_decode, random_buffer, random_message, FuzzStats};

use crate::estimator::{wrap_angle, ClassHint, Footprint, Measurement, Provenance};
use crate::frames::{global_to_local, local_to_global, reference_offset, Point, Pose2D};
use crate::zonoset::Zonotope;

pub const MAX_PERCEIVED_OBJECTS: usize = 128;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StationType {
    Vehicle,
    Rsu,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ManagementContainer {
    pub station_id: u32,
    pub station_type: StationType,
    pub reference_position: Point,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StationDataContainer {
    pub heading: f64,
    pub speed: f64,
    pub ref_point_offset: Point,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PerceivedObject {
    pub object_id: u16,
    pub x: f64,
    pub y: f64,
    pub speed: f64,
    /// Relative to the sender heading.
    pub heading: f64,
    pub length: f64,
    pub width: f64,
    pub half_widths: [f64; 3],
    pub class: ClassHint,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CpmMessage {
    pub management: ManagementContainer,
    pub station_data: StationDataContainer,
    pub perceived_objects: Vec<PerceivedObject>,
    pub generation_time_ms: u64,
}

/// A shared estimate set, for stations that run the filter themselves.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimateShare {
    pub station_id: u32,
    pub track_id: u32,
    pub zonotope: Zonotope,
    pub heading: f64,
    pub generation_time_ms: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum WireMessage {
    Cpm(CpmMessage),
    Estimate(EstimateShare),
}

/// Sender description used when packaging measurements.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SenderState {
    pub station_id: u32,
    pub station_type: StationType,
    /// Pose of the geometric center.
    pub center: Pose2D,
    pub speed: f64,
    /// Body-frame vector from the reference point to the center.
    pub ref_point_offset: Point,
}

/// Packages global-frame measurements into a CPM. Objects without an id are
/// numbered by position in `measurements`.
pub fn build_cpm(sender: &SenderState, measurements: &[Measurement], generation_time_ms: u64) -> CpmMessage {
    let center = sender.center;
    let reference_position = local_to_global(&center, &(-sender.ref_point_offset));
    let perceived_objects = measurements
        .iter()
        .take(MAX_PERCEIVED_OBJECTS)
        .enumerate()
        .map(|(i, m)| {
            let rel = global_to_local(&center, &Point::new(m.y[0], m.y[1]));
            PerceivedObject {
                object_id: m.object_id.unwrap_or(i as u32) as u16,
                x: rel.x,
                y: rel.y,
                speed: m.y[2],
                heading: wrap_angle(m.heading - center.heading),
                length: m.footprint.length,
                width: m.footprint.width,
                half_widths: [m.half_widths[0], m.half_widths[1], m.half_widths[2]],
                class: m.class,
            }
        })
        .collect();
    CpmMessage {
        management: ManagementContainer {
            station_id: sender.station_id,
            station_type: sender.station_type,
            reference_position,
        },
        station_data: StationDataContainer {
            heading: center.heading,
            speed: sender.speed,
            ref_point_offset: sender.ref_point_offset,
        },
        perceived_objects,
        generation_time_ms,
    }
}

/// Converts every perceived object into a global-frame measurement
/// attributed to the sending station.
pub fn poc_to_measurements(msg: &CpmMessage) -> Vec<Measurement> {
    let reference = Pose2D {
        position: msg.management.reference_position,
        heading: msg.station_data.heading,
    };
    let origin = reference_offset(&reference, &msg.station_data.ref_point_offset);
    let timestamp = msg.generation_time_ms as f64 / 1000.0;
    msg.perceived_objects
        .iter()
        .map(|o| {
            let p = local_to_global(&origin, &Point::new(o.x, o.y));
            Measurement {
                y: Vector3::new(p.x, p.y, o.speed),
                heading: wrap_angle(o.heading + origin.heading),
                half_widths: Vector3::from(o.half_widths),
                timestamp,
                source: Provenance::External(msg.management.station_id),
                object_id: Some(o.object_id as u32),
                class: o.class,
                footprint: Footprint {
                    length: o.length,
                    width: o.width,
                },
            }
        })
        .collect()
}

/// One line of the message log.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MessageRecord {
    pub seq: u64,
    pub sender: u32,
    pub receiver: u32,
    pub kind: String,
    pub send_time_ms: u64,
    /// `None` when the channel dropped the message.
    pub delivery_time_ms: Option<u64>,
    pub len: usize,
    pub payload_hex: String,
}

impl MessageRecord {
    pub fn new(
        seq: u64,
        sender: u32,
        receiver: u32,
        send_time_ms: u64,
        delivery_time_ms: Option<u64>,
        bytes: &[u8],
    ) -> Self {
        let kind = String::from_utf8_lossy(&bytes[..bytes.len().min(4)]).into_owned();
        Self {
            seq,
            sender,
            receiver,
            kind,
            send_time_ms,
            delivery_time_ms,
            len: bytes.len(),
            payload_hex: hex::encode(bytes),
        }
    }
}

#[cfg(test)]
mod tests;
