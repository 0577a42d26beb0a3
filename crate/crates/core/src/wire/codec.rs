//! Binary layout (all little-endian):
//!
//! ```text
//! CPM1 message
//!   magic        4   "CPM1"
//!   version      u8  = 1
//!   stationId    u32
//!   stationType  u8  (0 vehicle, 1 rsu)
//!   refPos.x     f64 (m, global)
//!   refPos.y     f64
//!   heading      f64 (rad)
//!   speed        f64 (m/s)
//!   refOffset.x  f64 (m, body frame)
//!   refOffset.y  f64
//!   objectCount  u16 (≤ 128)
//!   objects      objectCount × 75 bytes:
//!     objectId u16, m_x f64, m_y f64, m_s f64, theta f64, length f64,
//!     width f64, r_x f64, r_y f64, r_s f64, classHint u8
//!       (0 unknown, 1 vehicle, 2 pedestrian)
//!   genTime      u64 (ms since scenario start)
//!
//! EST1 message
//!   magic        4   "EST1"
//!   version      u8  = 1
//!   stationId    u32
//!   trackId      u32
//!   center       3 × f64
//!   rows         u16 (= 3)
//!   cols         u16 (≤ 256)
//!   generators   rows × cols × f64, row-major
//!   heading      f64
//!   genTime      u64
//! ```

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use super::{
    CpmMessage, EstimateShare, ManagementContainer, PerceivedObject, StationDataContainer, StationType, WireMessage,
    MAX_PERCEIVED_OBJECTS,
};
use crate::estimator::ClassHint;
use crate::frames::Point;
use crate::zonoset::Zonotope;

pub const CPM_MAGIC: [u8; 4] = *b"CPM1";
pub const ESTIMATE_MAGIC: [u8; 4] = *b"EST1";
pub const WIRE_VERSION: u8 = 1;
/// Upper bound on generator columns carried by one estimate share.
pub const MAX_WIRE_GENERATORS: usize = 256;

/// Size of a CPM with no perceived objects.
pub const CPM_HEADER_LEN: usize = 4 + 1 + 4 + 1 + 16 + 32 + 2 + 8;
/// Size of one perceived-object record.
pub const OBJECT_RECORD_LEN: usize = 2 + 9 * 8 + 1;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum WireError {
    #[error("unknown magic {0:?}")]
    BadMagic([u8; 4]),
    #[error("unsupported version {0}")]
    BadVersion(u8),
    #[error("truncated payload: needed {needed} more bytes, {available} available")]
    Truncated { needed: usize, available: usize },
    #[error("declared length {declared} exceeds limit {limit}")]
    LengthOverrun { declared: usize, limit: usize },
    #[error("invalid field: {0}")]
    InvalidField(&'static str),
    #[error("{0} trailing bytes after message")]
    TrailingBytes(usize),
}

struct Writer(Vec<u8>);

impl Writer {
    fn u8(&mut self, v: u8) {
        self.0.push(v);
    }
    fn u16(&mut self, v: u16) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn u32(&mut self, v: u32) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn u64(&mut self, v: u64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn f64(&mut self, v: f64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], WireError> {
        let available = self.buf.len() - self.pos;
        if n > available {
            return Err(WireError::Truncated { needed: n, available });
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }
    fn array<const N: usize>(&mut self) -> Result<[u8; N], WireError> {
        Ok(self.take(N)?.try_into().expect("exact length"))
    }
    fn u8(&mut self) -> Result<u8, WireError> {
        Ok(self.take(1)?[0])
    }
    fn u16(&mut self) -> Result<u16, WireError> {
        Ok(u16::from_le_bytes(self.array()?))
    }
    fn u32(&mut self) -> Result<u32, WireError> {
        Ok(u32::from_le_bytes(self.array()?))
    }
    fn u64(&mut self) -> Result<u64, WireError> {
        Ok(u64::from_le_bytes(self.array()?))
    }
    fn f64(&mut self) -> Result<f64, WireError> {
        Ok(f64::from_le_bytes(self.array()?))
    }
    fn remaining(&self) -> usize {
        self.buf.len() - self.pos
    }
}

fn class_code(c: ClassHint) -> u8 {
    match c {
        ClassHint::Unknown => 0,
        ClassHint::Vehicle => 1,
        ClassHint::Pedestrian => 2,
    }
}

fn class_from(code: u8) -> Result<ClassHint, WireError> {
    match code {
        0 => Ok(ClassHint::Unknown),
        1 => Ok(ClassHint::Vehicle),
        2 => Ok(ClassHint::Pedestrian),
        _ => Err(WireError::InvalidField("classHint")),
    }
}

fn check_half_widths(r: &[f64; 3]) -> Result<(), WireError> {
    if r.iter().all(|v| *v >= 0.0) {
        Ok(())
    } else {
        Err(WireError::InvalidField("halfWidths"))
    }
}

pub fn encode_cpm(msg: &CpmMessage) -> Result<Vec<u8>, WireError> {
    let n = msg.perceived_objects.len();
    if n > MAX_PERCEIVED_OBJECTS {
        return Err(WireError::LengthOverrun {
            declared: n,
            limit: MAX_PERCEIVED_OBJECTS,
        });
    }
    let pos = msg.management.reference_position;
    if !pos.x.is_finite() || !pos.y.is_finite() {
        return Err(WireError::InvalidField("referencePosition"));
    }
    let mut w = Writer(Vec::with_capacity(CPM_HEADER_LEN + n * OBJECT_RECORD_LEN));
    w.0.extend_from_slice(&CPM_MAGIC);
    w.u8(WIRE_VERSION);
    w.u32(msg.management.station_id);
    w.u8(match msg.management.station_type {
        StationType::Vehicle => 0,
        StationType::Rsu => 1,
    });
    w.f64(pos.x);
    w.f64(pos.y);
    w.f64(msg.station_data.heading);
    w.f64(msg.station_data.speed);
    w.f64(msg.station_data.ref_point_offset.x);
    w.f64(msg.station_data.ref_point_offset.y);
    w.u16(n as u16);
    for o in &msg.perceived_objects {
        check_half_widths(&o.half_widths)?;
        w.u16(o.object_id);
        for v in [o.x, o.y, o.speed, o.heading, o.length, o.width] {
            w.f64(v);
        }
        for v in o.half_widths {
            w.f64(v);
        }
        w.u8(class_code(o.class));
    }
    w.u64(msg.generation_time_ms);
    Ok(w.0)
}

pub fn encode_estimate(share: &EstimateShare) -> Result<Vec<u8>, WireError> {
    let z = &share.zonotope;
    if z.dim() != 3 {
        return Err(WireError::InvalidField("zonotope dimension"));
    }
    let cols = z.num_generators();
    if cols > MAX_WIRE_GENERATORS {
        return Err(WireError::LengthOverrun {
            declared: cols,
            limit: MAX_WIRE_GENERATORS,
        });
    }
    let mut w = Writer(Vec::with_capacity(4 + 1 + 8 + 24 + 4 + 24 * cols + 16));
    w.0.extend_from_slice(&ESTIMATE_MAGIC);
    w.u8(WIRE_VERSION);
    w.u32(share.station_id);
    w.u32(share.track_id);
    for v in z.center().iter() {
        w.f64(*v);
    }
    w.u16(3);
    w.u16(cols as u16);
    for row in z.generators().row_iter() {
        for v in row.iter() {
            w.f64(*v);
        }
    }
    w.f64(share.heading);
    w.u64(share.generation_time_ms);
    Ok(w.0)
}

pub fn encode(msg: &WireMessage) -> Result<Vec<u8>, WireError> {
    match msg {
        WireMessage::Cpm(m) => encode_cpm(m),
        WireMessage::Estimate(e) => encode_estimate(e),
    }
}

fn decode_cpm_body(r: &mut Reader<'_>) -> Result<CpmMessage, WireError> {
    let station_id = r.u32()?;
    let station_type = match r.u8()? {
        0 => StationType::Vehicle,
        1 => StationType::Rsu,
        _ => return Err(WireError::InvalidField("stationType")),
    };
    let reference_position = Point::new(r.f64()?, r.f64()?);
    if !reference_position.x.is_finite() || !reference_position.y.is_finite() {
        return Err(WireError::InvalidField("referencePosition"));
    }
    let heading = r.f64()?;
    let speed = r.f64()?;
    let ref_point_offset = Point::new(r.f64()?, r.f64()?);
    let count = r.u16()? as usize;
    if count > MAX_PERCEIVED_OBJECTS {
        return Err(WireError::LengthOverrun {
            declared: count,
            limit: MAX_PERCEIVED_OBJECTS,
        });
    }
    let mut perceived_objects = Vec::with_capacity(count);
    for _ in 0..count {
        let object_id = r.u16()?;
        let (x, y, speed, heading, length, width) = (r.f64()?, r.f64()?, r.f64()?, r.f64()?, r.f64()?, r.f64()?);
        let half_widths = [r.f64()?, r.f64()?, r.f64()?];
        check_half_widths(&half_widths)?;
        let class = class_from(r.u8()?)?;
        perceived_objects.push(PerceivedObject {
            object_id,
            x,
            y,
            speed,
            heading,
            length,
            width,
            half_widths,
            class,
        });
    }
    let generation_time_ms = r.u64()?;
    Ok(CpmMessage {
        management: ManagementContainer {
            station_id,
            station_type,
            reference_position,
        },
        station_data: StationDataContainer {
            heading,
            speed,
            ref_point_offset,
        },
        perceived_objects,
        generation_time_ms,
    })
}

fn decode_estimate_body(r: &mut Reader<'_>) -> Result<EstimateShare, WireError> {
    let station_id = r.u32()?;
    let track_id = r.u32()?;
    let center = DVector::from_vec(vec![r.f64()?, r.f64()?, r.f64()?]);
    let rows = r.u16()? as usize;
    if rows != 3 {
        return Err(WireError::InvalidField("generator rows"));
    }
    let cols = r.u16()? as usize;
    if cols > MAX_WIRE_GENERATORS {
        return Err(WireError::LengthOverrun {
            declared: cols,
            limit: MAX_WIRE_GENERATORS,
        });
    }
    let needed = rows * cols * 8;
    if needed > r.remaining() {
        return Err(WireError::Truncated {
            needed,
            available: r.remaining(),
        });
    }
    let mut data = Vec::with_capacity(rows * cols);
    for _ in 0..rows * cols {
        data.push(r.f64()?);
    }
    let generators = DMatrix::from_row_slice(rows, cols, &data);
    let zonotope = Zonotope::new(center, generators).map_err(|_| WireError::InvalidField("zonotope"))?;
    let heading = r.f64()?;
    let generation_time_ms = r.u64()?;
    Ok(EstimateShare {
        station_id,
        track_id,
        zonotope,
        heading,
        generation_time_ms,
    })
}

/// Decodes one complete message; trailing bytes are an error.
pub fn decode(bytes: &[u8]) -> Result<WireMessage, WireError> {
    let mut r = Reader { buf: bytes, pos: 0 };
    let magic: [u8; 4] = r.array()?;
    if magic != CPM_MAGIC && magic != ESTIMATE_MAGIC {
        return Err(WireError::BadMagic(magic));
    }
    let version = r.u8()?;
    if version != WIRE_VERSION {
        return Err(WireError::BadVersion(version));
    }
    let msg = if magic == CPM_MAGIC {
        WireMessage::Cpm(decode_cpm_body(&mut r)?)
    } else {
        WireMessage::Estimate(decode_estimate_body(&mut r)?)
    };
    match r.remaining() {
        0 => Ok(msg),
        n => Err(WireError::TrailingBytes(n)),
    }
}
