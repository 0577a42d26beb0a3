//! C ABI over the `ssaware` zonotope, estimator and wire layers.
//!
//! Objects cross the boundary as opaque handles created by `ssa_*_new` or an
//! operation and released with the matching `ssa_*_free`. Every fallible
//! function returns an [`SsaStatus`]; on failure the message is available
//! through [`ssa_last_error`] on the same thread. Matrices are column-major.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use nalgebra::{DMatrix, DVector, Vector3};
use ssaware::estimator::{
    init_track, step_track, ClassHint, EstimatorError, FilterConfig, Footprint, Measurement, Provenance, RoadUserTrack,
    TrackId,
};
use ssaware::wire::{decode, encode_estimate, EstimateShare, WireError, WireMessage};
use ssaware::zonoset::{fuse, optimal_weights, NoiseBound, Strip, ZonoError, Zonotope};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SsaStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    DimensionMismatch = 3,
    OutOfOrder = 4,
    BufferTooSmall = 5,
    DecodeFailed = 6,
    Panic = 7,
}

/// Kind of a decoded wire message.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SsaMessageKind {
    Cpm = 0,
    Estimate = 1,
}

/// Opaque zonotope handle.
pub struct SsaZonotope(Zonotope);

/// Opaque track handle.
pub struct SsaTrack(RoadUserTrack);

/// One measurement of `(x, y, speed)` with its half-widths.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct SsaMeasurement {
    pub x: f64,
    pub y: f64,
    pub speed: f64,
    pub heading: f64,
    pub half_widths: [f64; 3],
    pub timestamp: f64,
    pub length: f64,
    pub width: f64,
}

/// Filter tuning for [`ssa_track_step`].
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct SsaFilterConfig {
    pub process_noise: [f64; 3],
    pub step_s: f64,
    pub max_generators: usize,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn fail(status: SsaStatus, message: impl ToString) -> SsaStatus {
    let text = message.to_string().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(text).ok());
    status
}

fn zono_status(e: ZonoError) -> SsaStatus {
    let status = match e {
        ZonoError::DimensionMismatch { .. } => SsaStatus::DimensionMismatch,
        _ => SsaStatus::InvalidArgument,
    };
    fail(status, e)
}

fn estimator_status(e: EstimatorError) -> SsaStatus {
    match e {
        EstimatorError::Zono(z) => zono_status(z),
        EstimatorError::OutOfOrder { .. } => fail(SsaStatus::OutOfOrder, e),
        other => fail(SsaStatus::InvalidArgument, other),
    }
}

fn wire_status(e: WireError) -> SsaStatus {
    fail(SsaStatus::DecodeFailed, e)
}

fn guard(f: impl FnOnce() -> SsaStatus) -> SsaStatus {
    catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|_| fail(SsaStatus::Panic, "internal panic"))
}

unsafe fn slice<'a, T>(data: *const T, len: usize) -> Result<&'a [T], SsaStatus> {
    if len == 0 {
        return Ok(&[]);
    }
    if data.is_null() {
        return Err(fail(SsaStatus::NullPointer, "null array"));
    }
    Ok(std::slice::from_raw_parts(data, len))
}

unsafe fn zref<'a>(z: *const SsaZonotope) -> Result<&'a Zonotope, SsaStatus> {
    z.as_ref()
        .map(|h| &h.0)
        .ok_or_else(|| fail(SsaStatus::NullPointer, "null zonotope"))
}

unsafe fn emit<T>(out: *mut *mut T, value: T) -> SsaStatus {
    *out = Box::into_raw(Box::new(value));
    SsaStatus::Ok
}

macro_rules! tri {
    ($e:expr) => {
        match $e {
            Ok(v) => v,
            Err(s) => return s,
        }
    };
}

fn check_out<T>(out: *mut *mut T) -> Result<(), SsaStatus> {
    if out.is_null() {
        Err(fail(SsaStatus::NullPointer, "null output pointer"))
    } else {
        Ok(())
    }
}

/// Copies the last error message of this thread into `buf` (NUL-terminated,
/// truncated to `len`) and returns the full message length without the NUL.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn ssa_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let e = e.borrow();
        let bytes = e.as_ref().map_or(&b""[..], |c| c.as_bytes());
        if !buf.is_null() && len > 0 {
            let n = bytes.len().min(len - 1);
            ptr::copy_nonoverlapping(bytes.as_ptr().cast::<c_char>(), buf, n);
            *buf.add(n) = 0;
        }
        bytes.len()
    })
}

/// Creates `⟨center, generators⟩` with `dim` rows and `num_generators`
/// columns.
///
/// # Safety
/// `center` must hold `dim` values and `generators` `dim * num_generators`
/// values; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ssa_zonotope_new(
    center: *const f64,
    dim: usize,
    generators: *const f64,
    num_generators: usize,
    out: *mut *mut SsaZonotope,
) -> SsaStatus {
    guard(|| {
        tri!(check_out(out));
        if dim == 0 {
            return fail(SsaStatus::InvalidArgument, "dimension must be positive");
        }
        let c = tri!(slice(center, dim));
        let g = tri!(slice(generators, dim * num_generators));
        if c.iter().chain(g).any(|v| !v.is_finite()) {
            return fail(SsaStatus::InvalidArgument, "non-finite entry");
        }
        let z = tri!(Zonotope::new(
            DVector::from_column_slice(c),
            DMatrix::from_column_slice(dim, num_generators, g)
        )
        .map_err(zono_status));
        emit(out, SsaZonotope(z))
    })
}

/// # Safety
/// `z` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ssa_zonotope_free(z: *mut SsaZonotope) {
    if !z.is_null() {
        drop(Box::from_raw(z));
    }
}

/// Dimension, or zero for a null handle.
///
/// # Safety
/// `z` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ssa_zonotope_dim(z: *const SsaZonotope) -> usize {
    z.as_ref().map_or(0, |h| h.0.dim())
}

/// Generator count, or zero for a null handle.
///
/// # Safety
/// `z` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ssa_zonotope_num_generators(z: *const SsaZonotope) -> usize {
    z.as_ref().map_or(0, |h| h.0.num_generators())
}

/// Copies the center into `out`, which must hold at least `dim` values.
///
/// # Safety
/// `z` must be a live handle and `out` must point to `len` writable values.
#[no_mangle]
pub unsafe extern "C" fn ssa_zonotope_center(z: *const SsaZonotope, out: *mut f64, len: usize) -> SsaStatus {
    guard(|| {
        let z = tri!(zref(z));
        copy_out(z.center().as_slice(), out, len)
    })
}

/// Copies the generator matrix column by column into `out`.
///
/// # Safety
/// `z` must be a live handle and `out` must point to `len` writable values.
#[no_mangle]
pub unsafe extern "C" fn ssa_zonotope_generators(z: *const SsaZonotope, out: *mut f64, len: usize) -> SsaStatus {
    guard(|| {
        let z = tri!(zref(z));
        copy_out(z.generators().as_slice(), out, len)
    })
}

unsafe fn copy_out(values: &[f64], out: *mut f64, len: usize) -> SsaStatus {
    if len < values.len() {
        return fail(
            SsaStatus::BufferTooSmall,
            format!("need {} values, got room for {len}", values.len()),
        );
    }
    if values.is_empty() {
        return SsaStatus::Ok;
    }
    if out.is_null() {
        return fail(SsaStatus::NullPointer, "null output array");
    }
    ptr::copy_nonoverlapping(values.as_ptr(), out, values.len());
    SsaStatus::Ok
}

/// `a ⊕ b`.
///
/// # Safety
/// `a` and `b` must be live handles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ssa_zonotope_minkowski_sum(
    a: *const SsaZonotope,
    b: *const SsaZonotope,
    out: *mut *mut SsaZonotope,
) -> SsaStatus {
    guard(|| {
        tri!(check_out(out));
        let (a, b) = (tri!(zref(a)), tri!(zref(b)));
        emit(out, SsaZonotope(tri!(a.minkowski_sum(b).map_err(zono_status))))
    })
}

/// `L z` for a `rows × dim` matrix `l`.
///
/// # Safety
/// `z` must be a live handle, `l` must hold `rows * dim` values and `out`
/// must be writable.
#[no_mangle]
pub unsafe extern "C" fn ssa_zonotope_linear_map(
    z: *const SsaZonotope,
    l: *const f64,
    rows: usize,
    out: *mut *mut SsaZonotope,
) -> SsaStatus {
    guard(|| {
        tri!(check_out(out));
        let z = tri!(zref(z));
        let values = tri!(slice(l, rows * z.dim()));
        let l = DMatrix::from_column_slice(rows, z.dim(), values);
        emit(out, SsaZonotope(tri!(z.linear_map(&l).map_err(zono_status))))
    })
}

/// Intersection with the strip `|h·x − y| ≤ r` using the optimal gain.
///
/// # Safety
/// `z` must be a live handle, `h` must hold `dim` values and `out` must be
/// writable.
#[no_mangle]
pub unsafe extern "C" fn ssa_zonotope_intersect_strip(
    z: *const SsaZonotope,
    h: *const f64,
    y: f64,
    r: f64,
    out: *mut *mut SsaZonotope,
) -> SsaStatus {
    guard(|| {
        tri!(check_out(out));
        let z = tri!(zref(z));
        let h = DVector::from_column_slice(tri!(slice(h, z.dim())));
        let strip = tri!(Strip::new(h, y, r).map_err(zono_status));
        let lambda = tri!(z.optimal_lambda(&strip).map_err(zono_status));
        emit(
            out,
            SsaZonotope(tri!(z.intersect_strip(&strip, &lambda).map_err(zono_status))),
        )
    })
}

/// Fuses `count` sets. `weights` may be null for inverse-trace weights.
///
/// # Safety
/// `sets` must hold `count` live handles, `weights` must be null or hold
/// `count` values, and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ssa_zonotope_fuse(
    sets: *const *const SsaZonotope,
    count: usize,
    weights: *const f64,
    out: *mut *mut SsaZonotope,
) -> SsaStatus {
    guard(|| {
        tri!(check_out(out));
        let handles = tri!(slice(sets, count));
        let mut zs = Vec::with_capacity(count);
        for &h in handles {
            zs.push(tri!(zref(h)).clone());
        }
        let w = if weights.is_null() {
            optimal_weights(&zs)
        } else {
            tri!(slice(weights, count)).to_vec()
        };
        emit(out, SsaZonotope(tri!(fuse(&zs, &w).map_err(zono_status))))
    })
}

/// Limits the generator count to `max_generators`.
///
/// # Safety
/// `z` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ssa_zonotope_reduce_order(
    z: *const SsaZonotope,
    max_generators: usize,
    out: *mut *mut SsaZonotope,
) -> SsaStatus {
    guard(|| {
        tri!(check_out(out));
        let z = tri!(zref(z));
        emit(
            out,
            SsaZonotope(tri!(z.reduce_order(max_generators).map_err(zono_status))),
        )
    })
}

/// Area of the projection onto the first two coordinates.
///
/// # Safety
/// `z` must be a live handle and `area` writable.
#[no_mangle]
pub unsafe extern "C" fn ssa_zonotope_area_2d(z: *const SsaZonotope, area: *mut f64) -> SsaStatus {
    guard(|| {
        let z = tri!(zref(z));
        if area.is_null() {
            return fail(SsaStatus::NullPointer, "null area");
        }
        let plane = if z.dim() == 2 { z.clone() } else { z.project(&[0, 1]) };
        *area = tri!(plane.area_2d().map_err(zono_status));
        SsaStatus::Ok
    })
}

/// Point membership.
///
/// # Safety
/// `z` must be a live handle, `point` must hold `dim` values and
/// `inside` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ssa_zonotope_contains(
    z: *const SsaZonotope,
    point: *const f64,
    inside: *mut bool,
) -> SsaStatus {
    guard(|| {
        let z = tri!(zref(z));
        if inside.is_null() {
            return fail(SsaStatus::NullPointer, "null result");
        }
        let x = DVector::from_column_slice(tri!(slice(point, z.dim())));
        *inside = tri!(z.contains_point(&x).map_err(zono_status));
        SsaStatus::Ok
    })
}

fn measurement(m: &SsaMeasurement) -> Measurement {
    Measurement {
        y: Vector3::new(m.x, m.y, m.speed),
        heading: m.heading,
        half_widths: Vector3::from(m.half_widths),
        timestamp: m.timestamp,
        source: Provenance::Local,
        object_id: None,
        class: ClassHint::Unknown,
        footprint: Footprint {
            length: m.length,
            width: m.width,
        },
    }
}

/// Starts a track from one measurement with the box radii `initial_radii`.
///
/// # Safety
/// `m` must be readable, `initial_radii` must hold three values and `out`
/// must be writable.
#[no_mangle]
pub unsafe extern "C" fn ssa_track_init(
    m: *const SsaMeasurement,
    initial_radii: *const f64,
    object: u32,
    out: *mut *mut SsaTrack,
) -> SsaStatus {
    guard(|| {
        tri!(check_out(out));
        let Some(m) = m.as_ref() else {
            return fail(SsaStatus::NullPointer, "null measurement");
        };
        let r = tri!(slice(initial_radii, 3));
        let id = TrackId {
            provenance: Provenance::Local,
            object,
        };
        let track = tri!(init_track(&measurement(m), &Vector3::new(r[0], r[1], r[2]), id).map_err(estimator_status));
        emit(out, SsaTrack(track))
    })
}

/// Predicts the track to the measurement time and corrects it in place.
///
/// # Safety
/// `track` must be a live handle; `m` and `config` must be readable.
#[no_mangle]
pub unsafe extern "C" fn ssa_track_step(
    track: *mut SsaTrack,
    m: *const SsaMeasurement,
    config: *const SsaFilterConfig,
) -> SsaStatus {
    guard(|| {
        let (Some(t), Some(m), Some(c)) = (track.as_mut(), m.as_ref(), config.as_ref()) else {
            return fail(SsaStatus::NullPointer, "null track, measurement or config");
        };
        let m = measurement(m);
        let noise = tri!(NoiseBound::new(
            DVector::from_column_slice(&c.process_noise),
            DVector::from_column_slice(m.half_widths.as_slice()),
            c.step_s
        )
        .map_err(zono_status));
        let cfg = FilterConfig {
            noise,
            max_generators: c.max_generators,
        };
        t.0 = tri!(step_track(&t.0, &m, &cfg).map_err(estimator_status));
        SsaStatus::Ok
    })
}

/// Copy of the track's current estimate set.
///
/// # Safety
/// `track` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ssa_track_set(track: *const SsaTrack, out: *mut *mut SsaZonotope) -> SsaStatus {
    guard(|| {
        tri!(check_out(out));
        let Some(t) = track.as_ref() else {
            return fail(SsaStatus::NullPointer, "null track");
        };
        emit(out, SsaZonotope(t.0.corrected_set.clone()))
    })
}

/// Time of the last update, or NaN for a null handle.
///
/// # Safety
/// `track` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ssa_track_last_update(track: *const SsaTrack) -> f64 {
    track.as_ref().map_or(f64::NAN, |t| t.0.last_update)
}

/// # Safety
/// `track` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ssa_track_free(track: *mut SsaTrack) {
    if !track.is_null() {
        drop(Box::from_raw(track));
    }
}

/// Encodes a three-dimensional set as an estimate-share message. On
/// `BufferTooSmall`, `written` holds the required size.
///
/// # Safety
/// `z` must be a live handle, `buf` must point to `cap` writable bytes and
/// `written` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ssa_wire_encode_estimate(
    z: *const SsaZonotope,
    station_id: u32,
    track_id: u32,
    heading: f64,
    generation_time_ms: u64,
    buf: *mut u8,
    cap: usize,
    written: *mut usize,
) -> SsaStatus {
    guard(|| {
        let z = tri!(zref(z));
        if written.is_null() {
            return fail(SsaStatus::NullPointer, "null length output");
        }
        let share = EstimateShare {
            station_id,
            track_id,
            zonotope: z.clone(),
            heading,
            generation_time_ms,
        };
        let bytes = tri!(encode_estimate(&share).map_err(|e| fail(SsaStatus::InvalidArgument, e)));
        *written = bytes.len();
        if cap < bytes.len() {
            return fail(SsaStatus::BufferTooSmall, format!("need {} bytes", bytes.len()));
        }
        if buf.is_null() {
            return fail(SsaStatus::NullPointer, "null buffer");
        }
        ptr::copy_nonoverlapping(bytes.as_ptr(), buf, bytes.len());
        SsaStatus::Ok
    })
}

/// Checks that `buf` holds exactly one well-formed message and reports its
/// kind.
///
/// # Safety
/// `buf` must point to `len` readable bytes and `kind` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ssa_wire_validate(buf: *const u8, len: usize, kind: *mut SsaMessageKind) -> SsaStatus {
    guard(|| {
        if kind.is_null() {
            return fail(SsaStatus::NullPointer, "null kind");
        }
        let bytes = tri!(slice(buf, len));
        *kind = match tri!(decode(bytes).map_err(wire_status)) {
            WireMessage::Cpm(_) => SsaMessageKind::Cpm,
            WireMessage::Estimate(_) => SsaMessageKind::Estimate,
        };
        SsaStatus::Ok
    })
}

/// Decodes an estimate-share message into a new zonotope handle.
///
/// # Safety
/// `buf` must point to `len` readable bytes and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ssa_wire_decode_estimate(buf: *const u8, len: usize, out: *mut *mut SsaZonotope) -> SsaStatus {
    guard(|| {
        tri!(check_out(out));
        let bytes = tri!(slice(buf, len));
        match tri!(decode(bytes).map_err(wire_status)) {
            WireMessage::Estimate(e) => emit(out, SsaZonotope(e.zonotope)),
            WireMessage::Cpm(_) => fail(SsaStatus::DecodeFailed, "message is a CPM"),
        }
    })
}
