#ifndef SSAWARE_H
#define SSAWARE_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every fallible call.
 */
typedef enum SsaStatus {
  SSA_STATUS_OK = 0,
  SSA_STATUS_NULL_POINTER = 1,
  SSA_STATUS_INVALID_ARGUMENT = 2,
  SSA_STATUS_DIMENSION_MISMATCH = 3,
  SSA_STATUS_OUT_OF_ORDER = 4,
  SSA_STATUS_BUFFER_TOO_SMALL = 5,
  SSA_STATUS_DECODE_FAILED = 6,
  SSA_STATUS_PANIC = 7,
} SsaStatus;

/**
 * Kind of a decoded wire message.
 */
typedef enum SsaMessageKind {
  SSA_MESSAGE_KIND_CPM = 0,
  SSA_MESSAGE_KIND_ESTIMATE = 1,
} SsaMessageKind;

/**
 * Opaque track handle.
 */
typedef struct SsaTrack SsaTrack;

/**
 * Opaque zonotope handle.
 */
typedef struct SsaZonotope SsaZonotope;

/**
 * One measurement of `(x, y, speed)` with its half-widths.
 */
typedef struct SsaMeasurement {
  double x;
  double y;
  double speed;
  double heading;
  double half_widths[3];
  double timestamp;
  double length;
  double width;
} SsaMeasurement;

/**
 * Filter tuning for [`ssa_track_step`].
 */
typedef struct SsaFilterConfig {
  double process_noise[3];
  double step_s;
  size_t max_generators;
} SsaFilterConfig;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the last error message of this thread into `buf` (NUL-terminated,
 * truncated to `len`) and returns the full message length without the NUL.
 *
 * # Safety
 * `buf` must be null or point to `len` writable bytes.
 */
size_t ssa_last_error(char *buf, size_t len);

/**
 * Creates `⟨center, generators⟩` with `dim` rows and `num_generators`
 * columns.
 *
 * # Safety
 * `center` must hold `dim` values and `generators` `dim * num_generators`
 * values; `out` must be writable.
 */
enum SsaStatus ssa_zonotope_new(const double *center,
                                size_t dim,
                                const double *generators,
                                size_t num_generators,
                                struct SsaZonotope **out);

/**
 * # Safety
 * `z` must be null or a handle not yet freed.
 */
void ssa_zonotope_free(struct SsaZonotope *z);

/**
 * Dimension, or zero for a null handle.
 *
 * # Safety
 * `z` must be null or a live handle.
 */
size_t ssa_zonotope_dim(const struct SsaZonotope *z);

/**
 * Generator count, or zero for a null handle.
 *
 * # Safety
 * `z` must be null or a live handle.
 */
size_t ssa_zonotope_num_generators(const struct SsaZonotope *z);

/**
 * Copies the center into `out`, which must hold at least `dim` values.
 *
 * # Safety
 * `z` must be a live handle and `out` must point to `len` writable values.
 */
enum SsaStatus ssa_zonotope_center(const struct SsaZonotope *z, double *out, size_t len);

/**
 * Copies the generator matrix column by column into `out`.
 *
 * # Safety
 * `z` must be a live handle and `out` must point to `len` writable values.
 */
enum SsaStatus ssa_zonotope_generators(const struct SsaZonotope *z, double *out, size_t len);

/**
 * `a ⊕ b`.
 *
 * # Safety
 * `a` and `b` must be live handles; `out` must be writable.
 */
enum SsaStatus ssa_zonotope_minkowski_sum(const struct SsaZonotope *a,
                                          const struct SsaZonotope *b,
                                          struct SsaZonotope **out);

/**
 * `L z` for a `rows × dim` matrix `l`.
 *
 * # Safety
 * `z` must be a live handle, `l` must hold `rows * dim` values and `out`
 * must be writable.
 */
enum SsaStatus ssa_zonotope_linear_map(const struct SsaZonotope *z,
                                       const double *l,
                                       size_t rows,
                                       struct SsaZonotope **out);

/**
 * Intersection with the strip `|h·x − y| ≤ r` using the optimal gain.
 *
 * # Safety
 * `z` must be a live handle, `h` must hold `dim` values and `out` must be
 * writable.
 */
enum SsaStatus ssa_zonotope_intersect_strip(const struct SsaZonotope *z,
                                            const double *h,
                                            double y,
                                            double r,
                                            struct SsaZonotope **out);

/**
 * Fuses `count` sets. `weights` may be null for inverse-trace weights.
 *
 * # Safety
 * `sets` must hold `count` live handles, `weights` must be null or hold
 * `count` values, and `out` must be writable.
 */
enum SsaStatus ssa_zonotope_fuse(const struct SsaZonotope *const *sets,
                                 size_t count,
                                 const double *weights,
                                 struct SsaZonotope **out);

/**
 * Limits the generator count to `max_generators`.
 *
 * # Safety
 * `z` must be a live handle and `out` writable.
 */
enum SsaStatus ssa_zonotope_reduce_order(const struct SsaZonotope *z,
                                         size_t max_generators,
                                         struct SsaZonotope **out);

/**
 * Area of the projection onto the first two coordinates.
 *
 * # Safety
 * `z` must be a live handle and `area` writable.
 */
enum SsaStatus ssa_zonotope_area_2d(const struct SsaZonotope *z, double *area);

/**
 * Point membership.
 *
 * # Safety
 * `z` must be a live handle, `point` must hold `dim` values and
 * `inside` must be writable.
 */
enum SsaStatus ssa_zonotope_contains(const struct SsaZonotope *z,
                                     const double *point,
                                     bool *inside);

/**
 * Starts a track from one measurement with the box radii `initial_radii`.
 *
 * # Safety
 * `m` must be readable, `initial_radii` must hold three values and `out`
 * must be writable.
 */
enum SsaStatus ssa_track_init(const struct SsaMeasurement *m,
                              const double *initial_radii,
                              uint32_t object,
                              struct SsaTrack **out);

/**
 * Predicts the track to the measurement time and corrects it in place.
 *
 * # Safety
 * `track` must be a live handle; `m` and `config` must be readable.
 */
enum SsaStatus ssa_track_step(struct SsaTrack *track,
                              const struct SsaMeasurement *m,
                              const struct SsaFilterConfig *config);

/**
 * Copy of the track's current estimate set.
 *
 * # Safety
 * `track` must be a live handle and `out` writable.
 */
enum SsaStatus ssa_track_set(const struct SsaTrack *track, struct SsaZonotope **out);

/**
 * Time of the last update, or NaN for a null handle.
 *
 * # Safety
 * `track` must be null or a live handle.
 */
double ssa_track_last_update(const struct SsaTrack *track);

/**
 * # Safety
 * `track` must be null or a handle not yet freed.
 */
void ssa_track_free(struct SsaTrack *track);

/**
 * Encodes a three-dimensional set as an estimate-share message. On
 * `BufferTooSmall`, `written` holds the required size.
 *
 * # Safety
 * `z` must be a live handle, `buf` must point to `cap` writable bytes and
 * `written` must be writable.
 */
enum SsaStatus ssa_wire_encode_estimate(const struct SsaZonotope *z,
                                        uint32_t station_id,
                                        uint32_t track_id,
                                        double heading,
                                        uint64_t generation_time_ms,
                                        uint8_t *buf,
                                        size_t cap,
                                        size_t *written);

/**
 * Checks that `buf` holds exactly one well-formed message and reports its
 * kind.
 *
 * # Safety
 * `buf` must point to `len` readable bytes and `kind` must be writable.
 */
enum SsaStatus ssa_wire_validate(const uint8_t *buf, size_t len, enum SsaMessageKind *kind);

/**
 * Decodes an estimate-share message into a new zonotope handle.
 *
 * # Safety
 * `buf` must point to `len` readable bytes and `out` must be writable.
 */
enum SsaStatus ssa_wire_decode_estimate(const uint8_t *buf, size_t len, struct SsaZonotope **out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SSAWARE_H */
