#ifndef MAKEUP_H
#define MAKEUP_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result of every fallible call.
typedef enum MakeupStatus {
  MAKEUP_STATUS_OK = 0,
  MAKEUP_STATUS_NULL_POINTER = 1,
  MAKEUP_STATUS_DIMENSION = 2,
  MAKEUP_STATUS_CAPABILITY = 3,
  MAKEUP_STATUS_DEGENERATE_CONTROLS = 4,
  MAKEUP_STATUS_DEGENERATE_EMBEDDING = 5,
  MAKEUP_STATUS_CONTRACT = 6,
  MAKEUP_STATUS_CONFIG = 7,
  MAKEUP_STATUS_EMPTY_REGION = 8,
  MAKEUP_STATUS_DOMAIN = 9,
  MAKEUP_STATUS_LANDMARKS = 10,
  MAKEUP_STATUS_IO = 11,
  MAKEUP_STATUS_FORMAT = 12,
  MAKEUP_STATUS_PANIC = 13,
} MakeupStatus;

// Q, K, V projections for landmark-embedded attention.
typedef struct MakeupAttention MakeupAttention;

// Landmarks in pixel coordinates of a `width × height` image.
typedef struct MakeupLandmarks MakeupLandmarks;

// Thin-plate spline mapping source controls onto target controls.
typedef struct MakeupTps MakeupTps;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the most recent failure on this thread, or null if none.
// Valid until the next failing call on the same thread.
const char *makeup_last_error(void);

// Library version as a static NUL-terminated string.
const char *makeup_version(void);

// Builds a landmark set from `count` interleaved `(x, y)` pairs.
//
// # Safety
// `xy` must point to `2 * count` doubles and `out` to writable storage.
enum MakeupStatus makeup_landmarks_new(const double *xy,
                                       size_t count,
                                       size_t width,
                                       size_t height,
                                       struct MakeupLandmarks **out);

// # Safety
// `lm` must come from [`makeup_landmarks_new`] and not be used afterwards.
void makeup_landmarks_free(struct MakeupLandmarks *lm);

// Number of points in the set, 0 for null.
//
// # Safety
// `lm` must be null or a live handle.
size_t makeup_landmarks_len(const struct MakeupLandmarks *lm);

// Solves the spline sending each `source` point onto its `target` point.
//
// # Safety
// Handles must be live and `out` writable.
enum MakeupStatus makeup_tps_solve(const struct MakeupLandmarks *source,
                                   const struct MakeupLandmarks *target,
                                   struct MakeupTps **out);

// Maps one point through the spline.
//
// # Safety
// `tps` must be live; `out_x` and `out_y` writable.
enum MakeupStatus makeup_tps_apply(const struct MakeupTps *tps,
                                   double x,
                                   double y,
                                   double *out_x,
                                   double *out_y);

// # Safety
// `tps` must come from [`makeup_tps_solve`] and not be used afterwards.
void makeup_tps_free(struct MakeupTps *tps);

// Warps a reference image so `ref_lm` lands on `src_lm`; output has the
// reference size.
//
// # Safety
// `rgb` and `out` must each hold `3 * width * height` bytes.
enum MakeupStatus makeup_warp_rgb(const struct MakeupLandmarks *src_lm,
                                  const struct MakeupLandmarks *ref_lm,
                                  const uint8_t *rgb_in,
                                  size_t width,
                                  size_t height,
                                  uint8_t *out);

// Per-channel histogram matching of the source region onto the reference
// region. Both images share one size; pixels outside `mask_src` are copied.
//
// # Safety
// Images and `out` hold `3 * width * height` bytes, masks `width * height`.
enum MakeupStatus makeup_histogram_match(const uint8_t *src,
                                         const uint8_t *reference,
                                         const uint8_t *mask_src,
                                         const uint8_t *mask_ref,
                                         size_t width,
                                         size_t height,
                                         uint8_t *out);

// Uniform random projections in `[-scale, scale]` for `channels` feature
// channels and `landmarks` landmarks.
//
// # Safety
// `out` must be writable.
enum MakeupStatus makeup_attention_random(size_t channels,
                                          size_t landmarks,
                                          double scale,
                                          uint64_t seed,
                                          struct MakeupAttention **out);

// # Safety
// `attn` must come from [`makeup_attention_random`] and not be used afterwards.
void makeup_attention_free(struct MakeupAttention *attn);

// Windowed attention of `x` over `y` (`height × width × channels` each) with
// window size `window`. Landmarks are in feature-map coordinates.
//
// # Safety
// `x`, `y` and `out` hold `height * width * channels` doubles.
enum MakeupStatus makeup_sow_attention(const struct MakeupAttention *attn,
                                       const double *x,
                                       const double *y,
                                       size_t height,
                                       size_t width,
                                       const struct MakeupLandmarks *x_lm,
                                       const struct MakeupLandmarks *y_lm,
                                       size_t window,
                                       double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MAKEUP_H */
