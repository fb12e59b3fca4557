#ifndef SLAVC_H
#define SLAVC_H

#include <stddef.h>
#include <stdint.h>
#include <stdbool.h>

/**
 * Result code of every fallible call.
 */
typedef enum SlavcStatus {
  SLAVC_STATUS_OK = 0,
  SLAVC_STATUS_NULL_POINTER = 1,
  SLAVC_STATUS_INVALID_ARGUMENT = 2,
  SLAVC_STATUS_STRUCTURAL = 3,
  SLAVC_STATUS_FORMAT = 4,
  SLAVC_STATUS_IO = 5,
  SLAVC_STATUS_UNDEFINED_METRIC = 6,
  SLAVC_STATUS_INTERNAL_FAULT = 7,
  SLAVC_STATUS_PANIC = 8,
} SlavcStatus;

typedef enum SlavcLoss {
  SLAVC_LOSS_MICL = 0,
  SLAVC_LOSS_SLAVC = 1,
  SLAVC_LOSS_FULL = 2,
} SlavcLoss;

typedef enum SlavcInference {
  SLAVC_INFERENCE_LOC = 0,
  SLAVC_INFERENCE_AVC = 1,
  SLAVC_INFERENCE_BOTH = 2,
} SlavcInference;

typedef enum SlavcThresholdKind {
  /**
   * Pixels scoring strictly above `value`.
   */
  SLAVC_THRESHOLD_KIND_ABSOLUTE = 0,
  /**
   * The `ceil(value * H * W)` best pixels.
   */
  SLAVC_THRESHOLD_KIND_TOP_FRACTION = 1,
  /**
   * Pixels above the midpoint of the map's range; `value` is ignored.
   */
  SLAVC_THRESHOLD_KIND_HALF_RANGE = 2,
} SlavcThresholdKind;

/**
 * Opaque localization map.
 */
typedef struct SlavcMap SlavcMap;

/**
 * Per-sample input to the metric functions. `iou` is ignored for
 * negatives. Confidence ties in AP are broken by position in the array.
 */
typedef struct SlavcOutcome {
  bool positive;
  double iou;
  double confidence;
} SlavcOutcome;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. The pointer
 * stays valid until the next failing call on the same thread.
 */
const char *slavc_last_error(void);

/**
 * Builds a `height x width` map from row-major values.
 *
 * # Safety
 * `values` must point to `height * width` doubles; `out` must be writable.
 */
enum SlavcStatus slavc_map_new(uintptr_t height,
                               uintptr_t width,
                               const double *values,
                               struct SlavcMap **out);

/**
 * Center-prior baseline map.
 *
 * # Safety
 * `out` must be writable.
 */
enum SlavcStatus slavc_map_center_prior(uintptr_t height,
                                        uintptr_t width,
                                        double radius_fraction,
                                        struct SlavcMap **out);

/**
 * Reads a map file.
 *
 * # Safety
 * `file` must be a NUL-terminated string; `out` must be writable.
 */
enum SlavcStatus slavc_map_read(const char *file, struct SlavcMap **out);

/**
 * Writes a map file.
 *
 * # Safety
 * `map` must come from this library; `file` must be a NUL-terminated string.
 */
enum SlavcStatus slavc_map_write(const struct SlavcMap *map, const char *file);

/**
 * # Safety
 * `map` must come from this library or be null.
 */
uintptr_t slavc_map_height(const struct SlavcMap *map);

/**
 * # Safety
 * `map` must come from this library or be null.
 */
uintptr_t slavc_map_width(const struct SlavcMap *map);

/**
 * Maximum value of the map.
 *
 * # Safety
 * `map` must come from this library; `out` must be writable.
 */
enum SlavcStatus slavc_map_confidence(const struct SlavcMap *map, double *out);

/**
 * Copies the row-major values into `out`, which holds `len` doubles.
 *
 * # Safety
 * `map` must come from this library; `out` must hold `len` doubles.
 */
enum SlavcStatus slavc_map_values(const struct SlavcMap *map, double *out, uintptr_t len);

/**
 * Releases a map. Null is ignored.
 *
 * # Safety
 * `map` must come from this library and not be used afterwards.
 */
void slavc_map_free(struct SlavcMap *map);

/**
 * Loss value and, if `grad` is non-null, its gradient with respect to the
 * online embeddings (same flat layout). `momentum` is read only by
 * [`SlavcLoss::Full`] and may be null otherwise.
 *
 * # Safety
 * Embedding pointers must hold the flat layout for the given extents;
 * `grad`, if non-null, must hold as many doubles.
 */
enum SlavcStatus slavc_loss(enum SlavcLoss kind,
                            uintptr_t batch,
                            uintptr_t height,
                            uintptr_t width,
                            uintptr_t dim,
                            double tau,
                            const double *online,
                            const double *momentum,
                            double *out_loss,
                            double *grad);

/**
 * Inference map of one audio against one frame.
 *
 * # Safety
 * `audio_*` hold `dim` doubles, `visual_*` hold `height * width * dim`;
 * `out` must be writable.
 */
enum SlavcStatus slavc_inference_map(enum SlavcInference mode,
                                     uintptr_t height,
                                     uintptr_t width,
                                     uintptr_t dim,
                                     const double *audio_loc,
                                     const double *audio_avc,
                                     const double *visual_loc,
                                     const double *visual_avc,
                                     struct SlavcMap **out);

/**
 * Consensus IoU between the prediction set of `map` and the boxes
 * (`x0, y0, x1, y1` quadruples, half-open, in map pixel coordinates).
 *
 * # Safety
 * `map` must come from this library; `boxes` holds `4 * box_count` values.
 */
enum SlavcStatus slavc_map_iou(const struct SlavcMap *map,
                               enum SlavcThresholdKind threshold,
                               double value,
                               const uint32_t *boxes,
                               uintptr_t box_count,
                               double *out);

/**
 * Fraction of positives with IoU above `gamma`.
 *
 * # Safety
 * `items` holds `count` outcomes; `out` must be writable.
 */
enum SlavcStatus slavc_loc_acc(const struct SlavcOutcome *items,
                               uintptr_t count,
                               double gamma,
                               double *out);

/**
 * Best F1 over confidence thresholds and the threshold achieving it
 * (minus infinity when every sample must be predicted).
 *
 * # Safety
 * `items` holds `count` outcomes; outputs must be writable.
 */
enum SlavcStatus slavc_max_f1(const struct SlavcOutcome *items,
                              uintptr_t count,
                              double gamma,
                              double *out_f1,
                              double *out_delta);

/**
 * Non-interpolated average precision.
 *
 * # Safety
 * `items` holds `count` outcomes; `out` must be writable.
 */
enum SlavcStatus slavc_average_precision(const struct SlavcOutcome *items,
                                         uintptr_t count,
                                         double gamma,
                                         double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SLAVC_H */
