#ifndef CPULSE_H
#define CPULSE_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum CpShape {
  CP_SHAPE_RECTANGULAR = 0,
  CP_SHAPE_GAUSSIAN = 1,
} CpShape;

typedef enum CpStatus {
  CP_STATUS_OK = 0,
  CP_STATUS_NULL_POINTER = 1,
  CP_STATUS_DOMAIN = 2,
  CP_STATUS_UNKNOWN_LABEL = 3,
  CP_STATUS_PARSE = 4,
  CP_STATUS_IO = 5,
  CP_STATUS_INTEGRATION = 6,
  CP_STATUS_CONDITIONING = 7,
  CP_STATUS_PRECISION = 8,
  CP_STATUS_BUFFER_TOO_SMALL = 9,
  CP_STATUS_PANIC = 10,
} CpStatus;

/**
 * Opaque robustness map.
 */
typedef struct CpMap CpMap;

/**
 * Opaque composite sequence.
 */
typedef struct CpSequence CpSequence;

typedef struct CpErrorModel {
  double amplitude_scale;
  double static_detuning;
  double chirp_rate;
  double stark_coefficient;
  double phase_jitter_std;
} CpErrorModel;

/**
 * Single pulse: envelope, peak Rabi frequency and nominal area.
 */
typedef struct CpPulse {
  enum CpShape shape;
  double omega;
  double area;
} CpPulse;

/**
 * Stückelberg parameters of a propagator.
 */
typedef struct CpPropagator {
  double q;
  double alpha;
  double beta;
} CpPropagator;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failure on this thread, or null. The pointer stays
 * valid until the next failing call on the same thread.
 */
const char *cp_last_error_message(void);

/**
 * Nominal error model: unit amplitude, all other deviations zero.
 */
struct CpErrorModel cp_error_model_default(void);

/**
 * Looks up a catalog entry (`"single"` gives one bare pulse).
 *
 * # Safety
 * `label` must be a NUL-terminated string; `out` must be writable.
 */
enum CpStatus cp_sequence_catalog(const char *label, struct CpSequence **out);

/**
 * Builds a sequence from `len` phases in radians.
 *
 * # Safety
 * `phases` must point to `len` doubles; `out` must be writable.
 */
enum CpStatus cp_sequence_from_phases(const double *phases, size_t len, struct CpSequence **out);

/**
 * Number of pulses, 0 for a null handle.
 *
 * # Safety
 * `seq` must be null or a live handle.
 */
size_t cp_sequence_len(const struct CpSequence *seq);

/**
 * Copies the phases (radians) into `buf`, which holds `cap` doubles.
 *
 * # Safety
 * `seq` must be a live handle and `buf` must hold `cap` doubles.
 */
enum CpStatus cp_sequence_phases(const struct CpSequence *seq, double *buf, size_t cap);

/**
 * # Safety
 * `seq` must be null or a handle not yet freed.
 */
void cp_sequence_free(struct CpSequence *seq);

/**
 * Composes the sequence and writes its propagator.
 *
 * # Safety
 * All pointers must be valid.
 */
enum CpStatus cp_execute(const struct CpSequence *seq,
                         const struct CpPulse *pulse,
                         const struct CpErrorModel *errors,
                         uint64_t seed,
                         struct CpPropagator *out);

/**
 * Infidelity `Q = |U11|²` of the composed sequence.
 *
 * # Safety
 * All pointers must be valid.
 */
enum CpStatus cp_infidelity(const struct CpSequence *seq,
                            const struct CpPulse *pulse,
                            const struct CpErrorModel *errors,
                            uint64_t seed,
                            double *out);

/**
 * Infidelity map over `Δ/Ω ∈ [dmin, dmax]` (columns) and `T/τ ∈ [tmin, tmax]`
 * (rows). Failed cells hold -1.
 *
 * # Safety
 * All pointers must be valid.
 */
enum CpStatus cp_scan(const struct CpSequence *seq,
                      const struct CpPulse *pulse,
                      const struct CpErrorModel *errors,
                      double dmin,
                      double dmax,
                      double tmin,
                      double tmax,
                      size_t n_detuning,
                      size_t n_duration,
                      uint64_t seed,
                      struct CpMap **out);

/**
 * # Safety
 * `map` must be null or a live handle.
 */
size_t cp_map_rows(const struct CpMap *map);

/**
 * # Safety
 * `map` must be null or a live handle.
 */
size_t cp_map_cols(const struct CpMap *map);

/**
 * Copies the values row-major into `buf` of `cap` doubles.
 *
 * # Safety
 * `map` must be a live handle and `buf` must hold `cap` doubles.
 */
enum CpStatus cp_map_values(const struct CpMap *map, double *buf, size_t cap);

/**
 * # Safety
 * `map` must be null or a handle not yet freed.
 */
void cp_map_free(struct CpMap *map);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CPULSE_H */
