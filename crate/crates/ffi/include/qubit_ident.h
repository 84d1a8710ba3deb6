/* SPDX-License-Identifier: Apache-2.0 */

#ifndef QUBIT_IDENT_H
#define QUBIT_IDENT_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

// Result codes. Values 2, 3 and 5 match the command-line exit codes.
typedef enum QiStatus {
  QI_STATUS_OK = 0,
  QI_STATUS_NULL_POINTER = 1,
  QI_STATUS_INVALID_ARGUMENT = 2,
  QI_STATUS_INVERSION = 3,
  QI_STATUS_NO_SURVIVOR = 5,
  QI_STATUS_INTERNAL = 6,
  QI_STATUS_PANIC = 7,
} QiStatus;

// Designed protocol for one parameter box, with its precomputed bias box.
typedef struct QiProtocol QiProtocol;

// Estimate with confidence region.
typedef struct QiReport QiReport;

typedef struct QiParameters {
  double gamma1;
  double kappa;
  double gamma2;
  double omega;
} QiParameters;

typedef struct QiTimes {
  double t1;
  double tau2;
  double t3;
  double beta;
  uint32_t k;
} QiTimes;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the most recent failure on this thread; empty after success.
// The pointer stays valid until the next call into this library on the same thread.
const char *qi_last_error(void);

// Static, NUL-terminated version string.
const char *qi_version(void);

// Ideal-pulse observables `(p1, p2, p3, p4)` written to `out[0..4]`.
//
// # Safety
// `theta` and `times` must be valid pointers; `out` must hold four doubles.
enum QiStatus qi_forward_ideal(const struct QiParameters *theta,
                               const struct QiTimes *times,
                               double *out);

// Observables under pulses of amplitude `u_max`, written to `out[0..4]`.
//
// # Safety
// As for [`qi_forward_ideal`].
enum QiStatus qi_forward_finite(const struct QiParameters *theta,
                                const struct QiTimes *times,
                                double u_max,
                                double *out);

// Designs protocol times for the box `[lower, upper]` and precomputes its bias box.
// Fails with `INVALID_ARGUMENT` if the designed times do not pass their checks.
//
// # Safety
// `lower`, `upper` and `out` must be valid pointers. On success `*out` owns a
// handle to be released with [`qi_protocol_free`].
enum QiStatus qi_protocol_new(const struct QiParameters *lower,
                              const struct QiParameters *upper,
                              double beta,
                              uint32_t k,
                              struct QiProtocol **out);

// # Safety
// `protocol` and `out` must be valid pointers.
enum QiStatus qi_protocol_times(const struct QiProtocol *protocol, struct QiTimes *out);

// Bias-box half-widths per unit `1 / u_max`, written to `out[0..4]`.
//
// # Safety
// `protocol` must be valid; `out` must hold four doubles.
enum QiStatus qi_protocol_bias_delta(const struct QiProtocol *protocol, double *out);

// # Safety
// `protocol` must come from [`qi_protocol_new`] and not be used afterwards. Null is ignored.
void qi_protocol_free(struct QiProtocol *protocol);

// Estimates parameters from excited-outcome counts `counts[0..4]` out of `n`
// shots each. `u_max <= 0` means ideal pulses (no bias box).
//
// # Safety
// `protocol` and `out` must be valid; `counts` must hold four values. On
// success `*out` owns a handle to be released with [`qi_report_free`].
enum QiStatus qi_estimate(const struct QiProtocol *protocol,
                          const uint64_t *counts,
                          uint64_t n,
                          double u_max,
                          double alpha,
                          struct QiReport **out);

// # Safety
// `report` and `out` must be valid pointers.
enum QiStatus qi_report_theta(const struct QiReport *report, struct QiParameters *out);

// Row-major covariance of `sqrt(n) (theta_hat - theta)` written to `out[0..16]`.
//
// # Safety
// `report` must be valid; `out` must hold sixteen doubles.
enum QiStatus qi_report_covariance(const struct QiReport *report, double *out);

// Bias-box half-widths at the report's amplitude, written to `out[0..4]`.
//
// # Safety
// `report` must be valid; `out` must hold four doubles.
enum QiStatus qi_report_bias_box(const struct QiReport *report, double *out);

// Whether `theta` lies in the combined confidence region.
//
// # Safety
// All pointers must be valid.
enum QiStatus qi_report_contains(const struct QiReport *report,
                                 const struct QiParameters *theta,
                                 bool *out);

// Report as a JSON document. `*out` must be released with [`qi_string_free`].
//
// # Safety
// `report` and `out` must be valid pointers.
enum QiStatus qi_report_to_json(const struct QiReport *report, char **out);

// # Safety
// `report` must come from [`qi_estimate`] and not be used afterwards. Null is ignored.
void qi_report_free(struct QiReport *report);

// # Safety
// `s` must come from this library and not be used afterwards. Null is ignored.
void qi_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* QUBIT_IDENT_H */
