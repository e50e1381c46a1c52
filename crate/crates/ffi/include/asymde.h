#ifndef ASYMDE_H
#define ASYMDE_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum AsymdeStatus {
  ASYMDE_STATUS_OK = 0,
  ASYMDE_STATUS_NULL_POINTER = 1,
  ASYMDE_STATUS_INVALID_ARGUMENT = 2,
  ASYMDE_STATUS_PARSE = 3,
  /*
   No threshold bracket, encoder failure or similar.
   */
  ASYMDE_STATUS_NUMERICAL = 4,
  ASYMDE_STATUS_PANIC = 5,
} AsymdeStatus;

/*
 Opaque degree-distribution handle.
 */
typedef struct AsymdeCode AsymdeCode;

typedef struct AsymdeSimResult {
  double ber;
  double bler;
  uint64_t bit_errors;
  uint64_t tied_bits;
  uint64_t block_errors;
  uint64_t bits_total;
  double ber_given_0;
  double ber_given_1;
} AsymdeSimResult;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Message of the last failed call on this thread; valid until the next call.
 */
const char *asymde_last_error(void);

/*
 Library version as a static NUL-terminated string.
 */
const char *asymde_version(void);

/*
 Parses a degree file (`lambda <k> <f>` / `rho <k> <f>` lines).

 # Safety
 `text` must be a NUL-terminated string and `out` a valid pointer.
 */
enum AsymdeStatus asymde_code_parse(const char *text, struct AsymdeCode **out);

/*
 Named ensemble: `"3,6"`-style regular codes or `"12A"`, `"12B"`, `"12C"`.

 # Safety
 `name` must be a NUL-terminated string and `out` a valid pointer.
 */
enum AsymdeStatus asymde_code_preset(const char *name, struct AsymdeCode **out);

/*
 Releases a handle; null is ignored.

 # Safety
 `code` must come from this library and not be used afterwards.
 */
void asymde_code_free(struct AsymdeCode *code);

/*
 Design rate `1 - ∫rho / ∫lambda`.

 # Safety
 `code` must be a live handle and `out` a valid pointer.
 */
enum AsymdeStatus asymde_code_design_rate(const struct AsymdeCode *code, double *out);

/*
 `1 / (lambda2 rho'(1))`; infinity when there are no degree-2 variables.

 # Safety
 `code` must be a live handle and `out` a valid pointer.
 */
enum AsymdeStatus asymde_code_stability_bound(const struct AsymdeCode *code, double *out);

/*
 Bhattacharyya parameter of a channel spec such as `"z:eps1=0.23"`.

 # Safety
 `channel` must be a NUL-terminated string and `out` a valid pointer.
 */
enum AsymdeStatus asymde_channel_bhattacharyya(const char *channel, double *out);

/*
 Runs density evolution on a `bins`-bin grid over `[-llr_max, llr_max]`
 and reports the final error probability, `<CBP>` and whether the
 stability region was reached. `coset != 0` selects the coset ensemble.

 # Safety
 Pointers must be valid; `channel` NUL-terminated.
 */
enum AsymdeStatus asymde_run_de(const struct AsymdeCode *code,
                                const char *channel,
                                uint32_t bins,
                                double llr_max,
                                uint32_t max_iter,
                                int32_t coset,
                                double *out_pe,
                                double *out_cbp,
                                int32_t *out_converged);

/*
 Decoding threshold over a family (`"bec"`, `"bsc"`, `"z"`, `"biawgnc"`,
 `"cbiawgnc"`) by bisection to `precision`.

 # Safety
 Pointers must be valid; `family` NUL-terminated.
 */
enum AsymdeStatus asymde_threshold(const struct AsymdeCode *code,
                                   const char *family,
                                   uint32_t bins,
                                   double llr_max,
                                   uint32_t max_iter,
                                   double precision,
                                   int32_t coset,
                                   double *out);

/*
 Monte Carlo BP simulation on one sampled length-`n` graph.

 # Safety
 Pointers must be valid; `channel` NUL-terminated.
 */
enum AsymdeStatus asymde_simulate(const struct AsymdeCode *code,
                                  uint64_t n,
                                  const char *channel,
                                  uint64_t codewords,
                                  uint32_t bp_iters,
                                  uint64_t seed,
                                  struct AsymdeSimResult *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ASYMDE_H */
