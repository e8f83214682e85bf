#ifndef PIXELCODE_H
#define PIXELCODE_H

/* Generated by cbindgen from crates/ffi. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every fallible call.
 */
typedef enum PcStatus {
  PC_STATUS_OK = 0,
  PC_STATUS_NULL_POINTER = 1,
  PC_STATUS_INVALID_ARGUMENT = 2,
  PC_STATUS_PARSE = 3,
  PC_STATUS_IO = 4,
  PC_STATUS_INVALID_MODEL = 5,
  PC_STATUS_SINGULAR_NETWORK = 6,
  PC_STATUS_INFEASIBLE = 7,
  PC_STATUS_NUMERICAL = 8,
  PC_STATUS_PANIC = 9,
} PcStatus;

/**
 * Opaque codebook of antenna coders.
 */
typedef struct PcCodebook PcCodebook;

/**
 * Opaque pixel-antenna model.
 */
typedef struct PcModel PcModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Length in bytes of the last error message on this thread, excluding the
 * terminating NUL. Zero if no error has been recorded.
 */
size_t pc_last_error_length(void);

/**
 * Copies the last error message, NUL-terminated and truncated to fit, into
 * `buffer`. Returns the full message length.
 *
 * # Safety
 * `buffer` must be valid for `capacity` bytes or be null.
 */
size_t pc_last_error_message(char *buffer, size_t capacity);

/**
 * Loads and validates a model JSON file.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a writable pointer.
 */
enum PcStatus pc_model_load(const char *path, struct PcModel **out);

/**
 * Writes a model as JSON.
 *
 * # Safety
 * `model` must come from this library and `path` be NUL-terminated.
 */
enum PcStatus pc_model_save(const struct PcModel *model, const char *path);

/**
 * Builds a random, reciprocal, passive model with `q` switches over `k`
 * angles.
 *
 * # Safety
 * `out` must be a writable pointer.
 */
enum PcStatus pc_model_synthesize(size_t q, size_t k, uint64_t seed, struct PcModel **out);

/**
 * # Safety
 * `model` must come from this library and not be used afterwards.
 */
void pc_model_free(struct PcModel *model);

/**
 * Number of switches and number of angle samples.
 *
 * # Safety
 * All pointers must be valid.
 */
enum PcStatus pc_model_dims(const struct PcModel *model, size_t *q, size_t *k);

/**
 * Checks model invariants. Writes the number of violations; the return is
 * `PC_STATUS_INVALID_MODEL` with a description when there are any.
 *
 * # Safety
 * All pointers must be valid.
 */
enum PcStatus pc_model_validate(const struct PcModel *model, size_t *violations);

/**
 * Port currents `[i_A, i_1 .. i_q]` for a unit feed current. `out` receives
 * `2 * (q + 1)` doubles.
 *
 * # Safety
 * `bits` must hold `q` bytes and `out` room for `2 * (q + 1)` doubles.
 */
enum PcStatus pc_port_currents(const struct PcModel *model,
                               const uint8_t *bits,
                               size_t q,
                               double *out);

/**
 * Radiation pattern over `2k` polarization-angle samples. `out` receives
 * `4 * k` doubles.
 *
 * # Safety
 * `bits` must hold `q` bytes and `out` room for `4 * k` doubles.
 */
enum PcStatus pc_radiation_pattern(const struct PcModel *model,
                                   const uint8_t *bits,
                                   size_t q,
                                   bool normalize,
                                   double *out);

/**
 * Effective number of degrees of freedom at the energy `threshold`.
 *
 * # Safety
 * All pointers must be valid.
 */
enum PcStatus pc_eadof(const struct PcModel *model, double threshold, size_t *out);

/**
 * Capacity in bit/s/Hz with equal power per transmit stream.
 *
 * # Safety
 * `h` must hold `2 * rows * cols` doubles.
 */
enum PcStatus pc_capacity_uniform(const double *h,
                                  size_t rows,
                                  size_t cols,
                                  double total_power,
                                  double noise,
                                  double *out);

/**
 * Capacity in bit/s/Hz with waterfilling over the channel eigenmodes.
 *
 * # Safety
 * `h` must hold `2 * rows * cols` doubles.
 */
enum PcStatus pc_capacity_waterfilling(const double *h,
                                       size_t rows,
                                       size_t cols,
                                       double total_power,
                                       double noise,
                                       double *out);

/**
 * Waterfilling powers for `n` eigenvalues, in input order, plus the water
 * level.
 *
 * # Safety
 * `eigenvalues` and `powers` must hold `n` doubles.
 */
enum PcStatus pc_waterfill(const double *eigenvalues,
                           size_t n,
                           double total_power,
                           double noise,
                           double *powers,
                           double *water_level);

/**
 * Loads a codebook JSON file.
 *
 * # Safety
 * `path` must be NUL-terminated and `out` writable.
 */
enum PcStatus pc_codebook_load(const char *path, struct PcCodebook **out);

/**
 * # Safety
 * `codebook` must come from this library and not be used afterwards.
 */
void pc_codebook_free(struct PcCodebook *codebook);

/**
 * Number of coders in the codebook.
 *
 * # Safety
 * All pointers must be valid.
 */
enum PcStatus pc_codebook_len(const struct PcCodebook *codebook, size_t *out);

/**
 * Picks the codebook entry with the highest gain for one channel.
 * `h_v` is the `2k x 2k` virtual channel and `e_t` the unit-norm transmit
 * pattern of length `2k`.
 *
 * # Safety
 * `h_v` must hold `8 * k * k` doubles and `e_t` `4 * k` doubles.
 */
enum PcStatus pc_codebook_select(const struct PcCodebook *codebook,
                                 const struct PcModel *model,
                                 const double *h_v,
                                 const double *e_t,
                                 size_t k,
                                 size_t *index,
                                 double *gain);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PIXELCODE_H */
