#ifndef CHIMERA_TTS_H
#define CHIMERA_TTS_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every fallible call.
 */
typedef enum CtStatus {
  CT_STATUS_OK = 0,
  CT_STATUS_NULL_POINTER = 1,
  CT_STATUS_INVALID_PARAMETER = 2,
  CT_STATUS_PARSE = 3,
  CT_STATUS_SIZE_LIMIT = 4,
  CT_STATUS_RESOURCE_LIMIT = 5,
  CT_STATUS_INSUFFICIENT_DATA = 6,
  CT_STATUS_NON_CONVERGENCE = 7,
  CT_STATUS_IO = 8,
  CT_STATUS_INTERNAL = 9,
} CtStatus;

/**
 * Annealing algorithm selector.
 */
typedef enum CtAlgorithm {
  CT_ALGORITHM_SA = 0,
  CT_ALGORITHM_SQA = 1,
  CT_ALGORITHM_MFA = 2,
} CtAlgorithm;

/**
 * Opaque coupling instance.
 */
typedef struct CtInstance CtInstance;

/**
 * Parameters of a single annealing schedule.
 *
 * `beta` is ignored for SA, `slices` only read for SQA and `table_size`
 * only for MFA. A zero `slices` or `table_size` selects the default.
 */
typedef struct CtSchedule {
  enum CtAlgorithm algorithm;
  uint64_t t_a;
  double beta;
  size_t slices;
  size_t table_size;
} CtSchedule;

/**
 * Time-to-solution estimate for one instance.
 */
typedef struct CtTtsRecord {
  double s;
  double tau;
  uint64_t repetitions;
  double successes;
  bool is_upper_bound;
} CtTtsRecord;

/**
 * Maximum likelihood GPD fit.
 */
typedef struct CtGpdFit {
  double xi;
  double sigma;
  double u;
  size_t k;
  double xi_se;
  double sigma_se;
  double cov_xi_sigma;
  double log_likelihood;
} CtGpdFit;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. The pointer is
 * valid until the next call into this library from the same thread.
 */
const char *ct_last_error_message(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *ct_version(void);

/**
 * Draws a random ±1 instance on the `l x l` Chimera graph.
 *
 * # Safety
 * `out` must be a valid pointer to writable storage for one handle.
 */
enum CtStatus ct_instance_generate(size_t l, uint64_t seed, uint64_t id, struct CtInstance **out);

/**
 * Parses an instance from its text form.
 *
 * # Safety
 * `text` must be a NUL-terminated string and `out` a valid pointer.
 */
enum CtStatus ct_instance_parse(const char *text, uint64_t id, struct CtInstance **out);

/**
 * Releases an instance; null is ignored.
 *
 * # Safety
 * `h` must be null or a handle not yet freed.
 */
void ct_instance_free(struct CtInstance *h);

/**
 * Number of spins, or 0 for a null handle.
 *
 * # Safety
 * `h` must be null or a live handle.
 */
size_t ct_instance_num_spins(const struct CtInstance *h);

/**
 * Text form of the instance as a newly allocated string; release it with
 * [`ct_string_free`].
 *
 * # Safety
 * `h` must be a live handle and `out` a valid pointer.
 */
enum CtStatus ct_instance_to_text(const struct CtInstance *h, char **out);

/**
 * # Safety
 * `s` must be null or a string returned by this library.
 */
void ct_string_free(char *s);

/**
 * Energy of `spins[0..n]`, each entry ±1.
 *
 * # Safety
 * `spins` must point to `n` readable bytes and `out` be valid.
 */
enum CtStatus ct_instance_energy(const struct CtInstance *h,
                                 const int8_t *spins,
                                 size_t n,
                                 int64_t *out);

/**
 * Exact ground-state energy. When `witness` is non-null it receives
 * `num_spins` entries of a ground configuration.
 *
 * # Safety
 * `out` must be valid; `witness` null or writable for `num_spins` bytes.
 */
enum CtStatus ct_ground_energy(const struct CtInstance *h, int64_t *out, int8_t *witness);

/**
 * One annealing repetition on the stream `(seed, instance id, repetition)`;
 * writes the fraction of the readout that reached `e0`.
 *
 * # Safety
 * `h` must be live and `schedule`, `success_fraction` and `final_energy`
 * valid pointers.
 */
enum CtStatus ct_anneal(const struct CtInstance *h,
                        const struct CtSchedule *schedule,
                        int64_t e0,
                        uint64_t seed,
                        uint64_t repetition,
                        double *success_fraction,
                        int64_t *final_energy);

/**
 * Repeats the schedule until `target_successes` or `cap` repetitions.
 *
 * # Safety
 * `h` must be live and `schedule` and `out` valid pointers.
 */
enum CtStatus ct_estimate_tau(const struct CtInstance *h,
                              const struct CtSchedule *schedule,
                              int64_t e0,
                              double target_successes,
                              uint64_t cap,
                              uint64_t seed,
                              struct CtTtsRecord *out);

/**
 * Maximum likelihood GPD fit to the values of `sample[0..n]` above `u`.
 *
 * # Safety
 * `sample` must point to `n` readable doubles and `out` be valid.
 */
enum CtStatus ct_fit_gpd(const double *sample,
                         size_t n,
                         double u,
                         size_t min_exceedances,
                         struct CtGpdFit *out);

/**
 * GPD distribution function `W_{xi,u,sigma}(x)`.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum CtStatus ct_gpd_cdf(double xi, double u, double sigma, double x, double *out);

/**
 * GPD quantile function.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum CtStatus ct_gpd_quantile(double xi, double u, double sigma, double p, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CHIMERA_TTS_H */
