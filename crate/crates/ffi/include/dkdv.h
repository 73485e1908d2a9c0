#ifndef DKDV_H
#define DKDV_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

/*
 Status code of every fallible call; nonzero values mirror the core error kinds.
 */
typedef enum DkdvStatus {
  DKDV_STATUS_OK = 0,
  DKDV_STATUS_DOMAIN = 1,
  DKDV_STATUS_OVERFLOW = 2,
  DKDV_STATUS_UNDERFLOW = 3,
  DKDV_STATUS_ILL_CONDITIONED = 4,
  DKDV_STATUS_NOT_POSITIVE_DEFINITE = 5,
  DKDV_STATUS_CONVERGENCE = 6,
  DKDV_STATUS_PARSE = 7,
  DKDV_STATUS_IO = 8,
  DKDV_STATUS_NULL_POINTER = 9,
  DKDV_STATUS_PANIC = 10,
} DkdvStatus;

/*
 A GIG, Gamma or inverse-Gamma law.
 */
typedef struct DkdvLaw DkdvLaw;

/*
 Result of a Monte-Carlo detailed-balance run.
 */
typedef struct DkdvReport DkdvReport;

/*
 A symmetric positive-definite matrix.
 */
typedef struct DkdvSpd DkdvSpd;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Message of the last failure on this thread ("" if none). The pointer
 stays valid until the next failing call on the same thread.
 */
const char *dkdv_last_error_message(void);

/*
 Library version as a static NUL-terminated string.
 */
const char *dkdv_version(void);

/*
 `K_nu(z)` for `z > 0`.
 */
enum DkdvStatus dkdv_bessel_k(double nu, double z, double *result);

/*
 `I_nu(z)` for `z > 0`.
 */
enum DkdvStatus dkdv_bessel_i(double nu, double z, double *result);

/*
 Image of `(x, y)` under `F_dK^(alpha, beta)`, or under `psi` when `use_psi`.
 */
enum DkdvStatus dkdv_map_eval(double alpha,
                              double beta,
                              double x,
                              double y,
                              bool use_psi,
                              double *u,
                              double *v);

/*
 GIG(lambda, a, b).
 */
enum DkdvStatus dkdv_law_gig(double lambda, double a, double b, struct DkdvLaw **law);

/*
 Gamma(lambda, a) with rate `a`.
 */
enum DkdvStatus dkdv_law_gamma(double lambda, double a, struct DkdvLaw **law);

/*
 InvGamma(lambda, b) with scale `b`.
 */
enum DkdvStatus dkdv_law_inv_gamma(double lambda, double b, struct DkdvLaw **law);

/*
 Releases a law; NULL is ignored.
 */
void dkdv_law_free(struct DkdvLaw *law);

enum DkdvStatus dkdv_law_log_pdf(const struct DkdvLaw *law, double x, double *result);

enum DkdvStatus dkdv_law_cdf(const struct DkdvLaw *law, double x, double *result);

/*
 Writes `n` seeded draws into `buffer` (room for `n` doubles).
 */
enum DkdvStatus dkdv_law_sample(const struct DkdvLaw *law,
                                uint64_t seed,
                                uintptr_t n,
                                double *buffer);

/*
 SPD matrix from `r*r` row-major entries.
 */
enum DkdvStatus dkdv_spd_new(uintptr_t r, const double *row_major, struct DkdvSpd **spd);

void dkdv_spd_free(struct DkdvSpd *spd);

/*
 Dimension `r`, or 0 for NULL.
 */
uintptr_t dkdv_spd_dim(const struct DkdvSpd *spd);

/*
 Copies the `r*r` row-major entries into `buffer`.
 */
enum DkdvStatus dkdv_spd_entries(const struct DkdvSpd *spd, double *buffer);

/*
 Matrix `F_dK^(alpha, beta)(x, y) = (u, v)`; `u` and `v` are new handles.
 */
enum DkdvStatus dkdv_matrix_map(double alpha,
                                double beta,
                                const struct DkdvSpd *x,
                                const struct DkdvSpd *y,
                                struct DkdvSpd **u,
                                struct DkdvSpd **v);

/*
 Scalar detailed-balance run: `variant` 0 for `F_dK`, 1 for `psi`.
 */
enum DkdvStatus dkdv_balance_verify(uint32_t variant,
                                    double alpha,
                                    double beta,
                                    double c1,
                                    double c2,
                                    double lambda,
                                    uint64_t seed,
                                    uintptr_t n,
                                    uintptr_t permutations,
                                    struct DkdvReport **report);

void dkdv_report_free(struct DkdvReport *report);

/*
 Overall verdict of a report.
 */
enum DkdvStatus dkdv_report_pass(const struct DkdvReport *report, bool *pass);

/*
 The report as a JSON string, released with [`dkdv_string_free`].
 */
enum DkdvStatus dkdv_report_json(const struct DkdvReport *report, char **json);

/*
 Releases a string returned by this library; NULL is ignored.
 */
void dkdv_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DKDV_H */
