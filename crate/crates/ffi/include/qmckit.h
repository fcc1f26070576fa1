/* Generated by cbindgen from crates/ffi; do not edit. */

#ifndef QMCKIT_H
#define QMCKIT_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum QmcKernelFamily {
  /*
   Shift-invariant kernel for lattices.
   */
  QMC_KERNEL_FAMILY_SI = 0,
  /*
   Digitally-shift-invariant kernel for base-2 nets.
   */
  QMC_KERNEL_FAMILY_DSI = 1,
} QmcKernelFamily;

/*
 Result code of every fallible call.
 */
typedef enum QmcStatus {
  QMC_STATUS_OK = 0,
  QMC_STATUS_NULL_POINTER = 1,
  QMC_STATUS_INVALID_ARGUMENT = 2,
  QMC_STATUS_SHAPE = 3,
  QMC_STATUS_RANGE = 4,
  QMC_STATUS_EXHAUSTED = 5,
  QMC_STATUS_PRECISION = 6,
  QMC_STATUS_UNSUPPORTED = 7,
  QMC_STATUS_STRUCTURE = 8,
  QMC_STATUS_SINGULAR = 9,
  QMC_STATUS_PARSE = 10,
  QMC_STATUS_IO = 11,
  QMC_STATUS_DOF = 12,
  QMC_STATUS_PANIC = 255,
} QmcStatus;

/*
 Opaque point generator.
 */
typedef struct QmcGenerator QmcGenerator;

/*
 Opaque eigen-decomposed Gram matrix.
 */
typedef struct QmcGram QmcGram;

/*
 Plain-data summary of an RQMC estimate.
 */
typedef struct QmcRqmcResult {
  double mean;
  double sigma;
  double ci_lo;
  double ci_hi;
  double level;
  uint64_t n;
  uint64_t reps;
  /*
   1 when the tolerance was met (always 1 in fixed mode).
   */
  int32_t tolerance_met;
} QmcRqmcResult;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Library version as a static NUL-terminated string.
 */
const char *qmc_version(void);

/*
 Message of the last failed call on this thread; valid until the next
 failing call on the same thread. Never null.
 */
const char *qmc_last_error(void);

/*
 Generator from a sampler name such as `"lattice"`, `"dnet-lms"`,
 `"dnet-lms-alpha2"`, `"halton-qrng"` or `"iid"`.

 # Safety
 `name` must be a NUL-terminated string and `out` valid for writes.
 */
enum QmcStatus qmc_sampler_new(const char *name,
                               uintptr_t d,
                               uintptr_t reps,
                               uint64_t seed,
                               struct QmcGenerator **out);

/*
 Randomly shifted lattice with the built-in generating vector. Linear
 order (`linear != 0`) fixes the size to `n`, a power of two; radical
 inverse order ignores `n`.

 # Safety
 `out` must be valid for writes.
 */
enum QmcStatus qmc_lattice_new(uintptr_t d,
                               int32_t linear,
                               uint64_t n,
                               uintptr_t reps,
                               uint64_t seed,
                               struct QmcGenerator **out);

/*
 Built-in base-2 net with interlacing order `alpha` and randomization
 `"none"`, `"shift"`, `"permutation"`, `"lms"`, `"lms-shift"` or `"nus"`.

 # Safety
 `randomization` must be NUL-terminated and `out` valid for writes.
 */
enum QmcStatus qmc_dnet_new(uintptr_t d,
                            uintptr_t alpha,
                            const char *randomization,
                            int32_t gray_code,
                            uintptr_t reps,
                            uint64_t seed,
                            struct QmcGenerator **out);

/*
 # Safety
 `g` must be null or a handle from a `*_new` call not yet freed.
 */
void qmc_generator_free(struct QmcGenerator *g);

/*
 Dimension of the generator, or 0 for a null handle.

 # Safety
 `g` must be null or a live handle.
 */
uintptr_t qmc_generator_dim(const struct QmcGenerator *g);

/*
 Replication count, or 0 for a null handle.

 # Safety
 `g` must be null or a live handle.
 */
uintptr_t qmc_generator_replications(const struct QmcGenerator *g);

/*
 Writes points `start..start + count` of replication `rep` row-major
 into `out`, which must hold `count * dim` doubles.

 # Safety
 `g` must be a live handle and `out` valid for `out_len` writes.
 */
enum QmcStatus qmc_generator_fill(const struct QmcGenerator *g,
                                  uintptr_t rep,
                                  uint64_t start,
                                  uintptr_t count,
                                  double *out,
                                  uintptr_t out_len);

/*
 Orthonormal Walsh-Hadamard transform in place; `n` a power of two.

 # Safety
 `data` must be valid for `n` reads and writes.
 */
enum QmcStatus qmc_fwht(double *data, uintptr_t n);

/*
 Orthonormal FFT with bit-reversed input order, in place on split
 real/imaginary arrays.

 # Safety
 `re` and `im` must each be valid for `n` reads and writes.
 */
enum QmcStatus qmc_fftbr(double *re, double *im, uintptr_t n);

/*
 Inverse of [`qmc_fftbr`].

 # Safety
 As for [`qmc_fftbr`].
 */
enum QmcStatus qmc_ifftbr(double *re, double *im, uintptr_t n);

/*
 Product kernel `gamma * prod_j (1 + eta K_alpha(x_j, y_j))`.

 # Safety
 `x` and `y` must hold `d` doubles, `out` valid for writes.
 */
enum QmcStatus qmc_kernel_eval(enum QmcKernelFamily family,
                               uint32_t alpha,
                               double gamma,
                               double eta,
                               const double *x,
                               const double *y,
                               uintptr_t d,
                               double *out);

/*
 Gram matrix of `n` points (row-major `n x d`) in radical-inverse order:
 lattice points with the SI kernel or base-2 net points with the DSI kernel.

 # Safety
 `points` must hold `n * d` doubles and `out` be valid for writes.
 */
enum QmcStatus qmc_gram_new(enum QmcKernelFamily family,
                            uint32_t alpha,
                            double gamma,
                            double eta,
                            const double *points,
                            uintptr_t n,
                            uintptr_t d,
                            struct QmcGram **out);

/*
 # Safety
 `g` must be null or a live Gram handle.
 */
void qmc_gram_free(struct QmcGram *g);

/*
 Size of the Gram matrix, or 0 for a null handle.

 # Safety
 `g` must be null or a live Gram handle.
 */
uintptr_t qmc_gram_size(const struct QmcGram *g);

/*
 `out = K y` in `O(n log n)`.

 # Safety
 `y` and `out` must each hold `n` doubles.
 */
enum QmcStatus qmc_gram_matvec(const struct QmcGram *g, const double *y, double *out, uintptr_t n);

/*
 `out = K^-1 y`; fails with `SINGULAR` on a numerically singular matrix.

 # Safety
 `y` and `out` must each hold `n` doubles.
 */
enum QmcStatus qmc_gram_solve(const struct QmcGram *g, const double *y, double *out, uintptr_t n);

/*
 Eigenvalues in transform order as split real/imaginary arrays.

 # Safety
 `re` and `im` must each hold `n` doubles.
 */
enum QmcStatus qmc_gram_eigenvalues(const struct QmcGram *g, double *re, double *im, uintptr_t n);

/*
 Squared discrepancy of the cubature with weights `w`.

 # Safety
 `w` must hold `n` doubles and `out` be valid for writes.
 */
enum QmcStatus qmc_gram_discrepancy(const struct QmcGram *g,
                                    const double *w,
                                    uintptr_t n,
                                    double *out);

/*
 Fixed-`n` RQMC estimate of a catalog integrand.

 # Safety
 `integrand` and `sampler` must be NUL-terminated; `out` valid for writes.
 */
enum QmcStatus qmc_integrate_fixed(const char *integrand,
                                   uintptr_t d,
                                   const char *sampler,
                                   uintptr_t n,
                                   uintptr_t reps,
                                   double tau,
                                   uint64_t seed,
                                   struct QmcRqmcResult *out);

/*
 Adaptive doubling estimate; `out->tolerance_met` reports whether
 `abs_tol` was reached before `n_max`.

 # Safety
 As for [`qmc_integrate_fixed`].
 */
enum QmcStatus qmc_integrate_adaptive(const char *integrand,
                                      uintptr_t d,
                                      const char *sampler,
                                      uintptr_t reps,
                                      double tau,
                                      double abs_tol,
                                      uintptr_t n0,
                                      uintptr_t n_max,
                                      uint64_t seed,
                                      struct QmcRqmcResult *out);

/*
 `p`-quantile of Student's t with `nu` degrees of freedom.

 # Safety
 `out` must be valid for writes.
 */
enum QmcStatus qmc_student_t_quantile(double nu, double p, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* QMCKIT_H */
