#ifndef CUBEMU_H
#define CUBEMU_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum CubemuMethod {
  CUBEMU_METHOD_HGEMM = 0,
  CUBEMU_METHOD_CUBE_ELEMENTWISE = 1,
  CUBEMU_METHOD_CUBE_TERMWISE = 2,
  CUBEMU_METHOD_F32_REFERENCE = 3,
} CubemuMethod;

typedef enum CubemuMode {
  CUBEMU_MODE_SINGLE = 0,
  CUBEMU_MODE_DOUBLE = 1,
} CubemuMode;

typedef enum CubemuOrder {
  CUBEMU_ORDER_ELEMENTWISE = 0,
  CUBEMU_ORDER_TERMWISE = 1,
} CubemuOrder;

typedef enum CubemuStatus {
  CUBEMU_STATUS_OK = 0,
  CUBEMU_STATUS_NULL_POINTER = 1,
  CUBEMU_STATUS_INVALID_ARGUMENT = 2,
  CUBEMU_STATUS_DOMAIN = 3,
  CUBEMU_STATUS_OVERFLOW = 4,
  CUBEMU_STATUS_DIMENSION = 5,
  CUBEMU_STATUS_PLAN = 6,
  CUBEMU_STATUS_NO_FEASIBLE_PLAN = 7,
  CUBEMU_STATUS_DEGENERATE = 8,
  CUBEMU_STATUS_FORMAT = 9,
  CUBEMU_STATUS_CONFIG = 10,
  CUBEMU_STATUS_IO = 11,
  CUBEMU_STATUS_PANIC = 12,
} CubemuStatus;

typedef struct CubemuHardware CubemuHardware;

/**
 * Row-major binary32 matrix.
 */
typedef struct CubemuMatrix CubemuMatrix;

typedef struct CubemuBlockPlan {
  size_t b_m;
  size_t b_k;
  size_t b_n;
  size_t n_fused;
  double f;
} CubemuBlockPlan;

/**
 * Main-memory traffic in elements.
 */
typedef struct CubemuTraffic {
  uint64_t a_read;
  uint64_t b_read;
  uint64_t c_readwrite;
  uint64_t total;
  double total_model;
} CubemuTraffic;

typedef struct CubemuPipeline {
  double total_time;
  double cube_busy;
  double utilization;
  double effective_flops;
} CubemuPipeline;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null after a success.
 * The pointer stays valid until the next call on this thread.
 */
const char *cubemu_last_error(void);

/**
 * Static, NUL-terminated name of a status code.
 */
const char *cubemu_status_name(enum CubemuStatus status);

/**
 * binary16 bits of `x` rounded to nearest even.
 */
uint16_t cubemu_half_from_f32(float x);

float cubemu_half_to_f32(uint16_t bits);

/**
 * Splits `x` into binary16 bits `high` and `low_scaled` with
 * `x ~= high + low_scaled * 2^-sb`.
 *
 * # Safety
 * `high` and `low` must be valid for writes.
 */
enum CubemuStatus cubemu_split_scalar(float x, int32_t sb, uint16_t *high, uint16_t *low);

/**
 * Copies `rows * cols` row-major values from `data` (zeros when `data` is
 * null) into a new matrix.
 *
 * # Safety
 * `data`, when not null, must point to `rows * cols` readable floats; `out`
 * must be valid for writes.
 */
enum CubemuStatus cubemu_matrix_new(size_t rows,
                                    size_t cols,
                                    const float *data,
                                    struct CubemuMatrix **out);

/**
 * Uniform random matrix over `[-2^e, 2^e]` (`is_signed`) or `[0, 2^e]`.
 *
 * # Safety
 * `out` must be valid for writes.
 */
enum CubemuStatus cubemu_matrix_generate(size_t rows,
                                         size_t cols,
                                         int32_t e_offset,
                                         bool is_signed,
                                         uint64_t seed,
                                         struct CubemuMatrix **out);

/**
 * Reads an SGCM file; any element type is converted to binary32.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be valid for writes.
 */
enum CubemuStatus cubemu_matrix_load(const char *path, struct CubemuMatrix **out);

/**
 * Writes `m` as a binary32 SGCM file.
 *
 * # Safety
 * `m` must be a live handle; `path` a NUL-terminated string.
 */
enum CubemuStatus cubemu_matrix_save(const struct CubemuMatrix *m, const char *path);

/**
 * Row count, or 0 for a null handle.
 *
 * # Safety
 * `m` must be null or a live handle.
 */
size_t cubemu_matrix_rows(const struct CubemuMatrix *m);

/**
 * Column count, or 0 for a null handle.
 *
 * # Safety
 * `m` must be null or a live handle.
 */
size_t cubemu_matrix_cols(const struct CubemuMatrix *m);

/**
 * Copies the row-major values into `dst`, which holds `len` floats.
 *
 * # Safety
 * `m` must be a live handle; `dst` valid for `len` writes.
 */
enum CubemuStatus cubemu_matrix_read(const struct CubemuMatrix *m, float *dst, size_t len);

/**
 * Releases a matrix. Null is ignored.
 *
 * # Safety
 * `m` must be null or a handle not yet freed.
 */
void cubemu_matrix_free(struct CubemuMatrix *m);

/**
 * Splits every element with the strict domain checks; `high` and `low`
 * receive binary16 bits, each holding `len` entries.
 *
 * # Safety
 * `m` must be a live handle; `high` and `low` valid for `len` writes.
 */
enum CubemuStatus cubemu_split_matrix(const struct CubemuMatrix *m,
                                      int32_t sb,
                                      uint16_t *high,
                                      uint16_t *low,
                                      size_t len);

/**
 * `a * b` with the chosen method; `sb` applies to the cube methods.
 *
 * # Safety
 * `a` and `b` must be live handles; `out` valid for writes.
 */
enum CubemuStatus cubemu_gemm(enum CubemuMethod method,
                              int32_t sb,
                              const struct CubemuMatrix *a,
                              const struct CubemuMatrix *b,
                              struct CubemuMatrix **out);

/**
 * binary64 product of `a` and `b` written row-major into `dst`.
 *
 * # Safety
 * `a` and `b` must be live handles; `dst` valid for `len` writes.
 */
enum CubemuStatus cubemu_gemm_oracle(const struct CubemuMatrix *a,
                                     const struct CubemuMatrix *b,
                                     double *dst,
                                     size_t len);

/**
 * Split GEMM executed block by block under `plan`.
 *
 * # Safety
 * `a` and `b` must be live handles; `plan` readable; `out` valid for writes.
 */
enum CubemuStatus cubemu_gemm_blocked(const struct CubemuMatrix *a,
                                      const struct CubemuMatrix *b,
                                      int32_t sb,
                                      const struct CubemuBlockPlan *plan,
                                      enum CubemuOrder order,
                                      struct CubemuMatrix **out);

/**
 * Relative Frobenius error of `c` against the binary64 product `a * b`.
 *
 * # Safety
 * `a`, `b` and `c` must be live handles; `err` valid for writes.
 */
enum CubemuStatus cubemu_relative_error(const struct CubemuMatrix *a,
                                        const struct CubemuMatrix *b,
                                        const struct CubemuMatrix *c,
                                        double *err);

/**
 * Method tag, as used in CSV reports.
 */
const char *cubemu_method_name(enum CubemuMethod method);

/**
 * Probability that the unscaled low part underflows at offset exponent
 * `e_offset`; `include_gradual` also counts subnormal results.
 */
double cubemu_p_underflow(int32_t e_offset, bool include_gradual);

/**
 * Worst-case mantissa bits kept by the split at `e_offset` and `sb`.
 */
uint32_t cubemu_precision_bits(int32_t e_offset, int32_t sb);

/**
 * Scaling exponent for data whose binary16 exponents span
 * `[e_min, e_max]`. `best_effort` is set when no value meets both bounds.
 *
 * # Safety
 * `sb` and `best_effort` must be valid for writes.
 */
enum CubemuStatus cubemu_recommend_sb(int32_t e_min, int32_t e_max, int32_t *sb, bool *best_effort);

/**
 * Built-in hardware model.
 *
 * # Safety
 * `out` must be valid for writes.
 */
enum CubemuStatus cubemu_hardware_default(struct CubemuHardware **out);

/**
 * Hardware model from JSON; absent fields keep their defaults.
 *
 * # Safety
 * `json` must be a NUL-terminated string; `out` valid for writes.
 */
enum CubemuStatus cubemu_hardware_from_json(const char *json, struct CubemuHardware **out);

/**
 * Releases a hardware model. Null is ignored.
 *
 * # Safety
 * `hw` must be null or a handle not yet freed.
 */
void cubemu_hardware_free(struct CubemuHardware *hw);

/**
 * Validated plan for a block shape. `n_fused == 0` derives it from the L1
 * capacity.
 *
 * # Safety
 * `hw` must be a live handle; `out` valid for writes.
 */
enum CubemuStatus cubemu_plan_new(const struct CubemuHardware *hw,
                                  size_t b_m,
                                  size_t b_k,
                                  size_t b_n,
                                  size_t n_fused,
                                  struct CubemuBlockPlan *out);

/**
 * Minimum-traffic plan for an `m x k x n` product. `traffic` may be null.
 *
 * # Safety
 * `hw` must be a live handle; `plan` valid for writes; `traffic` null or
 * valid for writes.
 */
enum CubemuStatus cubemu_plan_search(const struct CubemuHardware *hw,
                                     size_t m,
                                     size_t k,
                                     size_t n,
                                     struct CubemuBlockPlan *plan,
                                     struct CubemuTraffic *traffic);

/**
 * Main-memory traffic of `plan` on an `m x k x n` product.
 *
 * # Safety
 * `hw` must be a live handle; `plan` readable; `out` valid for writes.
 */
enum CubemuStatus cubemu_plan_traffic(const struct CubemuHardware *hw,
                                      const struct CubemuBlockPlan *plan,
                                      size_t m,
                                      size_t k,
                                      size_t n,
                                      struct CubemuTraffic *out);

/**
 * Analytic row-block height at fill fraction `f`, and its next multiple
 * of 16.
 *
 * # Safety
 * `hw` must be a live handle; `exact` and `rounded` valid for writes.
 */
enum CubemuStatus cubemu_optimal_bm(const struct CubemuHardware *hw,
                                    double f,
                                    double *exact,
                                    size_t *rounded);

/**
 * Simulated timing of the three split passes under `plan`.
 *
 * # Safety
 * `hw` must be a live handle; `plan` readable; `out` valid for writes.
 */
enum CubemuStatus cubemu_pipesim(const struct CubemuHardware *hw,
                                 const struct CubemuBlockPlan *plan,
                                 size_t m,
                                 size_t k,
                                 size_t n,
                                 enum CubemuMode mode,
                                 struct CubemuPipeline *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CUBEMU_H */
