#ifndef SSHAP_H
#define SSHAP_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stddef.h>
#include <stdint.h>

typedef enum SshapMode {
  SSHAP_MODE_EXACT = 0,
  SSHAP_MODE_MONTE_CARLO = 1,
} SshapMode;

typedef enum SshapStatus {
  SSHAP_STATUS_OK = 0,
  SSHAP_STATUS_NULL_POINTER = 1,
  SSHAP_STATUS_INVALID_ARGUMENT = 2,
  SSHAP_STATUS_BUFFER_TOO_SMALL = 3,
  SSHAP_STATUS_INVALID_COMPOSITION = 4,
  SSHAP_STATUS_DIMENSION_MISMATCH = 5,
  SSHAP_STATUS_INVALID_DATA = 6,
  SSHAP_STATUS_MODEL_ERROR = 7,
  SSHAP_STATUS_BUDGET_ERROR = 8,
  SSHAP_STATUS_IO_ERROR = 9,
  SSHAP_STATUS_PANIC = 10,
} SshapStatus;

// An orthonormal basis of the simplex.
typedef struct SshapBasis SshapBasis;

// A computed explanation.
typedef struct SshapExplanation SshapExplanation;

// A loaded builtin model or a running external model process.
typedef struct SshapModel SshapModel;

// Estimator settings for [`sshap_explain`]. `m_max = 0` selects
// `1000 * features`; `epsilon <= 0` disables the efficiency adjustment.
typedef struct SshapExplainOptions {
  enum SshapMode mode;
  uintptr_t m_max;
  uintptr_t m_min;
  uint64_t seed;
  double epsilon;
} SshapExplainOptions;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message describing the last failure on this thread, or null. The string
// is owned by the library and valid until the next call on this thread.
const char *sshap_last_error_message(void);

// Library version as a static NUL-terminated string.
const char *sshap_version(void);

// Closes `n` positive values to sum to one.
//
// # Safety
// `raw` and `out` must point to `n` doubles.
enum SshapStatus sshap_closure(const double *raw, uintptr_t n, double *out);

// `out = x ⊕ y`.
//
// # Safety
// `x`, `y` and `out` must point to `n` doubles.
enum SshapStatus sshap_perturb(const double *x, const double *y, uintptr_t n, double *out);

// `out = alpha ⊙ x`.
//
// # Safety
// `x` and `out` must point to `n` doubles.
enum SshapStatus sshap_power(const double *x, uintptr_t n, double alpha, double *out);

// Aitchison inner product of `x` and `y`.
//
// # Safety
// `x` and `y` must point to `n` doubles; `out` to one double.
enum SshapStatus sshap_inner(const double *x, const double *y, uintptr_t n, double *out);

// Aitchison norm of `x`.
//
// # Safety
// `x` must point to `n` doubles; `out` to one double.
enum SshapStatus sshap_norm(const double *x, uintptr_t n, double *out);

// Aitchison distance between `x` and `y`.
//
// # Safety
// `x` and `y` must point to `n` doubles; `out` to one double.
enum SshapStatus sshap_distance(const double *x, const double *y, uintptr_t n, double *out);

// Unit-norm composition pointing towards class `k` of `classes`.
//
// # Safety
// `out` must point to `classes` doubles.
enum SshapStatus sshap_class_composition(uintptr_t k, uintptr_t classes, double *out);

// Gram-Schmidt basis of the `classes`-part simplex.
//
// # Safety
// `out` must be a valid pointer to receive the handle.
enum SshapStatus sshap_basis_gram_schmidt(uintptr_t classes, struct SshapBasis **out);

// Balance-tree basis from a JSON tree with integer class leaves.
//
// # Safety
// `json` must be a NUL-terminated string; `out` a valid pointer.
enum SshapStatus sshap_basis_from_tree_json(const char *json, struct SshapBasis **out);

// Number of parts `D` of the basis, or 0 for a null handle.
//
// # Safety
// `basis` must be null or a live handle.
uintptr_t sshap_basis_classes(const struct SshapBasis *basis);

// ILR coordinates of the `D`-part composition `x` into `out` (`D - 1` values).
//
// # Safety
// `basis` must be a live handle; `x` must point to `n` doubles and `out`
// to `out_len` doubles.
enum SshapStatus sshap_basis_ilr(const struct SshapBasis *basis,
                                 const double *x,
                                 uintptr_t n,
                                 double *out,
                                 uintptr_t out_len);

// Composition with ILR coordinates `coords` into `out` (`D` values).
//
// # Safety
// `basis` must be a live handle; `coords` must point to `n` doubles and
// `out` to `out_len` doubles.
enum SshapStatus sshap_basis_ilr_inv(const struct SshapBasis *basis,
                                     const double *coords,
                                     uintptr_t n,
                                     double *out,
                                     uintptr_t out_len);

// # Safety
// `basis` must be null or a handle not yet freed.
void sshap_basis_free(struct SshapBasis *basis);

// Opens `builtin:<model.json>` or `exec:<command line>`.
//
// # Safety
// `spec` must be a NUL-terminated string; `out` a valid pointer.
enum SshapStatus sshap_model_open(const char *spec, uint64_t timeout_ms, struct SshapModel **out);

// Number of classes, or 0 for a null handle.
//
// # Safety
// `model` must be null or a live handle.
uintptr_t sshap_model_num_classes(const struct SshapModel *model);

// Number of features, or 0 for a null handle.
//
// # Safety
// `model` must be null or a live handle.
uintptr_t sshap_model_num_features(const struct SshapModel *model);

// Predicts `n_rows` row-major instances into `out` (`n_rows * D` values).
//
// # Safety
// `model` must be a live handle; `instances` must point to
// `n_rows * n_features` doubles and `out` to `out_len` doubles.
enum SshapStatus sshap_model_predict(const struct SshapModel *model,
                                     const double *instances,
                                     uintptr_t n_rows,
                                     uintptr_t n_features,
                                     double *out,
                                     uintptr_t out_len);

// # Safety
// `model` must be null or a handle not yet freed.
void sshap_model_free(struct SshapModel *model);

// Exact mode with the default sampling settings filled in.
struct SshapExplainOptions sshap_explain_options_default(void);

// Explains `instance` against `n_background` row-major background rows.
//
// # Safety
// `model` and `basis` must be live handles; `instance` must point to
// `n_features` doubles, `background` to `n_background * n_features`
// doubles; `options` may be null for the defaults; `out` must be valid.
enum SshapStatus sshap_explain(const struct SshapModel *model,
                               const struct SshapBasis *basis,
                               const double *instance,
                               uintptr_t n_features,
                               const double *background,
                               uintptr_t n_background,
                               const struct SshapExplainOptions *options,
                               struct SshapExplanation **out);

// Number of explained features, or 0 for a null handle.
//
// # Safety
// `e` must be null or a live handle.
uintptr_t sshap_explanation_num_features(const struct SshapExplanation *e);

// Number of classes, or 0 for a null handle.
//
// # Safety
// `e` must be null or a live handle.
uintptr_t sshap_explanation_num_classes(const struct SshapExplanation *e);

// Shapley composition of feature `i` into `out` (`D` values).
//
// # Safety
// `e` must be a live handle; `out` must point to `out_len` doubles.
enum SshapStatus sshap_explanation_shapley(const struct SshapExplanation *e,
                                           uintptr_t i,
                                           double *out,
                                           uintptr_t out_len);

// ILR coordinates of feature `i` into `out` (`D - 1` values).
//
// # Safety
// `e` must be a live handle; `out` must point to `out_len` doubles.
enum SshapStatus sshap_explanation_ilr(const struct SshapExplanation *e,
                                       uintptr_t i,
                                       double *out,
                                       uintptr_t out_len);

// Base distribution into `out` (`D` values).
//
// # Safety
// `e` must be a live handle; `out` must point to `out_len` doubles.
enum SshapStatus sshap_explanation_base(const struct SshapExplanation *e,
                                        double *out,
                                        uintptr_t out_len);

// Predicted distribution into `out` (`D` values).
//
// # Safety
// `e` must be a live handle; `out` must point to `out_len` doubles.
enum SshapStatus sshap_explanation_prediction(const struct SshapExplanation *e,
                                              double *out,
                                              uintptr_t out_len);

// Aitchison distance between the perturbed attributions and
// `prediction ⊖ base`, or NaN for a null handle.
//
// # Safety
// `e` must be null or a live handle.
double sshap_explanation_efficiency_residual(const struct SshapExplanation *e);

// Serialises the explanation document. Release `*out` with
// [`sshap_string_free`].
//
// # Safety
// `e` must be a live handle; `out` a valid pointer.
enum SshapStatus sshap_explanation_to_json(const struct SshapExplanation *e, char **out);

// # Safety
// `e` must be null or a handle not yet freed.
void sshap_explanation_free(struct SshapExplanation *e);

// # Safety
// `s` must be null or a string returned by this library and not yet freed.
void sshap_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SSHAP_H */
