#ifndef QLNLS_H
#define QLNLS_H

#include <stddef.h>
#include <stdint.h>

#define QLNLS_OK 0

/*
 Bad configuration key or value.
 */
#define QLNLS_ERR_CONFIG 2

/*
 A precondition or admissibility gate rejected the input.
 */
#define QLNLS_ERR_PRECONDITION 3

/*
 A numerical target was missed (accuracy, divergence, control).
 */
#define QLNLS_ERR_NUMERICAL 4

#define QLNLS_ERR_NULL 10

/*
 Caller buffer shorter than required.
 */
#define QLNLS_ERR_BUFFER 11

#define QLNLS_ERR_UTF8 12

#define QLNLS_ERR_INDEX 13

#define QLNLS_ERR_PANIC 99

/*
 Key/value run configuration.
 */
typedef struct QlnlsConfig QlnlsConfig;

/*
 Complex field sampled on an `n`-point periodic grid.
 */
typedef struct QlnlsField QlnlsField;

/*
 Result of a nonlinear solve.
 */
typedef struct QlnlsSolution QlnlsSolution;

/*
 Sampled trajectory `t_i = i T / (n_t - 1)`.
 */
typedef struct QlnlsTraj QlnlsTraj;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Copies the last error message of this thread into `buf` (NUL-terminated,
 truncated to `len - 1` bytes) and returns the full message length.

 # Safety
 `buf` must be null or point to `len` writable bytes.
 */
uintptr_t qlnls_last_error(char *buf, uintptr_t len);

/*
 New configuration holding every default.
 */
QlnlsConfig *qlnls_config_new(void);

/*
 # Safety
 `cfg` must come from [`qlnls_config_new`] and not be used afterwards.
 */
void qlnls_config_free(QlnlsConfig *cfg);

/*
 Sets one key; the whole configuration is re-validated and the change is
 rolled back if it does not parse.

 # Safety
 `cfg` must be a live configuration; `key` and `value` NUL-terminated strings.
 */
int32_t qlnls_config_set(QlnlsConfig *cfg, const char *key, const char *value);

/*
 Reads `key = value` lines from a file into `cfg`.

 # Safety
 `cfg` must be a live configuration; `path` a NUL-terminated string.
 */
int32_t qlnls_config_load(QlnlsConfig *cfg, const char *path);

/*
 Runs a subcommand (`simulate`, `reduce`, `observe`, `control-lin`,
 `control`, `cauchy`, `check`) and writes its artifacts to `out_dir`.

 # Safety
 `cfg` must be a live configuration; strings NUL-terminated.
 */
int32_t qlnls_run(const QlnlsConfig *cfg, const char *command, const char *out_dir);

/*
 Builds a field from node values `re[j] + i im[j]`, `j < n`.

 # Safety
 `re` and `im` must point to `n` readable doubles; `result` must be writable.
 */
int32_t qlnls_field_new(uintptr_t n, const double *re, const double *im, QlnlsField **result);

/*
 # Safety
 `f` must come from this library and not be used afterwards.
 */
void qlnls_field_free(QlnlsField *f);

/*
 Number of grid nodes, or 0 for a null handle.

 # Safety
 `f` must be null or a live field.
 */
uintptr_t qlnls_field_len(const QlnlsField *f);

/*
 Copies the node values into `re`/`im` of length `len >= n`.

 # Safety
 `f` must be a live field; `re`, `im` must point to `len` writable doubles.
 */
int32_t qlnls_field_values(const QlnlsField *f, double *re, double *im, uintptr_t len);

/*
 `(sum_k <k>^{2s} |c_k|^2)^{1/2}`.

 # Safety
 `f` must be a live field; `result` writable.
 */
int32_t qlnls_field_sobolev_norm(const QlnlsField *f, double s, double *result);

/*
 # Safety
 `t` must come from this library and not be used afterwards.
 */
void qlnls_traj_free(QlnlsTraj *t);

/*
 Number of time samples, or 0 for a null handle.

 # Safety
 `t` must be null or a live trajectory.
 */
uintptr_t qlnls_traj_samples(const QlnlsTraj *t);

/*
 Number of grid nodes per sample, or 0 for a null handle.

 # Safety
 `t` must be null or a live trajectory.
 */
uintptr_t qlnls_traj_nodes(const QlnlsTraj *t);

/*
 Copies the node values of sample `i`.

 # Safety
 `t` must be a live trajectory; `re`, `im` must point to `len` writable doubles.
 */
int32_t qlnls_traj_sample(const QlnlsTraj *t, uintptr_t i, double *re, double *im, uintptr_t len);

/*
 # Safety
 `s` must come from this library and not be used afterwards.
 */
void qlnls_solution_free(QlnlsSolution *s);

/*
 Final Nash-Moser residual.

 # Safety
 `s` must be a live solution.
 */
double qlnls_solution_residual(const QlnlsSolution *s);

/*
 Independent cross-check: the re-simulated endpoint miss for control, the
 relative gap to the direct integrator for the Cauchy problem.

 # Safety
 `s` must be a live solution.
 */
double qlnls_solution_check(const QlnlsSolution *s);

/*
 # Safety
 `s` must be a live solution.
 */
uintptr_t qlnls_solution_iterations(const QlnlsSolution *s);

/*
 New handle on the state trajectory.

 # Safety
 `s` must be a live solution; `result` writable.
 */
int32_t qlnls_solution_state(const QlnlsSolution *s, QlnlsTraj **result);

/*
 New handle on the masked control `chi f`; fails with `QLNLS_ERR_INDEX`
 for a Cauchy solution.

 # Safety
 `s` must be a live solution; `result` writable.
 */
int32_t qlnls_solution_control(const QlnlsSolution *s, QlnlsTraj **result);

/*
 Steers `u_in` to `u_end` with a control supported in the configured arc.

 # Safety
 Handles must be live; `result` writable.
 */
int32_t qlnls_control(const QlnlsConfig *cfg,
                      const QlnlsField *u_in,
                      const QlnlsField *u_end,
                      QlnlsSolution **result);

/*
 Solves the nonlinear Cauchy problem from `u_in` over the configured horizon.

 # Safety
 Handles must be live; `result` writable.
 */
int32_t qlnls_cauchy(const QlnlsConfig *cfg, const QlnlsField *u_in, QlnlsSolution **result);

/*
 Library version as a static NUL-terminated string.
 */
const char *qlnls_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* QLNLS_H */
