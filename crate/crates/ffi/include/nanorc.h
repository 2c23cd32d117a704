#ifndef NANORC_H
#define NANORC_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum NrcStatus {
  NRC_STATUS_OK = 0,
  NRC_STATUS_NULL_POINTER = 1,
  NRC_STATUS_INVALID_ARGUMENT = 2,
  NRC_STATUS_CONFIG_ERROR = 3,
  NRC_STATUS_LAYOUT_ERROR = 4,
  NRC_STATUS_DYNAMICS_ERROR = 5,
  NRC_STATUS_LEARNING_ERROR = 6,
  NRC_STATUS_IO_ERROR = 7,
  NRC_STATUS_BUFFER_TOO_SMALL = 8,
  NRC_STATUS_PANIC = 9,
} NrcStatus;

typedef enum NrcReservoirKind {
  NRC_RESERVOIR_KIND_NANOMAGNET = 0,
  NRC_RESERVOIR_KIND_ESN = 1,
} NrcReservoirKind;

// Opaque run configuration.
typedef struct NrcConfig NrcConfig;

// Opaque finished experiment.
typedef struct NrcExperiment NrcExperiment;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message describing the last failure on this thread, or NULL. The pointer
// stays valid until the next failing call on the same thread.
const char *nrc_last_error(void);

// Creates the shipped benchmark configuration.
//
// # Safety
// `out` must be a valid pointer to writable storage for one pointer.
enum NrcStatus nrc_config_benchmark(struct NrcConfig **out);

// Loads a configuration file.
//
// # Safety
// `path` must be a NUL-terminated string; `out` must be writable.
enum NrcStatus nrc_config_load(const char *path, struct NrcConfig **out);

// # Safety
// `cfg` must come from this library and not have been freed.
enum NrcStatus nrc_config_set_task_seed(struct NrcConfig *cfg, uint64_t seed);

// # Safety
// `cfg` must come from this library and not have been freed.
enum NrcStatus nrc_config_set_reservoir(struct NrcConfig *cfg, enum NrcReservoirKind kind);

// # Safety
// `cfg` must come from this library (or be NULL) and is invalid afterwards.
void nrc_config_free(struct NrcConfig *cfg);

// Runs the configured experiment end to end.
//
// # Safety
// `cfg` must be a live config handle; `out` must be writable.
enum NrcStatus nrc_experiment_run(const struct NrcConfig *cfg, struct NrcExperiment **out);

// # Safety
// `exp` must be a live experiment handle; `train` and `test` writable.
enum NrcStatus nrc_experiment_accuracy(const struct NrcExperiment *exp,
                                       double *train,
                                       double *test);

// Number of samples (columns of the state matrix); 0 for NULL.
//
// # Safety
// `exp` must be a live experiment handle or NULL.
uintptr_t nrc_experiment_num_samples(const struct NrcExperiment *exp);

// Rows of the state matrix including the bias row; 0 for NULL.
//
// # Safety
// `exp` must be a live experiment handle or NULL.
uintptr_t nrc_experiment_num_rows(const struct NrcExperiment *exp);

// Copies the state matrix, one sample after another (sample-major, each
// `nrc_experiment_num_rows` long, bias last).
//
// # Safety
// `buf` must hold `len` doubles.
enum NrcStatus nrc_experiment_states(const struct NrcExperiment *exp, double *buf, uintptr_t len);

// Copies the readout outputs ŷ, one per sample.
//
// # Safety
// `buf` must hold `len` doubles.
enum NrcStatus nrc_experiment_outputs(const struct NrcExperiment *exp, double *buf, uintptr_t len);

// Writes all run artifacts into `dir` (created if missing).
//
// # Safety
// `exp` must be live; `dir` a NUL-terminated string.
enum NrcStatus nrc_experiment_write(const struct NrcExperiment *exp, const char *dir);

// # Safety
// `exp` must come from this library (or be NULL) and is invalid afterwards.
void nrc_experiment_free(struct NrcExperiment *exp);

// Ridge regression with an appended bias row. `x` is `nodes × samples`
// row-major, `y` holds one 0/1 target per sample and `w_out` receives
// `nodes + 1` weights (bias last).
//
// # Safety
// Buffers must hold the stated number of doubles.
enum NrcStatus nrc_ridge_regression(const double *x,
                                    uintptr_t nodes,
                                    uintptr_t samples,
                                    const double *y,
                                    double lambda,
                                    double *w_out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* NANORC_H */
