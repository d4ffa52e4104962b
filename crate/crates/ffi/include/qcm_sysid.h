#ifndef QCM_SYSID_H
#define QCM_SYSID_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum QcmObjective {
  QCM_OBJECTIVE_LABELLED = 0,
  QCM_OBJECTIVE_UNLABELLED = 1,
} QcmObjective;

typedef enum QcmSplit {
  QCM_SPLIT_TRAIN = 0,
  QCM_SPLIT_TEST = 1,
} QcmSplit;

/**
 * Result code of every fallible call.
 */
typedef enum QcmStatus {
  QCM_STATUS_OK = 0,
  QCM_STATUS_NULL_POINTER = 1,
  QCM_STATUS_INVALID_ARGUMENT = 2,
  QCM_STATUS_DOMAIN = 3,
  QCM_STATUS_SHAPE = 4,
  QCM_STATUS_DIVERGED = 5,
  QCM_STATUS_NON_FINITE = 6,
  QCM_STATUS_IO = 7,
  QCM_STATUS_CORRUPT = 8,
  QCM_STATUS_VERSION = 9,
  QCM_STATUS_BUFFER_TOO_SMALL = 10,
  QCM_STATUS_PANIC = 11,
} QcmStatus;

typedef struct QcmDataset QcmDataset;

typedef struct QcmModel QcmModel;

typedef struct QcmRoad QcmRoad;

/**
 * Dataset generation settings; start from [`qcm_gen_config_default`].
 */
typedef struct QcmGenConfig {
  size_t roads;
  size_t masses;
  /**
   * Samples per trace.
   */
  size_t n;
  /**
   * Step width in seconds.
   */
  double h;
  size_t frequencies;
  double velocity;
  size_t train_roads;
  uint64_t master_seed;
} QcmGenConfig;

typedef struct QcmSampleInfo {
  /**
   * 1-based road index.
   */
  size_t road_index;
  /**
   * 1-based mass index.
   */
  size_t mass_index;
  uint32_t mass;
  /**
   * Roughness exponent k of the road class (A = 0 .. E = 8).
   */
  uint32_t road_class_k;
  double p1;
  double p2;
  /**
   * Whether the sample belongs to the training split.
   */
  bool is_train;
} QcmSampleInfo;

/**
 * Training settings; start from [`qcm_train_config_default`]. The network
 * architecture is always the default one.
 */
typedef struct QcmTrainConfig {
  enum QcmObjective objective;
  uint64_t steps;
  size_t batch_size;
  double learning_rate;
  /**
   * Evaluate every this many steps; 0 only evaluates after the last step.
   */
  uint64_t eval_every;
  uint64_t seed;
  uint64_t eval_seed;
  double noise_sigma_eval;
} QcmTrainConfig;

/**
 * Mean and population standard deviation of relative deviations.
 */
typedef struct QcmEvalResult {
  size_t samples;
  double p1_mu;
  double p1_sigma;
  double p2_mu;
  double p2_sigma;
} QcmEvalResult;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *qcm_version(void);

/**
 * Message of the last failure on this thread, or null. The pointer stays
 * valid until the next failing call on the same thread.
 */
const char *qcm_last_error(void);

/**
 * Draws a road of class exponent `class_k` (0, 2, 4, 6 or 8).
 *
 * # Safety
 * `out` must be a valid pointer to writable storage for a handle.
 */
enum QcmStatus qcm_road_generate(uint32_t class_k,
                                 size_t frequencies,
                                 double velocity,
                                 uint64_t seed,
                                 struct QcmRoad **out);

/**
 * Road height at time `t` in seconds.
 *
 * # Safety
 * `road` must come from [`qcm_road_generate`]; `out` must be writable.
 */
enum QcmStatus qcm_road_evaluate(const struct QcmRoad *road, double t, double *out);

/**
 * # Safety
 * `road` must come from [`qcm_road_generate`] and not be used afterwards.
 * Null is ignored.
 */
void qcm_road_free(struct QcmRoad *road);

/**
 * Writes `[p1, p2] = [C3/m3, K3/m3]` of the reference vehicle.
 *
 * # Safety
 * `out` must point to two writable doubles.
 */
enum QcmStatus qcm_true_parameters(double m3, double *out);

/**
 * Simulates `n` steps of width `h` from rest and writes the recorded seat
 * and body accelerations, `n` values each.
 *
 * # Safety
 * `road` must be a live handle; `z_ddot` and `y_ddot` must hold `n` doubles.
 */
enum QcmStatus qcm_simulate(const struct QcmRoad *road,
                            double m3,
                            double h,
                            size_t n,
                            double *z_ddot,
                            double *y_ddot);

/**
 * # Safety
 * `out` must be writable.
 */
enum QcmStatus qcm_gen_config_default(struct QcmGenConfig *out);

/**
 * # Safety
 * `config` must be readable and `out` writable.
 */
enum QcmStatus qcm_dataset_generate(const struct QcmGenConfig *config, struct QcmDataset **out);

/**
 * # Safety
 * `dir` must be a NUL-terminated UTF-8 path; `out` must be writable.
 */
enum QcmStatus qcm_dataset_load(const char *dir, struct QcmDataset **out);

/**
 * # Safety
 * `ds` must be a live handle and `dir` a NUL-terminated UTF-8 path.
 */
enum QcmStatus qcm_dataset_save(const struct QcmDataset *ds, const char *dir);

/**
 * Number of samples and per-trace length.
 *
 * # Safety
 * `ds` must be a live handle; both outputs must be writable.
 */
enum QcmStatus qcm_dataset_shape(const struct QcmDataset *ds, size_t *samples, size_t *n);

/**
 * Metadata of sample `index` (0-based, road-major order). The acceleration
 * buffers may be null; when given, each must hold `len >= n` doubles.
 *
 * # Safety
 * `ds` must be a live handle; non-null pointers must be writable.
 */
enum QcmStatus qcm_dataset_sample(const struct QcmDataset *ds,
                                  size_t index,
                                  struct QcmSampleInfo *info,
                                  double *z_ddot,
                                  double *y_ddot,
                                  size_t len);

/**
 * # Safety
 * `ds` must be a live handle not used afterwards. Null is ignored.
 */
void qcm_dataset_free(struct QcmDataset *ds);

/**
 * # Safety
 * `out` must be writable.
 */
enum QcmStatus qcm_train_config_default(struct QcmTrainConfig *out);

/**
 * Trains on the dataset's training split and returns the model.
 *
 * # Safety
 * `ds` and `config` must be readable; `out` must be writable.
 */
enum QcmStatus qcm_train(const struct QcmDataset *ds,
                         const struct QcmTrainConfig *config,
                         struct QcmModel **out);

/**
 * Loads a checkpoint directory written by training.
 *
 * # Safety
 * `dir` must be a NUL-terminated UTF-8 path; `out` must be writable.
 */
enum QcmStatus qcm_model_load(const char *dir, struct QcmModel **out);

/**
 * # Safety
 * `model` must be a live handle and `dir` a NUL-terminated UTF-8 path.
 */
enum QcmStatus qcm_model_save(const struct QcmModel *model, const char *dir);

/**
 * Rows per input window (500 for the default network).
 *
 * # Safety
 * `model` must be a live handle; `out` must be writable.
 */
enum QcmStatus qcm_model_window_len(const struct QcmModel *model, size_t *out);

/**
 * Estimates `[p1, p2]` for `count` windows. `windows` holds
 * `count * rows * 2` doubles, each window as interleaved `[z̈, ÿ]` rows;
 * `rows` must equal [`qcm_model_window_len`]. Writes `2 * count` doubles.
 *
 * # Safety
 * `model` must be a live handle; the buffers must have the stated sizes.
 */
enum QcmStatus qcm_model_predict(const struct QcmModel *model,
                                 const double *windows,
                                 size_t count,
                                 size_t rows,
                                 double *out);

/**
 * Relative deviation statistics on one split, with optional input noise.
 *
 * # Safety
 * `model` and `ds` must be live handles; `out` must be writable.
 */
enum QcmStatus qcm_model_evaluate(const struct QcmModel *model,
                                  const struct QcmDataset *ds,
                                  enum QcmSplit split,
                                  double noise_sigma,
                                  uint64_t eval_seed,
                                  struct QcmEvalResult *out);

/**
 * # Safety
 * `model` must be a live handle not used afterwards. Null is ignored.
 */
void qcm_model_free(struct QcmModel *model);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* QCM_SYSID_H */
