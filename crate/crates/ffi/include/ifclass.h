#ifndef IFCLASS_H
#define IFCLASS_H

/* Generated by cbindgen. Do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum IfcAlgorithm {
  IFC_ALGORITHM_PLAIN = 0,
  IFC_ALGORITHM_CLASS_BASED = 1,
} IfcAlgorithm;

typedef enum IfcMeasure {
  IFC_MEASURE_IF = 0,
  IFC_MEASURE_GD = 1,
  IFC_MEASURE_GC = 2,
  IFC_MEASURE_GC_PARTIAL = 3,
  IFC_MEASURE_TRACIN = 4,
} IfcMeasure;

/**
 * Result code of every fallible call.
 */
typedef enum IfcStatus {
  IFC_STATUS_OK = 0,
  IFC_STATUS_NULL_POINTER = 1,
  IFC_STATUS_INVALID_ARGUMENT = 2,
  IFC_STATUS_DIMENSION_MISMATCH = 3,
  IFC_STATUS_OUT_OF_RANGE = 4,
  IFC_STATUS_INVALID_CONFIG = 5,
  /**
   * Not enough points: empty inputs, too few clean points per class, or
   * an empty reference group.
   */
  IFC_STATUS_INSUFFICIENT_DATA = 6,
  /**
   * Non-finite values or a diverged training run.
   */
  IFC_STATUS_NUMERICAL_FAILURE = 7,
  IFC_STATUS_UNSUPPORTED = 8,
  IFC_STATUS_IO = 9,
  /**
   * Malformed CSV or JSON.
   */
  IFC_STATUS_FORMAT = 10,
  /**
   * A Rust panic was caught at the boundary. This indicates a bug.
   */
  IFC_STATUS_PANIC = 11,
} IfcStatus;

/**
 * A labeled dataset, optionally carrying its corruption ground truth.
 */
typedef struct IfcDataset IfcDataset;

/**
 * A trained classifier with its training checkpoints.
 */
typedef struct IfcModel IfcModel;

/**
 * Dataset points sorted ascending by score.
 */
typedef struct IfcRanking IfcRanking;

/**
 * Clean reference points grouped by class.
 */
typedef struct IfcReference IfcReference;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *ifc_version(void);

/**
 * Copies the last error message of this thread into `buf` (truncated and
 * always NUL-terminated when `len > 0`). Returns the full message length in
 * bytes, excluding the terminator; 0 means the last call succeeded.
 */
size_t ifc_last_error(char *buf, size_t len);

/**
 * Builds a dataset from `n × dim` row-major features and `n` labels in
 * `[0, num_classes)`.
 */
enum IfcStatus ifc_dataset_new(const double *features,
                               size_t n,
                               size_t dim,
                               const size_t *labels,
                               size_t num_classes,
                               struct IfcDataset **out);

/**
 * Gaussian blobs with `classes` centers; point `i` has label `i % classes`.
 */
enum IfcStatus ifc_dataset_make_blobs(size_t n,
                                      size_t classes,
                                      size_t dim,
                                      double separation,
                                      uint64_t seed,
                                      struct IfcDataset **out);

/**
 * Reads a dataset CSV. `num_classes = 0` infers the class count from the
 * largest label.
 */
enum IfcStatus ifc_dataset_load_csv(const char *path, size_t num_classes, struct IfcDataset **out);

enum IfcStatus ifc_dataset_save_csv(const struct IfcDataset *ds, const char *path);

/**
 * Point count, feature dimension and class count. Any output may be NULL.
 */
enum IfcStatus ifc_dataset_shape(const struct IfcDataset *ds,
                                 size_t *n,
                                 size_t *dim,
                                 size_t *num_classes);

enum IfcStatus ifc_dataset_label(const struct IfcDataset *ds, size_t i, size_t *out);

/**
 * Copies the features of point `i` into `out`, which must hold `len >= dim`
 * values.
 */
enum IfcStatus ifc_dataset_features(const struct IfcDataset *ds, size_t i, double *out, size_t len);

/**
 * Writes 1 if point `i` is known corrupted, 0 if known clean and -1 when
 * the dataset carries no ground truth.
 */
enum IfcStatus ifc_dataset_is_corrupted(const struct IfcDataset *ds, size_t i, int32_t *out);

/**
 * Flips `floor(p·n + 0.5)` labels uniformly at random to a different class.
 * The returned dataset records which points were flipped.
 */
enum IfcStatus ifc_dataset_inject_noise(const struct IfcDataset *ds,
                                        double p,
                                        uint64_t seed,
                                        struct IfcDataset **out);

void ifc_dataset_free(struct IfcDataset *ds);

/**
 * Trains a classifier. `config_json` is a JSON object with at least
 * `input_dim`, `output_dim`, `learning_rate` and `epochs`; optional keys are
 * `hidden`, `leaky_slope`, `bias`, `batch_size`, `optimizer`, `l2`, `seed`
 * and `checkpoints`.
 */
enum IfcStatus ifc_model_train(const struct IfcDataset *ds,
                               const char *config_json,
                               struct IfcModel **out);

/**
 * Writes `dir/model.json` and `dir/checkpoints/`, creating `dir` if needed.
 */
enum IfcStatus ifc_model_save(const struct IfcModel *model, const char *dir);

/**
 * Loads a model saved by [`ifc_model_save`] or the command-line tool.
 * `path` may name the directory or its `model.json`.
 */
enum IfcStatus ifc_model_load(const char *path, struct IfcModel **out);

/**
 * Input and output widths. Either output may be NULL.
 */
enum IfcStatus ifc_model_dims(const struct IfcModel *model, size_t *input_dim, size_t *output_dim);

/**
 * Number of checkpoints available to TracIn.
 */
enum IfcStatus ifc_model_num_checkpoints(const struct IfcModel *model, size_t *out);

/**
 * Softmax probabilities for one input of length `dim`, written to `out`
 * (capacity `len >= output_dim`).
 */
enum IfcStatus ifc_model_predict_proba(const struct IfcModel *model,
                                       const double *x,
                                       size_t dim,
                                       double *out,
                                       size_t len);

void ifc_model_free(struct IfcModel *model);

/**
 * Draws `m_k` clean points per class from `ds`. Without ground truth every
 * point counts as clean. Sampled points are excluded from rankings of `ds`
 * unless detection is asked to include them.
 */
enum IfcStatus ifc_reference_sample(const struct IfcDataset *ds,
                                    size_t m_k,
                                    uint64_t seed,
                                    struct IfcReference **out);

/**
 * Uses every point of `ds` as a trusted reference point. The points are
 * treated as external, so they never shorten a ranking.
 */
enum IfcStatus ifc_reference_from_dataset(const struct IfcDataset *ds, struct IfcReference **out);

enum IfcStatus ifc_reference_len(const struct IfcReference *reference, size_t *out);

void ifc_reference_free(struct IfcReference *reference);

/**
 * Scores every point of `ds` against `reference` and sorts ascending, most
 * suspicious first. `model` must have been trained on `ds`.
 */
enum IfcStatus ifc_detect(const struct IfcDataset *ds,
                          const struct IfcReference *reference,
                          const struct IfcModel *model,
                          int32_t measure,
                          int32_t algorithm,
                          bool include_reference,
                          struct IfcRanking **out);

enum IfcStatus ifc_ranking_len(const struct IfcRanking *ranking, size_t *out);

/**
 * Dataset index and score at rank `pos` (0 is the lowest score). Either
 * output may be NULL.
 */
enum IfcStatus ifc_ranking_get(const struct IfcRanking *ranking,
                               size_t pos,
                               size_t *index,
                               double *score);

/**
 * Number of pairwise similarity evaluations the run performed.
 */
enum IfcStatus ifc_ranking_sim_calls(const struct IfcRanking *ranking, uint64_t *out);

/**
 * Fraction of corrupted points among the lowest `ceil(q·len/100)` ranks.
 * `ds` must carry corruption ground truth.
 */
enum IfcStatus ifc_ranking_precision(const struct IfcRanking *ranking,
                                     const struct IfcDataset *ds,
                                     double q,
                                     double *out);

/**
 * Fraction of all corrupted points found in the lowest `ceil(q·len/100)`
 * ranks; 0 when nothing is corrupted.
 */
enum IfcStatus ifc_ranking_recall(const struct IfcRanking *ranking,
                                  const struct IfcDataset *ds,
                                  double q,
                                  double *out);

/**
 * Writes the ranking in the command-line tool's CSV format.
 */
enum IfcStatus ifc_ranking_write_csv(const struct IfcRanking *ranking, const char *path);

void ifc_ranking_free(struct IfcRanking *ranking);

/**
 * Logit-gradient inner product of two points from different classes, each
 * predicted with confidence `alpha` and uniform mass on the rest.
 */
enum IfcStatus ifc_theory_cross_class(double alpha, size_t classes, double *out);

/**
 * Same as [`ifc_theory_cross_class`] for two points of the same class.
 */
enum IfcStatus ifc_theory_same_class(double alpha, size_t classes, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* IFCLASS_H */
