#ifndef EBAT_H
#define EBAT_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes returned by every fallible call.
 */
typedef enum EbatStatus {
  Ok = 0,
  /**
   * A pointer argument was null.
   */
  NullArgument = 1,
  /**
   * A string argument was not valid UTF-8.
   */
  InvalidUtf8 = 2,
  /**
   * File could not be read.
   */
  Io = 3,
  /**
   * Schema or data file did not parse or validate.
   */
  Parse = 4,
  /**
   * Unknown strategy token or invalid K/folds/seed combination.
   */
  InvalidArgument = 5,
  /**
   * The experiment itself failed (see ebat_last_error).
   */
  Failed = 6,
} EbatStatus;

/**
 * Opaque dataset handle: a cleaned dataset plus its schema.
 */
typedef struct EbatDataset EbatDataset;

/**
 * Pooled cross-validation metrics for one (strategy, K, seed) run.
 */
typedef struct EbatMetrics {
  double mmre;
  double mdmre;
  /**
   * Percentage in [0, 100].
   */
  double pred25;
  uintptr_t n;
} EbatMetrics;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message describing the most recent error on this thread, or null.
 * The pointer stays valid until the next failing call on the thread.
 */
const char *ebat_last_error(void);

/**
 * Load a dataset and schema from files, dropping rows with missing values.
 * On success `*out` owns the handle; release it with `ebat_dataset_free`.
 */
enum EbatStatus ebat_dataset_load(const char *data_path,
                                  const char *schema_path,
                                  struct EbatDataset **out);

/**
 * Number of projects in the (cleaned) dataset.
 */
uintptr_t ebat_dataset_len(const struct EbatDataset *dataset);

/**
 * Release a dataset handle. Passing null is a no-op.
 */
void ebat_dataset_free(struct EbatDataset *dataset);

/**
 * Run the seeded cross-validation protocol for one strategy token
 * (eba, wmean, l-eba, mendes, s-eba, r-eba, mt-eba) and fill `*metrics`.
 */
enum EbatStatus ebat_run_experiment(const struct EbatDataset *dataset,
                                    const char *strategy,
                                    uint32_t k,
                                    uint32_t folds,
                                    uint64_t seed,
                                    struct EbatMetrics *metrics);

#ifdef __cplusplus
} // extern "C"
#endif // __cplusplus

#endif /* EBAT_H */
