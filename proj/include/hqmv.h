/* C API for the hqmv library: opaque handles, integer error codes, and a
 * per-thread last-error message. All functions return HQMV_OK (0) on success
 * unless documented otherwise; handle constructors return NULL on failure. */
#ifndef HQMV_H
#define HQMV_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define HQMV_API __declspec(dllexport)
#else
#define HQMV_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

enum {
    HQMV_OK = 0,
    HQMV_ERR_INVALID_ARGUMENT = 1,
    HQMV_ERR_IO = 2,
    HQMV_ERR_RUNTIME = 3,
};

typedef struct hqmv_dataset hqmv_dataset;
typedef struct hqmv_model hqmv_model;

typedef struct hqmv_model_config {
    uint16_t height, width;
    uint32_t patch, d_model, n_blocks, state_dim;
    int use_qca;
    uint32_t n_qubits, qca_layers;
    int use_lora;
    uint32_t lora_rank;
    double lora_alpha;
} hqmv_model_config;

typedef struct hqmv_train_config {
    uint32_t epochs, batch_size;
    double learning_rate;
    double focal_gamma;
    uint64_t seed;
    int deterministic;
} hqmv_train_config;

/* Message for the most recent failure on this thread; empty string if none. */
HQMV_API const char* hqmv_last_error(void);

HQMV_API void hqmv_model_config_default(hqmv_model_config* cfg);
HQMV_API void hqmv_train_config_default(hqmv_train_config* cfg);

/* Datasets -------------------------------------------------------------- */

/* Synthesizes the default long-tail profile; profile_csv may be NULL or a
 * path to rows of "count,Class1|Class2|...". */
HQMV_API hqmv_dataset* hqmv_dataset_generate(uint64_t seed, uint16_t height,
                                             uint16_t width,
                                             const char* profile_csv);
/* Loads WFR1 files (.wfr) or zip-of-NPY archives (anything else). */
HQMV_API hqmv_dataset* hqmv_dataset_load(const char* path);
HQMV_API int hqmv_dataset_save(const hqmv_dataset* ds, const char* path);
HQMV_API int hqmv_dataset_export_manifest(const hqmv_dataset* ds, const char* path);
HQMV_API size_t hqmv_dataset_size(const hqmv_dataset* ds);
HQMV_API void hqmv_dataset_free(hqmv_dataset* ds);

/* Models ---------------------------------------------------------------- */

HQMV_API hqmv_model* hqmv_model_create(const hqmv_model_config* cfg, uint64_t seed);
HQMV_API hqmv_model* hqmv_model_open(const char* checkpoint_path);
HQMV_API int hqmv_model_save(hqmv_model* model, const char* checkpoint_path);
HQMV_API void hqmv_model_free(hqmv_model* model);

/* Splits ds 3000/600/600 (proportionally when smaller), trains on the train
 * slice, and validates per epoch. */
HQMV_API int hqmv_train(hqmv_model* model, const hqmv_dataset* ds,
                        const hqmv_train_config* tc, const char* history_csv_or_null);

/* Emits multilabel.csv, calibration.csv, bins.csv into report_dir. */
HQMV_API int hqmv_eval_report(const hqmv_model* model, const hqmv_dataset* ds,
                              const char* report_dir);

/* Selective-prediction, catastrophic-miss, and FP-cost curves (CSV + SVG). */
HQMV_API int hqmv_risk_report(const hqmv_model* model, const hqmv_dataset* ds,
                              const char* critical_class, double fp_cost,
                              const char* report_dir);

/* Full paired classical-vs-hybrid study into report_dir. */
HQMV_API int hqmv_ablate(const hqmv_dataset* ds, const hqmv_model_config* cfg,
                         const hqmv_train_config* tc, const char* report_dir);

/* Finite-difference gradient suite; writes the worst relative error observed.
 * `full` runs the acceptance-size model, otherwise a quick configuration. */
HQMV_API int hqmv_gradcheck(int full, double* max_rel_err);

#ifdef __cplusplus
}
#endif

#endif /* HQMV_H */
