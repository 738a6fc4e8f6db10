#ifndef CNENET_CNENET_H
#define CNENET_CNENET_H

#include <stddef.h>

#if defined(_WIN32)
#define CNE_API __declspec(dllexport)
#else
#define CNE_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

/* Status codes double as CLI exit codes. */
typedef enum cne_status {
  CNE_OK = 0,
  CNE_ERR_OTHER = 1,
  CNE_ERR_CONFIG = 2,
  CNE_ERR_DATA = 3,
  CNE_ERR_DIVERGENCE = 4,
  CNE_ERR_DIMENSION = 5,
  CNE_ERR_NUMERIC = 6,
  CNE_ERR_IO = 7,
  CNE_ERR_INTERNAL = 9
} cne_status;

typedef struct cne_model cne_model;
typedef struct cne_dataset cne_dataset;

/* Message of the last failure on the calling thread; empty after success. */
CNE_API const char* cne_last_error(void);
CNE_API const char* cne_version(void);
/* Releases strings returned through char** out-parameters. */
CNE_API void cne_string_free(char* s);

/* Commands. Each writes its files and returns a JSON summary whose "text"
   member holds a human-readable rendering. */
CNE_API cne_status cne_cmd_convert(const char* format, const char* in_path, const char* out_path,
                                   char** result_json);
/* command: generate | split | train | forgetting. overrides_json is a JSON
   object merged over the config file (may be NULL). */
CNE_API cne_status cne_cmd_run(const char* command, const char* config_path, const char* overrides_json,
                               char** result_json);
/* schema_path and out_path may be NULL. group: all | source | target. */
CNE_API cne_status cne_cmd_eval(const char* checkpoint_path, const char* dataset_path, const char* group,
                                const char* schema_path, double threshold, const char* out_path,
                                char** result_json);

/* Models. */
CNE_API cne_status cne_model_load(const char* checkpoint_path, cne_model** out);
CNE_API void cne_model_free(cne_model* model);
CNE_API size_t cne_model_num_categories(const cne_model* model);
CNE_API size_t cne_model_num_polarities(const cne_model* model);
/* JSON with checkpoint id, head, decoder, categories, polarities, provenance. */
CNE_API cne_status cne_model_info(const cne_model* model, char** info_json);
/* Row-major [categories x polarities] probabilities; capacity counts doubles. */
CNE_API cne_status cne_model_predict(const cne_model* model, const char* text, double* probs, size_t capacity);

/* Datasets: JSON-lines file parsed against a schema file. */
CNE_API cne_status cne_dataset_load(const char* dataset_path, const char* schema_path, cne_dataset** out);
CNE_API void cne_dataset_free(cne_dataset* dataset);
CNE_API size_t cne_dataset_size(const cne_dataset* dataset);
CNE_API cne_status cne_evaluate(const cne_model* model, const cne_dataset* dataset, const char* group,
                                double threshold, char** report_json);

#ifdef __cplusplus
}
#endif

#endif
