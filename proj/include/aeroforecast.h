#ifndef AEROFORECAST_H
#define AEROFORECAST_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#  if defined(AEROFORECAST_BUILDING)
#    define AF_API __declspec(dllexport)
#  else
#    define AF_API __declspec(dllimport)
#  endif
#else
#  define AF_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum af_status {
  AF_OK = 0,
  AF_ERR_INVALID_ARGUMENT = 1,
  AF_ERR_IO = 2,
  AF_ERR_PARSE = 3,
  AF_ERR_DATA = 4,
  AF_ERR_NUMERIC = 5,
  AF_ERR_PARTIAL_FAILURE = 6,
  AF_ERR_INTERNAL = 7
} af_status;

typedef enum af_command {
  AF_CMD_SYNTH = 0,
  AF_CMD_FEATURES = 1,
  AF_CMD_PCA = 2,
  AF_CMD_TRAIN = 3,
  AF_CMD_GRID = 4
} af_command;

typedef struct af_config af_config;
typedef struct af_result af_result;
typedef struct af_model af_model;

/* Called from worker threads, serialized. */
typedef void (*af_progress_fn)(size_t done, size_t total, void* user);

AF_API const char* af_version(void);
AF_API const char* af_status_name(af_status status);
/* Message of the last failed call on this thread; "" after a success. */
AF_API const char* af_last_error(void);

/* ---- configuration ---- */

AF_API af_status af_config_new(af_config** out);
AF_API af_status af_config_load(const char* path, af_config** out);
/* key is "section.name", e.g. "train.algorithm" or "company.MFG.prices". */
AF_API af_status af_config_set(af_config* cfg, const char* key, const char* value);
AF_API af_status af_config_set_seed(af_config* cfg, uint64_t seed);
/* Seed actually used: explicit, else $AEROFORECAST_SEED, else 42. */
AF_API af_status af_config_seed(const af_config* cfg, uint64_t* seed);
AF_API void af_config_free(af_config* cfg);

/* ---- commands ---- */

/* AF_ERR_PARTIAL_FAILURE still fills *out; the failure manifest is among its files. */
AF_API af_status af_run(const af_config* cfg, af_command command, af_progress_fn progress, void* user,
                        af_result** out);
AF_API size_t af_result_file_count(const af_result* result);
AF_API const char* af_result_file(const af_result* result, size_t index);
AF_API size_t af_result_note_count(const af_result* result);
AF_API const char* af_result_note(const af_result* result, size_t index);
AF_API size_t af_result_failures(const af_result* result);
AF_API void af_result_free(af_result* result);

/* ---- trained models ---- */

AF_API af_status af_model_load(const char* path, af_model** out);
AF_API size_t af_model_inputs(const af_model* model);
AF_API size_t af_model_hidden(const af_model* model);
/* inputs: row-major rows x af_model_inputs(), already in network feature space
   (after PCA when the model was trained with it). Writes rows predictions in
   original target units. */
AF_API af_status af_model_predict(const af_model* model, const double* inputs, size_t rows, double* predictions);
AF_API void af_model_free(af_model* model);

#ifdef __cplusplus
}
#endif

#endif
