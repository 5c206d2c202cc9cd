/* C interface to the pipe-flow PINC library. Every call returns a status code; on failure
 * pinc_last_error() describes the most recent error of the calling thread. */
#ifndef PINC_PINC_H
#define PINC_PINC_H

#include <stddef.h>

#if defined(PINC_BUILDING_LIBRARY)
#define PINC_API __attribute__((visibility("default")))
#else
#define PINC_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

enum pinc_status {
  PINC_OK = 0,
  PINC_ERR_CONFIG = 1,
  PINC_ERR_NUMERICAL = 2,
  PINC_ERR_IO = 3,
  PINC_ERR_FORMAT = 4,
  PINC_ERR_VERSION = 5,
  PINC_ERR_DIMENSION = 6,
  PINC_ERR_ARGUMENT = 7,
  PINC_ERR_INTERNAL = 8
};

typedef struct pinc_config pinc_config;
typedef struct pinc_model pinc_model;

PINC_API const char* pinc_version(void);
PINC_API const char* pinc_last_error(void);

/* Configuration. */
PINC_API int pinc_config_preset(const char* name, pinc_config** out);
PINC_API int pinc_config_load(const char* path, pinc_config** out);
PINC_API int pinc_config_parse(const char* text, pinc_config** out);
PINC_API int pinc_config_save(const pinc_config* cfg, const char* path);
/* Copies the canonical text into buf (NUL terminated); *needed receives the full length + 1. */
PINC_API int pinc_config_serialize(const pinc_config* cfg, char* buf, size_t size, size_t* needed);
/* section.key = value, as in the config file. */
PINC_API int pinc_config_set(pinc_config* cfg, const char* section, const char* key,
                             const char* value);
PINC_API void pinc_config_free(pinc_config* cfg);

/* Models. */
PINC_API int pinc_model_load(const char* path, pinc_model** out);
PINC_API int pinc_model_save(const pinc_model* model, const char* path);
PINC_API void pinc_model_free(pinc_model* model);
PINC_API int pinc_model_dims(const pinc_model* model, int* input_dim, int* output_dim);
/* inputs: n points, input_dim values each; outputs: n points, output_dim values each. */
PINC_API int pinc_model_eval(const pinc_model* model, const double* inputs, size_t n,
                             double* outputs);

/* Commands. regime: "steady" or "transient". steady_model is required for transient
 * training and ignored otherwise. loss_csv may be NULL. */
PINC_API int pinc_train(const pinc_config* cfg, const char* regime, const pinc_model* steady_model,
                        int threads, int verbose, const char* loss_csv, pinc_model** out);
/* source: "plant" or "pinc"; model is used only for "pinc". */
PINC_API int pinc_simulate(const pinc_config* cfg, const char* source, const pinc_model* model,
                           const char* schedule_path, const char* out_csv);
/* model NULL selects the perfect-model predictor (the plant itself). */
PINC_API int pinc_mpc(const pinc_config* cfg, const pinc_model* model, const char* out_csv,
                      int* violations, int* failed_steps);
PINC_API int pinc_evaluate(const char* true_csv, const char* est_csv, const char* out_csv);

#ifdef __cplusplus
}
#endif

#endif
