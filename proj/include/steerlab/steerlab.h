#ifndef STEERLAB_H
#define STEERLAB_H

/* C interface to the steerlab library. Every function returns a status code;
 * on failure steerlab_last_error() describes the most recent error raised on
 * the calling thread. Strings returned through out-parameters are owned by
 * the caller and released with steerlab_string_free. */

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define STEERLAB_API __declspec(dllexport)
#else
#define STEERLAB_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum steerlab_status {
  STEERLAB_OK = 0,
  STEERLAB_ERR_CONFIG = 1,
  STEERLAB_ERR_NOT_FOUND = 2,
  STEERLAB_ERR_IO = 3,
  STEERLAB_ERR_INPUT = 4,
  STEERLAB_ERR_DIMENSION = 5,
  STEERLAB_ERR_LENGTH = 6,
  STEERLAB_ERR_DEGENERATE = 7,
  STEERLAB_ERR_NUMERIC = 8,
  STEERLAB_ERR_DOUBLE_BACKWARD = 9,
  STEERLAB_ERR_NULL_ARGUMENT = 10,
  STEERLAB_ERR_INTERNAL = 11
} steerlab_status;

typedef struct steerlab_config steerlab_config;
typedef struct steerlab_model steerlab_model;

STEERLAB_API const char* steerlab_version(void);
STEERLAB_API const char* steerlab_last_error(void);
STEERLAB_API const char* steerlab_status_name(steerlab_status status);
STEERLAB_API void steerlab_string_free(char* s);

/* ---- configuration ---- */
STEERLAB_API steerlab_status steerlab_config_default(steerlab_config** out);
STEERLAB_API steerlab_status steerlab_config_load(const char* path, steerlab_config** out);
/* key is dotted ("train.total_iterations"); value is JSON text or a bare string. */
STEERLAB_API steerlab_status steerlab_config_set(steerlab_config* cfg, const char* key,
                                                 const char* value);
STEERLAB_API steerlab_status steerlab_config_validate(const steerlab_config* cfg);
STEERLAB_API steerlab_status steerlab_config_write(const steerlab_config* cfg, const char* path);
STEERLAB_API steerlab_status steerlab_config_to_json(const steerlab_config* cfg, char** out);
/* Effective output directory (STEERLAB_OUT overrides the config). */
STEERLAB_API steerlab_status steerlab_config_output_dir(const steerlab_config* cfg, char** out);
STEERLAB_API void steerlab_config_free(steerlab_config* cfg);

/* ---- pipeline stages ---- */
STEERLAB_API steerlab_status steerlab_train(const steerlab_config* cfg);
/* Writes report.json, report.txt, stats/, figures; *report_path may be NULL. */
STEERLAB_API steerlab_status steerlab_experiment(const steerlab_config* cfg, char** report_path);
/* prompts_path may be NULL for the built-in prompt set. */
STEERLAB_API steerlab_status steerlab_extract(const char* checkpoint, const char* prompts_path,
                                              const char* out_stem, const char* model_id,
                                              double alpha, int include_padding);
STEERLAB_API steerlab_status steerlab_eval(const char* checkpoint, const char* corpus_jsonl,
                                           size_t n_samples, size_t max_new_tokens,
                                           const char* out_jsonl, double* mean, double* std_dev);
/* correction: "none", "bonferroni" or "both". */
STEERLAB_API steerlab_status steerlab_stats(const char* scores_dir, const char* correction,
                                            const char* out_dir);
STEERLAB_API steerlab_status steerlab_plot(const char* const* inputs, size_t n_inputs,
                                           const char* out_dir);

/* ---- models ---- */
STEERLAB_API steerlab_status steerlab_model_load(const char* checkpoint, steerlab_model** out);
STEERLAB_API steerlab_status steerlab_model_d_model(const steerlab_model* model, size_t* out);
STEERLAB_API steerlab_status steerlab_model_answer(const steerlab_model* model,
                                                   const char* question, size_t max_new_tokens,
                                                   char** out);
STEERLAB_API void steerlab_model_free(steerlab_model* model);

/* ---- evaluation and statistics helpers ---- */
STEERLAB_API steerlab_status steerlab_check_idk(const char* response, int* out);
STEERLAB_API steerlab_status steerlab_similarity(const char* generated, const char* expected,
                                                 double* out);
/* Groups are concatenated in values; sizes[i] is the length of group i. */
STEERLAB_API steerlab_status steerlab_kruskal_wallis(const double* values, const size_t* sizes,
                                                     size_t n_groups, double* h, double* p);
STEERLAB_API steerlab_status steerlab_shapiro_wilk(const double* values, size_t n, double* w,
                                                   double* p);

#ifdef __cplusplus
}
#endif

#endif
