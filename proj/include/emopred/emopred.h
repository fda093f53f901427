/* C interface to the emopred library. All functions are safe to call from
 * multiple threads on distinct handles; a handle must not be used
 * concurrently. Strings returned through char** are owned by the caller and
 * released with emopred_string_free. */
#ifndef EMOPRED_EMOPRED_H
#define EMOPRED_EMOPRED_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#  define EMOPRED_API __declspec(dllexport)
#else
#  define EMOPRED_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum emopred_status {
  EMOPRED_OK = 0,
  EMOPRED_ERR_INVALID_ARGUMENT = 1,
  EMOPRED_ERR_IO = 2,
  EMOPRED_ERR_FORMAT = 3,
  EMOPRED_ERR_RUNTIME = 4,
  EMOPRED_ERR_INTERNAL = 5
} emopred_status;

typedef struct emopred_config emopred_config;
typedef struct emopred_stats emopred_stats;
typedef struct emopred_preprocessor emopred_preprocessor;
typedef struct emopred_model emopred_model;

typedef void (*emopred_log_fn)(const char* message, void* user_data);

EMOPRED_API const char* emopred_version(void);
EMOPRED_API const char* emopred_status_string(emopred_status status);
/* Message of the most recent failure on the calling thread; "" if none. */
EMOPRED_API const char* emopred_last_error(void);
EMOPRED_API void emopred_string_free(char* s);
/* Process-wide; NULL restores the default (standard error). */
EMOPRED_API void emopred_set_log_handler(emopred_log_fn fn, void* user_data);

/* --- run configuration --------------------------------------------------- */
EMOPRED_API emopred_status emopred_config_create(emopred_config** out);
EMOPRED_API void emopred_config_free(emopred_config* cfg);
EMOPRED_API emopred_status emopred_config_load_file(emopred_config* cfg, const char* path);
EMOPRED_API emopred_status emopred_config_set(emopred_config* cfg, const char* key,
                                              const char* value);
/* "key=value" */
EMOPRED_API emopred_status emopred_config_set_assignment(emopred_config* cfg,
                                                         const char* assignment);
EMOPRED_API emopred_status emopred_config_get(const emopred_config* cfg, const char* key,
                                              char** out);
EMOPRED_API emopred_status emopred_config_dump(const emopred_config* cfg, char** out);

/* --- corpus statistics, segmentation, spelling ---------------------------- */
EMOPRED_API emopred_status emopred_stats_load(const char* path, emopred_stats** out);
/* Builds statistics from newline-separated lines of space-separated words. */
EMOPRED_API emopred_status emopred_stats_from_text(const char* corpus, emopred_stats** out);
EMOPRED_API emopred_status emopred_stats_save(const emopred_stats* stats, const char* path);
EMOPRED_API void emopred_stats_free(emopred_stats* stats);
EMOPRED_API emopred_status emopred_stats_total_tokens(const emopred_stats* stats,
                                                      uint64_t* out);
/* Space-joined parts; `score` may be NULL. */
EMOPRED_API emopred_status emopred_segment(const emopred_stats* stats, const char* text,
                                           char** out, double* score);
EMOPRED_API emopred_status emopred_spell_correct(const emopred_stats* stats,
                                                 const char* word, int max_edits,
                                                 char** out);

/* --- preprocessing -------------------------------------------------------- */
/* Reads the preprocessing keys (stats, emoticons, ...) of `cfg`; NULL uses
 * the defaults. */
EMOPRED_API emopred_status emopred_preprocessor_create(const emopred_config* cfg,
                                                       emopred_preprocessor** out);
EMOPRED_API void emopred_preprocessor_free(emopred_preprocessor* pre);
EMOPRED_API emopred_status emopred_preprocess(const emopred_preprocessor* pre,
                                              const char* text, char** out);

/* --- trained classifier --------------------------------------------------- */
EMOPRED_API emopred_status emopred_model_load(const char* path, emopred_model** out);
EMOPRED_API void emopred_model_free(emopred_model* model);
EMOPRED_API size_t emopred_model_num_classes(const emopred_model* model);
/* `pre` may be NULL, in which case `text` is split on spaces as is. `probs`
 * may be NULL; otherwise it receives min(probs_len, K) class probabilities. */
EMOPRED_API emopred_status emopred_model_predict(emopred_model* model,
                                                 const emopred_preprocessor* pre,
                                                 const char* text, size_t* label,
                                                 double* probs, size_t probs_len);

/* --- commands -------------------------------------------------------------- */
/* command: stats, embed, train, eval, predict, baseline or search. When
 * `summary` is not NULL it receives a JSON object describing the result. */
EMOPRED_API emopred_status emopred_run(const char* command, const emopred_config* cfg,
                                       char** summary);
/* NULL-terminated list of the commands accepted by emopred_run. */
EMOPRED_API const char* const* emopred_commands(void);

#ifdef __cplusplus
}
#endif

#endif /* EMOPRED_EMOPRED_H */
