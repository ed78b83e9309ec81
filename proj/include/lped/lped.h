#ifndef LPED_LPED_H
#define LPED_LPED_H

/* C interface of the legacy-photo editor. Every call returns an lped_status;
 * on failure lped_last_error() describes the problem (per thread). Strings
 * returned through char** are owned by the caller and released with
 * lped_free(). Configs are passed as JSON text (see docs/config.md). */

#include <stddef.h>

#if defined(LPED_BUILDING_LIBRARY)
#define LPED_API __attribute__((visibility("default")))
#else
#define LPED_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum lped_status {
  LPED_OK = 0,
  LPED_ERR_INTERNAL = 1,
  LPED_ERR_CONFIG = 2,
  LPED_ERR_DATA = 3,
  LPED_ERR_FORMAT = 4,
  LPED_ERR_VERSION = 5,
  LPED_ERR_STATE = 6,
  LPED_ERR_IO = 7,
  LPED_ERR_SHAPE = 8,
  LPED_ERR_VALUE = 9
} lped_status;

/* Receives one JSON object per line: epoch logs and progress notes. */
typedef void (*lped_log_fn)(const char* json_line, void* user);

LPED_API const char* lped_version(void);
LPED_API const char* lped_last_error(void);
LPED_API const char* lped_status_name(lped_status status);
LPED_API void lped_free(char* p);

/* Trains G/F and both critics, saving `out_path` after every epoch.
 * resume_path may be NULL. */
LPED_API lped_status lped_train_negan(const char* clean_dir, const char* noisy_dir,
                                      const char* config_json, const char* out_path,
                                      const char* resume_path, lped_log_fn log,
                                      void* user);

/* masks_dir and resume_path may be NULL; negan_path NULL is a config error. */
LPED_API lped_status lped_train_iegan(const char* clean_dir, const char* masks_dir,
                                      const char* negan_path, const char* config_json,
                                      const char* out_path, const char* resume_path,
                                      lped_log_fn log, void* user);

/* Runs a trained G over every image of in_dir, writing gray PNGs to out_dir. */
LPED_API lped_status lped_degrade(const char* in_dir, const char* negan_path,
                                  const char* out_dir, size_t* written);

typedef struct lped_editor lped_editor;

LPED_API lped_status lped_editor_open(const char* checkpoint_c, const char* checkpoint_r,
                                      lped_editor** out);
LPED_API void lped_editor_close(lped_editor* editor);
/* Checkpoint metadata as JSON. */
LPED_API lped_status lped_editor_info(const lped_editor* editor, char** info_json);

/* mask_path and scribbles_path may be NULL (all-ones mask, no hints). */
LPED_API lped_status lped_editor_edit_files(const lped_editor* editor,
                                            const char* image_path,
                                            const char* mask_path,
                                            const char* scribbles_path,
                                            const char* out_path);

/* eval_json keys: size, sigma, scribbles, stroke_size, seed, masks. */
LPED_API lped_status lped_editor_evaluate(const lped_editor* editor,
                                          const char* dataset_dir,
                                          const char* eval_json, char** report_json,
                                          char** table);

typedef struct lped_server lped_server;

/* Binds host:port (port 0 picks a free port). Models load when run starts;
 * until then /v1/health answers 503. */
LPED_API lped_status lped_server_create(const char* checkpoint_c,
                                        const char* checkpoint_r, const char* host,
                                        int port, int max_side, int workers,
                                        lped_server** out);
LPED_API int lped_server_port(const lped_server* server);
/* Blocks until lped_server_stop() is called from another thread or a
 * signal handler. */
LPED_API lped_status lped_server_run(lped_server* server);
LPED_API void lped_server_stop(lped_server* server);
LPED_API void lped_server_destroy(lped_server* server);

#ifdef __cplusplus
}
#endif

#endif /* LPED_LPED_H */
