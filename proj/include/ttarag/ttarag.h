/* C interface to the test-time adapted retrieval QA engine.
 *
 * Every function returns a ttarag_status. On failure the calling thread's
 * last error message (ttarag_last_error) describes the cause in one line.
 * Handles are opaque and must be released with the matching _free function;
 * passing NULL to a _free function is a no-op.
 *
 * Functions that return text write a NUL-terminated string into a caller
 * buffer. `*needed` always receives the buffer size required (including the
 * terminator); when `cap` is too small the call fails with
 * TTARAG_ERR_BUFFER_TOO_SMALL and nothing useful is written.
 */
#ifndef TTARAG_TTARAG_H
#define TTARAG_TTARAG_H

#include <stddef.h>

#if defined(_WIN32)
#define TTARAG_API __declspec(dllexport)
#else
#define TTARAG_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum ttarag_status {
    TTARAG_OK = 0,
    TTARAG_ERR_INVALID_ARGUMENT = 1, /* bad value, unknown key, wrong mode */
    TTARAG_ERR_IO = 2,               /* missing or unwritable file */
    TTARAG_ERR_PARSE = 3,            /* malformed corpus, dataset, config or checkpoint */
    TTARAG_ERR_CONTEXT_LENGTH = 4,   /* input does not fit the model context */
    TTARAG_ERR_NUMERIC = 5,          /* non-finite values during training */
    TTARAG_ERR_REMOTE = 6,           /* remote judge failure */
    TTARAG_ERR_BUFFER_TOO_SMALL = 7,
    TTARAG_ERR_INTERNAL = 8
} ttarag_status;

TTARAG_API const char* ttarag_status_name(ttarag_status status);
/* Message of the last failed call on this thread; "" if none. */
TTARAG_API const char* ttarag_last_error(void);
TTARAG_API const char* ttarag_version(void);
/* One-line summary of the last successful workflow command on this thread. */
TTARAG_API const char* ttarag_last_summary(void);

/* ---- Run configuration: flat key=value settings ------------------------ */

typedef struct ttarag_config ttarag_config;

TTARAG_API ttarag_status ttarag_config_new(ttarag_config** out);
TTARAG_API void ttarag_config_free(ttarag_config* config);
/* Unknown keys fail with TTARAG_ERR_INVALID_ARGUMENT and a message that
 * lists the valid keys. Values are validated on set. */
TTARAG_API ttarag_status ttarag_config_set(ttarag_config* config, const char* key, const char* value);
/* Applies a file of `key = value` lines; '#' starts a comment. */
TTARAG_API ttarag_status ttarag_config_load_file(ttarag_config* config, const char* path);
TTARAG_API ttarag_status ttarag_config_get(const ttarag_config* config, const char* key, char* buf, size_t cap,
                                           size_t* needed);
/* Effective configuration in the file format, one key per line. */
TTARAG_API ttarag_status ttarag_config_dump(const ttarag_config* config, char* buf, size_t cap, size_t* needed);
TTARAG_API size_t ttarag_config_key_count(void);
/* NULL when index is out of range. */
TTARAG_API const char* ttarag_config_key_name(size_t index);
TTARAG_API const char* ttarag_config_key_help(size_t index);

/* ---- Workflow commands ---------------------------------------------------
 * Each reads its inputs from the configuration, writes artifacts under the
 * configured output directory (key `out`) including the effective config as
 * config.txt, and is deterministic for identical inputs apart from timing
 * fields. */

TTARAG_API ttarag_status ttarag_cmd_gen_bench(const ttarag_config* config);
TTARAG_API ttarag_status ttarag_cmd_pretrain(const ttarag_config* config);
TTARAG_API ttarag_status ttarag_cmd_index(const ttarag_config* config);
TTARAG_API ttarag_status ttarag_cmd_run(const ttarag_config* config);
TTARAG_API ttarag_status ttarag_cmd_sweep(const ttarag_config* config);
TTARAG_API ttarag_status ttarag_cmd_ablate(const ttarag_config* config);
TTARAG_API ttarag_status ttarag_cmd_report(const ttarag_config* config);

/* ---- Embedding API ------------------------------------------------------ */

typedef struct ttarag_model ttarag_model;
typedef struct ttarag_index ttarag_index;
typedef struct ttarag_engine ttarag_engine;

typedef struct ttarag_model_info {
    size_t vocab_size;
    size_t embed_dim;
    size_t layers;
    size_t heads;
    size_t context;
    size_t parameters;
} ttarag_model_info;

TTARAG_API ttarag_status ttarag_model_load(const char* checkpoint_path, ttarag_model** out);
TTARAG_API void ttarag_model_free(ttarag_model* model);
TTARAG_API ttarag_status ttarag_model_get_info(const ttarag_model* model, ttarag_model_info* info);

/* Builds a BM25 index over a JSONL corpus. `malformed_lines` (optional)
 * receives the number of skipped malformed lines. */
TTARAG_API ttarag_status ttarag_index_load(const char* corpus_path, ttarag_index** out, size_t* malformed_lines);
TTARAG_API void ttarag_index_free(ttarag_index* index);
TTARAG_API size_t ttarag_index_size(const ttarag_index* index);

typedef struct ttarag_hit {
    const char* id; /* owned by the index */
    double score;
} ttarag_hit;

/* Writes up to min(k, cap) hits in rank order; `*count` receives how many. */
TTARAG_API ttarag_status ttarag_index_search(const ttarag_index* index, const char* query, size_t k, ttarag_hit* hits,
                                             size_t cap, size_t* count);

/* The engine borrows `model` and `index`, which must outlive it. Adaptive
 * answers leave the model's parameters exactly as they were. */
TTARAG_API ttarag_status ttarag_engine_new(ttarag_model* model, const ttarag_index* index,
                                           const ttarag_config* config, ttarag_engine** out);
TTARAG_API void ttarag_engine_free(ttarag_engine* engine);

typedef enum ttarag_mode { TTARAG_MODE_NAIVE = 0, TTARAG_MODE_TTARAG = 1, TTARAG_MODE_WOSEG = 2 } ttarag_mode;

/* `fallback` (optional) is set to 1 when adaptation was requested but
 * skipped or failed. */
TTARAG_API ttarag_status ttarag_engine_answer(ttarag_engine* engine, const char* question, ttarag_mode mode,
                                              char* buf, size_t cap, size_t* needed, int* fallback);

#ifdef __cplusplus
}
#endif

#endif
