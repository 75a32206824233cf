/*
 * plm - desk-scale protein language model toolkit, C API.
 *
 * Everything goes through an opaque session handle carrying the run
 * configuration and the last error message. All functions return a status
 * code; on failure, plm_last_error() describes what went wrong. Status codes
 * double as CLI exit codes:
 *
 *   PLM_OK            0   success
 *   PLM_ERR_USAGE     1   bad arguments / configuration
 *   PLM_ERR_DATA      2   unreadable or malformed data files
 *   PLM_ERR_NUMERIC   3   numeric failure (non-finite loss)
 *
 * The library is not thread-safe across one session; use one session per
 * thread.
 */

#ifndef PLM_H
#define PLM_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

#if defined(_WIN32)
#define PLM_API __declspec(dllexport)
#else
#define PLM_API __attribute__((visibility("default")))
#endif

typedef int32_t plm_status;

enum {
    PLM_OK = 0,
    PLM_ERR_USAGE = 1,
    PLM_ERR_DATA = 2,
    PLM_ERR_NUMERIC = 3
};

typedef struct plm_session plm_session;

PLM_API const char* plm_version(void);

PLM_API plm_session* plm_session_new(void);
PLM_API void plm_session_free(plm_session* session);

/* Message for the most recent failing call on this session ("" if none). */
PLM_API const char* plm_last_error(const plm_session* session);

/* ---- run configuration (flat key/value; unknown keys are rejected) ---- */

PLM_API plm_status plm_config_set(plm_session* session, const char* key, const char* value);
PLM_API plm_status plm_config_load_file(plm_session* session, const char* path);
/* Copies the value for `key` into buf (NUL-terminated, truncated if needed). */
PLM_API plm_status plm_config_get(plm_session* session, const char* key, char* buf, size_t buf_size);

/* ---- pipeline runs (one per CLI subcommand) ---- */

PLM_API plm_status plm_run_pretrain(plm_session* session, const char* corpus_fasta,
                                    const char* out_checkpoint);

PLM_API plm_status plm_run_finetune(plm_session* session, const char* encoder_checkpoint,
                                    const char* task_csv, const char* task_kind,
                                    int freeze_encoder, const char* out_checkpoint);

PLM_API plm_status plm_run_evaluate(plm_session* session, const char* finetuned_checkpoint,
                                    const char* task_csv, const char* report_json_path);

PLM_API plm_status plm_run_train_vae(plm_session* session, const char* encoder_checkpoint,
                                     const char* corpus_fasta, const char* out_checkpoint);

PLM_API plm_status plm_run_generate(plm_session* session, const char* encoder_checkpoint,
                                    const char* decoder_checkpoint, const char* seed_fasta,
                                    const char* sigma_grid_csv, int n_per_sigma,
                                    const char* out_prefix);

PLM_API plm_status plm_run_make_synthetic(plm_session* session, const char* task_kind, int n,
                                          const char* out_path);

/* Re-executes a recorded run and verifies its outputs reproduce exactly. */
PLM_API plm_status plm_run_rerun(plm_session* session, const char* manifest_path);

/* ---- small utility surface ---- */

/* Token ids for a sequence under the fixed 30-token vocabulary. ids_out must
 * hold max_len entries; *true_length receives residues + 2 specials. */
PLM_API plm_status plm_encode_sequence(plm_session* session, const char* sequence, int32_t max_len,
                                       int32_t* ids_out, int32_t* true_length);

/* 1 - Levenshtein/max-length similarity of two residue strings. */
PLM_API plm_status plm_sequence_identity(plm_session* session, const char* a, const char* b,
                                         double* out);

#ifdef __cplusplus
} /* extern "C" */
#endif

#endif /* PLM_H */
