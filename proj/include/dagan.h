#ifndef DAGAN_H
#define DAGAN_H

/* C interface to the face-frontalization engine. All functions return a
 * status code; on failure the message is available from dagan_last_error()
 * until the next call on the same thread. Sessions are opaque and not
 * thread-safe. */

#include <stddef.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum dagan_status {
    DAGAN_OK = 0,
    DAGAN_E_INVALID = 1, /* bad arguments or configuration */
    DAGAN_E_NUMERIC = 2, /* non-finite values or failed convergence */
    DAGAN_E_IO = 3,      /* file read/write failure */
} dagan_status;

typedef struct dagan_session dagan_session;

/* Message for the most recent failure on this thread; empty string if none. */
const char* dagan_last_error(void);

/* Creates a fresh training session. config_path may be NULL for defaults;
 * options are "key=value" strings applied on top of the file. Initialization
 * builds the dataset and trains the identity embedder, so it takes seconds. */
dagan_status dagan_session_create(const char* config_path, const char* const* options,
                                  int n_options, dagan_session** out);

/* Restores a session from a checkpoint written by dagan_train /
 * dagan_save_checkpoint. */
dagan_status dagan_session_open(const char* checkpoint_path, dagan_session** out);

void dagan_session_destroy(dagan_session* s);

/* Runs `steps` training steps (negative means the configured count). Writes
 * per-step log lines and periodic checkpoints into out_dir when non-NULL;
 * echoes log lines to stderr when echo_log is nonzero. */
dagan_status dagan_train(dagan_session* s, long steps, const char* out_dir, int echo_log);

dagan_status dagan_save_checkpoint(dagan_session* s, const char* path);

/* Writes a demo sheet to out_path (PGM/PPM): rows are input profile,
 * synthesized frontal, ground-truth frontal; columns are count held-out
 * samples per requested yaw. */
dagan_status dagan_synthesize(dagan_session* s, const double* yaws, int n_yaws, int count,
                              const char* out_path);

/* Rank-1 retrieval on the held-out split; probes are frontalized through the
 * generator when frontalize is nonzero, raw otherwise. The text report is
 * copied (NUL-terminated, truncated) into report_buf. */
dagan_status dagan_evaluate(dagan_session* s, int frontalize, char* report_buf, size_t buf_len);

/* Writes the three region masks of one identity as PGM files into out_dir. */
dagan_status dagan_export_masks(dagan_session* s, int identity, const char* out_dir);

/* Writes up to max_pairs profile/frontal training pairs into out_dir. */
dagan_status dagan_export_pairs(dagan_session* s, int max_pairs, const char* out_dir);

/* Finite-difference verification of every gradient in the engine. all_pass
 * (optional) receives 1 when every entry is within tolerance. inject_fault
 * deliberately corrupts one gradient to prove the check can fail. */
dagan_status dagan_gradcheck(unsigned long long seed, int inject_fault, char* report_buf,
                             size_t buf_len, int* all_pass);

/* Trains every mode in modes_csv (comma-separated) for each seed from one
 * shared config and reports per-pose rank-1 for each run. */
dagan_status dagan_ablate(const char* config_path, const char* const* options, int n_options,
                          const char* modes_csv, const unsigned long long* seeds, int n_seeds,
                          char* report_buf, size_t buf_len);

#ifdef __cplusplus
}
#endif

#endif
