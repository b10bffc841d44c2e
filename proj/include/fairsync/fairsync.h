/* FairSync C API: exposure-constrained dense retrieval behind opaque
 * handles. All functions return fs_status; fs_last_error() describes the
 * most recent failure on the calling thread. Strings returned through
 * char** outputs are owned by the caller and released with fs_string_free.
 */
#ifndef FAIRSYNC_H
#define FAIRSYNC_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum fs_status {
  FS_OK = 0,
  FS_ERR_INVALID_ARGUMENT = 1,
  FS_ERR_IO = 2,
  FS_ERR_INFEASIBLE = 3,
  FS_ERR_VERIFY_FAILED = 4,
  FS_ERR_INTERNAL = 5
} fs_status;

/* Item corpus plus user stream and relevance ground truth. */
typedef struct fs_corpus fs_corpus;

/* Online retrieval engine: sharded index plus the coordinator state
 * (dual vector, exposure ledger, gradient buffer). */
typedef struct fs_engine fs_engine;

const char* fs_version(void);
const char* fs_last_error(void);
void fs_string_free(char* s);

/* --- corpora ------------------------------------------------------------ */

fs_status fs_corpus_synth(const char* synth_config_json, fs_corpus** out);
fs_status fs_corpus_extreme(uint64_t seed, fs_corpus** out);
fs_status fs_corpus_open_dir(const char* dir, fs_corpus** out);
fs_status fs_corpus_open_files(const char* items_path, const char* users_path,
                               const char* groups_path, const char* interactions_path,
                               int min_group_size, fs_corpus** out);
fs_status fs_corpus_write(const fs_corpus* corpus, const char* dir);
fs_status fs_corpus_info(const fs_corpus* corpus, int64_t* item_count,
                         int64_t* user_count, int32_t* group_count, int32_t* dim);
void fs_corpus_free(fs_corpus* corpus);

/* --- engines ------------------------------------------------------------ */

/* config_json holds the run fields (algorithm, K, T, B, eta, M, lambda,
 * seed, gradient_scaling, buffer_reduce, optimizer, partitioning,
 * m_uniform or m_file); corpus and out entries are not used here. */
fs_status fs_engine_create(const fs_corpus* corpus, const char* config_json,
                           fs_engine** out);

/* Serves the next user of the corpus stream. Arrays must hold at least K
 * entries; *out_k receives K. */
fs_status fs_engine_step(fs_engine* engine, int64_t* out_user_id, int64_t* item_ids,
                         int32_t* group_ids, double* scores, int32_t capacity,
                         int32_t* out_k);

fs_status fs_engine_exposures(const fs_engine* engine, int64_t* counts,
                              int32_t capacity);
fs_status fs_engine_mu(const fs_engine* engine, double* mu, int32_t capacity);
void fs_engine_free(fs_engine* engine);

/* --- experiment drivers -------------------------------------------------- */

/* Runs a full experiment; writes effective_config.json, metrics.csv,
 * summary.json, candidates.csv and mu_trace.csv into the output directory
 * (out_dir overrides the config's "out" when non-NULL and non-empty). */
fs_status fs_run(const char* experiment_config_json, const char* out_dir);

/* sweep_json: {"param": "B"|"m"|"K"|"eta", "values": [...]}. Per-value runs
 * land in subdirectories; aggregated results in sweep.csv. */
fs_status fs_sweep(const char* experiment_config_json, const char* sweep_json,
                   const char* out_dir);

/* Writes the resolved corpus (items.fseb, users.fseb, groups.csv,
 * relevance.csv, manifest.json) into the output directory. */
fs_status fs_gen(const char* experiment_config_json, const char* out_dir);

/* Brute-force verification suites (duality, subgradient, knapsack,
 * concavity). Returns FS_ERR_VERIFY_FAILED on any violation; *out_report
 * receives the per-suite report text either way. */
fs_status fs_verify(const char* verify_config_json, char** out_report);

#ifdef __cplusplus
}
#endif

#endif /* FAIRSYNC_H */
