#ifndef NINDSM_NINDSM_H
#define NINDSM_NINDSM_H

/* C interface of the spectrum-management simulator. Strings returned through
 * `char **` out-parameters are heap-allocated and must be released with
 * nds_string_free. An engine handle must not be used from two threads at once. */

#include <stdint.h>

#if defined(_WIN32)
#define NDS_API __declspec(dllexport)
#else
#define NDS_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

#define NDS_ABI_VERSION 1u

typedef enum nds_status {
    NDS_OK = 0,
    NDS_ERR_INVALID_ARGUMENT = 1,
    NDS_ERR_SCHEMA = 2,
    NDS_ERR_INVARIANT = 3,
    NDS_ERR_CORRUPT_LEDGER = 4,
    NDS_ERR_VALIDATION = 5,
    NDS_ERR_CONFLICT = 6,
    NDS_ERR_NOT_FOUND = 7,
    NDS_ERR_IO = 8,
    NDS_ERR_INTERNAL = 9
} nds_status;

typedef struct nds_engine nds_engine;

NDS_API uint32_t nds_abi_version(void);
NDS_API const char *nds_version(void);

/* Message of the last failed call on this thread ("" if none). */
NDS_API const char *nds_last_error(void);
/* Scenario line of the last NDS_ERR_SCHEMA on this thread, 0 when unknown. */
NDS_API int nds_last_error_line(void);

NDS_API void nds_string_free(char *s);

/* `seed_override` may be NULL. `live` != 0 skips scripted CALL_AGV, TOGGLE_SN2 and END. */
NDS_API nds_status nds_engine_create(const char *scenario_json, const uint64_t *seed_override, int live,
                                     nds_engine **out);
NDS_API nds_status nds_engine_create_from_file(const char *path, const uint64_t *seed_override, int live,
                                               nds_engine **out);
NDS_API void nds_engine_destroy(nds_engine *engine);

NDS_API nds_status nds_engine_run(nds_engine *engine);
NDS_API nds_status nds_engine_run_until(nds_engine *engine, int64_t until_ms);
NDS_API int64_t nds_engine_now(const nds_engine *engine);
NDS_API int nds_engine_finished(const nds_engine *engine);

/* Operator actions. `sn_id` may be NULL to pick the only agent of the right kind.
 * NDS_ERR_CONFLICT: refused in the current phase (AGV not docked, redundant toggle). */
NDS_API nds_status nds_engine_call_agv(nds_engine *engine, const char *sn_id);
NDS_API nds_status nds_engine_toggle_sensing(nds_engine *engine, int on, const char *sn_id);
NDS_API nds_status nds_engine_intent(nds_engine *engine, const char *sn_id, int64_t eta_ms);
NDS_API nds_status nds_engine_release(nds_engine *engine, const char *sn_id);

NDS_API nds_status nds_engine_snapshot(const nds_engine *engine, char **out_json);
NDS_API nds_status nds_engine_state(const nds_engine *engine, char **out_json);
/* Ledger lines with seq >= from_seq, newline-terminated. */
NDS_API nds_status nds_engine_ledger(const nds_engine *engine, uint64_t from_seq, char **out_jsonl);
NDS_API uint64_t nds_engine_ledger_size(const nds_engine *engine);
NDS_API nds_status nds_engine_metrics_csv(const nds_engine *engine, char **out_csv);
NDS_API nds_status nds_engine_write_outputs(const nds_engine *engine, const char *dir);

/* One wire message from an SNC outside the simulated topology. */
NDS_API nds_status nds_engine_external_deliver(nds_engine *engine, const char *line);
/* Pending SM messages for external SNCs, one wire line each. */
NDS_API nds_status nds_engine_external_drain(nds_engine *engine, char **out_lines);

/* Folds a JSON-lines ledger into the SM snapshot. */
NDS_API nds_status nds_replay(const char *ledger_jsonl, char **out_snapshot_json);

/* Allocator entry point: {band, guard_mhz, demands, pinned, prev_epoch} -> plan. */
NDS_API nds_status nds_compute_plan(const char *input_json, char **out_plan_json);

#ifdef __cplusplus
}
#endif

#endif
