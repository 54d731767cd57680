#include "nindsm/nindsm.h"

#include <cstdlib>
#include <cstring>
#include <string>

#include "allocator/allocator.hpp"
#include "common/error.hpp"
#include "sim/engine.hpp"
#include "sm/state.hpp"

struct nds_engine {
    nds::sim::Engine engine;
};

namespace {

thread_local std::string last_error;
thread_local int last_error_line = 0;

nds_status fail(nds_status st, const std::string &msg, int line = 0) {
    last_error = msg;
    last_error_line = line;
    return st;
}

template <class F>
nds_status guarded(F &&f) {
    try {
        last_error.clear();
        last_error_line = 0;
        return f();
    } catch (const nds::SchemaError &e) {
        return fail(NDS_ERR_SCHEMA, e.what(), e.line());
    } catch (const nds::InvariantViolation &e) {
        return fail(NDS_ERR_INVARIANT, e.what());
    } catch (const nds::CorruptLedger &e) {
        return fail(NDS_ERR_CORRUPT_LEDGER, e.what());
    } catch (const nds::ValidationError &e) {
        return fail(NDS_ERR_VALIDATION, e.what());
    } catch (const nds::Error &e) {
        return fail(NDS_ERR_IO, e.what());
    } catch (const nlohmann::json::exception &e) {
        return fail(NDS_ERR_VALIDATION, e.what());
    } catch (const std::exception &e) {
        return fail(NDS_ERR_INTERNAL, e.what());
    }
}

char *dup(const std::string &s) {
    auto *p = static_cast<char *>(std::malloc(s.size() + 1));
    if (!p)
        throw std::bad_alloc();
    std::memcpy(p, s.c_str(), s.size() + 1);
    return p;
}

nds_status out_string(char **out, const std::string &s) {
    *out = dup(s);
    return NDS_OK;
}

nds_status from_result(nds::sim::ActionResult r, const char *what) {
    switch (r) {
    case nds::sim::ActionResult::Accepted: return NDS_OK;
    case nds::sim::ActionResult::Conflict: return fail(NDS_ERR_CONFLICT, std::string{what} + " refused in the current state");
    case nds::sim::ActionResult::NotFound: return fail(NDS_ERR_NOT_FOUND, std::string{what} + ": no such agent");
    }
    return NDS_ERR_INTERNAL;
}

nds::sim::EngineOptions options(const uint64_t *seed, int live) {
    nds::sim::EngineOptions o;
    o.live = live != 0;
    if (seed)
        o.seed = *seed;
    return o;
}

} // namespace

extern "C" {

uint32_t nds_abi_version(void) { return NDS_ABI_VERSION; }

const char *nds_version(void) { return "1.0.0"; }

const char *nds_last_error(void) { return last_error.c_str(); }

int nds_last_error_line(void) { return last_error_line; }

void nds_string_free(char *s) { std::free(s); }

nds_status nds_engine_create(const char *scenario_json, const uint64_t *seed_override, int live, nds_engine **out) {
    if (!scenario_json || !out)
        return fail(NDS_ERR_INVALID_ARGUMENT, "scenario_json and out are required");
    *out = nullptr;
    return guarded([&] {
        *out = new nds_engine{nds::sim::Engine{nds::sim::load_scenario(scenario_json), options(seed_override, live)}};
        return NDS_OK;
    });
}

nds_status nds_engine_create_from_file(const char *path, const uint64_t *seed_override, int live, nds_engine **out) {
    if (!path || !out)
        return fail(NDS_ERR_INVALID_ARGUMENT, "path and out are required");
    *out = nullptr;
    return guarded([&] {
        *out = new nds_engine{nds::sim::Engine{nds::sim::load_scenario_file(path), options(seed_override, live)}};
        return NDS_OK;
    });
}

void nds_engine_destroy(nds_engine *engine) { delete engine; }

nds_status nds_engine_run(nds_engine *engine) {
    if (!engine)
        return fail(NDS_ERR_INVALID_ARGUMENT, "engine is NULL");
    return guarded([&] {
        engine->engine.run();
        return NDS_OK;
    });
}

nds_status nds_engine_run_until(nds_engine *engine, int64_t until_ms) {
    if (!engine)
        return fail(NDS_ERR_INVALID_ARGUMENT, "engine is NULL");
    return guarded([&] {
        engine->engine.run_until(until_ms);
        return NDS_OK;
    });
}

int64_t nds_engine_now(const nds_engine *engine) { return engine ? engine->engine.now() : 0; }

int nds_engine_finished(const nds_engine *engine) { return engine && engine->engine.finished() ? 1 : 0; }

nds_status nds_engine_call_agv(nds_engine *engine, const char *sn_id) {
    if (!engine)
        return fail(NDS_ERR_INVALID_ARGUMENT, "engine is NULL");
    return guarded([&] { return from_result(engine->engine.call_agv(sn_id ? sn_id : ""), "call-agv"); });
}

nds_status nds_engine_toggle_sensing(nds_engine *engine, int on, const char *sn_id) {
    if (!engine)
        return fail(NDS_ERR_INVALID_ARGUMENT, "engine is NULL");
    return guarded([&] { return from_result(engine->engine.toggle_sensing(on != 0, sn_id ? sn_id : ""), "toggle"); });
}

nds_status nds_engine_intent(nds_engine *engine, const char *sn_id, int64_t eta_ms) {
    if (!engine || !sn_id)
        return fail(NDS_ERR_INVALID_ARGUMENT, "engine and sn_id are required");
    return guarded([&] {
        engine->engine.inject_intent(sn_id, eta_ms);
        return NDS_OK;
    });
}

nds_status nds_engine_release(nds_engine *engine, const char *sn_id) {
    if (!engine || !sn_id)
        return fail(NDS_ERR_INVALID_ARGUMENT, "engine and sn_id are required");
    return guarded([&] { return from_result(engine->engine.release(sn_id), "release"); });
}

nds_status nds_engine_snapshot(const nds_engine *engine, char **out_json) {
    if (!engine || !out_json)
        return fail(NDS_ERR_INVALID_ARGUMENT, "engine and out_json are required");
    return guarded([&] { return out_string(out_json, engine->engine.snapshot().dump()); });
}

nds_status nds_engine_state(const nds_engine *engine, char **out_json) {
    if (!engine || !out_json)
        return fail(NDS_ERR_INVALID_ARGUMENT, "engine and out_json are required");
    return guarded([&] { return out_string(out_json, engine->engine.state_view().dump()); });
}

nds_status nds_engine_ledger(const nds_engine *engine, uint64_t from_seq, char **out_jsonl) {
    if (!engine || !out_jsonl)
        return fail(NDS_ERR_INVALID_ARGUMENT, "engine and out_jsonl are required");
    return guarded([&] {
        std::string text;
        for (const auto &e : engine->engine.manager().ledger())
            if (e.seq >= from_seq)
                text += nds::sm::encode_ledger_line(e) + "\n";
        return out_string(out_jsonl, text);
    });
}

uint64_t nds_engine_ledger_size(const nds_engine *engine) {
    return engine ? engine->engine.manager().ledger().size() : 0;
}

nds_status nds_engine_metrics_csv(const nds_engine *engine, char **out_csv) {
    if (!engine || !out_csv)
        return fail(NDS_ERR_INVALID_ARGUMENT, "engine and out_csv are required");
    return guarded([&] { return out_string(out_csv, engine->engine.metrics_csv()); });
}

nds_status nds_engine_write_outputs(const nds_engine *engine, const char *dir) {
    if (!engine || !dir)
        return fail(NDS_ERR_INVALID_ARGUMENT, "engine and dir are required");
    return guarded([&] {
        engine->engine.write_outputs(dir);
        return NDS_OK;
    });
}

nds_status nds_engine_external_deliver(nds_engine *engine, const char *line) {
    if (!engine || !line)
        return fail(NDS_ERR_INVALID_ARGUMENT, "engine and line are required");
    return guarded([&] {
        engine->engine.external_deliver(nds::sm::decode(line));
        return NDS_OK;
    });
}

nds_status nds_engine_external_drain(nds_engine *engine, char **out_lines) {
    if (!engine || !out_lines)
        return fail(NDS_ERR_INVALID_ARGUMENT, "engine and out_lines are required");
    return guarded([&] {
        std::string text;
        for (const auto &o : engine->engine.drain_external())
            text += nds::sm::encode(o.message);
        return out_string(out_lines, text);
    });
}

nds_status nds_replay(const char *ledger_jsonl, char **out_snapshot_json) {
    if (!ledger_jsonl || !out_snapshot_json)
        return fail(NDS_ERR_INVALID_ARGUMENT, "ledger_jsonl and out_snapshot_json are required");
    return guarded([&] {
        const auto events = nds::sm::decode_ledger(ledger_jsonl);
        return out_string(out_snapshot_json, nds::sm::to_json(nds::sm::replay(events)).dump());
    });
}

nds_status nds_compute_plan(const char *input_json, char **out_plan_json) {
    if (!input_json || !out_plan_json)
        return fail(NDS_ERR_INVALID_ARGUMENT, "input_json and out_plan_json are required");
    return guarded([&] {
        const auto j = nlohmann::json::parse(input_json);
        nds::alloc::AllocatorInput in;
        if (j.contains("band"))
            in.band = nds::spectrum::band_from_json(j.at("band"));
        in.guard_mhz = j.value("guard_mhz", 1);
        in.prev_epoch = j.value("prev_epoch", std::uint64_t{0});
        for (const auto &d : j.value("demands", nlohmann::json::array()))
            in.demands.push_back(nds::spectrum::demand_from_json(d));
        for (const auto &p : j.value("pinned", nlohmann::json::array()))
            in.pinned.push_back(nds::spectrum::allocation_from_json(p));
        return out_string(out_plan_json, nlohmann::json(nds::alloc::compute_plan(in)).dump());
    });
}

} // extern "C"
