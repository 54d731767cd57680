#pragma once

#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <queue>
#include <string>
#include <variant>
#include <vector>

#include "common/rng.hpp"
#include "kira/kira.hpp"
#include "sim/scenario.hpp"
#include "sm/manager.hpp"
#include "snc/agent.hpp"

namespace nds::sim {

inline constexpr std::string_view sm_service_key = "spectrum-manager";

struct EngineOptions {
    /// Live mode: CALL_AGV, TOGGLE_SN2 and END script entries are skipped; the
    /// operator drives those through the action methods instead.
    bool live = false;
    std::optional<std::uint64_t> seed; // overrides the scenario seed
};

enum class ActionResult { Accepted, Conflict, NotFound };

/// Deterministic discrete-event engine. One queue ordered by (time, insertion
/// seq); the SM, the agents and the control plane only interact through it.
class Engine final : private snc::AgentContext {
public:
    using LedgerListener = std::function<void(const sm::LedgerEvent &)>;

    explicit Engine(Scenario scenario, EngineOptions options = {});
    Engine(const Engine &) = delete;
    Engine &operator=(const Engine &) = delete;

    /// Runs until END (or until the queue drains).
    void run();

    /// Processes every queued item due at or before `until`, then sets the clock to `until`.
    void run_until(SimTime until);

    bool finished() const noexcept { return _finished; }
    SimTime now() const override { return _now; }

    ActionResult call_agv(const std::string &sn_id = {});
    ActionResult toggle_sensing(bool on, const std::string &sn_id = {});
    ActionResult release(const std::string &sn_id);
    void inject_intent(const std::string &sn_id, SimTime eta_ms);

    /// Messages from SNCs outside the simulated topology (wire socket).
    void external_deliver(const sm::Message &msg);
    std::vector<sm::Outbound> drain_external();

    void set_ledger_listener(LedgerListener listener) { _listener = std::move(listener); }

    const Scenario &scenario() const noexcept { return _scenario; }
    std::uint64_t seed() const noexcept { return _seed; }
    const sm::SpectrumManager &manager() const noexcept { return _sm; }
    const kira::Network &network() const noexcept { return _net; }
    const snc::Agent *agent(const std::string &sn_id) const;
    bool converging() const noexcept { return _converging; }
    std::uint64_t dropped_messages() const noexcept { return _dropped; }
    std::uint64_t routed_messages() const noexcept { return _routed; }

    std::string metrics_csv() const;
    std::string ledger_jsonl() const;
    std::string telemetry_csv() const;

    /// SM state; equal to replay(ledger) for every run.
    json snapshot() const { return _sm.snapshot(); }

    /// Dashboard view: SM state plus topology, control-plane dump, agents and telemetry.
    json state_view() const;

    /// metrics.csv, ledger.jsonl, snapshot.json, telemetry.csv and state.json.
    void write_outputs(const std::string &dir) const;

private:
    struct ScriptStep {
        std::size_t index;
    };
    struct ToSm {
        sm::Message msg;
    };
    struct ToAgent {
        std::string sn_id;
        sm::Message msg;
    };
    struct SmTimer {
        sm::TimerRequest timer;
    };
    struct AgentTimerFire {
        std::string sn_id;
        snc::AgentTimer timer;
    };
    struct DiscoveryDone {
        std::string sn_id;
        std::optional<std::string> sm_node;
    };
    struct ConvergenceDone {
        std::uint64_t generation;
    };
    using Item = std::variant<ScriptStep, ToSm, ToAgent, SmTimer, AgentTimerFire, DiscoveryDone, ConvergenceDone>;

    struct Queued {
        SimTime at;
        std::uint64_t seq;
        Item item;
    };
    struct Later {
        bool operator()(const Queued &a, const Queued &b) const {
            return a.at != b.at ? a.at > b.at : a.seq > b.seq;
        }
    };

    // Held by a node's daemon while the control plane re-converges.
    struct Held {
        enum class Kind { ToSm, ToAgent, Discover } kind;
        std::string sn_id;
        sm::Message msg;
    };

    // AgentContext
    void send_to_sm(const std::string &sn_id, sm::Message msg) override;
    void discover(const std::string &sn_id) override;
    void schedule(const std::string &sn_id, SimTime at, snc::AgentTimer timer) override;
    void relocate(const std::string &node, const std::string &anchor) override;
    SimRng &rng() override { return _rng; }

    void push(SimTime at, Item item);
    void step(const Queued &q);
    void dispatch(const Item &item);
    void run_script(const ScenarioEvent &e);

    void route_to_sm(const std::string &sn_id, sm::Message msg);
    void route_to_agent(const std::string &sn_id, sm::Message msg);
    void lookup_sm(const std::string &sn_id);
    /// Delivery delay along a path, or nullopt when unreachable. Asserts loop freedom.
    std::optional<SimTime> path_delay(const std::string &src, const std::string &dst);
    SimTime hop_delay(std::size_t hops) const;

    void move_node(const std::string &node, const std::string &anchor);
    void apply_effects(sm::Effects fx);
    void after_sm();
    void check_agent(const snc::Agent &a);
    snc::Agent *agent_mut(const std::string &sn_id);
    snc::Agent *find_archetype(snc::Archetype arch, const std::string &sn_id);

    Scenario _scenario;
    EngineOptions _options;
    std::uint64_t _seed;
    SimRng _rng;
    kira::Network _net;
    sm::SpectrumManager _sm;
    std::map<std::string, std::unique_ptr<snc::Agent>> _agents;

    std::priority_queue<Queued, std::vector<Queued>, Later> _queue;
    std::uint64_t _next_seq = 0;
    SimTime _now = 0;
    bool _finished = false;

    bool _converging = true;
    bool _published = false;
    std::uint64_t _generation = 0;
    std::vector<Held> _held;

    std::size_t _seen_ledger = 0;
    std::map<std::string, std::pair<int, int>> _pinned_blocks; // P0 sn -> (start, width)
    std::map<std::string, std::uint64_t> _agent_epochs;
    std::vector<std::string> _metrics_rows;
    std::vector<std::string> _telemetry_rows;
    std::vector<sm::Outbound> _external_out;
    LedgerListener _listener;
    std::uint64_t _dropped = 0;
    std::uint64_t _routed = 0;
};

} // namespace nds::sim
