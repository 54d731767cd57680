#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "common/json.hpp"
#include "kira/kira.hpp"
#include "sm/manager.hpp"
#include "snc/agent.hpp"

namespace nds::sim {

using spectrum::SimTime;

enum class Action { RegisterSn, CallAgv, ToggleSn2, MoveNode, End };

std::string_view to_string(Action a) noexcept;
std::optional<Action> action_from(std::string_view s) noexcept;

struct ScenarioEvent {
    SimTime at_ms = 0;
    Action action = Action::End;
    json args = json::object();
};

struct Delays {
    double per_hop_ms = 0.2;
    SimTime round_ms = 10; // one distance-vector exchange round
};

struct Scenario {
    std::uint64_t seed = 1;
    spectrum::Band band;
    int guard_mhz = 1;
    Delays delays;
    SimTime t_offer_ms = 5000;
    SimTime t_apply_ms = 100;
    SimTime t_intent_hold_ms = 10000;
    SimTime response_timeout_ms = 5000;
    kira::Topology topology;
    std::string sm_node;
    std::vector<snc::SncConfig> agents;
    std::vector<ScenarioEvent> events; // sorted by (at_ms, file order)

    sm::SmConfig sm_config() const;
    const snc::SncConfig *agent(const std::string &sn_id) const;
};

/// Parses and validates scenario JSON text. Throws SchemaError carrying the
/// 1-based line of the offending value.
Scenario load_scenario(std::string_view text);

/// Reads the file, then `load_scenario`. Unreadable files raise SchemaError(0, ...).
Scenario load_scenario_file(const std::string &path);

/// Canonical JSON form accepted back by `load_scenario`.
json to_json(const Scenario &s);

} // namespace nds::sim
