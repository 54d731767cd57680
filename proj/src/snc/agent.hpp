#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "common/rng.hpp"
#include "sm/protocol.hpp"
#include "spectrum/model.hpp"

namespace nds::snc {

using sm::Message;
using spectrum::DemandProfile;
using spectrum::SimTime;
using spectrum::SpectrumAllocation;

enum class Archetype { Control, Sensing, Nomadic };

std::string_view to_string(Archetype a) noexcept;
std::optional<Archetype> archetype_from(std::string_view s) noexcept;

/// Priority an archetype must register with: CONTROL 0, NOMADIC 1, SENSING 2.
int archetype_priority(Archetype a) noexcept;

struct AgvRoute {
    std::vector<std::string> waypoints; // dock first, machine anchor last
    SimTime hop_interval_ms = 1000;
    SimTime dwell_ms = 5000;
};

struct SncConfig {
    std::string sn_id;
    Archetype archetype = Archetype::Control;
    DemandProfile demand;
    std::string home_node;
    double latency_base_ms = 2.0;
    double latency_jitter_ms = 1.0;
    double degrade_factor = 5.0;
    std::optional<AgvRoute> agv; // NOMADIC only

    /// Throws ValidationError on archetype/priority mismatch or a malformed AGV route.
    void validate() const;
};

/// Modeled control-loop latency: base + U(0, jitter), times degrade_factor when
/// the granted width is below the demand minimum.
double control_loop_sample(const SncConfig &cfg, const SpectrumAllocation &granted, SimRng &rng);

enum class AgvPhase { Docked, Summoned, Traversing, AtMachine, Returning };
enum class AgvTrigger { Call, Depart, Arrive, DwellDone, Dock };

std::string_view to_string(AgvPhase p) noexcept;

/// DOCKED -> SUMMONED -> TRAVERSING -> AT_MACHINE -> RETURNING -> DOCKED. Any
/// other trigger is refused and leaves the phase unchanged.
class AgvPhaseMachine {
public:
    AgvPhase phase() const noexcept { return _phase; }
    bool fire(AgvTrigger trigger) noexcept;

private:
    AgvPhase _phase = AgvPhase::Docked;
};

enum class TimerKind { Retry, ResponseTimeout, Apply, Telemetry, AgvHop, AgvDwell };

struct AgentTimer {
    TimerKind kind = TimerKind::Retry;
    std::uint64_t token = 0; // attempt counter or epoch, depending on kind
};

/// What an agent may do to the outside world. Implemented by the simulation engine.
class AgentContext {
public:
    virtual ~AgentContext() = default;
    virtual SimTime now() const = 0;
    virtual void send_to_sm(const std::string &sn_id, Message msg) = 0;
    /// Starts a DHT lookup of the SM; the answer arrives via Agent::on_discovery.
    virtual void discover(const std::string &sn_id) = 0;
    virtual void schedule(const std::string &sn_id, SimTime at, AgentTimer timer) = 0;
    virtual void relocate(const std::string &node, const std::string &anchor) = 0;
    virtual SimRng &rng() = 0;
};

enum class RegistrationState { Idle, Discovering, Registering, Accepting, Committed, Parked };

std::string_view to_string(RegistrationState s) noexcept;

/// Sub-network controller: an independent actor with private state.
class Agent {
public:
    static constexpr SimTime backoff_base_ms = 500;
    static constexpr SimTime backoff_cap_ms = 8000;
    static constexpr SimTime reject_retry_ms = 10000;
    static constexpr SimTime telemetry_period_ms = 1000;

    Agent(SncConfig config, AgentContext &ctx, SimTime response_timeout_ms = 5000);

    const SncConfig &config() const noexcept { return _cfg; }
    const std::string &sn_id() const noexcept { return _cfg.sn_id; }

    /// Starts telemetry and locates the SM; called once when the simulation starts.
    void start();

    /// Discover the SM, register, accept, and apply the commit.
    void bootstrap();

    void on_discovery(bool found, const std::string &sm_node);
    void on_message(const Message &msg);
    void on_timer(const AgentTimer &timer);

    /// SENSING only. Returns false for redundant toggles.
    bool toggle_sensing(bool on);

    /// NOMADIC only. Returns false unless DOCKED.
    bool call_agv();

    /// Operator release. Returns false when the agent holds no session.
    bool stop();

    bool wants_spectrum() const noexcept { return _wants; }
    RegistrationState registration() const noexcept { return _reg; }
    const std::optional<SpectrumAllocation> &tuned() const noexcept { return _tuned; }
    std::uint64_t applied_epoch() const noexcept { return _applied_epoch; }
    std::optional<AgvPhase> agv_phase() const;
    const std::optional<std::string> &sm_node() const noexcept { return _sm_node; }

    /// Delays between failed discoveries, in order.
    const std::vector<SimTime> &backoff_log() const noexcept { return _backoff_log; }

    /// Violations of "only transmit inside the committed block", one string each.
    const std::vector<std::string> &violations() const noexcept { return _violations; }

private:
    void send(const std::string &kind, json payload);
    bool ensure_sm();
    void send_register();
    void release();
    void retry_later(SimTime delay);
    void apply_epoch(std::uint64_t epoch);
    void agv_hop();

    SncConfig _cfg;
    AgentContext &_ctx;
    SimTime _response_timeout_ms;

    bool _wants = false;
    RegistrationState _reg = RegistrationState::Idle;
    std::optional<std::string> _sm_node;
    bool _discovering = false;
    SimTime _backoff = backoff_base_ms;
    std::vector<SimTime> _backoff_log;
    std::uint64_t _attempt = 0;
    std::uint64_t _out_seq = 0;

    std::optional<SpectrumAllocation> _tuned;
    std::uint64_t _applied_epoch = 0;
    std::uint64_t _seen_epoch = 0;
    std::map<std::uint64_t, std::optional<SpectrumAllocation>> _pending_apply;
    std::vector<std::string> _violations;

    AgvPhaseMachine _agv;
    std::size_t _agv_index = 0;
    std::optional<SimTime> _pending_intent_eta;
};

} // namespace nds::snc
