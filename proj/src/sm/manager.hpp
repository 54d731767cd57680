#pragma once

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "allocator/allocator.hpp"
#include "sm/protocol.hpp"
#include "sm/state.hpp"

namespace nds::sm {

using spectrum::Band;

struct SmConfig {
    Band band;
    int guard_mhz = 1;
    SimTime t_offer_ms = 5000;
    SimTime t_apply_ms = 100;
    SimTime t_intent_hold_ms = 10000;
};

/// A message the SM wants delivered to one SNC.
struct Outbound {
    std::string sn_id;
    Message message;
};

enum class TimerKind { OfferDeadline, Activate, HoldExpiry };

struct TimerRequest {
    SimTime at = 0;
    TimerKind kind = TimerKind::Activate;
    std::string sn_id;
    std::uint64_t epoch = 0;
};

struct Effects {
    std::vector<Outbound> messages;
    std::vector<TimerRequest> timers;

    void append(Effects &&o);
};

/// The centralized Spectrum Manager.
///
/// A single decision process: every handler runs to completion, and every state
/// change goes through an appended ledger event so that `replay(ledger())`
/// reproduces `state()` exactly. Timers are returned to the caller, which owns
/// the clock and must call `on_timer` at the requested instants.
class SpectrumManager {
public:
    /// `provisioned` holds demand profiles known before registration (used by intents).
    explicit SpectrumManager(SmConfig config, std::map<std::string, DemandProfile> provisioned = {});

    Effects handle_message(SimTime now, const Message &msg);

    Effects handle_register(SimTime now, const json &demand);
    Effects handle_accept(SimTime now, const std::string &sn_id, std::uint64_t epoch);
    Effects handle_intent(SimTime now, const std::string &sn_id, SimTime eta_ms);
    Effects handle_release(SimTime now, const std::string &sn_id);
    Effects handle_ack(SimTime now, const std::string &sn_id, std::uint64_t epoch);
    Effects on_timer(SimTime now, const TimerRequest &timer);

    const SmConfig &config() const noexcept { return _cfg; }
    const SmState &state() const noexcept { return _state; }
    const std::vector<LedgerEvent> &ledger() const noexcept { return _ledger; }
    json snapshot() const { return to_json(_state); }

    /// Latest TELEMETRY payload per SN. Observational only, not part of the ledger.
    const std::map<std::string, json> &telemetry() const noexcept { return _telemetry; }

private:
    void emit(SimTime now, EventKind kind, json payload);
    Message make(SimTime now, std::string kind, json payload);
    Effects reject(SimTime now, const std::string &sn_id, const std::string &reason);
    Effects offer(SimTime now, const DemandProfile &demand);

    alloc::AllocatorInput build_input(const std::optional<DemandProfile> &newcomer) const;
    AllocationPlan recompute() const;

    /// Prepares `plan` for activation at now + T_apply and notifies changed SNCs.
    Effects commit_plan(SimTime now, const AllocationPlan &plan, const std::optional<std::string> &newcomer);

    SmConfig _cfg;
    std::map<std::string, DemandProfile> _provisioned;
    SmState _state;
    std::vector<LedgerEvent> _ledger;
    std::map<std::string, json> _telemetry;
    std::uint64_t _out_seq = 0;
};

} // namespace nds::sm
