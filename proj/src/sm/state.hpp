#pragma once

#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "sm/protocol.hpp"
#include "spectrum/model.hpp"

namespace nds::sm {

using spectrum::AllocationPlan;
using spectrum::DemandProfile;
using spectrum::SpectrumAllocation;

enum class SessionState { Unregistered, PendingOffer, Committed, Degraded, Released };

std::string_view to_string(SessionState s) noexcept;

struct NegotiationSession {
    SessionState state = SessionState::Unregistered;
    DemandProfile demand;
    std::optional<SpectrumAllocation> current_alloc; // set iff COMMITTED or DEGRADED
    std::optional<SimTime> offer_deadline;           // set iff PENDING_OFFER
    std::optional<std::uint64_t> offer_epoch;

    bool active() const noexcept {
        return state == SessionState::PendingOffer || state == SessionState::Committed ||
               state == SessionState::Degraded;
    }
    bool holds_spectrum() const noexcept {
        return state == SessionState::Committed || state == SessionState::Degraded;
    }

    bool operator==(const NegotiationSession &) const = default;
};

struct Offer {
    std::uint64_t epoch = 0;
    std::uint64_t base_epoch = 0; // latest committed epoch the offer was computed against
    SimTime deadline = 0;
    SpectrumAllocation allocation;
    AllocationPlan plan;

    bool operator==(const Offer &) const = default;
};

/// Block held for a nomadic SN that announced its arrival.
struct Reservation {
    DemandProfile demand;
    SimTime eta = 0;
    SimTime hold_until = 0;

    bool operator==(const Reservation &) const = default;
};

/// A prepared plan waiting for its activation instant.
struct PendingReconfig {
    std::uint64_t epoch = 0;
    SimTime activate_at = 0;
    AllocationPlan plan;
    std::set<std::string> awaiting; // notified SNs that have not acknowledged yet

    bool operator==(const PendingReconfig &) const = default;
};

/// Everything the Spectrum Manager knows, as a pure fold over its ledger.
struct SmState {
    std::uint64_t last_seq = 0;
    SimTime last_time = 0;
    std::uint64_t issued_epoch = 0;
    AllocationPlan active; // plan currently on air
    AllocationPlan latest; // most recently committed plan (may still be pending)
    std::map<std::string, NegotiationSession> sessions;
    std::map<std::string, Offer> offers;
    std::map<std::string, Reservation> reservations;
    std::vector<PendingReconfig> pending;

    bool operator==(const SmState &) const = default;
};

/// Applies one event. Throws CorruptLedger on sequence gaps, time going
/// backwards, or payloads that do not fit the current state.
void apply(SmState &state, const LedgerEvent &event);

/// Folds a whole ledger from the empty state.
SmState replay(std::span<const LedgerEvent> ledger);

/// Canonical snapshot; compare dumps for structural equality.
json to_json(const SmState &state);

} // namespace nds::sm
