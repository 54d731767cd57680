#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "common/json.hpp"
#include "spectrum/model.hpp"

namespace nds::sm {

using spectrum::SimTime;

constexpr int wire_version = 1;

enum class EventKind {
    Register,
    Offer,
    Accept,
    Commit,
    Reject,
    Release,
    Intent,
    ReallocNotice,
    ReallocAck,
    Degrade,
};

std::string_view to_string(EventKind kind) noexcept;
std::optional<EventKind> event_kind_from(std::string_view s) noexcept;

/// One appended ledger record. Serialized with the same envelope as wire messages.
struct LedgerEvent {
    std::uint64_t seq = 0;
    SimTime time = 0;
    EventKind kind = EventKind::Register;
    json payload = json::object();

    bool operator==(const LedgerEvent &) const = default;
};

json to_json(const LedgerEvent &e);
LedgerEvent ledger_event_from_json(const json &j);

/// One ledger line (no trailing newline).
std::string encode_ledger_line(const LedgerEvent &e);

/// Parses newline-delimited ledger text. Blank lines are skipped.
/// Throws CorruptLedger on malformed lines.
std::vector<LedgerEvent> decode_ledger(std::string_view text);

/// SNC <-> SM message envelope: {v, kind, seq, time, payload}.
/// Kinds on the wire: REGISTER, OFFER, ACCEPT, COMMIT, REJECT, RELEASE, INTENT,
/// REALLOC_NOTICE, REALLOC_ACK, TELEMETRY (and ERROR for malformed input on sockets).
struct Message {
    std::string kind;
    std::uint64_t seq = 0;
    SimTime time = 0;
    json payload = json::object();

    bool operator==(const Message &) const = default;
};

/// Canonical single line, newline-terminated.
std::string encode(const Message &m);

/// Throws ValidationError on malformed input or unsupported version.
Message decode(std::string_view line);

} // namespace nds::sm
