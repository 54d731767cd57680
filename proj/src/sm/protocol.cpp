#include "sm/protocol.hpp"

#include <array>
#include <utility>

#include "common/error.hpp"

namespace nds::sm {

namespace {

constexpr std::array<std::pair<EventKind, std::string_view>, 10> kind_names{{
    {EventKind::Register, "REGISTER"},
    {EventKind::Offer, "OFFER"},
    {EventKind::Accept, "ACCEPT"},
    {EventKind::Commit, "COMMIT"},
    {EventKind::Reject, "REJECT"},
    {EventKind::Release, "RELEASE"},
    {EventKind::Intent, "INTENT"},
    {EventKind::ReallocNotice, "REALLOC_NOTICE"},
    {EventKind::ReallocAck, "REALLOC_ACK"},
    {EventKind::Degrade, "DEGRADE"},
}};

json envelope(std::string_view kind, std::uint64_t seq, SimTime time, const json &payload) {
    return json{{"v", wire_version}, {"kind", kind}, {"seq", seq}, {"time", time}, {"payload", payload}};
}

} // namespace

std::string_view to_string(EventKind kind) noexcept {
    for (const auto &[k, name] : kind_names)
        if (k == kind)
            return name;
    return "UNKNOWN";
}

std::optional<EventKind> event_kind_from(std::string_view s) noexcept {
    for (const auto &[k, name] : kind_names)
        if (name == s)
            return k;
    return std::nullopt;
}

json to_json(const LedgerEvent &e) { return envelope(to_string(e.kind), e.seq, e.time, e.payload); }

LedgerEvent ledger_event_from_json(const json &j) {
    try {
        if (j.at("v").get<int>() != wire_version)
            throw CorruptLedger("unsupported ledger version");
        const auto kind = event_kind_from(j.at("kind").get<std::string>());
        if (!kind)
            throw CorruptLedger("unknown ledger event kind " + j.at("kind").dump());
        const auto &payload = j.at("payload");
        if (!payload.is_object())
            throw CorruptLedger("ledger payload must be an object");
        return LedgerEvent{j.at("seq").get<std::uint64_t>(), j.at("time").get<SimTime>(), *kind, payload};
    } catch (const nlohmann::json::exception &ex) {
        throw CorruptLedger(std::string{"malformed ledger event: "} + ex.what());
    }
}

std::string encode_ledger_line(const LedgerEvent &e) { return to_json(e).dump(); }

std::vector<LedgerEvent> decode_ledger(std::string_view text) {
    std::vector<LedgerEvent> out;
    std::size_t line_no = 0;
    while (!text.empty()) {
        const auto nl = text.find('\n');
        const auto line = text.substr(0, nl);
        text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string_view::npos)
            continue;
        const auto j = json::parse(line, nullptr, false);
        if (j.is_discarded())
            throw CorruptLedger("ledger line " + std::to_string(line_no) + " is not valid JSON");
        try {
            out.push_back(ledger_event_from_json(j));
        } catch (const CorruptLedger &ex) {
            throw CorruptLedger("ledger line " + std::to_string(line_no) + ": " + ex.what());
        }
    }
    return out;
}

std::string encode(const Message &m) { return envelope(m.kind, m.seq, m.time, m.payload).dump() + "\n"; }

Message decode(std::string_view line) {
    while (!line.empty() && (line.back() == '\n' || line.back() == '\r'))
        line.remove_suffix(1);
    const auto j = json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object())
        throw ValidationError("message is not a JSON object");
    try {
        if (j.at("v").get<int>() != wire_version)
            throw ValidationError("unsupported wire version " + j.at("v").dump());
        Message m;
        m.kind = j.at("kind").get<std::string>();
        m.seq = j.at("seq").get<std::uint64_t>();
        m.time = j.at("time").get<SimTime>();
        m.payload = j.at("payload");
        if (!m.payload.is_object())
            throw ValidationError("message payload must be an object");
        return m;
    } catch (const nlohmann::json::exception &ex) {
        throw ValidationError(std::string{"malformed message: "} + ex.what());
    }
}

} // namespace nds::sm
