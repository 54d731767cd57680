#include "sm/state.hpp"

#include <algorithm>

#include "common/error.hpp"

namespace nds::sm {

using spectrum::allocation_from_json;
using spectrum::demand_from_json;

std::string_view to_string(SessionState s) noexcept {
    switch (s) {
    case SessionState::Unregistered: return "UNREGISTERED";
    case SessionState::PendingOffer: return "PENDING_OFFER";
    case SessionState::Committed: return "COMMITTED";
    case SessionState::Degraded: return "DEGRADED";
    case SessionState::Released: return "RELEASED";
    }
    return "UNKNOWN";
}

namespace {

void clear_spectrum(NegotiationSession &s, SessionState next) {
    s.state = next;
    s.current_alloc.reset();
    s.offer_deadline.reset();
    s.offer_epoch.reset();
}

NegotiationSession &session_of(SmState &st, const std::string &sn) {
    const auto it = st.sessions.find(sn);
    if (it == st.sessions.end())
        throw CorruptLedger("event for unknown session " + sn);
    return it->second;
}

void apply_commit(SmState &st, const json &p) {
    const auto phase = p.at("phase").get<std::string>();
    const auto epoch = p.at("epoch").get<std::uint64_t>();
    if (phase == "prepare") {
        PendingReconfig r;
        r.epoch = epoch;
        r.activate_at = p.at("activate_at").get<SimTime>();
        r.plan = p.at("plan").get<AllocationPlan>();
        st.latest = r.plan;
        st.issued_epoch = std::max(st.issued_epoch, epoch);
        std::erase_if(st.reservations, [&](const auto &kv) { return r.plan.find(kv.first) == nullptr; });
        st.pending.push_back(std::move(r));
        return;
    }
    if (phase != "activate")
        throw CorruptLedger("unknown COMMIT phase " + phase);
    const auto it = std::find_if(st.pending.begin(), st.pending.end(),
                                 [epoch](const PendingReconfig &r) { return r.epoch == epoch; });
    if (it == st.pending.end())
        throw CorruptLedger("activation of unprepared epoch " + std::to_string(epoch));
    st.active = it->plan;
    std::erase_if(st.pending, [epoch](const PendingReconfig &r) { return r.epoch <= epoch; });
    for (auto &[sn, s] : st.sessions)
        if (s.holds_spectrum())
            if (const auto *a = st.active.find(sn))
                s.current_alloc = *a;
}

} // namespace

void apply(SmState &st, const LedgerEvent &e) {
    if (e.seq != st.last_seq + 1)
        throw CorruptLedger("ledger seq " + std::to_string(e.seq) + " does not follow " +
                            std::to_string(st.last_seq));
    if (e.time < st.last_time)
        throw CorruptLedger("ledger time goes backwards at seq " + std::to_string(e.seq));

    try {
        const auto &p = e.payload;
        switch (e.kind) {
        case EventKind::Register: {
            auto demand = demand_from_json(p.at("demand"));
            const auto sn = demand.sn_id();
            st.sessions.insert_or_assign(sn, NegotiationSession{.state = SessionState::Unregistered,
                                                                .demand = std::move(demand),
                                                                .current_alloc = std::nullopt,
                                                                .offer_deadline = std::nullopt,
                                                                .offer_epoch = std::nullopt});
            break;
        }
        case EventKind::Offer: {
            const auto sn = p.at("sn_id").get<std::string>();
            auto &s = session_of(st, sn);
            Offer o{p.at("epoch").get<std::uint64_t>(), p.at("base_epoch").get<std::uint64_t>(),
                    p.at("deadline").get<SimTime>(), allocation_from_json(p.at("allocation")),
                    p.at("plan").get<AllocationPlan>()};
            s.state = SessionState::PendingOffer;
            s.offer_deadline = o.deadline;
            s.offer_epoch = o.epoch;
            s.current_alloc.reset();
            st.issued_epoch = std::max(st.issued_epoch, o.epoch);
            st.offers.insert_or_assign(sn, std::move(o));
            break;
        }
        case EventKind::Accept: {
            const auto sn = p.at("sn_id").get<std::string>();
            auto &s = session_of(st, sn);
            const auto o = st.offers.find(sn);
            if (o == st.offers.end())
                throw CorruptLedger("ACCEPT without offer for " + sn);
            s.state = SessionState::Committed;
            s.current_alloc = o->second.allocation;
            s.offer_deadline.reset();
            s.offer_epoch.reset();
            st.offers.erase(o);
            st.reservations.erase(sn);
            break;
        }
        case EventKind::Reject: {
            const auto sn = p.at("sn_id").get<std::string>();
            const auto reason = p.at("reason").get<std::string>();
            const auto it = st.sessions.find(sn);
            if (it != st.sessions.end() &&
                (it->second.state == SessionState::PendingOffer || reason == "preempted")) {
                clear_spectrum(it->second, SessionState::Unregistered);
                st.offers.erase(sn);
            }
            break;
        }
        case EventKind::Commit:
            apply_commit(st, p);
            break;
        case EventKind::ReallocNotice: {
            const auto epoch = p.at("epoch").get<std::uint64_t>();
            for (auto &r : st.pending)
                if (r.epoch == epoch)
                    r.awaiting.insert(p.at("sn_id").get<std::string>());
            break;
        }
        case EventKind::ReallocAck: {
            const auto sn = p.at("sn_id").get<std::string>();
            const auto epoch = p.at("epoch").get<std::uint64_t>();
            for (auto &r : st.pending)
                if (r.epoch == epoch)
                    r.awaiting.erase(sn);
            auto &s = session_of(st, sn);
            if (s.state == SessionState::Degraded && epoch == st.latest.epoch)
                s.state = SessionState::Committed;
            break;
        }
        case EventKind::Degrade:
            session_of(st, p.at("sn_id").get<std::string>()).state = SessionState::Degraded;
            break;
        case EventKind::Release: {
            const auto sn = p.at("sn_id").get<std::string>();
            if (p.at("reason").get<std::string>() == "intent_expired")
                st.reservations.erase(sn);
            else
                clear_spectrum(session_of(st, sn), SessionState::Released);
            break;
        }
        case EventKind::Intent:
            if (p.at("status").get<std::string>() == "reserved") {
                auto demand = demand_from_json(p.at("demand"));
                const auto sn = demand.sn_id();
                st.reservations.insert_or_assign(
                    sn, Reservation{std::move(demand), p.at("eta_ms").get<SimTime>(), p.at("hold_until").get<SimTime>()});
            }
            break;
        }
    } catch (const nlohmann::json::exception &ex) {
        throw CorruptLedger("seq " + std::to_string(e.seq) + " " + std::string{to_string(e.kind)} +
                            ": malformed payload: " + ex.what());
    } catch (const ValidationError &ex) {
        throw CorruptLedger("seq " + std::to_string(e.seq) + ": " + ex.what());
    }

    st.last_seq = e.seq;
    st.last_time = e.time;
}

SmState replay(std::span<const LedgerEvent> ledger) {
    SmState st;
    for (const auto &e : ledger)
        apply(st, e);
    return st;
}

json to_json(const SmState &st) {
    json sessions = json::object();
    for (const auto &[sn, s] : st.sessions) {
        sessions[sn] = {{"state", to_string(s.state)},
                        {"demand", s.demand},
                        {"current_alloc", s.current_alloc ? json(*s.current_alloc) : json(nullptr)},
                        {"offer_deadline", s.offer_deadline ? json(*s.offer_deadline) : json(nullptr)},
                        {"offer_epoch", s.offer_epoch ? json(*s.offer_epoch) : json(nullptr)}};
    }
    json offers = json::object();
    for (const auto &[sn, o] : st.offers)
        offers[sn] = {{"epoch", o.epoch},
                      {"base_epoch", o.base_epoch},
                      {"deadline", o.deadline},
                      {"allocation", o.allocation},
                      {"plan", o.plan}};
    json reservations = json::object();
    for (const auto &[sn, r] : st.reservations)
        reservations[sn] = {{"demand", r.demand}, {"eta_ms", r.eta}, {"hold_until", r.hold_until}};
    json pending = json::array();
    for (const auto &r : st.pending)
        pending.push_back({{"epoch", r.epoch},
                           {"activate_at", r.activate_at},
                           {"plan", r.plan},
                           {"awaiting", std::vector<std::string>(r.awaiting.begin(), r.awaiting.end())}});
    return {{"last_seq", st.last_seq},
            {"last_time", st.last_time},
            {"issued_epoch", st.issued_epoch},
            {"active_plan", st.active},
            {"latest_plan", st.latest},
            {"sessions", sessions},
            {"offers", offers},
            {"reservations", reservations},
            {"pending", pending}};
}

} // namespace nds::sm
