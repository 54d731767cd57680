#include "sm/manager.hpp"

#include <algorithm>

#include "common/error.hpp"

namespace nds::sm {

using spectrum::demand_from_json;

void Effects::append(Effects &&o) {
    for (auto &m : o.messages)
        messages.push_back(std::move(m));
    for (auto &t : o.timers)
        timers.push_back(std::move(t));
}

SpectrumManager::SpectrumManager(SmConfig config, std::map<std::string, DemandProfile> provisioned)
    : _cfg{std::move(config)}, _provisioned{std::move(provisioned)} {
    if (_cfg.guard_mhz < 0 || !_cfg.band.on_grid(_cfg.guard_mhz))
        throw ValidationError("guard_mhz must be a non-negative multiple of the grid");
    if (_cfg.t_offer_ms <= 0 || _cfg.t_apply_ms <= 0 || _cfg.t_intent_hold_ms < 0)
        throw ValidationError("SM timers must be positive");
}

void SpectrumManager::emit(SimTime now, EventKind kind, json payload) {
    LedgerEvent e{_state.last_seq + 1, std::max(now, _state.last_time), kind, std::move(payload)};
    apply(_state, e);
    _ledger.push_back(std::move(e));
}

Message SpectrumManager::make(SimTime now, std::string kind, json payload) {
    return Message{std::move(kind), ++_out_seq, now, std::move(payload)};
}

Effects SpectrumManager::reject(SimTime now, const std::string &sn_id, const std::string &reason) {
    emit(now, EventKind::Reject, {{"sn_id", sn_id}, {"reason", reason}});
    Effects fx;
    if (!sn_id.empty())
        fx.messages.push_back({sn_id, make(now, "REJECT", {{"sn_id", sn_id}, {"reason", reason}})});
    return fx;
}

alloc::AllocatorInput SpectrumManager::build_input(const std::optional<DemandProfile> &newcomer) const {
    alloc::AllocatorInput in;
    in.band = _cfg.band;
    in.guard_mhz = _cfg.guard_mhz;
    in.prev_epoch = _state.issued_epoch;

    std::set<std::string> present;
    for (const auto &[sn, s] : _state.sessions)
        if (s.holds_spectrum() && (!newcomer || newcomer->sn_id() != sn)) {
            in.demands.push_back(s.demand);
            present.insert(sn);
        }
    for (const auto &[sn, r] : _state.reservations)
        if (!present.contains(sn) && (!newcomer || newcomer->sn_id() != sn)) {
            in.demands.push_back(r.demand);
            present.insert(sn);
        }
    for (const auto &d : in.demands)
        if (d.priority().sticky())
            if (const auto *a = _state.latest.find(d.sn_id()))
                in.pinned.push_back(*a);
    if (newcomer)
        in.demands.push_back(*newcomer);
    return in;
}

AllocationPlan SpectrumManager::recompute() const { return alloc::compute_plan(build_input(std::nullopt)); }

Effects SpectrumManager::commit_plan(SimTime now, const AllocationPlan &plan,
                                     const std::optional<std::string> &newcomer) {
    Effects fx;
    const auto previous = _state.latest;
    const bool any_degraded = std::any_of(_state.sessions.begin(), _state.sessions.end(), [](const auto &kv) {
        return kv.second.state == SessionState::Degraded;
    });
    if (!newcomer && !any_degraded && plan.same_layout(previous))
        return fx;

    const SimTime activate_at = now + _cfg.t_apply_ms;
    emit(now, EventKind::Commit,
         {{"phase", "prepare"}, {"epoch", plan.epoch}, {"activate_at", activate_at}, {"plan", plan}});

    for (const auto &[sn, s] : _state.sessions) {
        if (!s.holds_spectrum() || sn == newcomer)
            continue;
        const auto *next = plan.find(sn);
        const auto *prev = previous.find(sn);
        const bool changed = !next || !prev || !next->same_block(*prev) || s.state == SessionState::Degraded;
        if (!changed)
            continue;
        json payload{{"sn_id", sn},
                     {"epoch", plan.epoch},
                     {"allocation", next ? json(*next) : json(nullptr)},
                     {"activate_at", activate_at}};
        emit(now, EventKind::ReallocNotice, payload);
        fx.messages.push_back({sn, make(now, "REALLOC_NOTICE", payload)});
    }
    if (newcomer) {
        const auto *a = plan.find(*newcomer);
        fx.messages.push_back({*newcomer, make(now, "COMMIT",
                                               {{"sn_id", *newcomer},
                                                {"epoch", plan.epoch},
                                                {"allocation", *a},
                                                {"activate_at", activate_at}})});
    }
    fx.timers.push_back({activate_at, TimerKind::Activate, "", plan.epoch});
    return fx;
}

Effects SpectrumManager::handle_register(SimTime now, const json &payload) {
    std::optional<DemandProfile> parsed;
    try {
        parsed = demand_from_json(payload).with_registered_at(now);
        parsed->validate_for(_cfg.band);
    } catch (const ValidationError &) {
        const auto sn = payload.is_object() && payload.contains("sn_id") && payload["sn_id"].is_string()
                            ? payload["sn_id"].get<std::string>()
                            : std::string{};
        return reject(now, sn, "invalid_demand");
    }
    const auto &demand = *parsed;
    const auto &sn = demand.sn_id();

    if (const auto it = _state.sessions.find(sn); it != _state.sessions.end() && it->second.active())
        return reject(now, sn, "already_registered");

    emit(now, EventKind::Register, {{"demand", demand}});
    return offer(now, demand);
}

Effects SpectrumManager::offer(SimTime now, const DemandProfile &demand) {
    const auto &sn = demand.sn_id();
    AllocationPlan plan;
    const auto r = _state.reservations.find(sn);
    if (r != _state.reservations.end() && r->second.demand.same_requirements(demand) &&
        now <= r->second.hold_until && _state.latest.find(sn)) {
        // Announced arrival: hand out exactly the block held since the intent.
        plan = _state.latest;
        plan.epoch = _state.issued_epoch + 1;
        for (auto &a : plan.allocations)
            a = a.with_epoch(plan.epoch);
    } else {
        plan = alloc::compute_plan(build_input(demand));
    }

    const auto *granted = plan.find(sn);
    if (!granted)
        return reject(now, sn, "insufficient_spectrum");

    const SimTime deadline = now + _cfg.t_offer_ms;
    emit(now, EventKind::Offer,
         {{"sn_id", sn},
          {"epoch", plan.epoch},
          {"base_epoch", _state.latest.epoch},
          {"deadline", deadline},
          {"allocation", *granted},
          {"plan", plan}});
    Effects fx;
    fx.messages.push_back(
        {sn, make(now, "OFFER", {{"sn_id", sn}, {"epoch", plan.epoch}, {"allocation", *granted}, {"deadline", deadline}})});
    fx.timers.push_back({deadline, TimerKind::OfferDeadline, sn, plan.epoch});
    return fx;
}

Effects SpectrumManager::handle_accept(SimTime now, const std::string &sn_id, std::uint64_t epoch) {
    const auto it = _state.sessions.find(sn_id);
    if (it == _state.sessions.end() || it->second.state != SessionState::PendingOffer) {
        const bool expired = it != _state.sessions.end() && it->second.state == SessionState::Unregistered;
        return reject(now, sn_id, expired ? "offer_expired" : "stale_epoch");
    }
    const auto &offer = _state.offers.at(sn_id);
    if (now > offer.deadline)
        return reject(now, sn_id, "offer_expired");
    if (epoch != offer.epoch)
        return reject(now, sn_id, "stale_epoch");
    if (offer.base_epoch != _state.latest.epoch) {
        // Another SN committed since the offer was made: offer again against the new plan.
        const auto demand = it->second.demand;
        return this->offer(now, demand);
    }

    const auto plan = offer.plan;
    emit(now, EventKind::Accept, {{"sn_id", sn_id}, {"epoch", epoch}});
    return commit_plan(now, plan, sn_id);
}

Effects SpectrumManager::handle_intent(SimTime now, const std::string &sn_id, SimTime eta_ms) {
    json base{{"sn_id", sn_id}, {"eta_ms", eta_ms}};
    std::optional<DemandProfile> profile;
    if (const auto p = _provisioned.find(sn_id); p != _provisioned.end())
        profile = p->second;
    else if (const auto s = _state.sessions.find(sn_id); s != _state.sessions.end())
        profile = s->second.demand;

    auto note = [&](const char *status) {
        auto payload = base;
        payload["status"] = status;
        emit(now, EventKind::Intent, std::move(payload));
        return Effects{};
    };
    if (!profile)
        return note("unknown_sn");
    if (const auto s = _state.sessions.find(sn_id); s != _state.sessions.end() && s->second.active())
        return note("already_active");
    if (_state.reservations.contains(sn_id))
        return note("already_reserved");

    const auto demand = profile->with_registered_at(now);
    const auto plan = alloc::compute_plan(build_input(demand));
    if (!plan.find(sn_id))
        return note("rejected");

    const SimTime hold_until = eta_ms + _cfg.t_intent_hold_ms;
    auto payload = base;
    payload["status"] = "reserved";
    payload["hold_until"] = hold_until;
    payload["demand"] = demand;
    emit(now, EventKind::Intent, std::move(payload));
    auto fx = commit_plan(now, plan, std::nullopt);
    fx.timers.push_back({hold_until, TimerKind::HoldExpiry, sn_id, 0});
    return fx;
}

Effects SpectrumManager::handle_release(SimTime now, const std::string &sn_id) {
    const auto it = _state.sessions.find(sn_id);
    if (it == _state.sessions.end() || !it->second.holds_spectrum())
        return {};
    emit(now, EventKind::Release, {{"sn_id", sn_id}, {"reason", "released"}});
    return commit_plan(now, recompute(), std::nullopt);
}

Effects SpectrumManager::handle_ack(SimTime now, const std::string &sn_id, std::uint64_t epoch) {
    if (!_state.sessions.contains(sn_id))
        return {};
    emit(now, EventKind::ReallocAck, {{"sn_id", sn_id}, {"epoch", epoch}});
    return {};
}

Effects SpectrumManager::on_timer(SimTime now, const TimerRequest &timer) {
    switch (timer.kind) {
    case TimerKind::OfferDeadline: {
        const auto it = _state.sessions.find(timer.sn_id);
        if (it != _state.sessions.end() && it->second.state == SessionState::PendingOffer &&
            it->second.offer_epoch == timer.epoch)
            return reject(now, timer.sn_id, "offer_expired");
        return {};
    }
    case TimerKind::HoldExpiry: {
        const auto it = _state.reservations.find(timer.sn_id);
        if (it == _state.reservations.end() || it->second.hold_until != timer.at)
            return {};
        emit(now, EventKind::Release, {{"sn_id", timer.sn_id}, {"reason", "intent_expired"}});
        return commit_plan(now, recompute(), std::nullopt);
    }
    case TimerKind::Activate: {
        const auto it = std::find_if(_state.pending.begin(), _state.pending.end(),
                                     [&](const PendingReconfig &r) { return r.epoch == timer.epoch; });
        if (it == _state.pending.end())
            return {};
        const auto plan = it->plan;
        const auto awaiting = it->awaiting;
        // A session admitted by a newer prepared plan is not preempted by an older one.
        std::vector<std::string> preempted;
        for (const auto &[sn, s] : _state.sessions)
            if (s.holds_spectrum() && !plan.find(sn) && !_state.latest.find(sn))
                preempted.push_back(sn);
        for (const auto &sn : awaiting)
            if (_state.sessions.at(sn).holds_spectrum() && plan.find(sn))
                emit(now, EventKind::Degrade, {{"sn_id", sn}, {"epoch", timer.epoch}});
        for (const auto &sn : preempted)
            emit(now, EventKind::Reject, {{"sn_id", sn}, {"reason", "preempted"}});
        emit(now, EventKind::Commit, {{"phase", "activate"}, {"epoch", timer.epoch}});
        return {};
    }
    }
    return {};
}

Effects SpectrumManager::handle_message(SimTime now, const Message &msg) {
    const auto &p = msg.payload;
    try {
        if (msg.kind == "REGISTER")
            return handle_register(now, p);
        if (msg.kind == "ACCEPT")
            return handle_accept(now, p.at("sn_id").get<std::string>(), p.at("epoch").get<std::uint64_t>());
        if (msg.kind == "RELEASE")
            return handle_release(now, p.at("sn_id").get<std::string>());
        if (msg.kind == "INTENT")
            return handle_intent(now, p.at("sn_id").get<std::string>(), p.at("eta_ms").get<SimTime>());
        if (msg.kind == "REALLOC_ACK")
            return handle_ack(now, p.at("sn_id").get<std::string>(), p.at("epoch").get<std::uint64_t>());
        if (msg.kind == "TELEMETRY") {
            auto entry = p;
            entry["received_at"] = now;
            _telemetry[p.at("sn_id").get<std::string>()] = std::move(entry);
        }
    } catch (const nlohmann::json::exception &) {
        // Malformed control payloads are dropped; REGISTER reports its own errors.
    }
    return {};
}

} // namespace nds::sm
