#include "snc/agent.hpp"

#include <algorithm>

#include "common/error.hpp"

namespace nds::snc {

std::string_view to_string(Archetype a) noexcept {
    switch (a) {
    case Archetype::Control: return "CONTROL";
    case Archetype::Sensing: return "SENSING";
    case Archetype::Nomadic: return "NOMADIC";
    }
    return "UNKNOWN";
}

std::optional<Archetype> archetype_from(std::string_view s) noexcept {
    if (s == "CONTROL")
        return Archetype::Control;
    if (s == "SENSING")
        return Archetype::Sensing;
    if (s == "NOMADIC")
        return Archetype::Nomadic;
    return std::nullopt;
}

int archetype_priority(Archetype a) noexcept {
    switch (a) {
    case Archetype::Control: return 0;
    case Archetype::Nomadic: return 1;
    case Archetype::Sensing: return 2;
    }
    return 2;
}

void SncConfig::validate() const {
    if (demand.sn_id() != sn_id)
        throw ValidationError("agent " + sn_id + ": demand belongs to " + demand.sn_id());
    if (demand.priority().level() != archetype_priority(archetype))
        throw ValidationError("agent " + sn_id + ": " + std::string{to_string(archetype)} +
                              " requires priority " + std::to_string(archetype_priority(archetype)));
    if (home_node.empty())
        throw ValidationError("agent " + sn_id + ": home_node missing");
    if (latency_base_ms < 0 || latency_jitter_ms < 0 || degrade_factor < 1.0)
        throw ValidationError("agent " + sn_id + ": invalid latency model");
    if (archetype == Archetype::Nomadic) {
        if (!agv)
            throw ValidationError("agent " + sn_id + ": NOMADIC agent needs an AGV route");
        if (agv->waypoints.size() < 2)
            throw ValidationError("agent " + sn_id + ": AGV route needs a dock and a machine anchor");
        if (agv->hop_interval_ms <= 0 || agv->dwell_ms < 0)
            throw ValidationError("agent " + sn_id + ": invalid AGV timing");
    } else if (agv) {
        throw ValidationError("agent " + sn_id + ": only NOMADIC agents have an AGV route");
    }
}

double control_loop_sample(const SncConfig &cfg, const SpectrumAllocation &granted, SimRng &rng) {
    const double nominal = cfg.latency_base_ms + rng.uniform(0.0, cfg.latency_jitter_ms);
    return granted.width_mhz() >= cfg.demand.min_bw_mhz() ? nominal : nominal * cfg.degrade_factor;
}

std::string_view to_string(AgvPhase p) noexcept {
    switch (p) {
    case AgvPhase::Docked: return "DOCKED";
    case AgvPhase::Summoned: return "SUMMONED";
    case AgvPhase::Traversing: return "TRAVERSING";
    case AgvPhase::AtMachine: return "AT_MACHINE";
    case AgvPhase::Returning: return "RETURNING";
    }
    return "UNKNOWN";
}

bool AgvPhaseMachine::fire(AgvTrigger trigger) noexcept {
    struct Edge {
        AgvPhase from;
        AgvTrigger on;
        AgvPhase to;
    };
    static constexpr Edge edges[] = {
        {AgvPhase::Docked, AgvTrigger::Call, AgvPhase::Summoned},
        {AgvPhase::Summoned, AgvTrigger::Depart, AgvPhase::Traversing},
        {AgvPhase::Traversing, AgvTrigger::Arrive, AgvPhase::AtMachine},
        {AgvPhase::AtMachine, AgvTrigger::DwellDone, AgvPhase::Returning},
        {AgvPhase::Returning, AgvTrigger::Dock, AgvPhase::Docked},
    };
    for (const auto &e : edges)
        if (e.from == _phase && e.on == trigger) {
            _phase = e.to;
            return true;
        }
    return false;
}

std::string_view to_string(RegistrationState s) noexcept {
    switch (s) {
    case RegistrationState::Idle: return "IDLE";
    case RegistrationState::Discovering: return "DISCOVERING";
    case RegistrationState::Registering: return "REGISTERING";
    case RegistrationState::Accepting: return "ACCEPTING";
    case RegistrationState::Committed: return "COMMITTED";
    case RegistrationState::Parked: return "PARKED";
    }
    return "UNKNOWN";
}

Agent::Agent(SncConfig config, AgentContext &ctx, SimTime response_timeout_ms)
    : _cfg{std::move(config)}, _ctx{ctx}, _response_timeout_ms{response_timeout_ms} {
    _cfg.validate();
}

std::optional<AgvPhase> Agent::agv_phase() const {
    if (_cfg.archetype != Archetype::Nomadic)
        return std::nullopt;
    return _agv.phase();
}

void Agent::start() {
    _ctx.schedule(_cfg.sn_id, _ctx.now() + telemetry_period_ms, {TimerKind::Telemetry, 0});
    ensure_sm();
}

void Agent::send(const std::string &kind, json payload) {
    _ctx.send_to_sm(_cfg.sn_id, Message{kind, ++_out_seq, _ctx.now(), std::move(payload)});
}

bool Agent::ensure_sm() {
    if (_sm_node)
        return true;
    if (!_discovering) {
        _discovering = true;
        _ctx.discover(_cfg.sn_id);
    }
    return false;
}

void Agent::bootstrap() {
    if (_reg == RegistrationState::Parked)
        return;
    _wants = true;
    if (_reg != RegistrationState::Idle)
        return;
    ++_attempt;
    if (ensure_sm())
        send_register();
    else
        _reg = RegistrationState::Discovering;
}

void Agent::send_register() {
    const auto &d = _cfg.demand;
    send("REGISTER", {{"sn_id", d.sn_id()},
                      {"priority", d.priority().level()},
                      {"min_bw_mhz", d.min_bw_mhz()},
                      {"pref_bw_mhz", d.pref_bw_mhz()}});
    _reg = RegistrationState::Registering;
    _ctx.schedule(_cfg.sn_id, _ctx.now() + _response_timeout_ms, {TimerKind::ResponseTimeout, _attempt});
}

void Agent::on_discovery(bool found, const std::string &sm_node) {
    _discovering = false;
    if (!found) {
        if (_reg != RegistrationState::Discovering && !_pending_intent_eta)
            return; // startup lookup; the next bootstrap retries
        _backoff_log.push_back(_backoff);
        _ctx.schedule(_cfg.sn_id, _ctx.now() + _backoff, {TimerKind::Retry, _attempt});
        _backoff = std::min(_backoff * 2, backoff_cap_ms);
        return;
    }
    _sm_node = sm_node;
    _backoff = backoff_base_ms;
    if (_pending_intent_eta) {
        send("INTENT", {{"sn_id", _cfg.sn_id}, {"eta_ms", *_pending_intent_eta}});
        _pending_intent_eta.reset();
    }
    if (_reg == RegistrationState::Discovering && _wants)
        send_register();
}

void Agent::retry_later(SimTime delay) {
    _reg = RegistrationState::Idle;
    ++_attempt;
    _ctx.schedule(_cfg.sn_id, _ctx.now() + delay, {TimerKind::Retry, _attempt});
}

void Agent::on_message(const Message &msg) {
    const auto &p = msg.payload;
    try {
        if (msg.kind == "OFFER") {
            if ((_reg != RegistrationState::Registering && _reg != RegistrationState::Accepting) || !_wants)
                return;
            send("ACCEPT", {{"sn_id", _cfg.sn_id}, {"epoch", p.at("epoch")}});
            _reg = RegistrationState::Accepting;
            _ctx.schedule(_cfg.sn_id, _ctx.now() + _response_timeout_ms, {TimerKind::ResponseTimeout, _attempt});
        } else if (msg.kind == "REJECT") {
            const auto reason = p.at("reason").get<std::string>();
            if (reason == "invalid_demand") {
                _reg = RegistrationState::Parked;
                return;
            }
            if (_reg != RegistrationState::Registering && _reg != RegistrationState::Accepting)
                return;
            if (reason == "already_registered")
                return;
            retry_later(reject_retry_ms);
        } else if (msg.kind == "COMMIT" || msg.kind == "REALLOC_NOTICE") {
            const auto epoch = p.at("epoch").get<std::uint64_t>();
            if (epoch <= _seen_epoch)
                return; // stale
            if (msg.kind == "COMMIT") {
                if (_reg != RegistrationState::Accepting || !_wants)
                    return;
                _reg = RegistrationState::Committed;
            } else {
                if (!_wants)
                    return;
                send("REALLOC_ACK", {{"sn_id", _cfg.sn_id}, {"epoch", epoch}});
            }
            _seen_epoch = epoch;
            std::optional<SpectrumAllocation> a;
            if (!p.at("allocation").is_null())
                a = spectrum::allocation_from_json(p.at("allocation"));
            _pending_apply[epoch] = a;
            _ctx.schedule(_cfg.sn_id, p.at("activate_at").get<SimTime>(), {TimerKind::Apply, epoch});
        }
    } catch (const nlohmann::json::exception &) {
    } catch (const ValidationError &) {
    }
}

void Agent::apply_epoch(std::uint64_t epoch) {
    const auto it = _pending_apply.find(epoch);
    if (it == _pending_apply.end() || epoch <= _applied_epoch)
        return;
    const auto alloc = it->second;
    std::erase_if(_pending_apply, [epoch](const auto &kv) { return kv.first <= epoch; });
    _applied_epoch = epoch;
    if (!_wants)
        return;
    if (!alloc) {
        // Preempted by a more important SN.
        _tuned.reset();
        retry_later(reject_retry_ms);
        return;
    }
    if (alloc->sn_id() != _cfg.sn_id || alloc->width_mhz() > _cfg.demand.pref_bw_mhz())
        _violations.push_back("epoch " + std::to_string(epoch) + ": tuned outside the committed block");
    _tuned = alloc;
    _reg = RegistrationState::Committed;
}

void Agent::on_timer(const AgentTimer &t) {
    switch (t.kind) {
    case TimerKind::Retry:
        if (t.token != _attempt)
            return;
        if (_reg == RegistrationState::Discovering) {
            ensure_sm();
        } else if (_reg == RegistrationState::Idle && _wants) {
            bootstrap();
        } else if (_pending_intent_eta) {
            ensure_sm();
        }
        return;
    case TimerKind::ResponseTimeout:
        if (t.token != _attempt ||
            (_reg != RegistrationState::Registering && _reg != RegistrationState::Accepting))
            return;
        _sm_node.reset(); // rediscover: the SM may be unreachable from here now
        _reg = RegistrationState::Idle;
        bootstrap();
        return;
    case TimerKind::Apply:
        apply_epoch(t.token);
        return;
    case TimerKind::Telemetry: {
        if (_sm_node) {
            json payload{{"sn_id", _cfg.sn_id},
                         {"archetype", to_string(_cfg.archetype)},
                         {"epoch", _applied_epoch},
                         {"tuned", _tuned.has_value()}};
            if (_tuned) {
                payload["start_mhz"] = _tuned->start_mhz();
                payload["width_mhz"] = _tuned->width_mhz();
                if (_cfg.archetype == Archetype::Control)
                    payload["latency_ms"] = control_loop_sample(_cfg, *_tuned, _ctx.rng());
            }
            if (_cfg.archetype == Archetype::Nomadic) {
                payload["phase"] = to_string(_agv.phase());
                payload["transfer_utilization"] = _tuned && _agv.phase() == AgvPhase::AtMachine ? 1.0 : 0.0;
            }
            if (_cfg.archetype == Archetype::Sensing)
                payload["transfer_utilization"] = _tuned ? 1.0 : 0.0;
            send("TELEMETRY", std::move(payload));
        }
        _ctx.schedule(_cfg.sn_id, _ctx.now() + telemetry_period_ms, {TimerKind::Telemetry, 0});
        return;
    }
    case TimerKind::AgvHop:
        agv_hop();
        return;
    case TimerKind::AgvDwell:
        if (_agv.fire(AgvTrigger::DwellDone)) {
            _agv_index = _cfg.agv->waypoints.size() - 1;
            _ctx.schedule(_cfg.sn_id, _ctx.now() + _cfg.agv->hop_interval_ms, {TimerKind::AgvHop, 0});
        }
        return;
    }
}

void Agent::release() {
    const bool had_session = _reg != RegistrationState::Idle && _reg != RegistrationState::Parked;
    _wants = false;
    _tuned.reset();
    _pending_apply.clear();
    ++_attempt;
    if (_reg != RegistrationState::Parked)
        _reg = RegistrationState::Idle;
    if (had_session && _sm_node)
        send("RELEASE", {{"sn_id", _cfg.sn_id}});
}

bool Agent::stop() {
    if (!_wants && _reg == RegistrationState::Idle)
        return false;
    release();
    return true;
}

bool Agent::toggle_sensing(bool on) {
    if (_cfg.archetype != Archetype::Sensing || on == _wants)
        return false;
    if (on)
        bootstrap();
    else
        release();
    return true;
}

bool Agent::call_agv() {
    if (_cfg.archetype != Archetype::Nomadic || !_agv.fire(AgvTrigger::Call))
        return false;
    const auto &route = *_cfg.agv;
    const SimTime travel = route.hop_interval_ms * static_cast<SimTime>(route.waypoints.size() - 1);
    _pending_intent_eta = _ctx.now() + travel;
    if (ensure_sm()) {
        send("INTENT", {{"sn_id", _cfg.sn_id}, {"eta_ms", *_pending_intent_eta}});
        _pending_intent_eta.reset();
    }
    _agv_index = 0;
    _ctx.schedule(_cfg.sn_id, _ctx.now() + route.hop_interval_ms, {TimerKind::AgvHop, 0});
    return true;
}

void Agent::agv_hop() {
    const auto &route = *_cfg.agv;
    const auto phase = _agv.phase();
    if (phase == AgvPhase::Summoned)
        _agv.fire(AgvTrigger::Depart);
    if (_agv.phase() == AgvPhase::Traversing) {
        ++_agv_index;
        _ctx.relocate(_cfg.home_node, route.waypoints[_agv_index]);
        if (_agv_index + 1 == route.waypoints.size()) {
            _agv.fire(AgvTrigger::Arrive);
            bootstrap();
            _ctx.schedule(_cfg.sn_id, _ctx.now() + route.dwell_ms, {TimerKind::AgvDwell, 0});
        } else {
            _ctx.schedule(_cfg.sn_id, _ctx.now() + route.hop_interval_ms, {TimerKind::AgvHop, 0});
        }
    } else if (_agv.phase() == AgvPhase::Returning) {
        --_agv_index;
        _ctx.relocate(_cfg.home_node, route.waypoints[_agv_index]);
        if (_agv_index == 0) {
            _agv.fire(AgvTrigger::Dock);
            release();
        } else {
            _ctx.schedule(_cfg.sn_id, _ctx.now() + route.hop_interval_ms, {TimerKind::AgvHop, 0});
        }
    }
}

} // namespace nds::snc
