#include "sim/engine.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <set>

#include "common/error.hpp"

namespace nds::sim {

namespace {

std::map<std::string, spectrum::DemandProfile> provisioned(const Scenario &s) {
    std::map<std::string, spectrum::DemandProfile> out;
    for (const auto &a : s.agents)
        out.emplace(a.sn_id, a.demand);
    return out;
}

std::string fixed4(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.4f", v);
    return buf;
}

void write_file(const std::filesystem::path &p, const std::string &content) {
    std::ofstream out{p, std::ios::binary | std::ios::trunc};
    if (!out)
        throw Error("cannot write " + p.string());
    out << content;
    if (!out)
        throw Error("write failed for " + p.string());
}

} // namespace

Engine::Engine(Scenario scenario, EngineOptions options)
    : _scenario{std::move(scenario)},
      _options{options},
      _seed{options.seed.value_or(_scenario.seed)},
      _rng{_seed},
      _net{_scenario.topology},
      _sm{_scenario.sm_config(), provisioned(_scenario)} {
    snc::AgentContext &ctx = *this;
    for (const auto &cfg : _scenario.agents)
        _agents.emplace(cfg.sn_id, std::make_unique<snc::Agent>(cfg, ctx, _scenario.response_timeout_ms));
    for (std::size_t i = 0; i < _scenario.events.size(); ++i)
        push(_scenario.events[i].at_ms, ScriptStep{i});
    push(_net.convergence_rounds() * _scenario.delays.round_ms, ConvergenceDone{_generation});
    for (auto &[sn, a] : _agents)
        a->start();
}

const snc::Agent *Engine::agent(const std::string &sn_id) const {
    const auto it = _agents.find(sn_id);
    return it == _agents.end() ? nullptr : it->second.get();
}

snc::Agent *Engine::agent_mut(const std::string &sn_id) {
    const auto it = _agents.find(sn_id);
    return it == _agents.end() ? nullptr : it->second.get();
}

void Engine::push(SimTime at, Item item) { _queue.push(Queued{std::max(at, _now), _next_seq++, std::move(item)}); }

void Engine::run() { run_until(std::numeric_limits<SimTime>::max()); }

void Engine::run_until(SimTime until) {
    while (!_finished && !_queue.empty() && _queue.top().at <= until) {
        const auto q = _queue.top();
        _queue.pop();
        step(q);
    }
    if (!_finished && until != std::numeric_limits<SimTime>::max())
        _now = std::max(_now, until);
}

void Engine::step(const Queued &q) {
    if (q.at < _now)
        throw InvariantViolation("event loop went back in time: " + std::to_string(q.at) + " < " +
                                 std::to_string(_now));
    _now = q.at;
    dispatch(q.item);
}

void Engine::dispatch(const Item &item) {
    if (const auto *s = std::get_if<ScriptStep>(&item)) {
        run_script(_scenario.events[s->index]);
    } else if (const auto *m = std::get_if<ToSm>(&item)) {
        apply_effects(_sm.handle_message(_now, m->msg));
        if (m->msg.kind == "TELEMETRY") {
            const auto &p = m->msg.payload;
            auto opt = [&](const char *key) -> std::string {
                if (!p.contains(key))
                    return "";
                const auto &v = p.at(key);
                if (v.is_number_float())
                    return fixed4(v.get<double>());
                if (v.is_string())
                    return v.get<std::string>();
                return v.dump();
            };
            _telemetry_rows.push_back(std::to_string(_now) + "," + opt("sn_id") + "," + opt("epoch") + "," +
                                      opt("start_mhz") + "," + opt("width_mhz") + "," + opt("latency_ms") + "," +
                                      opt("phase") + "," + opt("transfer_utilization"));
        }
    } else if (const auto *m = std::get_if<ToAgent>(&item)) {
        if (auto *a = agent_mut(m->sn_id)) {
            a->on_message(m->msg);
            check_agent(*a);
        }
    } else if (const auto *t = std::get_if<SmTimer>(&item)) {
        apply_effects(_sm.on_timer(_now, t->timer));
    } else if (const auto *t = std::get_if<AgentTimerFire>(&item)) {
        if (auto *a = agent_mut(t->sn_id)) {
            a->on_timer(t->timer);
            check_agent(*a);
        }
    } else if (const auto *d = std::get_if<DiscoveryDone>(&item)) {
        if (auto *a = agent_mut(d->sn_id)) {
            a->on_discovery(d->sm_node.has_value(), d->sm_node.value_or(""));
            check_agent(*a);
        }
    } else if (const auto *c = std::get_if<ConvergenceDone>(&item)) {
        if (c->generation != _generation)
            return; // superseded by a later move
        _converging = false;
        if (!_published) {
            _published = true;
            _net.dht_put(_scenario.sm_node, sm_service_key, _scenario.sm_node);
        }
        auto held = std::move(_held);
        _held.clear();
        for (auto &h : held) {
            switch (h.kind) {
            case Held::Kind::ToSm: route_to_sm(h.sn_id, std::move(h.msg)); break;
            case Held::Kind::ToAgent: route_to_agent(h.sn_id, std::move(h.msg)); break;
            case Held::Kind::Discover: lookup_sm(h.sn_id); break;
            }
        }
    }
}

void Engine::run_script(const ScenarioEvent &e) {
    const auto sn = e.args.value("sn_id", std::string{});
    switch (e.action) {
    case Action::RegisterSn:
        if (auto *a = agent_mut(sn)) {
            a->bootstrap();
            check_agent(*a);
        }
        return;
    case Action::CallAgv:
        if (!_options.live)
            call_agv(sn);
        return;
    case Action::ToggleSn2:
        if (!_options.live)
            toggle_sensing(e.args.at("on").get<bool>(), sn);
        return;
    case Action::MoveNode:
        move_node(e.args.at("node").get<std::string>(), e.args.at("anchor").get<std::string>());
        return;
    case Action::End:
        if (!_options.live)
            _finished = true;
        return;
    }
}

snc::Agent *Engine::find_archetype(snc::Archetype arch, const std::string &sn_id) {
    if (!sn_id.empty()) {
        auto *a = agent_mut(sn_id);
        return a && a->config().archetype == arch ? a : nullptr;
    }
    for (auto &[sn, a] : _agents)
        if (a->config().archetype == arch)
            return a.get();
    return nullptr;
}

ActionResult Engine::call_agv(const std::string &sn_id) {
    auto *a = find_archetype(snc::Archetype::Nomadic, sn_id);
    if (!a)
        return ActionResult::NotFound;
    const bool ok = a->call_agv();
    check_agent(*a);
    return ok ? ActionResult::Accepted : ActionResult::Conflict;
}

ActionResult Engine::toggle_sensing(bool on, const std::string &sn_id) {
    auto *a = find_archetype(snc::Archetype::Sensing, sn_id);
    if (!a)
        return ActionResult::NotFound;
    const bool ok = a->toggle_sensing(on);
    check_agent(*a);
    return ok ? ActionResult::Accepted : ActionResult::Conflict;
}

ActionResult Engine::release(const std::string &sn_id) {
    if (auto *a = agent_mut(sn_id)) {
        const bool ok = a->stop();
        check_agent(*a);
        return ok ? ActionResult::Accepted : ActionResult::Conflict;
    }
    const auto &sessions = _sm.state().sessions;
    const auto it = sessions.find(sn_id);
    if (it == sessions.end())
        return ActionResult::NotFound;
    if (!it->second.holds_spectrum())
        return ActionResult::Conflict;
    apply_effects(_sm.handle_release(_now, sn_id));
    return ActionResult::Accepted;
}

void Engine::inject_intent(const std::string &sn_id, SimTime eta_ms) {
    apply_effects(_sm.handle_intent(_now, sn_id, eta_ms));
}

void Engine::external_deliver(const sm::Message &msg) { apply_effects(_sm.handle_message(_now, msg)); }

std::vector<sm::Outbound> Engine::drain_external() { return std::exchange(_external_out, {}); }

// ---- control plane ----

SimTime Engine::hop_delay(std::size_t hops) const {
    const auto per_hop_us = static_cast<std::int64_t>(std::llround(_scenario.delays.per_hop_ms * 1000.0));
    const auto us = per_hop_us * static_cast<std::int64_t>(hops);
    return (us + 999) / 1000;
}

std::optional<SimTime> Engine::path_delay(const std::string &src, const std::string &dst) {
    const auto path = _net.route(src, kira::NodeId::of(dst));
    if (!path || path->back() != dst)
        return std::nullopt;
    const std::set<std::string> unique(path->begin(), path->end());
    if (unique.size() != path->size())
        throw InvariantViolation("routed path from " + src + " to " + dst + " repeats a node");
    ++_routed;
    return hop_delay(path->size() - 1);
}

void Engine::send_to_sm(const std::string &sn_id, sm::Message msg) { route_to_sm(sn_id, std::move(msg)); }

void Engine::route_to_sm(const std::string &sn_id, sm::Message msg) {
    if (_converging) {
        _held.push_back({Held::Kind::ToSm, sn_id, std::move(msg)});
        return;
    }
    const auto *a = agent(sn_id);
    const auto delay = path_delay(a->config().home_node, _scenario.sm_node);
    if (!delay) {
        ++_dropped;
        return;
    }
    push(_now + *delay, ToSm{std::move(msg)});
}

void Engine::route_to_agent(const std::string &sn_id, sm::Message msg) {
    if (_converging) {
        _held.push_back({Held::Kind::ToAgent, sn_id, std::move(msg)});
        return;
    }
    const auto delay = path_delay(_scenario.sm_node, agent(sn_id)->config().home_node);
    if (!delay) {
        ++_dropped;
        return;
    }
    push(_now + *delay, ToAgent{sn_id, std::move(msg)});
}

void Engine::discover(const std::string &sn_id) { lookup_sm(sn_id); }

void Engine::lookup_sm(const std::string &sn_id) {
    if (_converging) {
        _held.push_back({Held::Kind::Discover, sn_id, {}});
        return;
    }
    const auto found = _net.dht_get(agent(sn_id)->config().home_node, sm_service_key);
    if (!found) {
        push(_now, DiscoveryDone{sn_id, std::nullopt});
        return;
    }
    push(_now + hop_delay(2 * found->hops), DiscoveryDone{sn_id, found->value});
}

void Engine::schedule(const std::string &sn_id, SimTime at, snc::AgentTimer timer) {
    push(at, AgentTimerFire{sn_id, timer});
}

void Engine::relocate(const std::string &node, const std::string &anchor) { move_node(node, anchor); }

void Engine::move_node(const std::string &node, const std::string &anchor) {
    const int rounds = _net.relocate(node, anchor);
    if (rounds == 0)
        return;
    _converging = true;
    ++_generation;
    push(_now + rounds * _scenario.delays.round_ms, ConvergenceDone{_generation});
}

// ---- SM side ----

void Engine::apply_effects(sm::Effects fx) {
    for (auto &t : fx.timers)
        push(t.at, SmTimer{t});
    for (auto &out : fx.messages) {
        if (out.sn_id.empty())
            continue;
        if (_agents.contains(out.sn_id))
            route_to_agent(out.sn_id, std::move(out.message));
        else
            _external_out.push_back(std::move(out));
    }
    after_sm();
}

void Engine::after_sm() {
    const auto &ledger = _sm.ledger();
    const auto &cfg = _sm.config();
    const auto &st = _sm.state();
    for (; _seen_ledger < ledger.size(); ++_seen_ledger) {
        const auto &e = ledger[_seen_ledger];
        const auto &p = e.payload;
        try {
            if (p.contains("plan"))
                spectrum::check_plan(p.at("plan").get<spectrum::AllocationPlan>(), cfg.band, cfg.guard_mhz);
        } catch (const ValidationError &ex) {
            throw InvariantViolation("seq " + std::to_string(e.seq) + ": unsafe plan: " + ex.what());
        }

        std::string sn;
        if (p.contains("sn_id"))
            sn = p.at("sn_id").get<std::string>();
        else if (p.contains("demand"))
            sn = p.at("demand").at("sn_id").get<std::string>();
        const auto epoch = p.contains("epoch") ? p.at("epoch").get<std::uint64_t>() : st.active.epoch;
        std::string start, width;
        if (p.contains("allocation") && p.at("allocation").is_object()) {
            start = std::to_string(p.at("allocation").at("start_mhz").get<int>());
            width = std::to_string(p.at("allocation").at("width_mhz").get<int>());
        } else if (const auto *a = st.active.find(sn)) {
            start = std::to_string(a->start_mhz());
            width = std::to_string(a->width_mhz());
        }
        // Utilization is of the plan in force once this event is applied; rows for
        // events appended in one handler share the final value.
        _metrics_rows.push_back(std::to_string(e.time) + "," + std::string{sm::to_string(e.kind)} + "," + sn + "," +
                                std::to_string(epoch) + "," + start + "," + width + "," +
                                fixed4(spectrum::plan_utilization(st.active, cfg.band)));
        if (_listener)
            _listener(e);
    }

    try {
        spectrum::check_plan(st.active, cfg.band, cfg.guard_mhz);
    } catch (const ValidationError &ex) {
        throw InvariantViolation(std::string{"active plan unsafe: "} + ex.what());
    }
    for (const auto &a : st.active.allocations) {
        if (!a.priority().sticky())
            continue;
        const auto s = st.sessions.find(a.sn_id());
        if (s == st.sessions.end() || !s->second.holds_spectrum())
            continue;
        const auto [it, fresh] = _pinned_blocks.try_emplace(a.sn_id(), a.start_mhz(), a.width_mhz());
        if (!fresh && it->second.first != a.start_mhz())
            throw InvariantViolation("priority-0 block of " + a.sn_id() + " moved from " +
                                     std::to_string(it->second.first) + " to " + std::to_string(a.start_mhz()));
        it->second.second = a.width_mhz();
    }
    std::erase_if(_pinned_blocks, [&](const auto &kv) {
        const auto s = st.sessions.find(kv.first);
        return s == st.sessions.end() || !s->second.holds_spectrum() || !st.active.find(kv.first);
    });
}

void Engine::check_agent(const snc::Agent &a) {
    if (!a.violations().empty())
        throw InvariantViolation(a.sn_id() + ": " + a.violations().front());
    auto &seen = _agent_epochs[a.sn_id()];
    if (a.applied_epoch() < seen)
        throw InvariantViolation(a.sn_id() + " applied epoch " + std::to_string(a.applied_epoch()) + " after " +
                                 std::to_string(seen));
    seen = a.applied_epoch();
    if (const auto &t = a.tuned(); t && !t->inside(_scenario.band))
        throw InvariantViolation(a.sn_id() + " tuned outside the band");
}

// ---- outputs ----

std::string Engine::metrics_csv() const {
    std::string out = "time_ms,kind,sn_id,epoch,start_mhz,width_mhz,utilization\n";
    for (const auto &r : _metrics_rows)
        out += r + "\n";
    return out;
}

std::string Engine::ledger_jsonl() const {
    std::string out;
    for (const auto &e : _sm.ledger())
        out += sm::encode_ledger_line(e) + "\n";
    return out;
}

std::string Engine::telemetry_csv() const {
    std::string out = "time_ms,sn_id,epoch,start_mhz,width_mhz,latency_ms,phase,transfer_utilization\n";
    for (const auto &r : _telemetry_rows)
        out += r + "\n";
    return out;
}

json Engine::state_view() const {
    const auto &topo = _net.topology();
    json nodes = json::array();
    for (const auto &n : topo.nodes())
        nodes.push_back(n);
    json links = json::array();
    for (const auto &[a, b] : topo.links())
        links.push_back({a, b});
    json attachments = json::object();
    for (const auto &[m, a] : topo.attachments())
        attachments[m] = a;

    json agents = json::array();
    for (const auto &[sn, a] : _agents) {
        const auto &cfg = a->config();
        const auto path = _converging ? std::nullopt : _net.route(cfg.home_node, kira::NodeId::of(_scenario.sm_node));
        const auto phase = a->agv_phase();
        agents.push_back({{"sn_id", sn},
                          {"archetype", snc::to_string(cfg.archetype)},
                          {"home_node", cfg.home_node},
                          {"anchor", topo.is_mobile(cfg.home_node) ? json(topo.attachments().at(cfg.home_node))
                                                                     : json(nullptr)},
                          {"registration", snc::to_string(a->registration())},
                          {"wants_spectrum", a->wants_spectrum()},
                          {"tuned", a->tuned() ? json(*a->tuned()) : json(nullptr)},
                          {"applied_epoch", a->applied_epoch()},
                          {"agv_phase", phase ? json(snc::to_string(*phase)) : json(nullptr)},
                          {"hops_to_sm", path ? json(path->size() - 1) : json(nullptr)}});
    }
    const auto &st = _sm.state();
    return {{"time_ms", _now},
            {"finished", _finished},
            {"converging", _converging},
            {"band", _scenario.band},
            {"guard_mhz", _scenario.guard_mhz},
            {"utilization", spectrum::plan_utilization(st.active, _scenario.band)},
            {"sm", _sm.snapshot()},
            {"topology", {{"sm_node", _scenario.sm_node}, {"nodes", nodes}, {"links", links}, {"attachments", attachments}}},
            {"kira", _net.dump()},
            {"agents", agents},
            {"telemetry", _sm.telemetry()}};
}

void Engine::write_outputs(const std::string &dir) const {
    const std::filesystem::path root{dir};
    std::filesystem::create_directories(root);
    write_file(root / "metrics.csv", metrics_csv());
    write_file(root / "ledger.jsonl", ledger_jsonl());
    write_file(root / "snapshot.json", snapshot().dump(2) + "\n");
    write_file(root / "telemetry.csv", telemetry_csv());
    write_file(root / "state.json", state_view().dump(2) + "\n");
}

} // namespace nds::sim
