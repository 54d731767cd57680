#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "common/error.hpp"
#include "sim/engine.hpp"
#include "support/gen.hpp"

using namespace nds;
using namespace nds::sim;

namespace {

std::string scenario_path(const std::string &name) { return std::string{NDS_SCENARIOS_DIR} + "/" + name; }

std::vector<std::string> kinds_with_sn(const Engine &e) {
    std::vector<std::string> out;
    for (const auto &ev : e.manager().ledger()) {
        const auto &p = ev.payload;
        std::string sn = "-";
        if (p.contains("sn_id"))
            sn = p["sn_id"];
        else if (p.contains("demand"))
            sn = p["demand"]["sn_id"];
        out.push_back(std::string{sm::to_string(ev.kind)} + " " + sn);
    }
    return out;
}

std::vector<std::string> golden_kinds() {
    std::ifstream in{std::string{NDS_FIXTURES_DIR} + "/walkthrough_kinds.txt"};
    std::vector<std::string> out;
    for (std::string line; std::getline(in, line);)
        if (!line.empty())
            out.push_back(line);
    return out;
}

const std::string tiny = R"({
  "topology": {"sm_node": "sm", "nodes": ["sm", "a"], "links": [["sm", "a"]]},
  "agents": [{"sn_id": "C", "archetype": "CONTROL", "home_node": "a",
              "demand": {"min_bw_mhz": 10, "pref_bw_mhz": 10}}],
  "events": [{"at_ms": 0, "action": "REGISTER_SN", "args": {"sn_id": "C"}},
             {"at_ms": 0, "action": "END"}]
})";

} // namespace

TEST_CASE("walkthrough matches the frozen kind sequence") {
    Engine e{load_scenario_file(scenario_path("walkthrough.json"))};
    e.run();
    CHECK(e.finished());
    CHECK(e.now() == 50000);
    CHECK(kinds_with_sn(e) == golden_kinds());
}

TEST_CASE("END at time zero") {
    Engine e{load_scenario(tiny)};
    e.run();
    CHECK(e.manager().ledger().empty());
    CHECK(e.ledger_jsonl().empty());
    CHECK(e.state_view()["utilization"] == 0.0);
    const auto csv = e.metrics_csv();
    CHECK(csv == "time_ms,kind,sn_id,epoch,start_mhz,width_mhz,utilization\n");
}

TEST_CASE("runs are byte-identical for equal seeds") {
    std::vector<std::string> scenarios;
    for (const auto *name : {"walkthrough.json", "mobility.json", "contention.json"})
        scenarios.push_back(scenario_path(name));
    for (const auto &path : scenarios) {
        CAPTURE(path);
        Engine a{load_scenario_file(path)}, b{load_scenario_file(path)};
        a.run();
        b.run();
        CHECK(a.ledger_jsonl() == b.ledger_jsonl());
        CHECK(a.metrics_csv() == b.metrics_csv());
        CHECK(a.telemetry_csv() == b.telemetry_csv());
        CHECK(a.snapshot().dump() == b.snapshot().dump());
    }
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        const auto s = load_scenario(gen::random_scenario(seed).dump());
        Engine a{s}, b{s};
        a.run();
        b.run();
        CHECK(a.ledger_jsonl() == b.ledger_jsonl());
        CHECK(a.telemetry_csv() == b.telemetry_csv());
    }
}

TEST_CASE("seed override changes the random stream only") {
    const auto s = load_scenario_file(scenario_path("walkthrough.json"));
    Engine a{s, {.seed = 1}}, b{s, {.seed = 2}};
    a.run();
    b.run();
    CHECK(a.seed() == 1);
    CHECK(a.ledger_jsonl() == b.ledger_jsonl()); // the protocol uses no randomness
    CHECK(a.telemetry_csv() != b.telemetry_csv());
}

TEST_CASE("replay of full and truncated ledgers") {
    for (const auto *name : {"walkthrough.json", "mobility.json", "contention.json"}) {
        CAPTURE(name);
        Engine e{load_scenario_file(scenario_path(name))};
        std::vector<std::pair<std::uint64_t, json>> checkpoints;
        e.set_ledger_listener([&](const sm::LedgerEvent &ev) {
            if (ev.seq == e.manager().ledger().size())
                checkpoints.emplace_back(ev.seq, e.snapshot());
        });
        e.run();
        const auto ledger = sm::decode_ledger(e.ledger_jsonl());
        CHECK(sm::to_json(sm::replay(ledger)) == e.snapshot());
        CHECK(checkpoints.size() > 3);
        for (const auto &[k, snap] : checkpoints)
            CHECK(sm::to_json(sm::replay(std::span{ledger.data(), k})) == snap);
    }
}

TEST_CASE("walkthrough narrative") {
    Engine e{load_scenario_file(scenario_path("walkthrough.json"))};
    e.run_until(9999);
    const auto &active = e.manager().state().active;
    REQUIRE(active.find("SN-1"));
    CHECK(active.find("SN-1")->start_mhz() == 3700);
    CHECK(active.find("SN-2")->width_mhz() == 60);

    e.run_until(29999);
    CHECK(e.manager().state().active.find("SN-2")->width_mhz() == 60);
    e.run_until(35000);
    CHECK(e.state_view()["utilization"] == doctest::Approx(0.10));
    e.run();
    CHECK(e.manager().state().active.find("SN-2")->width_mhz() == 60);

    // Post-AGV layout seen by the dashboard before the release.
    Engine f{load_scenario_file(scenario_path("walkthrough.json"))};
    f.run_until(15000);
    const auto &plan = f.manager().state().active;
    REQUIRE(plan.allocations.size() == 3);
    CHECK(plan.find("SN-3")->start_mhz() == 3711);
    CHECK(plan.find("SN-3")->width_mhz() == 30);
    CHECK(plan.find("SN-2")->start_mhz() == 3742);
    CHECK(plan.find("SN-2")->width_mhz() == 58);
    CHECK(f.agent("SN-3")->agv_phase() == snc::AgvPhase::AtMachine);
}

TEST_CASE("live actions") {
    Engine e{load_scenario_file(scenario_path("walkthrough.json")), {.live = true}};
    e.run_until(5000);
    CHECK(e.call_agv() == ActionResult::Accepted);
    CHECK(e.call_agv() == ActionResult::Conflict);
    CHECK(e.call_agv("SN-1") == ActionResult::NotFound);
    e.run_until(5100);
    const auto &ledger = e.manager().ledger();
    CHECK(std::any_of(ledger.begin(), ledger.end(), [](auto &ev) { return ev.kind == sm::EventKind::Intent; }));
    CHECK(e.toggle_sensing(true) == ActionResult::Conflict);
    CHECK(e.toggle_sensing(false) == ActionResult::Accepted);
    CHECK(e.release("SN-1") == ActionResult::Accepted);
    CHECK(e.release("SN-1") == ActionResult::Conflict);
    CHECK(e.release("nobody") == ActionResult::NotFound);
    e.run_until(120000);
    CHECK_FALSE(e.finished()); // END is operator-driven in live mode
}

TEST_CASE("external SNC over the wire") {
    Engine e{load_scenario_file(scenario_path("walkthrough.json")), {.live = true}};
    e.run_until(1000);
    e.external_deliver(sm::Message{"REGISTER", 1, 1000,
                                   {{"sn_id", "EXT"}, {"priority", 2}, {"min_bw_mhz", 5}, {"pref_bw_mhz", 5}}});
    auto out = e.drain_external();
    REQUIRE(out.size() == 1);
    CHECK(out[0].sn_id == "EXT");
    CHECK(out[0].message.kind == "OFFER");
    e.external_deliver(sm::Message{"ACCEPT", 2, 1000, {{"sn_id", "EXT"}, {"epoch", out[0].message.payload["epoch"]}}});
    out = e.drain_external();
    REQUIRE_FALSE(out.empty());
    CHECK(out.back().message.kind == "COMMIT");
    e.run_until(2000);
    CHECK(e.manager().state().sessions.at("EXT").state == sm::SessionState::Committed);
    CHECK(e.release("EXT") == ActionResult::Accepted);
}

TEST_CASE("partitioned agent keeps backing off") {
    auto doc = json::parse(tiny);
    doc["topology"]["nodes"].push_back("island");
    doc["agents"][0]["home_node"] = "island";
    doc["events"][1]["at_ms"] = 40000;
    Engine e{load_scenario(doc.dump())};
    e.run();
    CHECK(e.manager().ledger().empty());
    const auto &log = e.agent("C")->backoff_log();
    REQUIRE(log.size() >= 5);
    CHECK(std::vector<SimTime>(log.begin(), log.begin() + 5) == std::vector<SimTime>{500, 1000, 2000, 4000, 8000});
}

TEST_CASE("outputs on disk") {
    const auto dir = std::filesystem::temp_directory_path() / "nindsm_engine_outputs";
    std::filesystem::remove_all(dir);
    Engine e{load_scenario_file(scenario_path("walkthrough.json"))};
    e.run();
    e.write_outputs(dir.string());
    for (const auto *f : {"metrics.csv", "ledger.jsonl", "snapshot.json", "telemetry.csv", "state.json"})
        CHECK(std::filesystem::exists(dir / f));
    std::ifstream in{dir / "metrics.csv"};
    std::string header;
    std::getline(in, header);
    CHECK(header == "time_ms,kind,sn_id,epoch,start_mhz,width_mhz,utilization");
    std::size_t rows = 0;
    for (std::string line; std::getline(in, line);)
        ++rows;
    CHECK(rows == e.manager().ledger().size());
    std::filesystem::remove_all(dir);
}

TEST_CASE("random scenarios keep every safety invariant") {
    // The engine throws InvariantViolation on any breach.
    for (std::uint64_t seed = 100; seed < 160; ++seed) {
        CAPTURE(seed);
        Engine e{load_scenario(gen::random_scenario(seed).dump())};
        CHECK_NOTHROW(e.run());
        CHECK(e.finished());
    }
}
