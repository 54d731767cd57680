#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "nindsm/nindsm.h"

using json = nlohmann::json;

namespace {

std::string take(char *s) {
    std::string out = s ? s : "";
    nds_string_free(s);
    return out;
}

std::string walkthrough_path() { return std::string{NDS_SCENARIOS_DIR} + "/walkthrough.json"; }

struct Engine {
    nds_engine *h = nullptr;
    ~Engine() { nds_engine_destroy(h); }
};

} // namespace

TEST_CASE("version") {
    CHECK(nds_abi_version() == NDS_ABI_VERSION);
    CHECK(std::strlen(nds_version()) > 0);
}

TEST_CASE("argument checks") {
    nds_engine *e = nullptr;
    CHECK(nds_engine_create(nullptr, nullptr, 0, &e) == NDS_ERR_INVALID_ARGUMENT);
    CHECK(nds_engine_create("{}", nullptr, 0, nullptr) == NDS_ERR_INVALID_ARGUMENT);
    CHECK(nds_engine_run(nullptr) == NDS_ERR_INVALID_ARGUMENT);
    CHECK(std::strlen(nds_last_error()) > 0);
    nds_engine_destroy(nullptr);
}

TEST_CASE("schema errors report the line") {
    std::ifstream in{walkthrough_path()};
    std::stringstream buf;
    buf << in.rdbuf();
    auto text = buf.str();
    const std::string from = R"("at_ms": 30000)";
    const auto pos = text.find(from);
    REQUIRE(pos != std::string::npos);
    const auto line = 1 + std::count(text.begin(), text.begin() + static_cast<long>(pos), '\n');
    text.replace(pos, from.size(), R"("at_ms": "soon")");

    nds_engine *e = nullptr;
    CHECK(nds_engine_create(text.c_str(), nullptr, 0, &e) == NDS_ERR_SCHEMA);
    CHECK(e == nullptr);
    CHECK(nds_last_error_line() == line);
    CHECK(nds_engine_create_from_file("/no/such/file.json", nullptr, 0, &e) == NDS_ERR_SCHEMA);
}

TEST_CASE("run the walkthrough through the C interface") {
    Engine e;
    REQUIRE(nds_engine_create_from_file(walkthrough_path().c_str(), nullptr, 0, &e.h) == NDS_OK);
    CHECK(nds_engine_finished(e.h) == 0);
    REQUIRE(nds_engine_run(e.h) == NDS_OK);
    CHECK(nds_engine_finished(e.h) == 1);
    CHECK(nds_engine_now(e.h) == 50000);

    char *s = nullptr;
    REQUIRE(nds_engine_snapshot(e.h, &s) == NDS_OK);
    const auto snapshot = json::parse(take(s));
    REQUIRE(nds_engine_ledger(e.h, 1, &s) == NDS_OK);
    const auto ledger = take(s);
    REQUIRE(nds_replay(ledger.c_str(), &s) == NDS_OK);
    CHECK(json::parse(take(s)) == snapshot);
    CHECK(nds_engine_ledger_size(e.h) == snapshot["last_seq"].get<std::uint64_t>());

    REQUIRE(nds_engine_ledger(e.h, 30, &s) == NDS_OK);
    const auto tail = take(s);
    CHECK(json::parse(tail.substr(0, tail.find('\n')))["seq"] == 30);

    REQUIRE(nds_engine_metrics_csv(e.h, &s) == NDS_OK);
    CHECK(take(s).rfind("time_ms,kind,sn_id,epoch,start_mhz,width_mhz,utilization\n", 0) == 0);

    REQUIRE(nds_engine_state(e.h, &s) == NDS_OK);
    const auto state = json::parse(take(s));
    CHECK(state["finished"] == true);
    CHECK(state["agents"].size() == 3);
}

TEST_CASE("live actions map to status codes") {
    Engine e;
    REQUIRE(nds_engine_create_from_file(walkthrough_path().c_str(), nullptr, 1, &e.h) == NDS_OK);
    REQUIRE(nds_engine_run_until(e.h, 3000) == NDS_OK);
    CHECK(nds_engine_call_agv(e.h, nullptr) == NDS_OK);
    CHECK(nds_engine_call_agv(e.h, nullptr) == NDS_ERR_CONFLICT);
    CHECK(nds_engine_call_agv(e.h, "SN-1") == NDS_ERR_NOT_FOUND);
    CHECK(nds_engine_toggle_sensing(e.h, 1, nullptr) == NDS_ERR_CONFLICT);
    CHECK(nds_engine_toggle_sensing(e.h, 0, "SN-2") == NDS_OK);
    CHECK(nds_engine_release(e.h, "ghost") == NDS_ERR_NOT_FOUND);
    CHECK(nds_engine_intent(e.h, "SN-3", 9000) == NDS_OK);
    CHECK(nds_engine_run_until(e.h, 1000) == NDS_OK); // earlier targets leave the clock alone
    CHECK(nds_engine_now(e.h) == 3000);
}

TEST_CASE("external SNC lines") {
    Engine e;
    REQUIRE(nds_engine_create_from_file(walkthrough_path().c_str(), nullptr, 1, &e.h) == NDS_OK);
    REQUIRE(nds_engine_run_until(e.h, 500) == NDS_OK);
    CHECK(nds_engine_external_deliver(e.h, "nonsense") == NDS_ERR_VALIDATION);
    const char *reg = R"({"v":1,"kind":"REGISTER","seq":1,"time":0,"payload":{"sn_id":"EXT","priority":2,"min_bw_mhz":5,"pref_bw_mhz":5}})";
    CHECK(nds_engine_external_deliver(e.h, reg) == NDS_OK);
    char *s = nullptr;
    REQUIRE(nds_engine_external_drain(e.h, &s) == NDS_OK);
    const auto lines = take(s);
    CHECK(json::parse(lines.substr(0, lines.find('\n')))["kind"] == "OFFER");
}

TEST_CASE("replay errors") {
    char *s = nullptr;
    REQUIRE(nds_replay("", &s) == NDS_OK);
    CHECK(json::parse(take(s))["last_seq"] == 0);
    CHECK(nds_replay("{\"broken\"\n", &s) == NDS_ERR_CORRUPT_LEDGER);
}

TEST_CASE("compute_plan entry point") {
    const json input{{"band", {{"lo_mhz", 3700}, {"hi_mhz", 3800}, {"grid_mhz", 1}}},
                     {"guard_mhz", 1},
                     {"demands",
                      {{{"sn_id", "SN-1"}, {"priority", 0}, {"min_bw_mhz", 10}, {"pref_bw_mhz", 10}},
                       {{"sn_id", "SN-2"}, {"priority", 2}, {"min_bw_mhz", 20}, {"pref_bw_mhz", 60}}}}};
    char *s = nullptr;
    REQUIRE(nds_compute_plan(input.dump().c_str(), &s) == NDS_OK);
    const auto plan = json::parse(take(s));
    CHECK(plan["epoch"] == 1);
    CHECK(plan["allocations"][1]["start_mhz"] == 3711);
    CHECK(plan["allocations"][1]["width_mhz"] == 60);

    json bad = input;
    bad["guard_mhz"] = -1;
    CHECK(nds_compute_plan(bad.dump().c_str(), &s) == NDS_ERR_VALIDATION);
    CHECK(nds_compute_plan("[", &s) == NDS_ERR_VALIDATION);
}
