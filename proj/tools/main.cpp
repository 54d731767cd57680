// nin-dsm: simulate, serve or replay a spectrum-management scenario.

#include <atomic>
#include <chrono>
#include <csignal>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <thread>

#include <CLI11.hpp>

#include "nindsm/nindsm.h"
#include "service.hpp"

namespace {

constexpr int exit_port_busy = 1;

std::atomic<bool> interrupted{false};

void on_signal(int) { interrupted = true; }

int exit_code(nds_status st) {
    switch (st) {
    case NDS_OK: return 0;
    case NDS_ERR_SCHEMA: return 2;
    case NDS_ERR_INVARIANT: return 3;
    case NDS_ERR_CORRUPT_LEDGER: return 4;
    default: return 1;
    }
}

int report(nds_status st, const std::string &context) {
    if (st == NDS_OK)
        return 0;
    if (st == NDS_ERR_SCHEMA)
        std::cerr << context << ":" << nds_last_error_line() << ": " << nds_last_error() << "\n";
    else if (st == NDS_ERR_INVARIANT)
        std::cerr << "invariant violation: " << nds_last_error() << "\n";
    else
        std::cerr << context << ": " << nds_last_error() << "\n";
    return exit_code(st);
}

int run_sim(const std::string &scenario, std::optional<std::uint64_t> seed, std::optional<std::int64_t> until,
            const std::string &out) {
    nds_engine *engine = nullptr;
    if (auto st = nds_engine_create_from_file(scenario.c_str(), seed ? &*seed : nullptr, 0, &engine); st != NDS_OK)
        return report(st, scenario);
    auto st = until ? nds_engine_run_until(engine, *until) : nds_engine_run(engine);
    if (st == NDS_OK)
        st = nds_engine_write_outputs(engine, out.c_str());
    else
        nds_engine_write_outputs(engine, out.c_str()); // keep what ran for the post-mortem
    const int code = report(st, scenario);
    if (code == 0)
        std::cout << "simulated " << nds_engine_now(engine) << " ms, " << nds_engine_ledger_size(engine)
                  << " ledger events -> " << out << "\n";
    nds_engine_destroy(engine);
    return code;
}

int run_serve(const std::string &scenario, std::optional<std::uint64_t> seed, const std::string &listen,
              const std::string &wire) {
    nds::service::Endpoint http_ep;
    std::optional<nds::service::Endpoint> wire_ep;
    try {
        http_ep = nds::service::parse_endpoint(listen);
        if (!wire.empty())
            wire_ep = nds::service::parse_endpoint(wire);
    } catch (const std::invalid_argument &e) {
        std::cerr << e.what() << "\n";
        return 1;
    }
    nds_engine *engine = nullptr;
    if (auto st = nds_engine_create_from_file(scenario.c_str(), seed ? &*seed : nullptr, 1, &engine); st != NDS_OK)
        return report(st, scenario);

    nds::service::Service service{engine};
    const int port = service.bind_http(http_ep);
    if (port < 0) {
        std::cerr << "cannot listen on " << listen << ": address in use or unavailable\n";
        return exit_port_busy;
    }
    int wire_port = -1;
    if (wire_ep) {
        wire_port = service.bind_wire(*wire_ep);
        if (wire_port < 0) {
            std::cerr << "cannot listen on " << wire << ": address in use or unavailable\n";
            return exit_port_busy;
        }
    }
    std::signal(SIGINT, on_signal);
    std::signal(SIGTERM, on_signal);
    service.start();
    std::cout << "serving http://" << http_ep.host << ":" << port;
    if (wire_ep)
        std::cout << ", wire " << wire_ep->host << ":" << wire_port;
    std::cout << std::endl;
    while (!interrupted)
        std::this_thread::sleep_for(std::chrono::milliseconds(100));
    service.stop();
    return 0;
}

int run_replay(const std::string &path) {
    std::ifstream in{path, std::ios::binary};
    if (!in) {
        std::cerr << "cannot read " << path << "\n";
        return 1;
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    char *snapshot = nullptr;
    if (auto st = nds_replay(buf.str().c_str(), &snapshot); st != NDS_OK) {
        std::cerr << path << ": corrupt ledger: " << nds_last_error() << "\n";
        return exit_code(st);
    }
    std::cout << snapshot << "\n";
    nds_string_free(snapshot);
    return 0;
}

} // namespace

int main(int argc, char **argv) {
    CLI::App app{"Dynamic spectrum management simulator for networks-in-network"};
    app.set_version_flag("--version", std::string{nds_version()});
    app.require_subcommand(1);

    std::string scenario, out, listen, wire, ledger;
    std::optional<std::uint64_t> seed;
    std::optional<std::int64_t> until;

    auto *sim = app.add_subcommand("sim", "run a scenario to completion and write outputs");
    sim->add_option("--scenario", scenario, "scenario JSON file")->required();
    sim->add_option("--seed", seed, "override the scenario seed");
    sim->add_option("--until", until, "stop at this simulation time (ms)");
    sim->add_option("--out", out, "output directory")->required();

    auto *serve = app.add_subcommand("serve", "run a scenario live behind the HTTP/event API");
    serve->add_option("--scenario", scenario, "scenario JSON file")->required();
    serve->add_option("--seed", seed, "override the scenario seed");
    serve->add_option("--listen", listen, "HTTP address HOST:PORT")->required();
    serve->add_option("--wire", wire, "optional SNC socket HOST:PORT");

    auto *replay = app.add_subcommand("replay", "fold a ledger into the SM snapshot");
    replay->add_option("--ledger", ledger, "ledger JSON-lines file")->required();

    CLI11_PARSE(app, argc, argv);

    if (sim->parsed())
        return run_sim(scenario, seed, until, out);
    if (serve->parsed())
        return run_serve(scenario, seed, listen, wire);
    return run_replay(ledger);
}
