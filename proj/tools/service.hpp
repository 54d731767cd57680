#pragma once

// Live front-end for one engine: wall-clock pacing, the dashboard HTTP/event
// API and an optional newline-delimited JSON socket for external SNCs.
// Talks to the simulator only through the C API.

#include <atomic>
#include <condition_variable>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "nindsm/nindsm.h"

namespace httplib {
class Server;
}

namespace nds::service {

struct Endpoint {
    std::string host;
    int port = 0;
};

/// "HOST:PORT" -> Endpoint. Throws std::invalid_argument.
Endpoint parse_endpoint(const std::string &text);

class Service {
public:
    /// Takes ownership of `engine`.
    explicit Service(nds_engine *engine);
    ~Service();
    Service(const Service &) = delete;
    Service &operator=(const Service &) = delete;

    /// Port 0 picks a free port. Returns the bound port, or -1 when the port is busy.
    int bind_http(const Endpoint &ep);
    int bind_wire(const Endpoint &ep);

    /// Starts the pacing thread and the listeners. Returns immediately.
    void start();
    void stop();

    /// Engine time in sim-ms.
    std::int64_t now();

private:
    void install_routes();
    void pace();
    void accept_wire();
    void serve_wire_client(int fd);
    void flush_external();
    void write_line(int fd, const std::string &line);

    nds_engine *_engine;
    std::mutex _mu; // guards _engine and _clients
    std::condition_variable _ledger_cv;
    std::unique_ptr<httplib::Server> _http;
    int _wire_fd = -1;
    std::map<std::string, int> _clients; // sn_id -> wire connection
    std::vector<std::thread> _threads;
    std::vector<std::thread> _wire_threads;
    std::atomic<bool> _running{false};
};

} // namespace nds::service
