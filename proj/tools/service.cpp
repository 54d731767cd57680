#include "service.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <chrono>
#include <cstring>
#include <iostream>
#include <stdexcept>

#include <httplib.h>
#include <json.hpp>

namespace nds::service {

using nlohmann::json;
using namespace std::chrono_literals;

namespace {

std::string take(char *s) {
    std::string out = s ? s : "";
    nds_string_free(s);
    return out;
}

void reply(httplib::Response &res, int status, const json &body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
}

void reply_status(httplib::Response &res, nds_status st, std::int64_t now) {
    switch (st) {
    case NDS_OK: return reply(res, 202, {{"status", "accepted"}, {"time_ms", now}});
    case NDS_ERR_CONFLICT: return reply(res, 409, {{"error", nds_last_error()}});
    case NDS_ERR_NOT_FOUND: return reply(res, 404, {{"error", nds_last_error()}});
    case NDS_ERR_INVALID_ARGUMENT:
    case NDS_ERR_VALIDATION: return reply(res, 400, {{"error", nds_last_error()}});
    default: return reply(res, 500, {{"error", nds_last_error()}});
    }
}

/// Parses a request body as a JSON object; empty bodies count as {}.
bool body_object(const httplib::Request &req, httplib::Response &res, json &out) {
    if (req.body.empty()) {
        out = json::object();
        return true;
    }
    out = json::parse(req.body, nullptr, false);
    if (out.is_discarded() || !out.is_object()) {
        reply(res, 400, {{"error", "body must be a JSON object"}});
        return false;
    }
    return true;
}

std::vector<std::string> split_lines(const std::string &text) {
    std::vector<std::string> out;
    std::size_t pos = 0;
    while (pos < text.size()) {
        auto nl = text.find('\n', pos);
        if (nl == std::string::npos)
            nl = text.size();
        if (nl > pos)
            out.push_back(text.substr(pos, nl - pos));
        pos = nl + 1;
    }
    return out;
}

} // namespace

Endpoint parse_endpoint(const std::string &text) {
    const auto colon = text.rfind(':');
    if (colon == std::string::npos || colon == 0 || colon + 1 == text.size())
        throw std::invalid_argument("expected HOST:PORT, got \"" + text + "\"");
    Endpoint ep{text.substr(0, colon), 0};
    try {
        std::size_t used = 0;
        ep.port = std::stoi(text.substr(colon + 1), &used);
        if (used != text.size() - colon - 1)
            throw std::invalid_argument("port");
    } catch (const std::exception &) {
        throw std::invalid_argument("bad port in \"" + text + "\"");
    }
    if (ep.port < 0 || ep.port > 65535)
        throw std::invalid_argument("port out of range in \"" + text + "\"");
    return ep;
}

Service::Service(nds_engine *engine) : _engine{engine}, _http{std::make_unique<httplib::Server>()} {
    install_routes();
}

Service::~Service() {
    stop();
    nds_engine_destroy(_engine);
}

std::int64_t Service::now() {
    std::lock_guard lk{_mu};
    return nds_engine_now(_engine);
}

int Service::bind_http(const Endpoint &ep) {
    if (ep.port == 0)
        return _http->bind_to_any_port(ep.host);
    return _http->bind_to_port(ep.host, ep.port) ? ep.port : -1;
}

int Service::bind_wire(const Endpoint &ep) {
    addrinfo hints{};
    hints.ai_family = AF_INET;
    hints.ai_socktype = SOCK_STREAM;
    hints.ai_flags = AI_PASSIVE;
    addrinfo *res = nullptr;
    if (getaddrinfo(ep.host.c_str(), std::to_string(ep.port).c_str(), &hints, &res) != 0 || !res)
        return -1;
    const int fd = ::socket(res->ai_family, res->ai_socktype, res->ai_protocol);
    int yes = 1;
    ::setsockopt(fd, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof yes);
    const bool ok = fd >= 0 && ::bind(fd, res->ai_addr, res->ai_addrlen) == 0 && ::listen(fd, 16) == 0;
    freeaddrinfo(res);
    if (!ok) {
        if (fd >= 0)
            ::close(fd);
        return -1;
    }
    sockaddr_in bound{};
    socklen_t len = sizeof bound;
    ::getsockname(fd, reinterpret_cast<sockaddr *>(&bound), &len);
    _wire_fd = fd;
    return ntohs(bound.sin_port);
}

void Service::install_routes() {
    auto &srv = *_http;

    srv.Get("/state", [this](const httplib::Request &, httplib::Response &res) {
        std::lock_guard lk{_mu};
        char *out = nullptr;
        if (nds_engine_state(_engine, &out) != NDS_OK)
            return reply(res, 500, {{"error", nds_last_error()}});
        res.set_content(take(out), "application/json");
    });

    srv.Get("/ledger", [this](const httplib::Request &req, httplib::Response &res) {
        std::uint64_t from = 1;
        if (req.has_param("from")) {
            try {
                from = std::stoull(req.get_param_value("from"));
            } catch (const std::exception &) {
                return reply(res, 400, {{"error", "from must be a non-negative integer"}});
            }
        }
        std::string text;
        {
            std::lock_guard lk{_mu};
            char *out = nullptr;
            if (nds_engine_ledger(_engine, from, &out) != NDS_OK)
                return reply(res, 500, {{"error", nds_last_error()}});
            text = take(out);
        }
        json events = json::array();
        for (const auto &line : split_lines(text))
            events.push_back(json::parse(line));
        reply(res, 200, events);
    });

    srv.Post("/intent", [this](const httplib::Request &req, httplib::Response &res) {
        json body;
        if (!body_object(req, res, body))
            return;
        if (!body.contains("sn_id") || !body["sn_id"].is_string() || !body.contains("eta_ms") ||
            !body["eta_ms"].is_number_integer())
            return reply(res, 400, {{"error", "expected {sn_id: string, eta_ms: integer}"}});
        std::lock_guard lk{_mu};
        reply_status(res, nds_engine_intent(_engine, body["sn_id"].get<std::string>().c_str(),
                                            body["eta_ms"].get<std::int64_t>()), nds_engine_now(_engine));
        _ledger_cv.notify_all();
    });

    srv.Post("/release", [this](const httplib::Request &req, httplib::Response &res) {
        json body;
        if (!body_object(req, res, body))
            return;
        if (!body.contains("sn_id") || !body["sn_id"].is_string())
            return reply(res, 400, {{"error", "expected {sn_id: string}"}});
        std::lock_guard lk{_mu};
        reply_status(res, nds_engine_release(_engine, body["sn_id"].get<std::string>().c_str()), nds_engine_now(_engine));
        _ledger_cv.notify_all();
    });

    srv.Post("/call-agv", [this](const httplib::Request &req, httplib::Response &res) {
        json body;
        if (!body_object(req, res, body))
            return;
        const auto sn = body.contains("sn_id") && body["sn_id"].is_string() ? body["sn_id"].get<std::string>() : "";
        std::lock_guard lk{_mu};
        reply_status(res, nds_engine_call_agv(_engine, sn.empty() ? nullptr : sn.c_str()), nds_engine_now(_engine));
    });

    srv.Post("/toggle-sn2", [this](const httplib::Request &req, httplib::Response &res) {
        json body;
        if (!body_object(req, res, body))
            return;
        if (!body.contains("on") || !body["on"].is_boolean())
            return reply(res, 400, {{"error", "expected {on: boolean}"}});
        const auto sn = body.contains("sn_id") && body["sn_id"].is_string() ? body["sn_id"].get<std::string>() : "";
        std::lock_guard lk{_mu};
        reply_status(res, nds_engine_toggle_sensing(_engine, body["on"].get<bool>() ? 1 : 0,
                                                    sn.empty() ? nullptr : sn.c_str()), nds_engine_now(_engine));
    });

    srv.Get("/events", [this](const httplib::Request &req, httplib::Response &res) {
        auto next = std::make_shared<std::uint64_t>(0);
        if (req.has_param("from")) {
            try {
                *next = std::stoull(req.get_param_value("from"));
            } catch (const std::exception &) {
                return reply(res, 400, {{"error", "from must be a non-negative integer"}});
            }
        } else if (req.has_header("Last-Event-ID")) {
            *next = std::stoull(req.get_header_value("Last-Event-ID")) + 1;
        } else {
            std::lock_guard lk{_mu};
            *next = nds_engine_ledger_size(_engine) + 1;
        }
        res.set_header("Cache-Control", "no-cache");
        res.set_chunked_content_provider("text/event-stream", [this, next](std::size_t, httplib::DataSink &sink) {
            std::string chunk;
            {
                std::unique_lock lk{_mu};
                _ledger_cv.wait_for(lk, 1s,
                                    [&] { return !_running || nds_engine_ledger_size(_engine) >= *next; });
                if (!_running) {
                    sink.done();
                    return true;
                }
                const auto size = nds_engine_ledger_size(_engine);
                if (size >= *next) {
                    char *out = nullptr;
                    if (nds_engine_ledger(_engine, *next, &out) == NDS_OK) {
                        for (const auto &line : split_lines(take(out))) {
                            const auto seq = json::parse(line).at("seq").get<std::uint64_t>();
                            chunk += "id: " + std::to_string(seq) + "\nevent: ledger\ndata: " + line + "\n\n";
                        }
                    }
                    *next = size + 1;
                }
            }
            if (chunk.empty())
                chunk = ": keep-alive\n\n";
            return sink.write(chunk.data(), chunk.size());
        });
    });
}

void Service::start() {
    _running = true;
    _threads.emplace_back([this] { _http->listen_after_bind(); });
    _threads.emplace_back([this] { pace(); });
    if (_wire_fd >= 0)
        _threads.emplace_back([this] { accept_wire(); });
    _http->wait_until_ready();
}

void Service::stop() {
    if (!_running.exchange(false))
        return;
    _ledger_cv.notify_all();
    _http->stop();
    if (_wire_fd >= 0) {
        ::shutdown(_wire_fd, SHUT_RDWR);
        ::close(_wire_fd);
        _wire_fd = -1;
    }
    {
        std::lock_guard lk{_mu};
        for (const auto &[sn, fd] : _clients)
            ::shutdown(fd, SHUT_RDWR);
    }
    for (auto &t : _threads)
        t.join();
    _threads.clear();
    for (auto &t : _wire_threads)
        t.join();
    _wire_threads.clear();
}

void Service::pace() {
    const auto t0 = std::chrono::steady_clock::now();
    std::int64_t base;
    {
        std::lock_guard lk{_mu};
        base = nds_engine_now(_engine);
    }
    while (_running) {
        std::this_thread::sleep_for(1ms);
        const auto elapsed =
            std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - t0).count();
        std::lock_guard lk{_mu};
        const auto before = nds_engine_ledger_size(_engine);
        if (nds_engine_run_until(_engine, base + elapsed) != NDS_OK) {
            std::cerr << "engine stopped: " << nds_last_error() << "\n";
            _running = false;
            _ledger_cv.notify_all();
            return;
        }
        flush_external();
        if (nds_engine_ledger_size(_engine) != before)
            _ledger_cv.notify_all();
    }
}

void Service::write_line(int fd, const std::string &line) {
    std::size_t sent = 0;
    while (sent < line.size()) {
        const auto n = ::send(fd, line.data() + sent, line.size() - sent, MSG_NOSIGNAL);
        if (n <= 0)
            return;
        sent += static_cast<std::size_t>(n);
    }
}

void Service::flush_external() {
    char *out = nullptr;
    if (nds_engine_external_drain(_engine, &out) != NDS_OK)
        return;
    for (const auto &line : split_lines(take(out))) {
        const auto msg = json::parse(line);
        const auto &p = msg.at("payload");
        if (!p.contains("sn_id"))
            continue;
        const auto it = _clients.find(p.at("sn_id").get<std::string>());
        if (it != _clients.end())
            write_line(it->second, line + "\n");
    }
}

void Service::accept_wire() {
    while (_running) {
        const int fd = ::accept(_wire_fd, nullptr, nullptr);
        if (fd < 0) {
            if (!_running)
                return;
            continue;
        }
        std::lock_guard lk{_mu};
        _wire_threads.emplace_back([this, fd] { serve_wire_client(fd); });
    }
}

void Service::serve_wire_client(int fd) {
    std::string buffer;
    char chunk[4096];
    while (_running) {
        const auto n = ::recv(fd, chunk, sizeof chunk, 0);
        if (n <= 0)
            break;
        buffer.append(chunk, static_cast<std::size_t>(n));
        std::size_t nl;
        while ((nl = buffer.find('\n')) != std::string::npos) {
            const auto line = buffer.substr(0, nl);
            buffer.erase(0, nl + 1);
            if (line.find_first_not_of(" \t\r") == std::string::npos)
                continue;
            std::lock_guard lk{_mu};
            if (nds_engine_external_deliver(_engine, line.c_str()) != NDS_OK) {
                const json err{{"v", 1},
                               {"kind", "ERROR"},
                               {"seq", 0},
                               {"time", nds_engine_now(_engine)},
                               {"payload", {{"error", nds_last_error()}}}};
                write_line(fd, err.dump() + "\n");
                continue;
            }
            const auto msg = json::parse(line);
            if (msg.at("payload").contains("sn_id") && msg.at("payload").at("sn_id").is_string())
                _clients[msg.at("payload").at("sn_id").get<std::string>()] = fd;
            flush_external();
            _ledger_cv.notify_all();
        }
    }
    std::lock_guard lk{_mu};
    std::erase_if(_clients, [fd](const auto &kv) { return kv.second == fd; });
    ::close(fd);
}

} // namespace nds::service
