#include "gal/review_server.hpp"

#include <netdb.h>
#include <sys/socket.h>
#include <unistd.h>

#include <atomic>
#include <condition_variable>
#include <thread>

#include <httplib.h>

namespace gal {

namespace {

void send_json(httplib::Response& res, int status, const Json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json; charset=utf-8");
}

void send_error(httplib::Response& res, int status, const std::string& message) {
    send_json(res, status, Json{{"error", message}});
}

std::vector<Selection> parse_pairs(const std::string& body) {
    const Json j = Json::parse(body, nullptr, false);
    if (j.is_discarded() || !j.is_object() || !j.contains("pairs") || !j["pairs"].is_array()) {
        throw ValidationError("body must be {\"pairs\": [{\"anchor_id\": int, \"sample_id\": str}, ...]}");
    }
    std::vector<Selection> out;
    for (const auto& p : j["pairs"]) {
        if (!p.is_object() || !p.contains("anchor_id") || !p["anchor_id"].is_number_integer() ||
            !p.contains("sample_id") || !p["sample_id"].is_string()) {
            throw ValidationError("each pair needs an integer anchor_id and a string sample_id");
        }
        out.push_back({p["anchor_id"].get<int>(), p["sample_id"].get<std::string>()});
    }
    return out;
}

}  // namespace

struct ReviewServer::Impl {
    Engine& engine;
    httplib::Server server;
    std::mutex mutex;
    std::condition_variable cv;
    std::atomic<bool> stopping{false};
    std::thread thread;
    std::mutex stop_mutex;
    int port = 0;
    bool bound = false;

    explicit Impl(Engine& e) : engine(e) {}
};

ReviewServer::ReviewServer(Engine& engine, std::optional<std::filesystem::path> ui_dir)
    : impl_(std::make_unique<Impl>(engine)) {
    auto& svr = impl_->server;
    Impl* self = impl_.get();

    // The default enables SO_REUSEPORT, which would let a second server
    // share the port silently.
    svr.set_socket_options([](socket_t sock) {
        int yes = 1;
        ::setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof(yes));
    });

    svr.Get("/api/run", [self](const httplib::Request&, httplib::Response& res) {
        std::lock_guard lock(self->mutex);
        send_json(res, 200, self->engine.run_summary_json());
    });

    svr.Get("/api/round/current/candidates", [self](const httplib::Request&, httplib::Response& res) {
        std::lock_guard lock(self->mutex);
        try {
            send_json(res, 200, self->engine.candidates_json());
        } catch (const StateError& e) {
            send_error(res, 409, e.what());
        }
    });

    svr.Post("/api/round/current/decision", [self](const httplib::Request& req, httplib::Response& res) {
        std::unique_lock lock(self->mutex);
        if (self->engine.state().status != RunStatus::AwaitingHuman) {
            send_error(res, 409, "no round is awaiting review");
            return;
        }
        try {
            const auto pairs = parse_pairs(req.body);
            self->engine.submit_human_decision(pairs);
            const auto& last = self->engine.state().rounds.back();
            Json body;
            body["round"] = last.round;
            body["delta"] = last.openness;
            body["status"] = std::string(to_string(self->engine.state().status));
            send_json(res, 200, body);
        } catch (const ValidationError& e) {
            send_error(res, 422, e.what());
            return;
        } catch (const StateError& e) {
            send_error(res, 409, e.what());
            return;
        } catch (const std::exception& e) {
            send_error(res, 500, e.what());
            return;
        }
        lock.unlock();
        self->cv.notify_all();
    });

    svr.Get("/api/references", [self](const httplib::Request&, httplib::Response& res) {
        std::lock_guard lock(self->mutex);
        send_json(res, 200, self->engine.references_json());
    });

    if (ui_dir) {
        svr.set_mount_point("/", ui_dir->string());
    }
}

ReviewServer::~ReviewServer() { stop(); }

void ReviewServer::bind(const std::string& host, int port) {
    if (port == 0) {
        const int p = impl_->server.bind_to_any_port(host);
        if (p <= 0) {
            throw BindError("cannot bind " + host + ":0");
        }
        impl_->port = p;
    } else {
        if (!impl_->server.bind_to_port(host, port)) {
            throw BindError("cannot bind " + host + ":" + std::to_string(port));
        }
        impl_->port = port;
    }
    impl_->bound = true;
}

int ReviewServer::port() const noexcept { return impl_->port; }

void ReviewServer::start() {
    if (!impl_->bound) {
        throw StateError("bind before start");
    }
    impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
    impl_->server.wait_until_ready();
}

void ReviewServer::stop() {
    {
        // Under the mutex, or drive() can miss the wakeup.
        std::lock_guard lock(impl_->mutex);
        impl_->stopping = true;
    }
    impl_->cv.notify_all();
    std::lock_guard join_lock(impl_->stop_mutex);
    if (impl_->thread.joinable()) {
        impl_->server.stop();
        impl_->thread.join();
    }
}

RunStatus ReviewServer::drive(std::optional<std::chrono::milliseconds> human_timeout) {
    std::unique_lock lock(impl_->mutex);
    auto& engine = impl_->engine;
    while (!impl_->stopping) {
        const auto status = engine.state().status;
        if (status == RunStatus::Stopped) {
            break;
        }
        if (status == RunStatus::Running) {
            engine.run_round();
            continue;
        }
        const int round = engine.state().pending->round;
        auto decided = [&] {
            return impl_->stopping || engine.state().status != RunStatus::AwaitingHuman ||
                   engine.state().pending->round != round;
        };
        if (human_timeout) {
            if (!impl_->cv.wait_for(lock, *human_timeout, decided)) {
                break;
            }
        } else {
            impl_->cv.wait(lock, decided);
        }
    }
    return engine.state().status;
}

std::mutex& ReviewServer::engine_mutex() noexcept { return impl_->mutex; }

void ensure_bindable(const std::string& host, int port) {
    addrinfo hints{};
    hints.ai_family = AF_UNSPEC;
    hints.ai_socktype = SOCK_STREAM;
    hints.ai_flags = AI_PASSIVE;
    addrinfo* res = nullptr;
    if (::getaddrinfo(host.c_str(), std::to_string(port).c_str(), &hints, &res) != 0 || res == nullptr) {
        throw BindError("cannot resolve " + host);
    }
    const int fd = ::socket(res->ai_family, res->ai_socktype, res->ai_protocol);
    int yes = 1;
    const bool ok = fd >= 0 && ::setsockopt(fd, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof(yes)) == 0 &&
                    ::bind(fd, res->ai_addr, res->ai_addrlen) == 0;
    if (fd >= 0) {
        ::close(fd);
    }
    ::freeaddrinfo(res);
    if (!ok) {
        throw BindError("cannot bind " + host + ":" + std::to_string(port));
    }
}

std::pair<std::string, int> parse_bind_address(const std::string& addr) {
    std::string host = "127.0.0.1";
    std::string port_text = addr;
    if (const auto colon = addr.rfind(':'); colon != std::string::npos) {
        host = addr.substr(0, colon);
        port_text = addr.substr(colon + 1);
        if (host.empty()) {
            host = "0.0.0.0";
        }
    }
    try {
        std::size_t used = 0;
        const int port = std::stoi(port_text, &used);
        if (used != port_text.size() || port < 0 || port > 65535) {
            throw ConfigError("");
        }
        return {host, port};
    } catch (const std::exception&) {
        throw ConfigError("bad bind address \"" + addr + "\"; expected host:port");
    }
}

}  // namespace gal
