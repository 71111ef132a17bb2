#pragma once

#include <chrono>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <string>

#include "gal/engine.hpp"

namespace gal {

/// HTTP front of an engine for human review.
///
///   GET  /api/run                          status and config summary
///   GET  /api/round/current/candidates     409 unless awaiting a human
///   POST /api/round/current/decision       {pairs:[{anchor_id, sample_id}]}
///   GET  /api/references                   current training set
///
/// Anything else is looked up under `ui_dir` when one is given.
/// Handlers and `drive` share one mutex, so the engine keeps a single writer.
class ReviewServer {
public:
    explicit ReviewServer(Engine& engine, std::optional<std::filesystem::path> ui_dir = std::nullopt);
    ~ReviewServer();

    ReviewServer(const ReviewServer&) = delete;
    ReviewServer& operator=(const ReviewServer&) = delete;

    /// Throws BindError. Port 0 picks a free port.
    void bind(const std::string& host, int port);
    int port() const noexcept;

    /// Starts serving on a background thread.
    void start();
    /// Stops the listener and wakes `drive`. Safe to call from any thread.
    void stop();

    /// Runs rounds until the run stops, parking while a round awaits a
    /// decision. Returns early after `stop()` or when a single wait exceeds
    /// `human_timeout`. Backend errors propagate.
    RunStatus drive(std::optional<std::chrono::milliseconds> human_timeout = std::nullopt);

    std::mutex& engine_mutex() noexcept;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

/// Throws BindError unless `host:port` can be bound right now.
void ensure_bindable(const std::string& host, int port);

/// Parses "host:port" (or a bare port). Throws ConfigError.
std::pair<std::string, int> parse_bind_address(const std::string& addr);

}  // namespace gal
