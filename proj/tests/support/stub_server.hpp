#pragma once

// In-process stand-in for a remote generation service. Speaks the four
// wire verbs and delegates the actual work to a SimulatedBackend, so runs
// against it produce real data.

#include <atomic>
#include <map>
#include <mutex>
#include <set>
#include <thread>

#include <httplib.h>

#include "gal/config.hpp"
#include "gal/engine.hpp"
#include "gal/simulated_backend.hpp"

namespace stub {

struct Options {
    int failed_jobs = 0;        // the first N fine-tuning jobs report "failed"
    int transient_posts = 0;    // the first N POSTs answer 503
    int pending_polls = 1;      // job polls answering "pending" before the verdict
    int wrong_dim = 0;          // non-zero: embeddings come back with this length
};

class Server {
public:
    Server(gal::RunConfig config, Options options) : options_(options) {
        config.backend.kind = gal::BackendKind::Simulated;
        auto be = gal::make_backend(config);
        sim_.reset(static_cast<gal::backend::SimulatedBackend*>(be.release()));
        routes();
        port_ = server_.bind_to_any_port("127.0.0.1");
        thread_ = std::thread([this] { server_.listen_after_bind(); });
        server_.wait_until_ready();
    }
    ~Server() {
        server_.stop();
        thread_.join();
    }
    Server(const Server&) = delete;
    Server& operator=(const Server&) = delete;

    std::string endpoint() const { return "http://127.0.0.1:" + std::to_string(port_); }
    gal::backend::SimulatedBackend& sim() { return *sim_; }

    std::atomic<int> posts{0};
    std::atomic<int> finetune_posts{0};
    std::atomic<int> job_polls{0};

    std::vector<std::string> idempotency_keys() {
        std::lock_guard lock(mutex_);
        return keys_;
    }
    gal::Json last_finetune_body() {
        std::lock_guard lock(mutex_);
        return last_finetune_;
    }

private:
    struct Job {
        bool fail = false;
        int polls = 0;
    };

    static void reply(httplib::Response& res, int status, const gal::Json& body) {
        res.status = status;
        res.set_content(body.dump(), "application/json");
    }

    bool transient(const httplib::Request& req, httplib::Response& res) {
        const int n = ++posts;
        {
            std::lock_guard lock(mutex_);
            keys_.push_back(req.get_header_value("Idempotency-Key"));
        }
        if (n <= options_.transient_posts) {
            reply(res, 503, {{"error", "busy"}});
            return true;
        }
        return false;
    }

    gal::Json embedding_json(const gal::Embedding& e) const {
        gal::Json arr = gal::Json::array();
        const auto n = options_.wrong_dim != 0 ? static_cast<std::size_t>(options_.wrong_dim) : e.dim();
        for (std::size_t i = 0; i < n; ++i) {
            arr.push_back(static_cast<double>(i < e.dim() ? e[i] : 0.0F));
        }
        return {{"embedding", arr}};
    }

    void routes() {
        server_.Post("/v1/embed", [this](const httplib::Request& req, httplib::Response& res) {
            if (transient(req, res)) {
                return;
            }
            const auto body = gal::Json::parse(req.body, nullptr, false);
            try {
                const auto kind = body.at("kind").get<std::string>();
                if (kind == "text") {
                    const auto text = body.at("text").get<std::string>();
                    if (text.empty()) {
                        reply(res, 422, {{"error", "empty text"}});
                        return;
                    }
                    reply(res, 200, embedding_json(sim_->embed_text(text)));
                } else if (kind == "image") {
                    reply(res, 200, embedding_json(sim_->embed_image(body.at("image_uri").get<std::string>())));
                } else {
                    reply(res, 422, {{"error", "unknown kind"}});
                }
            } catch (const std::exception& e) {
                reply(res, 422, {{"error", e.what()}});
            }
        });

        server_.Post("/v1/generate", [this](const httplib::Request& req, httplib::Response& res) {
            if (transient(req, res)) {
                return;
            }
            try {
                const auto body = gal::Json::parse(req.body);
                const auto images = sim_->generate(body.at("prompt").get<std::string>(),
                                                   body.at("seed").get<std::uint64_t>(),
                                                   body.at("count").get<std::uint32_t>());
                gal::Json samples = gal::Json::array();
                for (const auto& im : images) {
                    samples.push_back({{"sample_id", im.sample_id}, {"image_uri", im.image_uri}});
                }
                reply(res, 200, {{"samples", samples}});
            } catch (const std::exception& e) {
                reply(res, 422, {{"error", e.what()}});
            }
        });

        server_.Post("/v1/finetune", [this](const httplib::Request& req, httplib::Response& res) {
            if (transient(req, res)) {
                return;
            }
            const int n = ++finetune_posts;
            try {
                const auto body = gal::Json::parse(req.body);
                std::vector<gal::backend::FinetuneReference> refs;
                for (const auto& r : body.at("references")) {
                    refs.push_back({r.at("image_uri").get<std::string>(), r.at("caption").get<std::string>(),
                                    r.at("weight").get<float>()});
                }
                Job job;
                job.fail = n <= options_.failed_jobs;
                if (!job.fail) {
                    sim_->finetune(refs);
                }
                std::lock_guard lock(mutex_);
                last_finetune_ = body;
                const auto id = "job-" + std::to_string(n);
                jobs_[id] = job;
                reply(res, 200, {{"job_id", id}});
            } catch (const std::exception& e) {
                reply(res, 422, {{"error", e.what()}});
            }
        });

        server_.Get(R"(/v1/jobs/([\w-]+))", [this](const httplib::Request& req, httplib::Response& res) {
            ++job_polls;
            std::lock_guard lock(mutex_);
            const auto it = jobs_.find(req.matches[1].str());
            if (it == jobs_.end()) {
                reply(res, 404, {{"error", "no such job"}});
                return;
            }
            auto& job = it->second;
            if (job.polls++ < options_.pending_polls) {
                reply(res, 200, {{"status", "pending"}});
                return;
            }
            if (job.fail) {
                reply(res, 200, {{"status", "failed"}, {"detail", "out of GPU memory"}});
            } else {
                reply(res, 200, {{"status", "done"}});
            }
        });
    }

    Options options_;
    std::unique_ptr<gal::backend::SimulatedBackend> sim_;
    httplib::Server server_;
    std::thread thread_;
    int port_ = 0;
    std::mutex mutex_;
    std::vector<std::string> keys_;
    gal::Json last_finetune_;
    std::map<std::string, Job> jobs_;
};

/// Remote-backend config pointed at `server`, with delays shrunk for tests.
inline gal::RunConfig remote_config(gal::RunConfig base, const Server& server) {
    base.backend.kind = gal::BackendKind::Remote;
    base.backend.remote.endpoint = server.endpoint();
    base.backend.remote.backoff_ms = 1;
    base.backend.remote.poll_interval_ms = 1;
    base.backend.remote.timeout_ms = 5000;
    return base;
}

}  // namespace stub
