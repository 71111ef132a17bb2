#include "gal/remote_backend.hpp"

#include <chrono>
#include <thread>

#include <httplib.h>

#include "gal/hashing.hpp"

namespace gal::backend {
namespace {

bool transient(int status) { return status == 429 || status >= 500; }

std::string excerpt(const std::string& body) {
    constexpr std::size_t kMax = 200;
    return body.size() <= kMax ? body : body.substr(0, kMax) + "...";
}

}  // namespace

RemoteBackend::RemoteBackend(RemoteConfig config, std::size_t dim)
    : config_(std::move(config)), dim_(dim), sleeper_([](int ms) {
          std::this_thread::sleep_for(std::chrono::milliseconds(ms));
      }) {
    if (config_.endpoint.empty()) {
        throw ConfigError("remote backend needs an endpoint");
    }
}

Json RemoteBackend::post(const std::string& path, const Json& body) {
    const auto payload = body.dump();
    const auto key = sha256_hex(path + "\n" + payload);
    int status = 0;
    std::string last_body;
    std::string last_error;
    for (int attempt = 1; attempt <= config_.max_attempts; ++attempt) {
        if (attempt > 1) {
            sleeper_(config_.backoff_ms * (1 << (attempt - 2)));
        }
        httplib::Client client(config_.endpoint);
        client.set_connection_timeout(std::chrono::milliseconds(config_.timeout_ms));
        client.set_read_timeout(std::chrono::milliseconds(config_.timeout_ms));
        auto res = client.Post(path, httplib::Headers{{"Idempotency-Key", key}}, payload, "application/json");
        if (!res) {
            status = 0;
            last_error = httplib::to_string(res.error());
            continue;
        }
        status = res->status;
        last_body = res->body;
        if (status >= 200 && status < 300) {
            try {
                return Json::parse(res->body);
            } catch (const Json::exception& e) {
                throw ProtocolError(path + ": response is not JSON: " + e.what());
            }
        }
        if (!transient(status)) {
            throw ProtocolError(path + ": server rejected request with status " + std::to_string(status) +
                                ": " + excerpt(res->body));
        }
    }
    throw BackendError(path + " failed after " + std::to_string(config_.max_attempts) + " attempts" +
                           (status == 0 ? " (" + last_error + ")" : " (status " + std::to_string(status) + ")"),
                       status, config_.max_attempts, excerpt(last_body));
}

Json RemoteBackend::get(const std::string& path) {
    int status = 0;
    std::string last_body;
    for (int attempt = 1; attempt <= config_.max_attempts; ++attempt) {
        if (attempt > 1) {
            sleeper_(config_.backoff_ms * (1 << (attempt - 2)));
        }
        httplib::Client client(config_.endpoint);
        client.set_connection_timeout(std::chrono::milliseconds(config_.timeout_ms));
        client.set_read_timeout(std::chrono::milliseconds(config_.timeout_ms));
        auto res = client.Get(path);
        if (!res) {
            status = 0;
            continue;
        }
        status = res->status;
        last_body = res->body;
        if (status >= 200 && status < 300) {
            try {
                return Json::parse(res->body);
            } catch (const Json::exception& e) {
                throw ProtocolError(path + ": response is not JSON: " + e.what());
            }
        }
        if (!transient(status)) {
            throw ProtocolError(path + ": status " + std::to_string(status) + ": " + excerpt(res->body));
        }
    }
    throw BackendError(path + " failed after retries", status, config_.max_attempts, excerpt(last_body));
}

Embedding RemoteBackend::parse_embedding(const Json& response) const {
    if (!response.is_object() || !response.contains("embedding") || !response.at("embedding").is_array()) {
        throw ProtocolError("/v1/embed: response lacks an embedding array");
    }
    const auto& arr = response.at("embedding");
    if (arr.size() != dim_) {
        throw ProtocolError("/v1/embed: expected dimension " + std::to_string(dim_) + ", got " +
                            std::to_string(arr.size()));
    }
    std::vector<double> raw;
    raw.reserve(arr.size());
    for (const auto& v : arr) {
        if (!v.is_number()) {
            throw ProtocolError("/v1/embed: non-numeric embedding component");
        }
        raw.push_back(v.get<double>());
    }
    try {
        return normalize(std::span<const double>(raw));
    } catch (const DegenerateVectorError& e) {
        throw ProtocolError(std::string("/v1/embed: ") + e.what());
    }
}

std::vector<GeneratedImage> RemoteBackend::generate(const std::string& prompt, std::uint64_t seed,
                                                    std::uint32_t count) {
    Json body;
    body["prompt"] = prompt;
    body["seed"] = seed;
    body["count"] = count;
    const auto res = post("/v1/generate", body);
    if (!res.is_object() || !res.contains("samples") || !res.at("samples").is_array()) {
        throw ProtocolError("/v1/generate: response lacks a samples array");
    }
    const auto& samples = res.at("samples");
    if (samples.size() != count) {
        throw ProtocolError("/v1/generate: asked for " + std::to_string(count) + " samples, got " +
                            std::to_string(samples.size()));
    }
    std::vector<GeneratedImage> out;
    for (const auto& s : samples) {
        if (!s.is_object() || !s.contains("sample_id") || !s.at("sample_id").is_string() ||
            !s.contains("image_uri") || !s.at("image_uri").is_string()) {
            throw ProtocolError("/v1/generate: sample entries need string sample_id and image_uri");
        }
        out.push_back({s.at("sample_id").get<std::string>(), s.at("image_uri").get<std::string>()});
    }
    return out;
}

Embedding RemoteBackend::embed_text(const std::string& text) {
    Json body;
    body["kind"] = "text";
    body["text"] = text;
    return parse_embedding(post("/v1/embed", body));
}

Embedding RemoteBackend::embed_image(const std::string& image_uri) {
    Json body;
    body["kind"] = "image";
    body["image_uri"] = image_uri;
    return parse_embedding(post("/v1/embed", body));
}

void RemoteBackend::finetune(std::span<const FinetuneReference> references) {
    Json body;
    auto& refs = body["references"] = Json::array();
    for (const auto& r : references) {
        refs.push_back({{"image_uri", r.image_uri}, {"caption", r.caption}, {"weight", static_cast<double>(r.weight)}});
    }
    const auto res = post("/v1/finetune", body);
    if (!res.is_object() || !res.contains("job_id") || !res.at("job_id").is_string()) {
        throw ProtocolError("/v1/finetune: response lacks a job_id");
    }
    const auto job = res.at("job_id").get<std::string>();
    const auto deadline = std::chrono::steady_clock::now() + std::chrono::milliseconds(config_.job_timeout_ms);
    while (true) {
        const auto status = get("/v1/jobs/" + job);
        if (!status.is_object() || !status.contains("status") || !status.at("status").is_string()) {
            throw ProtocolError("/v1/jobs: response lacks a status");
        }
        const auto s = status.at("status").get<std::string>();
        if (s == "done") {
            return;
        }
        if (s == "failed") {
            throw BackendError("fine-tuning job " + job + " failed: " + status.value("detail", std::string{}));
        }
        if (s != "pending") {
            throw ProtocolError("/v1/jobs: unknown status '" + s + "'");
        }
        if (std::chrono::steady_clock::now() > deadline) {
            throw BackendError("fine-tuning job " + job + " timed out");
        }
        sleeper_(config_.poll_interval_ms);
    }
}

}  // namespace gal::backend
