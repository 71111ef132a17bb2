#pragma once

#include <functional>

#include "gal/backend.hpp"
#include "gal/config.hpp"

namespace gal::backend {

/// JSON-over-HTTP client for an external generation service.
///
/// Verbs: POST /v1/embed, POST /v1/generate, POST /v1/finetune and
/// GET /v1/jobs/{id}. Every POST carries an Idempotency-Key equal to the
/// SHA-256 of its path and body. Connection failures, 429 and 5xx are
/// retried with exponential backoff up to `max_attempts`; other 4xx
/// responses surface as ProtocolError straight away.
class RemoteBackend final : public Backend {
public:
    RemoteBackend(RemoteConfig config, std::size_t dim);

    std::string name() const override { return "remote"; }

    std::vector<GeneratedImage> generate(const std::string& prompt, std::uint64_t seed,
                                         std::uint32_t count) override;
    Embedding embed_text(const std::string& text) override;
    Embedding embed_image(const std::string& image_uri) override;
    void finetune(std::span<const FinetuneReference> references) override;

    /// Sleep hook; tests swap it out to skip backoff delays.
    void set_sleeper(std::function<void(int ms)> sleeper) { sleeper_ = std::move(sleeper); }

private:
    Json post(const std::string& path, const Json& body);
    Json get(const std::string& path);
    Embedding parse_embedding(const Json& response) const;

    RemoteConfig config_;
    std::size_t dim_;
    std::function<void(int)> sleeper_;
};

}  // namespace gal::backend
