#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "gal/core.hpp"
#include "gal/json_io.hpp"

namespace gal::backend {

struct GeneratedImage {
    std::string sample_id;
    std::string image_uri;
};

struct FinetuneReference {
    std::string image_uri;
    std::string caption;
    float weight = 1.0F;
};

/// Generation, embedding and fine-tuning provider.
///
/// `generate` and `embed_*` must be deterministic in their inputs and safe
/// to call concurrently with each other. `finetune` is never called
/// concurrently with anything else.
class Backend {
public:
    virtual ~Backend() = default;

    virtual std::string name() const = 0;

    /// `count` images for `prompt`; the j-th (1-based) uses sample_seed(seed, j).
    virtual std::vector<GeneratedImage> generate(const std::string& prompt, std::uint64_t seed,
                                                 std::uint32_t count) = 0;

    virtual Embedding embed_text(const std::string& text) = 0;
    virtual Embedding embed_image(const std::string& image_uri) = 0;

    /// Blocks until the fine-tuning job has finished.
    virtual void finetune(std::span<const FinetuneReference> references) = 0;

    /// Opaque model state for rollback and resume. Stateless backends
    /// return null.
    virtual Json snapshot() const { return nullptr; }
    virtual void restore(const Json& /*snapshot*/) {}
};

}  // namespace gal::backend
