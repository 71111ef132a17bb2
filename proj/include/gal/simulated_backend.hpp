#pragma once

#include <map>
#include <mutex>
#include <shared_mutex>
#include <unordered_map>

#include "gal/backend.hpp"
#include "gal/config.hpp"

namespace gal::backend {

/// Vocabulary the simulator understands.
struct SimulatedWorld {
    std::string pseudo_token;
    std::string non_soi_text;
    std::string reference_caption;
    /// Texts that embed to each direction (rendered prompt, scoring text).
    /// Directions are anchors first, then evaluation prompts.
    std::vector<std::vector<std::string>> direction_texts;
    std::vector<std::string> reference_refs;
};

/// Deterministic stand-in for a fine-tunable text-to-image model.
///
/// Each direction i carries an alignment level g_i: the probability that a
/// generated sample lands on the direction's vector rather than on the
/// non-SoI vector. Fine-tuning on an aligned synthetic reference from
/// direction s raises every g_j in proportion to max(0, cos(a_s, a_j));
/// fine-tuning on an overfit one lowers every g_j, since the leaked non-SoI
/// binds to the pseudo token regardless of the prompt.
class SimulatedBackend final : public Backend {
public:
    SimulatedBackend(SimulatedWorld world, SimulatedConfig config, std::size_t dim, std::uint64_t seed);

    struct LabeledSample {
        Embedding embedding;
        bool aligned = false;
    };

    std::string name() const override { return "simulated"; }

    std::vector<GeneratedImage> generate(const std::string& prompt, std::uint64_t seed,
                                         std::uint32_t count) override;
    Embedding embed_text(const std::string& text) override;
    Embedding embed_image(const std::string& image_uri) override;
    void finetune(std::span<const FinetuneReference> references) override;

    Json snapshot() const override;
    void restore(const Json& snapshot) override;

    /// The raw generative draw for one direction, without registering
    /// anything. Pure in (direction, seed, count, g).
    std::vector<LabeledSample> sample_direction(std::size_t direction, std::uint64_t seed,
                                                std::uint32_t count) const;

    std::size_t direction_count() const noexcept { return directions_.size(); }
    const Embedding& direction_vector(std::size_t i) const { return directions_.at(i); }
    const Embedding& soi_vector() const noexcept { return soi_; }
    const Embedding& non_soi_vector() const noexcept { return non_soi_; }
    const Embedding& reference_vector() const noexcept { return reference_; }
    const SimulatedConfig& config() const noexcept { return config_; }

    std::vector<double> alignment() const;
    void set_alignment(std::vector<double> g);
    double mean_alignment() const;

    /// Ground-truth branch of a generated image; throws ValidationError for
    /// unknown URIs.
    bool is_aligned(const std::string& image_uri) const;

private:
    struct Registered {
        std::size_t direction = 0;
        std::uint64_t seed = 0;
        bool aligned = false;
    };

    LabeledSample draw(std::size_t direction, std::uint64_t seed, double g) const;
    Registered lookup(const std::string& image_uri) const;

    SimulatedWorld world_;
    SimulatedConfig config_;
    std::size_t dim_;
    Embedding soi_;
    Embedding non_soi_;
    Embedding reference_;
    std::vector<Embedding> directions_;
    std::unordered_map<std::string, std::size_t> text_to_direction_;

    mutable std::shared_mutex g_mutex_;
    std::vector<double> g_;

    mutable std::mutex registry_mutex_;
    std::map<std::string, Registered> registry_;
};

}  // namespace gal::backend
