#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "gal/errors.hpp"

namespace gal {

inline constexpr std::string_view kSoiPlaceholder = "{SOI}";

/// Unit-norm vector in the joint text-image space.
///
/// Stored as 32-bit floats; every arithmetic path runs in double and rounds
/// once on construction, so a value written to disk and read back compares
/// equal bit for bit.
class Embedding {
public:
    Embedding() = default;

    /// Wraps values that are already unit norm (e.g. reloaded from disk).
    /// Throws DegenerateVectorError if the norm is off by more than `tol`.
    static Embedding from_unit(std::vector<float> values, double tol = 1e-6);

    std::size_t dim() const noexcept { return values_.size(); }
    std::span<const float> values() const noexcept { return values_; }
    float operator[](std::size_t i) const { return values_[i]; }
    bool empty() const noexcept { return values_.empty(); }

    double norm() const noexcept;

    friend bool operator==(const Embedding&, const Embedding&) = default;

private:
    explicit Embedding(std::vector<float> values) : values_(std::move(values)) {}
    friend Embedding normalize(std::span<const double> raw);

    std::vector<float> values_;
};

/// Scales `raw` to unit L2 norm. Zero or non-finite input throws
/// DegenerateVectorError.
Embedding normalize(std::span<const double> raw);
Embedding normalize(std::span<const float> raw);
Embedding normalize(std::initializer_list<double> raw);

/// Dot product of two unit vectors, accumulated left to right in double.
double cosine_sim(const Embedding& a, const Embedding& b);

struct SoIDescriptor {
    std::string pseudo_token;
    Embedding soi_embedding;
    std::string non_soi_text;
    Embedding non_soi_embedding;
    std::string reference_caption_template;
};

/// Replaces the single `{SOI}` placeholder in `templ` with `pseudo_token`.
std::string render_prompt(std::string_view templ, std::string_view pseudo_token);
std::string render_prompt(std::string_view templ, const SoIDescriptor& soi);

/// The template with the placeholder removed and whitespace collapsed; used
/// as the text side of sim(image, anchor). Falls back to the rendered prompt
/// when nothing but the placeholder is left.
std::string scoring_text(std::string_view templ, std::string_view pseudo_token);

struct AnchorDirection {
    int id = 0;
    std::string templ;
    std::string prompt;        // rendered with the pseudo token
    std::string scoring_text;  // text embedded for the oracle
    Embedding embedding;
};

struct GeneratedSample {
    std::string sample_id;
    int anchor_id = 0;
    int round = 0;
    std::uint64_t seed = 0;
    std::string image_ref;
    Embedding embedding;
    float sim_to_anchor = 0.0F;
    float sim_to_non_soi = 0.0F;
    bool overfit = false;
};

std::string make_sample_id(int round, int anchor_id, int j);

enum class Origin { Original, Synthetic };

std::string_view to_string(Origin origin);
Origin origin_from_string(std::string_view s);

struct ReferenceItem {
    std::string image_ref;
    Embedding embedding;
    std::string caption;
    float weight = 1.0F;
    Origin origin = Origin::Original;
    int round_added = 0;
    std::optional<std::string> sample_id;  // set for Synthetic items
    std::optional<int> anchor_id;          // set for Synthetic items
};

struct DirectionStats {
    int anchor_id = 0;
    double beta = 0.0;
    double entropy = 0.0;
    std::optional<std::string> best_sample_id;
};

struct MetricsTriple {
    double txt_aln = 0.0;
    double img_aln = 0.0;
    double ovf = 0.0;
    int eval_prompt_count = 0;
    int samples_per_prompt = 0;
};

enum class StopReason { None, Converged, RoundCap };

std::string_view to_string(StopReason reason);
StopReason stop_reason_from_string(std::string_view s);

struct Selection {
    int anchor_id = 0;
    std::string sample_id;

    friend bool operator==(const Selection&, const Selection&) = default;
};

struct RoundRecord {
    int round = 0;
    std::vector<DirectionStats> stats;
    std::vector<Selection> selected;
    double openness = 0.0;
    bool stopped = false;
    StopReason stop_reason = StopReason::None;
    bool degenerate_weight = false;  // selections made but Δ was 0, nothing admitted
    std::optional<MetricsTriple> metrics;

    std::vector<int> selected_anchor_ids() const;
};

}  // namespace gal
