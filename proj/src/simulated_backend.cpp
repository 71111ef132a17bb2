#include "gal/simulated_backend.hpp"

#include <algorithm>
#include <cstdio>
#include <numeric>

#include "gal/random.hpp"

namespace gal::backend {
namespace {

Embedding random_unit(Rng& rng, std::size_t dim) {
    std::vector<double> v(dim);
    for (auto& x : v) {
        x = rng.gaussian();
    }
    return normalize(std::span<const double>(v));
}

std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

}  // namespace

SimulatedBackend::SimulatedBackend(SimulatedWorld world, SimulatedConfig config, std::size_t dim,
                                   std::uint64_t seed)
    : world_(std::move(world)), config_(config), dim_(dim) {
    if (world_.direction_texts.empty()) {
        throw ConfigError("simulated backend needs at least one direction");
    }
    Rng rng(derive_seed({seed, kSaltWorld}));
    soi_ = random_unit(rng, dim_);
    non_soi_ = random_unit(rng, dim_);
    for (std::size_t i = 0; i < world_.direction_texts.size(); ++i) {
        directions_.push_back(random_unit(rng, dim_));
        for (const auto& text : world_.direction_texts[i]) {
            text_to_direction_.emplace(text, i);
        }
    }
    g_.resize(directions_.size());
    for (auto& g : g_) {
        g = config_.g_init ? *config_.g_init : rng.uniform(config_.g_min, config_.g_max);
    }

    std::vector<double> mix(dim_);
    for (std::size_t i = 0; i < dim_; ++i) {
        mix[i] = 0.6 * soi_[i] + 0.4 * non_soi_[i];
    }
    reference_ = normalize(std::span<const double>(mix));
}

SimulatedBackend::LabeledSample SimulatedBackend::draw(std::size_t direction, std::uint64_t seed,
                                                       double g) const {
    Rng rng(seed);
    const double u = rng.uniform();
    const bool aligned = u < g;
    const Embedding& base = aligned ? directions_[direction] : non_soi_;
    std::vector<double> v(dim_);
    for (std::size_t i = 0; i < dim_; ++i) {
        v[i] = base[i] + config_.sigma * rng.gaussian();
    }
    return {normalize(std::span<const double>(v)), aligned};
}

std::vector<SimulatedBackend::LabeledSample> SimulatedBackend::sample_direction(std::size_t direction,
                                                                                std::uint64_t seed,
                                                                                std::uint32_t count) const {
    if (direction >= directions_.size()) {
        throw ValidationError("unknown simulated direction " + std::to_string(direction));
    }
    if (count < 1) {
        throw ValidationError("sample count must be >= 1");
    }
    double g = 0.0;
    {
        std::shared_lock lock(g_mutex_);
        g = g_[direction];
    }
    std::vector<LabeledSample> out;
    out.reserve(count);
    for (std::uint32_t j = 1; j <= count; ++j) {
        out.push_back(draw(direction, sample_seed(seed, j), g));
    }
    return out;
}

std::vector<GeneratedImage> SimulatedBackend::generate(const std::string& prompt, std::uint64_t seed,
                                                       std::uint32_t count) {
    const auto it = text_to_direction_.find(prompt);
    if (it == text_to_direction_.end()) {
        throw ValidationError("simulated backend does not know prompt \"" + prompt + "\"");
    }
    const auto direction = it->second;
    auto drawn = sample_direction(direction, seed, count);

    std::vector<GeneratedImage> out;
    out.reserve(count);
    std::lock_guard lock(registry_mutex_);
    for (std::uint32_t j = 1; j <= count; ++j) {
        const auto s = sample_seed(seed, j);
        auto id = "sim-" + std::to_string(direction) + "-" + hex64(s);
        auto uri = "sim://" + std::to_string(direction) + "/" + hex64(s);
        registry_[uri] = Registered{direction, s, drawn[j - 1].aligned};
        out.push_back({std::move(id), std::move(uri)});
    }
    return out;
}

Embedding SimulatedBackend::embed_text(const std::string& text) {
    if (text.empty()) {
        throw ValidationError("cannot embed empty text");
    }
    if (const auto it = text_to_direction_.find(text); it != text_to_direction_.end()) {
        return directions_[it->second];
    }
    if (text == world_.non_soi_text) {
        return non_soi_;
    }
    if (text == world_.pseudo_token) {
        return soi_;
    }
    if (text == world_.reference_caption) {
        return reference_;
    }
    throw ValidationError("simulated backend does not know text \"" + text + "\"");
}

SimulatedBackend::Registered SimulatedBackend::lookup(const std::string& image_uri) const {
    std::lock_guard lock(registry_mutex_);
    const auto it = registry_.find(image_uri);
    if (it == registry_.end()) {
        throw ValidationError("simulated backend does not know image \"" + image_uri + "\"");
    }
    return it->second;
}

Embedding SimulatedBackend::embed_image(const std::string& image_uri) {
    if (std::find(world_.reference_refs.begin(), world_.reference_refs.end(), image_uri) !=
        world_.reference_refs.end()) {
        return reference_;
    }
    const auto reg = lookup(image_uri);
    // Re-draw with the recorded branch forced; the noise stream is the same.
    return draw(reg.direction, reg.seed, reg.aligned ? 1.0 : 0.0).embedding;
}

bool SimulatedBackend::is_aligned(const std::string& image_uri) const {
    return lookup(image_uri).aligned;
}

void SimulatedBackend::finetune(std::span<const FinetuneReference> references) {
    std::vector<std::pair<Registered, double>> updates;
    for (const auto& ref : references) {
        if (std::find(world_.reference_refs.begin(), world_.reference_refs.end(), ref.image_uri) !=
            world_.reference_refs.end()) {
            continue;
        }
        updates.emplace_back(lookup(ref.image_uri), static_cast<double>(ref.weight));
    }

    std::unique_lock lock(g_mutex_);
    for (const auto& [reg, weight] : updates) {
        const double strength = config_.base_gain + config_.weight_scale * weight;
        for (std::size_t j = 0; j < g_.size(); ++j) {
            double next = g_[j];
            if (reg.aligned) {
                const double coupling = std::max(0.0, cosine_sim(directions_[reg.direction], directions_[j]));
                next = g_[j] + strength * coupling * (1.0 - g_[j]);
            } else {
                next = g_[j] - config_.overfit_penalty * strength * g_[j];
            }
            g_[j] = std::clamp(next, 0.0, 1.0);
        }
    }
}

Json SimulatedBackend::snapshot() const {
    Json j;
    {
        std::shared_lock lock(g_mutex_);
        j["g"] = g_;
    }
    Json samples = Json::object();
    std::lock_guard lock(registry_mutex_);
    for (const auto& [uri, reg] : registry_) {
        samples[uri] = {{"direction", reg.direction}, {"seed", reg.seed}, {"aligned", reg.aligned}};
    }
    j["samples"] = std::move(samples);
    return j;
}

void SimulatedBackend::restore(const Json& snapshot) {
    if (!snapshot.is_object() || !snapshot.contains("g") || !snapshot.contains("samples")) {
        throw ValidationError("malformed simulated backend snapshot");
    }
    auto g = snapshot.at("g").get<std::vector<double>>();
    if (g.size() != directions_.size()) {
        throw ValidationError("snapshot direction count does not match the simulator");
    }
    std::map<std::string, Registered> registry;
    for (const auto& [uri, v] : snapshot.at("samples").items()) {
        const auto dir = v.at("direction").get<std::size_t>();
        if (dir >= directions_.size()) {
            throw ValidationError("snapshot references an unknown direction");
        }
        registry[uri] = Registered{dir, v.at("seed").get<std::uint64_t>(), v.at("aligned").get<bool>()};
    }
    std::unique_lock glock(g_mutex_);
    std::lock_guard rlock(registry_mutex_);
    g_ = std::move(g);
    registry_ = std::move(registry);
}

std::vector<double> SimulatedBackend::alignment() const {
    std::shared_lock lock(g_mutex_);
    return g_;
}

void SimulatedBackend::set_alignment(std::vector<double> g) {
    if (g.size() != directions_.size()) {
        throw ValidationError("alignment vector has the wrong length");
    }
    for (auto& v : g) {
        v = std::clamp(v, 0.0, 1.0);
    }
    std::unique_lock lock(g_mutex_);
    g_ = std::move(g);
}

double SimulatedBackend::mean_alignment() const {
    std::shared_lock lock(g_mutex_);
    return std::accumulate(g_.begin(), g_.end(), 0.0) / static_cast<double>(g_.size());
}

}  // namespace gal::backend
