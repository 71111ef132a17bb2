#include "gal/core.hpp"

#include <cctype>
#include <cmath>
#include <sstream>

namespace gal {

Embedding Embedding::from_unit(std::vector<float> values, double tol) {
    Embedding e(std::move(values));
    if (e.values_.empty()) {
        throw DegenerateVectorError("embedding has no components");
    }
    for (float v : e.values_) {
        if (!std::isfinite(v)) {
            throw DegenerateVectorError("embedding has a non-finite component");
        }
    }
    const double n = e.norm();
    if (std::abs(n - 1.0) > tol) {
        std::ostringstream os;
        os << "embedding norm " << n << " is not unit";
        throw DegenerateVectorError(os.str());
    }
    return e;
}

double Embedding::norm() const noexcept {
    double acc = 0.0;
    for (float v : values_) {
        acc += static_cast<double>(v) * static_cast<double>(v);
    }
    return std::sqrt(acc);
}

Embedding normalize(std::span<const double> raw) {
    if (raw.empty()) {
        throw DegenerateVectorError("cannot normalize an empty vector");
    }
    double acc = 0.0;
    for (double v : raw) {
        if (!std::isfinite(v)) {
            throw DegenerateVectorError("cannot normalize a vector with non-finite entries");
        }
        acc += v * v;
    }
    const double n = std::sqrt(acc);
    if (n == 0.0) {
        throw DegenerateVectorError("cannot normalize a zero vector");
    }
    std::vector<float> out(raw.size());
    for (std::size_t i = 0; i < raw.size(); ++i) {
        out[i] = static_cast<float>(raw[i] / n);
    }
    return Embedding(std::move(out));
}

Embedding normalize(std::span<const float> raw) {
    std::vector<double> wide(raw.begin(), raw.end());
    return normalize(std::span<const double>(wide));
}

Embedding normalize(std::initializer_list<double> raw) {
    return normalize(std::span<const double>(raw.begin(), raw.size()));
}

double cosine_sim(const Embedding& a, const Embedding& b) {
    if (a.dim() != b.dim()) {
        std::ostringstream os;
        os << "dimension mismatch: " << a.dim() << " vs " << b.dim();
        throw DimensionError(os.str());
    }
    auto av = a.values();
    auto bv = b.values();
    double acc = 0.0;
    for (std::size_t i = 0; i < av.size(); ++i) {
        acc += static_cast<double>(av[i]) * static_cast<double>(bv[i]);
    }
    return acc;
}

namespace {

std::size_t find_single_placeholder(std::string_view templ) {
    const auto first = templ.find(kSoiPlaceholder);
    if (first == std::string_view::npos) {
        throw TemplateError("template has no {SOI} placeholder: \"" + std::string(templ) + "\"");
    }
    if (templ.find(kSoiPlaceholder, first + kSoiPlaceholder.size()) != std::string_view::npos) {
        throw TemplateError("template has more than one {SOI} placeholder: \"" +
                            std::string(templ) + "\"");
    }
    return first;
}

}  // namespace

std::string render_prompt(std::string_view templ, std::string_view pseudo_token) {
    const auto pos = find_single_placeholder(templ);
    std::string out;
    out.reserve(templ.size() + pseudo_token.size());
    out.append(templ.substr(0, pos));
    out.append(pseudo_token);
    out.append(templ.substr(pos + kSoiPlaceholder.size()));
    if (out.empty()) {
        throw TemplateError("template renders to empty text");
    }
    return out;
}

std::string render_prompt(std::string_view templ, const SoIDescriptor& soi) {
    return render_prompt(templ, soi.pseudo_token);
}

std::string scoring_text(std::string_view templ, std::string_view pseudo_token) {
    const auto pos = find_single_placeholder(templ);
    std::string stripped(templ.substr(0, pos));
    stripped.append(templ.substr(pos + kSoiPlaceholder.size()));

    std::string out;
    bool pending_space = false;
    for (char c : stripped) {
        if (std::isspace(static_cast<unsigned char>(c))) {
            pending_space = !out.empty();
            continue;
        }
        if (pending_space) {
            out.push_back(' ');
            pending_space = false;
        }
        out.push_back(c);
    }
    if (out.empty()) {
        return render_prompt(templ, pseudo_token);
    }
    return out;
}

std::string make_sample_id(int round, int anchor_id, int j) {
    return "r" + std::to_string(round) + "-a" + std::to_string(anchor_id) + "-j" + std::to_string(j);
}

std::string_view to_string(Origin origin) {
    return origin == Origin::Original ? "original" : "synthetic";
}

Origin origin_from_string(std::string_view s) {
    if (s == "original") {
        return Origin::Original;
    }
    if (s == "synthetic") {
        return Origin::Synthetic;
    }
    throw ValidationError("unknown reference origin: " + std::string(s));
}

std::string_view to_string(StopReason reason) {
    switch (reason) {
        case StopReason::Converged:
            return "converged";
        case StopReason::RoundCap:
            return "round_cap";
        case StopReason::None:
            break;
    }
    return "none";
}

StopReason stop_reason_from_string(std::string_view s) {
    if (s == "converged") {
        return StopReason::Converged;
    }
    if (s == "round_cap") {
        return StopReason::RoundCap;
    }
    if (s == "none") {
        return StopReason::None;
    }
    throw ValidationError("unknown stop reason: " + std::string(s));
}

std::vector<int> RoundRecord::selected_anchor_ids() const {
    std::vector<int> ids;
    ids.reserve(selected.size());
    for (const auto& s : selected) {
        ids.push_back(s.anchor_id);
    }
    return ids;
}

}  // namespace gal
