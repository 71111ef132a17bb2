#include "gal/oracle.hpp"

namespace gal::oracle {

Score score(const Embedding& sample, const Embedding& anchor, const Embedding& non_soi) {
    Score s;
    s.sim_to_anchor = static_cast<float>(cosine_sim(sample, anchor));
    s.sim_to_non_soi = static_cast<float>(cosine_sim(sample, non_soi));
    s.overfit = s.sim_to_anchor <= s.sim_to_non_soi;
    return s;
}

bool phi(const Embedding& sample, const Embedding& anchor, const Embedding& non_soi) {
    return score(sample, anchor, non_soi).overfit;
}

std::vector<Score> score_batch(const std::vector<Embedding>& samples, const Embedding& anchor,
                               const Embedding& non_soi) {
    if (samples.empty()) {
        throw EmptyBatchError("score_batch needs at least one sample");
    }
    std::vector<Score> out;
    out.reserve(samples.size());
    for (const auto& e : samples) {
        out.push_back(score(e, anchor, non_soi));
    }
    return out;
}

}  // namespace gal::oracle
