#include "gal/balance.hpp"

#include <algorithm>
#include <cmath>

namespace gal::balance {

void BalanceConfig::validate() const {
    if (!(lambda > 0.0 && lambda <= 1.0)) {
        throw ConfigError("lambda must lie in (0, 1]");
    }
    if (k < 1) {
        throw ConfigError("k must be >= 1");
    }
    if (max_rounds < 1) {
        throw ConfigError("max_rounds must be >= 1");
    }
}

double openness(std::span<const DirectionStats> stats, double lambda) {
    if (stats.empty()) {
        throw EmptyBatchError("openness needs at least one direction");
    }
    if (!(lambda > 0.0)) {
        throw DomainError("openness: lambda must be positive");
    }
    double sum = 0.0;
    for (const auto& s : stats) {
        sum += s.entropy;
    }
    return lambda * (sum / static_cast<double>(stats.size()));
}

WeightedReferences weight_new_references(std::vector<ReferenceItem> drafts, double delta,
                                         bool balance_enabled, int round) {
    WeightedReferences out;
    if (drafts.empty()) {
        return out;
    }
    if (balance_enabled && !(delta > 0.0)) {
        out.degenerate = true;
        return out;
    }
    const float weight = balance_enabled ? static_cast<float>(delta) : 1.0F;
    for (auto& d : drafts) {
        if (d.origin != Origin::Synthetic) {
            throw ValidationError("only synthetic drafts can be weighted");
        }
        d.weight = weight;
        d.round_added = round;
    }
    out.items = std::move(drafts);
    return out;
}

StopDecision should_stop(std::span<const DirectionStats> stats, std::size_t k, int round,
                         int max_rounds) {
    const auto open = static_cast<std::size_t>(std::count_if(
        stats.begin(), stats.end(), [](const DirectionStats& s) { return s.entropy > 0.0; }));
    if (open < k) {
        return {true, StopReason::Converged};
    }
    if (round >= max_rounds) {
        return {true, StopReason::RoundCap};
    }
    return {};
}

}  // namespace gal::balance
