#pragma once

#include <span>
#include <vector>

#include "gal/core.hpp"

namespace gal::balance {

struct BalanceConfig {
    double lambda = 0.005;
    std::size_t k = 3;
    int max_rounds = 4;
    bool balance_enabled = true;

    /// Throws ConfigError when a field is out of range.
    void validate() const;
};

/// λ times the mean direction entropy of a round.
double openness(std::span<const DirectionStats> stats, double lambda);

/// Result of stamping weights onto a round's admissions. `degenerate` is set
/// when balancing is on, drafts exist, and Δ <= 0: the round admits nothing.
struct WeightedReferences {
    std::vector<ReferenceItem> items;
    bool degenerate = false;
};

WeightedReferences weight_new_references(std::vector<ReferenceItem> drafts, double delta,
                                         bool balance_enabled, int round);

struct StopDecision {
    bool stop = false;
    StopReason reason = StopReason::None;
};

/// Stops when fewer than k directions keep positive entropy (Converged) or
/// the round cap is reached (RoundCap). Converged wins when both hold.
StopDecision should_stop(std::span<const DirectionStats> stats, std::size_t k, int round,
                         int max_rounds);

}  // namespace gal::balance
