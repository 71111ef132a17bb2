#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "gal/core.hpp"

namespace gal::strategy {

enum class StrategyKind { Random, Uncertainty, Human };

std::string_view to_string(StrategyKind kind);
StrategyKind strategy_from_string(std::string_view s);

struct SelectionDecision {
    std::vector<Selection> selected;
    std::vector<DirectionStats> rationale;
};

/// Sample ids generated for one anchor in the current round, in j order.
struct AnchorCandidates {
    int anchor_id = 0;
    std::vector<std::string> sample_ids;
};

/// Overfit fraction of one direction's batch.
double compute_beta(std::span<const bool> flags);
double compute_beta(const std::vector<bool>& flags);

/// Binary entropy in nats with 0·log 0 = 0. Throws DomainError outside [0, 1].
double entropy(double beta);

/// Anchors with positive entropy, highest first, ties by ascending id,
/// truncated to k.
std::vector<int> rank_top_k(std::span<const DirectionStats> stats, std::size_t k);

/// Index of the most anchor-faithful sample, preferring non-overfit ones.
/// Ties go to the lowest index. Throws EmptyBatchError on an empty batch and
/// ValidationError if the samples span more than one anchor.
std::size_t select_best_sample(std::span<const GeneratedSample> samples);

/// Top-k directions by entropy, each paired with its best sample.
/// `samples_by_anchor[i]` holds the batch for `stats[i].anchor_id`.
SelectionDecision uncertainty_select(std::span<const DirectionStats> stats,
                                     std::span<const std::vector<GeneratedSample>> samples_by_anchor,
                                     std::size_t k);

/// k distinct anchors drawn without replacement, one uniformly chosen sample
/// each. Selects every anchor when k exceeds the candidate count.
SelectionDecision random_select(std::span<const AnchorCandidates> candidates, std::size_t k,
                                std::uint64_t rng_seed);

/// Validates and wraps an externally supplied decision.
SelectionDecision human_select(std::span<const AnchorCandidates> candidates,
                               std::span<const Selection> decision, std::size_t k);

}  // namespace gal::strategy
