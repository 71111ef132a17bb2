#include "gal/strategy.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "gal/random.hpp"

namespace gal::strategy {

std::string_view to_string(StrategyKind kind) {
    switch (kind) {
        case StrategyKind::Random:
            return "random";
        case StrategyKind::Human:
            return "human";
        case StrategyKind::Uncertainty:
            break;
    }
    return "uncertainty";
}

StrategyKind strategy_from_string(std::string_view s) {
    if (s == "random") {
        return StrategyKind::Random;
    }
    if (s == "uncertainty") {
        return StrategyKind::Uncertainty;
    }
    if (s == "human") {
        return StrategyKind::Human;
    }
    throw ValidationError("unknown strategy: " + std::string(s));
}

double compute_beta(std::span<const bool> flags) {
    if (flags.empty()) {
        throw EmptyBatchError("compute_beta needs m >= 1");
    }
    const auto overfit = std::count(flags.begin(), flags.end(), true);
    return static_cast<double>(overfit) / static_cast<double>(flags.size());
}

double compute_beta(const std::vector<bool>& flags) {
    if (flags.empty()) {
        throw EmptyBatchError("compute_beta needs m >= 1");
    }
    const auto overfit = std::count(flags.begin(), flags.end(), true);
    return static_cast<double>(overfit) / static_cast<double>(flags.size());
}

double entropy(double beta) {
    if (!(beta >= 0.0 && beta <= 1.0)) {
        throw DomainError("entropy: beta must lie in [0, 1], got " + std::to_string(beta));
    }
    auto plogp = [](double p) { return p > 0.0 ? p * std::log(p) : 0.0; };
    const double h = -(plogp(1.0 - beta) + plogp(beta));
    return h > 0.0 ? h : 0.0;
}

std::vector<int> rank_top_k(std::span<const DirectionStats> stats, std::size_t k) {
    std::vector<const DirectionStats*> eligible;
    for (const auto& s : stats) {
        if (s.entropy > 0.0) {
            eligible.push_back(&s);
        }
    }
    std::sort(eligible.begin(), eligible.end(), [](const auto* a, const auto* b) {
        if (a->entropy != b->entropy) {
            return a->entropy > b->entropy;
        }
        return a->anchor_id < b->anchor_id;
    });
    std::vector<int> out;
    for (std::size_t i = 0; i < eligible.size() && i < k; ++i) {
        out.push_back(eligible[i]->anchor_id);
    }
    return out;
}

std::size_t select_best_sample(std::span<const GeneratedSample> samples) {
    if (samples.empty()) {
        throw EmptyBatchError("select_best_sample needs at least one sample");
    }
    const int anchor = samples.front().anchor_id;
    for (const auto& s : samples) {
        if (s.anchor_id != anchor) {
            throw ValidationError("select_best_sample: samples from more than one anchor");
        }
    }
    const bool any_clean = std::any_of(samples.begin(), samples.end(),
                                       [](const GeneratedSample& s) { return !s.overfit; });
    std::size_t best = samples.size();
    for (std::size_t i = 0; i < samples.size(); ++i) {
        if (any_clean && samples[i].overfit) {
            continue;
        }
        if (best == samples.size() || samples[i].sim_to_anchor > samples[best].sim_to_anchor) {
            best = i;
        }
    }
    return best;
}

SelectionDecision uncertainty_select(std::span<const DirectionStats> stats,
                                     std::span<const std::vector<GeneratedSample>> samples_by_anchor,
                                     std::size_t k) {
    if (stats.size() != samples_by_anchor.size()) {
        throw ValidationError("uncertainty_select: stats and sample groups differ in length");
    }
    SelectionDecision out;
    out.rationale.assign(stats.begin(), stats.end());
    for (int anchor : rank_top_k(stats, k)) {
        for (std::size_t i = 0; i < stats.size(); ++i) {
            if (stats[i].anchor_id != anchor) {
                continue;
            }
            const auto& batch = samples_by_anchor[i];
            const auto best = select_best_sample(batch);
            out.selected.push_back({anchor, batch[best].sample_id});
            break;
        }
    }
    return out;
}

SelectionDecision random_select(std::span<const AnchorCandidates> candidates, std::size_t k,
                                std::uint64_t rng_seed) {
    if (k == 0) {
        throw ValidationError("random_select: k must be >= 1");
    }
    Rng rng(rng_seed);
    std::vector<std::size_t> order(candidates.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    const std::size_t take = std::min(k, order.size());

    SelectionDecision out;
    for (std::size_t i = 0; i < take; ++i) {
        const auto j = i + static_cast<std::size_t>(rng.index(order.size() - i));
        std::swap(order[i], order[j]);
        const auto& c = candidates[order[i]];
        if (c.sample_ids.empty()) {
            continue;
        }
        const auto pick = static_cast<std::size_t>(rng.index(c.sample_ids.size()));
        out.selected.push_back({c.anchor_id, c.sample_ids[pick]});
    }
    return out;
}

SelectionDecision human_select(std::span<const AnchorCandidates> candidates,
                               std::span<const Selection> decision, std::size_t k) {
    if (decision.size() > k) {
        throw ValidationError("decision names " + std::to_string(decision.size()) +
                              " pairs but at most k=" + std::to_string(k) + " are allowed");
    }
    std::set<int> seen;
    for (const auto& pick : decision) {
        const auto it = std::find_if(candidates.begin(), candidates.end(),
                                     [&](const AnchorCandidates& c) { return c.anchor_id == pick.anchor_id; });
        if (it == candidates.end()) {
            throw ValidationError("unknown anchor id " + std::to_string(pick.anchor_id));
        }
        if (std::find(it->sample_ids.begin(), it->sample_ids.end(), pick.sample_id) ==
            it->sample_ids.end()) {
            throw ValidationError("sample '" + pick.sample_id + "' is not a candidate of anchor " +
                                  std::to_string(pick.anchor_id));
        }
        if (!seen.insert(pick.anchor_id).second) {
            throw ValidationError("anchor " + std::to_string(pick.anchor_id) + " selected twice");
        }
    }
    SelectionDecision out;
    out.selected.assign(decision.begin(), decision.end());
    return out;
}

}  // namespace gal::strategy
