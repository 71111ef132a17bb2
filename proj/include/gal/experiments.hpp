#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "gal/config.hpp"
#include "gal/engine.hpp"

namespace gal::experiments {

/// A strategy plus the balance switch, e.g. "uncertainty+balance".
struct Variant {
    strategy::StrategyKind kind = strategy::StrategyKind::Uncertainty;
    bool balance = false;

    std::string label() const;
};

/// Accepts random, uncertainty, optionally suffixed with "+balance".
/// Throws ConfigError for anything else, human included.
Variant parse_variant(const std::string& name);

struct Outcome {
    std::string label;
    std::uint64_t seed = 0;
    int rounds = 0;
    RunStatus status = RunStatus::Running;
    StopReason stop_reason = StopReason::None;
    MetricsTriple first;  // round 1
    MetricsTriple final;  // last completed round
    std::optional<double> mean_g;  // simulated backend only
};

/// Runs a fresh simulated run to completion in `config.run_dir`, replacing
/// whatever an earlier experiment left there.
Outcome run_to_completion(RunConfig config);

/// Every variant over seeds master_seed, master_seed+1, ...; run dirs go
/// under out_dir/runs. Throws ConfigError for a remote backend.
std::vector<Outcome> compare(const RunConfig& base, const std::vector<Variant>& variants, int seeds,
                             const std::filesystem::path& out_dir);

/// One row per outcome, then one "mean" row per variant.
std::string render_comparison_csv(const std::vector<Outcome>& outcomes, const std::vector<Variant>& variants);

enum class SweepParam { Lambda, K, Anchors };

SweepParam parse_sweep_param(const std::string& name);

struct SweepRow {
    std::string value;
    int seeds = 0;
    double mean_rounds = 0.0;
    MetricsTriple mean_final;
};

/// Applies each value to the base config and averages `seeds` runs.
/// Throws ConfigError on an empty value list or an invalid value.
std::vector<SweepRow> sweep(const RunConfig& base, SweepParam param, const std::vector<std::string>& values,
                            int seeds, const std::filesystem::path& out_dir);

std::string render_sweep_csv(SweepParam param, const std::vector<SweepRow>& rows);

}  // namespace gal::experiments
