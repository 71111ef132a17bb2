#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "gal/json_io.hpp"
#include "gal/strategy.hpp"

namespace gal {

struct SoISpec {
    std::string pseudo_token = "S*";
    std::string non_soi_text;
    std::string reference_caption_template;
};

/// Knobs of the simulated generative model.
struct SimulatedConfig {
    double sigma = 0.05;
    double base_gain = 0.15;
    double weight_scale = 10.0;
    double g_min = 0.1;
    double g_max = 0.6;
    std::optional<double> g_init;  // overrides the uniform draw when set
    /// Scale of the pull towards the non-SoI caused by admitting an overfit
    /// sample. Zero gives a purely monotone learner.
    double overfit_penalty = 1.0;
};

struct RemoteConfig {
    std::string endpoint;
    int timeout_ms = 30000;
    int max_attempts = 3;
    int backoff_ms = 200;
    int poll_interval_ms = 100;
    int job_timeout_ms = 600000;
};

enum class BackendKind { Simulated, Remote };

struct BackendConfig {
    BackendKind kind = BackendKind::Simulated;
    SimulatedConfig simulated;
    RemoteConfig remote;
};

enum class MetricsSource { Auto, Eval, Anchors };

struct RunConfig {
    SoISpec soi;
    std::vector<std::string> anchors;
    std::vector<std::string> references;
    std::vector<std::string> eval_prompts;
    int m = 10;
    int k = 3;
    double lambda = 0.005;
    int max_rounds = 4;
    strategy::StrategyKind strategy = strategy::StrategyKind::Uncertainty;
    bool balance_enabled = true;
    BackendConfig backend;
    std::uint64_t master_seed = 0;
    int embedding_dim = 64;
    std::string run_dir;
    bool strip_pseudo_token = true;
    MetricsSource metrics_on = MetricsSource::Auto;

    /// Throws ConfigError describing the first invalid field.
    void validate() const;

    /// True when metrics are computed on the eval prompt pool.
    bool metrics_use_eval() const;
};

/// Canonical JSON form; key order is fixed so the dump is stable.
Json to_json(const RunConfig& c);

/// Inverse of to_json. Missing optional keys take their defaults; unknown
/// keys are rejected with ConfigError.
RunConfig config_from_json(const Json& j);

RunConfig load_config_file(const std::filesystem::path& path);

/// SHA-256 over the canonical JSON with `run_dir` removed, so the same run
/// set up in two directories hashes the same.
std::string config_hash(const RunConfig& c);

/// A ready-made simulated setup: style anchor bank, one reference.
RunConfig default_simulated_config();

}  // namespace gal
