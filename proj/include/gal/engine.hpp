#pragma once

#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "gal/backend.hpp"
#include "gal/config.hpp"
#include "gal/core.hpp"
#include "gal/strategy.hpp"

namespace gal {

enum class RunStatus { Running, AwaitingHuman, Stopped };

std::string_view to_string(RunStatus status);

/// Everything a run has produced so far. Value type; the engine swaps in a
/// new state only once a step has fully succeeded.
struct RunState {
    std::string config_hash;
    int current_round = 0;  // last completed round
    RunStatus status = RunStatus::Running;
    StopReason stop_reason = StopReason::None;
    SoIDescriptor soi;
    std::vector<AnchorDirection> anchors;
    std::vector<AnchorDirection> eval_prompts;
    std::vector<ReferenceItem> training_set;
    std::vector<RoundRecord> rounds;
    std::vector<GeneratedSample> samples;       // anchor samples of every round
    std::vector<GeneratedSample> eval_samples;  // anchor_id holds the eval prompt index
    std::optional<RoundRecord> pending;         // set while AwaitingHuman
    Json backend_snapshot;

    /// Samples of `round` grouped by anchor, in anchor then j order.
    std::vector<std::vector<GeneratedSample>> samples_by_anchor(int round) const;
    std::vector<GeneratedSample> eval_samples_of(int round) const;
};

/// SHA-256 over the canonical serialization of the whole state, sample
/// embeddings included.
std::string state_hash(const RunState& state);

enum class ExportKind { Embeddings, Rounds, TrainingSet };

/// Builds the backend a config asks for.
std::unique_ptr<backend::Backend> make_backend(const RunConfig& config);

/// Owns one run directory and drives the active-learning loop over it.
///
/// Round steps: fine-tune on the training set, generate m samples per
/// anchor, score them with the oracle, compute per-direction entropy,
/// select, weight the admissions by openness, and check the stop rule.
/// The state on disk only moves forward when a step has completed; a
/// failing backend call leaves both memory and disk at the previous round.
class Engine {
public:
    Engine(Engine&&) noexcept;
    Engine& operator=(Engine&&) noexcept;
    ~Engine();

    /// Starts a fresh run. Pass a backend to override the one the config
    /// describes (tests, stubs). Throws ConfigError, BackendError, or
    /// StateError if `run_dir` already holds a run or is locked.
    static Engine init_run(RunConfig config, std::unique_ptr<backend::Backend> backend = nullptr);

    /// Reloads a run directory. Throws PersistenceError naming the bad file.
    static Engine resume(const std::filesystem::path& run_dir,
                         std::unique_ptr<backend::Backend> backend = nullptr);

    const RunState& state() const noexcept { return state_; }
    const RunConfig& config() const noexcept { return config_; }
    backend::Backend& backend() noexcept { return *backend_; }
    const std::filesystem::path& run_dir() const noexcept { return run_dir_; }

    /// Runs one round. Requires status Running.
    void run_round();

    /// Completes a round paused for human review. Requires AwaitingHuman;
    /// throws ValidationError for bad decisions.
    void submit_human_decision(std::span<const Selection> decision);

    /// Runs rounds until the run stops or pauses for a human.
    void run_until_pause(const std::function<void(const RoundRecord&)>& on_round = {});

    /// Candidates of the paused round. Throws StateError when not paused.
    std::vector<strategy::AnchorCandidates> candidates() const;

    /// Writes export artifacts under `out_dir` (defaults to the run dir).
    void export_state(ExportKind kind, std::optional<std::filesystem::path> out_dir = std::nullopt) const;

    Json run_summary_json() const;
    Json candidates_json() const;
    Json references_json() const;
    Json rounds_json() const;

private:
    class DirLock;

    Engine(RunConfig config, std::unique_ptr<backend::Backend> backend, std::unique_ptr<DirLock> lock);

    void complete_round(RunState& next, RoundRecord record, const strategy::SelectionDecision& decision);
    void persist(const RunState& next, bool round_completed) const;
    void commit(RunState next);

    RunConfig config_;
    std::filesystem::path run_dir_;
    std::unique_ptr<backend::Backend> backend_;
    std::unique_ptr<DirLock> lock_;
    RunState state_;
};

}  // namespace gal
