#include "gal/engine.hpp"

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <algorithm>
#include <cstdio>
#include <future>
#include <sstream>

#include "gal/balance.hpp"
#include "gal/hashing.hpp"
#include "gal/metrics.hpp"
#include "gal/oracle.hpp"
#include "gal/random.hpp"
#include "gal/remote_backend.hpp"
#include "gal/simulated_backend.hpp"

namespace gal {

namespace fs = std::filesystem;

std::string_view to_string(RunStatus status) {
    switch (status) {
        case RunStatus::AwaitingHuman:
            return "awaiting_human";
        case RunStatus::Stopped:
            return "stopped";
        case RunStatus::Running:
            break;
    }
    return "running";
}

namespace {

RunStatus run_status_from_string(std::string_view s) {
    if (s == "running") {
        return RunStatus::Running;
    }
    if (s == "awaiting_human") {
        return RunStatus::AwaitingHuman;
    }
    if (s == "stopped") {
        return RunStatus::Stopped;
    }
    throw ValidationError("unknown run status: " + std::string(s));
}

// ---------------------------------------------------------------------------
// Serialization

Json anchor_to_json(const AnchorDirection& a) {
    Json j;
    j["id"] = a.id;
    j["template"] = a.templ;
    j["prompt"] = a.prompt;
    j["scoring_text"] = a.scoring_text;
    j["embedding"] = to_json(a.embedding);
    return j;
}

AnchorDirection anchor_from_json(const Json& j) {
    AnchorDirection a;
    a.id = j.at("id").get<int>();
    a.templ = j.at("template").get<std::string>();
    a.prompt = j.at("prompt").get<std::string>();
    a.scoring_text = j.at("scoring_text").get<std::string>();
    a.embedding = embedding_from_json(j.at("embedding"));
    return a;
}

Json soi_to_json(const SoIDescriptor& s) {
    Json j;
    j["pseudo_token"] = s.pseudo_token;
    j["soi_embedding"] = to_json(s.soi_embedding);
    j["non_soi_text"] = s.non_soi_text;
    j["non_soi_embedding"] = to_json(s.non_soi_embedding);
    j["reference_caption_template"] = s.reference_caption_template;
    return j;
}

SoIDescriptor soi_from_json(const Json& j) {
    SoIDescriptor s;
    s.pseudo_token = j.at("pseudo_token").get<std::string>();
    s.soi_embedding = embedding_from_json(j.at("soi_embedding"));
    s.non_soi_text = j.at("non_soi_text").get<std::string>();
    s.non_soi_embedding = embedding_from_json(j.at("non_soi_embedding"));
    s.reference_caption_template = j.at("reference_caption_template").get<std::string>();
    return s;
}

std::vector<GeneratedSample> of_round(const std::vector<GeneratedSample>& all, int round) {
    std::vector<GeneratedSample> out;
    for (const auto& s : all) {
        if (s.round == round) {
            out.push_back(s);
        }
    }
    return out;
}

std::vector<std::vector<GeneratedSample>> group(const std::vector<GeneratedSample>& round_samples,
                                                std::size_t groups) {
    std::vector<std::vector<GeneratedSample>> out(groups);
    for (const auto& s : round_samples) {
        out.at(static_cast<std::size_t>(s.anchor_id)).push_back(s);
    }
    return out;
}

/// The per-round file: record plus the scores of every sample.
Json round_file_json(const RoundRecord& r, const std::vector<std::vector<GeneratedSample>>& by_anchor,
                     const std::vector<std::vector<GeneratedSample>>& by_eval,
                     const std::vector<ReferenceItem>& training_set) {
    Json j;
    j["round"] = r.round;
    auto& anchors = j["anchors"] = Json::array();
    for (std::size_t i = 0; i < r.stats.size(); ++i) {
        Json a = to_json(r.stats[i]);
        auto& samples = a["samples"] = Json::array();
        for (const auto& s : by_anchor.at(i)) {
            samples.push_back(sample_to_json(s));
        }
        anchors.push_back(std::move(a));
    }
    auto& eval = j["eval"] = Json::array();
    for (std::size_t e = 0; e < by_eval.size(); ++e) {
        Json entry;
        entry["eval_id"] = e;
        auto& samples = entry["samples"] = Json::array();
        for (const auto& s : by_eval[e]) {
            samples.push_back(sample_to_json(s));
        }
        eval.push_back(std::move(entry));
    }
    auto& sel = j["selected"] = Json::array();
    for (const auto& s : r.selected) {
        sel.push_back(to_json(s));
    }
    auto& admitted = j["admitted"] = Json::array();
    for (const auto& ref : training_set) {
        if (ref.origin == Origin::Synthetic && ref.round_added == r.round) {
            admitted.push_back({{"anchor_id", *ref.anchor_id},
                                {"sample_id", *ref.sample_id},
                                {"weight", static_cast<double>(ref.weight)}});
        }
    }
    j["delta"] = r.openness;
    j["stopped"] = r.stopped;
    j["stop_reason"] = std::string(to_string(r.stop_reason));
    j["degenerate_weight"] = r.degenerate_weight;
    j["metrics"] = r.metrics ? to_json(*r.metrics) : Json(nullptr);
    return j;
}

fs::path round_file(const fs::path& dir, int round) {
    return dir / "rounds" / ("round-" + std::to_string(round) + ".json");
}

fs::path sample_file(const fs::path& dir, int round, const std::string& group_name, int j) {
    return dir / "samples" / ("round-" + std::to_string(round)) /
           (group_name + "-" + std::to_string(j) + ".emb");
}

std::string anchor_group(int anchor_id) { return std::to_string(anchor_id); }
std::string eval_group(int eval_id) { return "eval" + std::to_string(eval_id); }

GeneratedSample sample_from_json(const Json& j, int round, int anchor_id, int index,
                                 const std::string& group_name, const fs::path& dir, std::size_t dim) {
    GeneratedSample s;
    s.sample_id = j.at("sample_id").get<std::string>();
    s.seed = j.at("seed").get<std::uint64_t>();
    s.image_ref = j.at("image_ref").get<std::string>();
    s.sim_to_anchor = static_cast<float>(j.at("sim_to_anchor").get<double>());
    s.sim_to_non_soi = static_cast<float>(j.at("sim_to_non_soi").get<double>());
    s.overfit = j.at("overfit").get<bool>();
    s.round = round;
    s.anchor_id = anchor_id;
    s.embedding = read_embedding_file(sample_file(dir, round, group_name, index + 1), dim);
    return s;
}

struct ParsedRound {
    RoundRecord record;
    std::vector<GeneratedSample> samples;
    std::vector<GeneratedSample> eval_samples;
};

ParsedRound parse_round_file(const Json& j, const fs::path& dir, std::size_t dim) {
    ParsedRound out;
    auto& r = out.record;
    r.round = j.at("round").get<int>();
    for (const auto& a : j.at("anchors")) {
        r.stats.push_back(direction_stats_from_json(a));
        const int anchor_id = r.stats.back().anchor_id;
        int idx = 0;
        for (const auto& s : a.at("samples")) {
            out.samples.push_back(sample_from_json(s, r.round, anchor_id, idx, anchor_group(anchor_id), dir, dim));
            ++idx;
        }
    }
    for (const auto& e : j.at("eval")) {
        const int eval_id = e.at("eval_id").get<int>();
        int idx = 0;
        for (const auto& s : e.at("samples")) {
            out.eval_samples.push_back(sample_from_json(s, r.round, eval_id, idx, eval_group(eval_id), dir, dim));
            ++idx;
        }
    }
    for (const auto& s : j.at("selected")) {
        r.selected.push_back(selection_from_json(s));
    }
    r.openness = j.at("delta").get<double>();
    r.stopped = j.at("stopped").get<bool>();
    r.stop_reason = stop_reason_from_string(j.at("stop_reason").get<std::string>());
    r.degenerate_weight = j.at("degenerate_weight").get<bool>();
    if (const auto& m = j.at("metrics"); !m.is_null()) {
        r.metrics = metrics_from_json(m);
    }
    return out;
}

/// Fields of state.json other than the hash; rounds live in their own files.
Json state_core_json(const RunState& s) {
    Json j;
    j["config_hash"] = s.config_hash;
    j["current_round"] = s.current_round;
    j["status"] = std::string(to_string(s.status));
    j["stop_reason"] = std::string(to_string(s.stop_reason));
    j["soi"] = soi_to_json(s.soi);
    auto& anchors = j["anchors"] = Json::array();
    for (const auto& a : s.anchors) {
        anchors.push_back(anchor_to_json(a));
    }
    auto& eval = j["eval_prompts"] = Json::array();
    for (const auto& e : s.eval_prompts) {
        eval.push_back(anchor_to_json(e));
    }
    auto& ts = j["training_set"] = Json::array();
    for (const auto& r : s.training_set) {
        ts.push_back(to_json(r));
    }
    if (s.pending) {
        const int round = s.pending->round;
        j["pending"] = round_file_json(*s.pending, group(of_round(s.samples, round), s.anchors.size()),
                                       group(of_round(s.eval_samples, round), s.eval_prompts.size()),
                                       s.training_set);
    } else {
        j["pending"] = nullptr;
    }
    j["backend"] = s.backend_snapshot;
    return j;
}

void write_sample_embeddings(const fs::path& dir, const std::vector<GeneratedSample>& samples, int round,
                             bool eval) {
    std::vector<int> counter;
    for (const auto& s : samples) {
        if (s.round != round) {
            continue;
        }
        const auto g = static_cast<std::size_t>(s.anchor_id);
        if (counter.size() <= g) {
            counter.resize(g + 1, 0);
        }
        const int j = ++counter[g];
        write_embedding_file(sample_file(dir, round, eval ? eval_group(s.anchor_id) : anchor_group(s.anchor_id), j),
                             s.embedding);
    }
}

std::string fmt_g9(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return buf;
}

}  // namespace

std::vector<std::vector<GeneratedSample>> RunState::samples_by_anchor(int round) const {
    return group(of_round(samples, round), anchors.size());
}

std::vector<GeneratedSample> RunState::eval_samples_of(int round) const {
    return of_round(eval_samples, round);
}

std::string state_hash(const RunState& s) {
    Json j = state_core_json(s);
    auto& rounds = j["rounds"] = Json::array();
    for (const auto& r : s.rounds) {
        rounds.push_back(round_file_json(r, s.samples_by_anchor(r.round),
                                         group(s.eval_samples_of(r.round), s.eval_prompts.size()),
                                         s.training_set));
    }
    auto& emb = j["sample_embeddings"] = Json::array();
    for (const auto& smp : s.samples) {
        emb.push_back({smp.sample_id, to_json(smp.embedding)});
    }
    for (const auto& smp : s.eval_samples) {
        emb.push_back({smp.sample_id, to_json(smp.embedding)});
    }
    return sha256_hex(j.dump());
}

// ---------------------------------------------------------------------------
// Backend factory

std::unique_ptr<backend::Backend> make_backend(const RunConfig& config) {
    if (config.backend.kind == BackendKind::Remote) {
        return std::make_unique<backend::RemoteBackend>(config.backend.remote,
                                                        static_cast<std::size_t>(config.embedding_dim));
    }
    backend::SimulatedWorld world;
    world.pseudo_token = config.soi.pseudo_token;
    world.non_soi_text = config.soi.non_soi_text;
    world.reference_caption = render_prompt(config.soi.reference_caption_template, config.soi.pseudo_token);
    auto add = [&](const std::string& templ) {
        world.direction_texts.push_back(
            {render_prompt(templ, config.soi.pseudo_token), scoring_text(templ, config.soi.pseudo_token)});
    };
    for (const auto& a : config.anchors) {
        add(a);
    }
    for (const auto& e : config.eval_prompts) {
        add(e);
    }
    world.reference_refs = config.references;
    return std::make_unique<backend::SimulatedBackend>(std::move(world), config.backend.simulated,
                                                       static_cast<std::size_t>(config.embedding_dim),
                                                       config.master_seed);
}

// ---------------------------------------------------------------------------
// Engine

class Engine::DirLock {
public:
    explicit DirLock(const fs::path& dir) {
        const auto path = dir / ".lock";
        fd_ = ::open(path.c_str(), O_RDWR | O_CREAT | O_CLOEXEC, 0644);
        if (fd_ < 0) {
            throw StateError("cannot open lock file " + path.string());
        }
        if (::flock(fd_, LOCK_EX | LOCK_NB) != 0) {
            ::close(fd_);
            throw StateError("run directory " + dir.string() + " is locked by another engine");
        }
    }
    DirLock(const DirLock&) = delete;
    DirLock& operator=(const DirLock&) = delete;
    ~DirLock() {
        ::flock(fd_, LOCK_UN);
        ::close(fd_);
    }

private:
    int fd_ = -1;
};

Engine::Engine(RunConfig config, std::unique_ptr<backend::Backend> backend, std::unique_ptr<DirLock> lock)
    : config_(std::move(config)), run_dir_(config_.run_dir), backend_(std::move(backend)), lock_(std::move(lock)) {}

Engine::Engine(Engine&&) noexcept = default;
Engine& Engine::operator=(Engine&&) noexcept = default;
Engine::~Engine() = default;

Engine Engine::init_run(RunConfig config, std::unique_ptr<backend::Backend> backend) {
    config.validate();
    if (config.run_dir.empty()) {
        throw ConfigError("run_dir must be set");
    }
    const fs::path dir = config.run_dir;
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) {
        throw ConfigError("cannot create run_dir " + dir.string() + ": " + ec.message());
    }
    auto lock = std::make_unique<DirLock>(dir);
    if (fs::exists(dir / "state.json")) {
        throw StateError(dir.string() + " already holds a run; resume it instead");
    }
    if (!backend) {
        backend = make_backend(config);
    }

    // The effective config goes to disk before anything else happens.
    write_text_file(dir / "config.json", to_json(config).dump(2) + "\n");

    Engine engine(std::move(config), std::move(backend), std::move(lock));
    const auto& cfg = engine.config_;
    auto& be = *engine.backend_;

    RunState s;
    s.config_hash = config_hash(cfg);
    s.soi.pseudo_token = cfg.soi.pseudo_token;
    s.soi.non_soi_text = cfg.soi.non_soi_text;
    s.soi.reference_caption_template = cfg.soi.reference_caption_template;
    s.soi.soi_embedding = be.embed_text(cfg.soi.pseudo_token);
    s.soi.non_soi_embedding = be.embed_text(cfg.soi.non_soi_text);

    auto make_direction = [&](int id, const std::string& templ) {
        AnchorDirection a;
        a.id = id;
        a.templ = templ;
        a.prompt = render_prompt(templ, cfg.soi.pseudo_token);
        a.scoring_text = cfg.strip_pseudo_token ? scoring_text(templ, cfg.soi.pseudo_token) : a.prompt;
        a.embedding = be.embed_text(a.scoring_text);
        return a;
    };
    for (std::size_t i = 0; i < cfg.anchors.size(); ++i) {
        s.anchors.push_back(make_direction(static_cast<int>(i), cfg.anchors[i]));
    }
    for (std::size_t i = 0; i < cfg.eval_prompts.size(); ++i) {
        s.eval_prompts.push_back(make_direction(static_cast<int>(i), cfg.eval_prompts[i]));
    }

    const auto caption = render_prompt(cfg.soi.reference_caption_template, cfg.soi.pseudo_token);
    for (const auto& ref : cfg.references) {
        ReferenceItem item;
        item.image_ref = ref;
        item.embedding = be.embed_image(ref);
        item.caption = caption;
        item.weight = 1.0F;
        item.origin = Origin::Original;
        item.round_added = 0;
        s.training_set.push_back(std::move(item));
    }
    s.backend_snapshot = be.snapshot();

    engine.persist(s, false);
    engine.commit(std::move(s));
    return engine;
}

Engine Engine::resume(const fs::path& run_dir, std::unique_ptr<backend::Backend> backend) {
    if (!fs::exists(run_dir / "state.json")) {
        throw PersistenceError((run_dir / "state.json").string(), "missing");
    }
    auto lock = std::make_unique<DirLock>(run_dir);

    const auto config_path = run_dir / "config.json";
    RunConfig config;
    try {
        config = config_from_json(read_json_file(config_path));
        config.validate();
    } catch (const ConfigError& e) {
        throw PersistenceError(config_path.string(), e.what());
    }
    config.run_dir = run_dir.string();

    const auto state_path = run_dir / "state.json";
    const Json sj = read_json_file(state_path);
    const auto dim = static_cast<std::size_t>(config.embedding_dim);

    RunState s;
    std::string stored_hash;
    try {
        s.config_hash = sj.at("config_hash").get<std::string>();
        s.current_round = sj.at("current_round").get<int>();
        s.status = run_status_from_string(sj.at("status").get<std::string>());
        s.stop_reason = stop_reason_from_string(sj.at("stop_reason").get<std::string>());
        s.soi = soi_from_json(sj.at("soi"));
        for (const auto& a : sj.at("anchors")) {
            s.anchors.push_back(anchor_from_json(a));
        }
        for (const auto& e : sj.at("eval_prompts")) {
            s.eval_prompts.push_back(anchor_from_json(e));
        }
        for (const auto& r : sj.at("training_set")) {
            s.training_set.push_back(reference_from_json(r));
        }
        s.backend_snapshot = sj.at("backend");
        stored_hash = sj.at("state_hash").get<std::string>();
    } catch (const PersistenceError&) {
        throw;
    } catch (const std::exception& e) {
        throw PersistenceError(state_path.string(), e.what());
    }
    if (s.config_hash != config_hash(config)) {
        throw PersistenceError(config_path.string(), "config does not match the hash recorded in state.json");
    }

    for (int r = 1; r <= s.current_round; ++r) {
        const auto path = round_file(run_dir, r);
        const Json rj = read_json_file(path);
        try {
            auto parsed = parse_round_file(rj, run_dir, dim);
            if (parsed.record.round != r) {
                throw ValidationError("round number does not match file name");
            }
            s.rounds.push_back(std::move(parsed.record));
            for (auto& smp : parsed.samples) {
                s.samples.push_back(std::move(smp));
            }
            for (auto& smp : parsed.eval_samples) {
                s.eval_samples.push_back(std::move(smp));
            }
        } catch (const PersistenceError&) {
            throw;
        } catch (const std::exception& e) {
            throw PersistenceError(path.string(), e.what());
        }
    }
    if (const auto& p = sj.at("pending"); !p.is_null()) {
        try {
            auto parsed = parse_round_file(p, run_dir, dim);
            s.pending = std::move(parsed.record);
            for (auto& smp : parsed.samples) {
                s.samples.push_back(std::move(smp));
            }
            for (auto& smp : parsed.eval_samples) {
                s.eval_samples.push_back(std::move(smp));
            }
        } catch (const PersistenceError&) {
            throw;
        } catch (const std::exception& e) {
            throw PersistenceError(state_path.string(), std::string("pending round: ") + e.what());
        }
    }
    if (state_hash(s) != stored_hash) {
        throw PersistenceError(state_path.string(), "state hash mismatch; run directory is inconsistent");
    }

    if (!backend) {
        backend = make_backend(config);
    }
    if (!s.backend_snapshot.is_null()) {
        backend->restore(s.backend_snapshot);
    }
    Engine engine(std::move(config), std::move(backend), std::move(lock));
    engine.state_ = std::move(s);
    return engine;
}

void Engine::run_round() {
    if (state_.status != RunStatus::Running) {
        throw StateError(std::string("run_round needs a running run, status is ") +
                         std::string(to_string(state_.status)));
    }
    const Json before = backend_->snapshot();
    try {
        RunState next = state_;
        const int round = next.current_round + 1;
        const auto m = static_cast<std::uint32_t>(config_.m);

        std::vector<backend::FinetuneReference> refs;
        refs.reserve(next.training_set.size());
        for (const auto& r : next.training_set) {
            refs.push_back({r.image_ref, r.caption, r.weight});
        }
        backend_->finetune(refs);

        // Generation and embedding run concurrently per direction; results
        // are joined in direction order.
        auto generate_for = [this, round, m](const AnchorDirection& dir, std::uint64_t base, bool eval) {
            const auto images = backend_->generate(dir.prompt, base, m);
            std::vector<GeneratedSample> out;
            out.reserve(images.size());
            for (std::uint32_t j = 1; j <= images.size(); ++j) {
                GeneratedSample smp;
                smp.sample_id = eval ? "r" + std::to_string(round) + "-e" + std::to_string(dir.id) + "-j" +
                                           std::to_string(j)
                                     : make_sample_id(round, dir.id, static_cast<int>(j));
                smp.anchor_id = dir.id;
                smp.round = round;
                smp.seed = sample_seed(base, j);
                smp.image_ref = images[j - 1].image_uri;
                smp.embedding = backend_->embed_image(smp.image_ref);
                out.push_back(std::move(smp));
            }
            return out;
        };
        std::vector<std::future<std::vector<GeneratedSample>>> anchor_jobs;
        for (const auto& a : next.anchors) {
            const auto base = derive_seed({config_.master_seed, static_cast<std::uint64_t>(round),
                                           static_cast<std::uint64_t>(a.id), kSaltGenerate});
            anchor_jobs.push_back(std::async(std::launch::async, generate_for, std::cref(a), base, false));
        }
        std::vector<std::future<std::vector<GeneratedSample>>> eval_jobs;
        for (const auto& e : next.eval_prompts) {
            const auto base = derive_seed({config_.master_seed, static_cast<std::uint64_t>(round),
                                           static_cast<std::uint64_t>(e.id), kSaltGenerate, 1});
            eval_jobs.push_back(std::async(std::launch::async, generate_for, std::cref(e), base, true));
        }
        std::vector<std::vector<GeneratedSample>> by_anchor;
        std::vector<std::vector<GeneratedSample>> by_eval;
        std::exception_ptr failure;
        for (auto& f : anchor_jobs) {
            try {
                by_anchor.push_back(f.get());
            } catch (...) {
                failure = failure ? failure : std::current_exception();
            }
        }
        for (auto& f : eval_jobs) {
            try {
                by_eval.push_back(f.get());
            } catch (...) {
                failure = failure ? failure : std::current_exception();
            }
        }
        if (failure) {
            std::rethrow_exception(failure);
        }

        RoundRecord record;
        record.round = round;
        for (std::size_t i = 0; i < next.anchors.size(); ++i) {
            auto& batch = by_anchor[i];
            std::vector<Embedding> embs;
            for (const auto& smp : batch) {
                embs.push_back(smp.embedding);
            }
            const auto scores = oracle::score_batch(embs, next.anchors[i].embedding, next.soi.non_soi_embedding);
            std::vector<bool> flags;
            for (std::size_t j = 0; j < batch.size(); ++j) {
                batch[j].sim_to_anchor = scores[j].sim_to_anchor;
                batch[j].sim_to_non_soi = scores[j].sim_to_non_soi;
                batch[j].overfit = scores[j].overfit;
                flags.push_back(scores[j].overfit);
            }
            DirectionStats st;
            st.anchor_id = next.anchors[i].id;
            st.beta = strategy::compute_beta(flags);
            st.entropy = strategy::entropy(st.beta);
            st.best_sample_id = batch[strategy::select_best_sample(batch)].sample_id;
            record.stats.push_back(std::move(st));
        }
        for (std::size_t e = 0; e < next.eval_prompts.size(); ++e) {
            for (auto& smp : by_eval[e]) {
                const auto sc = oracle::score(smp.embedding, next.eval_prompts[e].embedding, next.soi.non_soi_embedding);
                smp.sim_to_anchor = sc.sim_to_anchor;
                smp.sim_to_non_soi = sc.sim_to_non_soi;
                smp.overfit = sc.overfit;
            }
        }

        // Metrics on this round's generations.
        {
            std::vector<GeneratedSample> pool;
            std::vector<Embedding> prompts;
            const bool use_eval = config_.metrics_use_eval();
            const auto& groups = use_eval ? by_eval : by_anchor;
            const auto& dirs = use_eval ? next.eval_prompts : next.anchors;
            for (std::size_t i = 0; i < groups.size(); ++i) {
                for (const auto& smp : groups[i]) {
                    pool.push_back(smp);
                    prompts.push_back(dirs[i].embedding);
                }
            }
            std::vector<Embedding> originals;
            for (const auto& r : next.training_set) {
                if (r.origin == Origin::Original) {
                    originals.push_back(r.embedding);
                }
            }
            record.metrics = metrics::compute(pool, prompts, originals, static_cast<int>(dirs.size()));
        }

        for (auto& batch : by_anchor) {
            for (auto& smp : batch) {
                next.samples.push_back(std::move(smp));
            }
        }
        for (auto& batch : by_eval) {
            for (auto& smp : batch) {
                next.eval_samples.push_back(std::move(smp));
            }
        }

        const auto k = static_cast<std::size_t>(config_.k);
        strategy::SelectionDecision decision;
        switch (config_.strategy) {
            case strategy::StrategyKind::Human:
                next.pending = std::move(record);
                next.status = RunStatus::AwaitingHuman;
                next.backend_snapshot = backend_->snapshot();
                persist(next, false);
                commit(std::move(next));
                return;
            case strategy::StrategyKind::Uncertainty: {
                const auto grouped = next.samples_by_anchor(round);
                decision = strategy::uncertainty_select(record.stats, grouped, k);
                break;
            }
            case strategy::StrategyKind::Random: {
                std::vector<strategy::AnchorCandidates> cands;
                for (const auto& batch : next.samples_by_anchor(round)) {
                    strategy::AnchorCandidates c;
                    c.anchor_id = batch.front().anchor_id;
                    for (const auto& smp : batch) {
                        c.sample_ids.push_back(smp.sample_id);
                    }
                    cands.push_back(std::move(c));
                }
                decision = strategy::random_select(
                    cands, k, derive_seed({config_.master_seed, static_cast<std::uint64_t>(round), kSaltSelect}));
                break;
            }
        }
        complete_round(next, std::move(record), decision);
        commit(std::move(next));
    } catch (...) {
        backend_->restore(before);
        throw;
    }
}

void Engine::submit_human_decision(std::span<const Selection> decision) {
    if (state_.status != RunStatus::AwaitingHuman || !state_.pending) {
        throw StateError("no round is awaiting a human decision");
    }
    const auto cands = candidates();
    const auto sel = strategy::human_select(cands, decision, static_cast<std::size_t>(config_.k));
    RunState next = state_;
    RoundRecord record = std::move(*next.pending);
    next.pending.reset();
    complete_round(next, std::move(record), sel);
    commit(std::move(next));
}

void Engine::complete_round(RunState& next, RoundRecord record, const strategy::SelectionDecision& decision) {
    const int round = record.round;
    record.selected = decision.selected;
    record.openness = balance::openness(record.stats, config_.lambda);

    std::vector<ReferenceItem> drafts;
    for (const auto& pick : decision.selected) {
        const auto it = std::find_if(next.samples.begin(), next.samples.end(),
                                     [&](const GeneratedSample& s) { return s.sample_id == pick.sample_id; });
        if (it == next.samples.end()) {
            throw ValidationError("selected sample " + pick.sample_id + " does not exist");
        }
        ReferenceItem d;
        d.image_ref = it->image_ref;
        d.embedding = it->embedding;
        d.caption = next.anchors.at(static_cast<std::size_t>(pick.anchor_id)).prompt;
        d.origin = Origin::Synthetic;
        d.sample_id = it->sample_id;
        d.anchor_id = pick.anchor_id;
        drafts.push_back(std::move(d));
    }
    auto weighted = balance::weight_new_references(std::move(drafts), record.openness, config_.balance_enabled, round);
    record.degenerate_weight = weighted.degenerate;
    for (auto& item : weighted.items) {
        next.training_set.push_back(std::move(item));
    }

    const auto stop = balance::should_stop(record.stats, static_cast<std::size_t>(config_.k), round, config_.max_rounds);
    record.stopped = stop.stop;
    record.stop_reason = stop.reason;

    next.rounds.push_back(std::move(record));
    next.current_round = round;
    next.status = stop.stop ? RunStatus::Stopped : RunStatus::Running;
    next.stop_reason = stop.reason;
    next.backend_snapshot = backend_->snapshot();
    persist(next, true);
}

void Engine::persist(const RunState& next, bool round_completed) const {
    const int round = next.pending ? next.pending->round : next.current_round;
    if (round > 0 && (round_completed || next.pending)) {
        write_sample_embeddings(run_dir_, next.samples, round, false);
        write_sample_embeddings(run_dir_, next.eval_samples, round, true);
    }
    if (round_completed) {
        const auto& r = next.rounds.back();
        write_text_file(round_file(run_dir_, r.round),
                        round_file_json(r, next.samples_by_anchor(r.round),
                                        group(next.eval_samples_of(r.round), next.eval_prompts.size()),
                                        next.training_set)
                                .dump(2) +
                            "\n");
    }

    Json refs = Json::array();
    for (const auto& r : next.training_set) {
        Json j = to_json(r);
        j.erase("embedding");
        refs.push_back(std::move(j));
    }
    write_text_file(run_dir_ / "references.json", refs.dump(2) + "\n");

    if (!next.rounds.empty()) {
        Json rounds = Json::array();
        for (const auto& r : next.rounds) {
            rounds.push_back(round_file_json(r, next.samples_by_anchor(r.round),
                                             group(next.eval_samples_of(r.round), next.eval_prompts.size()),
                                             next.training_set));
        }
        write_text_file(run_dir_ / "rounds.json", rounds.dump(2) + "\n");
        metrics::emit_report(next.rounds,
                             {std::string(strategy::to_string(config_.strategy)), config_.balance_enabled}, run_dir_);
    }

    // state.json is written last; it is the commit point.
    Json sj = state_core_json(next);
    sj["state_hash"] = state_hash(next);
    write_text_file(run_dir_ / "state.json", sj.dump(2) + "\n");
}

void Engine::commit(RunState next) { state_ = std::move(next); }

void Engine::run_until_pause(const std::function<void(const RoundRecord&)>& on_round) {
    while (state_.status == RunStatus::Running) {
        run_round();
        if (on_round && !state_.rounds.empty() && state_.status != RunStatus::AwaitingHuman) {
            on_round(state_.rounds.back());
        }
    }
}

std::vector<strategy::AnchorCandidates> Engine::candidates() const {
    if (state_.status != RunStatus::AwaitingHuman || !state_.pending) {
        throw StateError("no round is awaiting a human decision");
    }
    std::vector<strategy::AnchorCandidates> out;
    for (const auto& batch : state_.samples_by_anchor(state_.pending->round)) {
        if (batch.empty()) {
            continue;
        }
        strategy::AnchorCandidates c;
        c.anchor_id = batch.front().anchor_id;
        for (const auto& s : batch) {
            c.sample_ids.push_back(s.sample_id);
        }
        out.push_back(std::move(c));
    }
    return out;
}

void Engine::export_state(ExportKind kind, std::optional<fs::path> out_dir) const {
    const fs::path dir = out_dir.value_or(run_dir_);
    switch (kind) {
        case ExportKind::Rounds:
            write_text_file(dir / "rounds.json", rounds_json().dump(2) + "\n");
            return;
        case ExportKind::TrainingSet: {
            Json refs = Json::array();
            for (const auto& r : state_.training_set) {
                Json j = to_json(r);
                j.erase("embedding");
                refs.push_back(std::move(j));
            }
            write_text_file(dir / "references.json", refs.dump(2) + "\n");
            return;
        }
        case ExportKind::Embeddings: {
            std::vector<int> rounds;
            for (const auto& r : state_.rounds) {
                rounds.push_back(r.round);
            }
            if (state_.pending) {
                rounds.push_back(state_.pending->round);
            }
            for (int r : rounds) {
                std::ostringstream os;
                os << "sample_id,anchor_id,overfit";
                for (int i = 0; i < config_.embedding_dim; ++i) {
                    os << ",e" << i;
                }
                os << '\n';
                for (const auto& s : state_.samples) {
                    if (s.round != r) {
                        continue;
                    }
                    os << s.sample_id << ',' << s.anchor_id << ',' << (s.overfit ? 1 : 0);
                    for (float v : s.embedding.values()) {
                        os << ',' << fmt_g9(v);
                    }
                    os << '\n';
                }
                write_text_file(dir / "embeddings" / ("round-" + std::to_string(r) + ".csv"), os.str());
            }
            return;
        }
    }
}

Json Engine::rounds_json() const {
    Json rounds = Json::array();
    for (const auto& r : state_.rounds) {
        rounds.push_back(round_file_json(r, state_.samples_by_anchor(r.round),
                                         group(state_.eval_samples_of(r.round), state_.eval_prompts.size()),
                                         state_.training_set));
    }
    return rounds;
}

Json Engine::run_summary_json() const {
    Json j;
    j["status"] = std::string(to_string(state_.status));
    j["stop_reason"] = std::string(to_string(state_.stop_reason));
    j["current_round"] = state_.current_round;
    j["pending_round"] = state_.pending ? Json(state_.pending->round) : Json(nullptr);
    j["config_hash"] = state_.config_hash;
    j["config"] = {{"strategy", std::string(strategy::to_string(config_.strategy))},
                   {"balance_enabled", config_.balance_enabled},
                   {"m", config_.m},
                   {"k", config_.k},
                   {"lambda", config_.lambda},
                   {"max_rounds", config_.max_rounds},
                   {"anchors", config_.anchors.size()},
                   {"backend", backend_->name()}};
    Json rounds = Json::array();
    for (const auto& r : state_.rounds) {
        rounds.push_back(to_json(r));
    }
    j["rounds"] = std::move(rounds);
    return j;
}

Json Engine::candidates_json() const {
    if (state_.status != RunStatus::AwaitingHuman || !state_.pending) {
        throw StateError("no round is awaiting a human decision");
    }
    const auto& rec = *state_.pending;
    Json j;
    j["round"] = rec.round;
    j["k"] = config_.k;
    j["delta_preview"] = balance::openness(rec.stats, config_.lambda);
    Json refs = Json::array();
    for (const auto& r : state_.training_set) {
        if (r.origin == Origin::Original) {
            refs.push_back(r.image_ref);
        }
    }
    j["references"] = std::move(refs);
    auto& anchors = j["anchors"] = Json::array();
    const auto grouped = state_.samples_by_anchor(rec.round);
    for (std::size_t i = 0; i < state_.anchors.size(); ++i) {
        Json a;
        a["anchor_id"] = state_.anchors[i].id;
        a["prompt"] = state_.anchors[i].prompt;
        a["beta"] = rec.stats[i].beta;
        a["entropy"] = rec.stats[i].entropy;
        auto& cands = a["candidates"] = Json::array();
        for (const auto& s : grouped[i]) {
            cands.push_back({{"sample_id", s.sample_id},
                             {"image_uri", s.image_ref},
                             {"sim_to_anchor", static_cast<double>(s.sim_to_anchor)},
                             {"sim_to_non_soi", static_cast<double>(s.sim_to_non_soi)},
                             {"overfit", s.overfit}});
        }
        anchors.push_back(std::move(a));
    }
    return j;
}

Json Engine::references_json() const {
    Json refs = Json::array();
    for (const auto& r : state_.training_set) {
        Json j = to_json(r);
        j.erase("embedding");
        refs.push_back(std::move(j));
    }
    return refs;
}

}  // namespace gal
