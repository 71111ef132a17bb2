// gal: operator entry point for generative active-learning runs.

#include <csignal>
#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <thread>

#include <pthread.h>
#include <unistd.h>

#include <CLI11.hpp>

#include "gal/config.hpp"
#include "gal/engine.hpp"
#include "gal/experiments.hpp"
#include "gal/review_server.hpp"
#include "gal/simulated_backend.hpp"
#include "gal/toml_lite.hpp"

namespace fs = std::filesystem;
using namespace gal;

namespace {

enum Exit : int { kOk = 0, kConfig = 1, kBackend = 2, kNeedsHuman = 3 };

struct CommonOpts {
    std::string config_path;
    std::string run_dir;
    std::vector<std::string> sets;
    std::string strategy;
    bool no_balance = false;
    std::optional<std::uint64_t> seed;
    std::optional<int> rounds;
};

void add_common(CLI::App* app, CommonOpts& o, bool strategy_flags) {
    app->add_option("-c,--config", o.config_path, "TOML or JSON run config (default: built-in simulated setup)");
    app->add_option("--run-dir", o.run_dir, "Run directory (default: config run_dir, then $GAL_RUN_DIR)");
    app->add_option("--set", o.sets, "Override any config field, e.g. --set backend.sigma=0.1")
        ->type_name("KEY=VALUE");
    if (strategy_flags) {
        app->add_option("--strategy", o.strategy, "random | uncertainty | human");
        app->add_flag("--no-balance", o.no_balance, "Admit synthetic references with weight 1.0");
    }
    app->add_option("--seed", o.seed, "Master seed");
    app->add_option("--rounds", o.rounds, "Round cap (max_rounds)");
}

/// Folds a KEY=VALUE override into the config JSON. The value is read as a
/// TOML value, falling back to a bare string.
void apply_set(Json& cfg, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0) {
        throw ConfigError("--set expects KEY=VALUE, got \"" + assignment + "\"");
    }
    const std::string key = assignment.substr(0, eq);
    const std::string value = assignment.substr(eq + 1);
    Json patch;
    try {
        patch = parse_toml(key + " = " + value);
    } catch (const ConfigError&) {
        Json quoted = value;
        patch = parse_toml(key + " = " + quoted.dump());
    }
    if (patch.contains("backend") && patch["backend"].contains("kind") && cfg.contains("backend") &&
        patch["backend"]["kind"] != cfg["backend"].value("kind", "")) {
        cfg["backend"] = Json::object();
    }
    cfg.merge_patch(patch);
}

RunConfig resolve_config(const CommonOpts& o) {
    RunConfig base = o.config_path.empty() ? default_simulated_config() : load_config_file(o.config_path);
    Json j = to_json(base);
    for (const auto& s : o.sets) {
        apply_set(j, s);
    }
    RunConfig c = config_from_json(j);
    if (!o.strategy.empty()) {
        c.strategy = strategy::strategy_from_string(o.strategy);
    }
    if (o.no_balance) {
        c.balance_enabled = false;
    }
    if (o.seed) {
        c.master_seed = *o.seed;
    }
    if (o.rounds) {
        c.max_rounds = *o.rounds;
    }
    if (!o.run_dir.empty()) {
        c.run_dir = o.run_dir;
    } else if (c.run_dir.empty()) {
        const char* env = std::getenv("GAL_RUN_DIR");
        c.run_dir = env && *env ? env : "gal-run";
    }
    c.validate();
    return c;
}

fs::path resolve_run_dir(const std::string& flag) {
    if (!flag.empty()) {
        return flag;
    }
    const char* env = std::getenv("GAL_RUN_DIR");
    if (env && *env) {
        return env;
    }
    throw ConfigError("no run directory; pass --run-dir or set GAL_RUN_DIR");
}

std::string cell(double v, const char* fmt = "%.6f") {
    char buf[32];
    std::snprintf(buf, sizeof buf, fmt, v);
    return buf;
}

void print_table_header() {
    std::printf("%5s  %9s  %9s  %9s  %11s  %8s  %9s  %s\n", "round", "txt_aln", "img_aln", "ovf", "delta",
                "selected", "mean_g", "stop");
}

void print_round(const RoundRecord& r, Engine& engine) {
    const auto m = r.metrics.value_or(MetricsTriple{});
    std::string g = "-";
    if (const auto* sim = dynamic_cast<const backend::SimulatedBackend*>(&engine.backend())) {
        g = cell(sim->mean_alignment());
    }
    std::printf("%5d  %9s  %9s  %9s  %11s  %8zu  %9s  %s%s\n", r.round, cell(m.txt_aln).c_str(),
                cell(m.img_aln).c_str(), cell(m.ovf).c_str(), cell(r.openness, "%.8f").c_str(), r.selected.size(),
                g.c_str(), r.stopped ? std::string(to_string(r.stop_reason)).c_str() : "-",
                r.degenerate_weight ? "  (zero delta, nothing admitted)" : "");
    std::fflush(stdout);
}

void print_summary(const Engine& engine) {
    const auto& st = engine.state();
    std::printf("status: %s", std::string(to_string(st.status)).c_str());
    if (st.status == RunStatus::Stopped) {
        std::printf(" (%s)", std::string(to_string(st.stop_reason)).c_str());
    }
    std::printf("  rounds: %d  references: %zu  run_dir: %s\n", st.current_round, st.training_set.size(),
                engine.run_dir().c_str());
}

/// SIGINT/SIGTERM are blocked in every thread and collected here, so a
/// signal never interrupts a half-written round.
class SignalWatcher {
public:
    SignalWatcher() {
        // Background jobs may inherit SIGINT as ignored; sigwait never sees those.
        std::signal(SIGINT, SIG_DFL);
        std::signal(SIGTERM, SIG_DFL);
        sigemptyset(&set_);
        sigaddset(&set_, SIGINT);
        sigaddset(&set_, SIGTERM);
        sigaddset(&set_, SIGUSR1);
        pthread_sigmask(SIG_BLOCK, &set_, nullptr);
    }
    ~SignalWatcher() {
        if (thread_.joinable()) {
            pthread_kill(thread_.native_handle(), SIGUSR1);
            thread_.join();
        }
    }
    void on_signal(std::function<void()> fn) {
        thread_ = std::thread([this, fn = std::move(fn)] {
            int sig = 0;
            sigwait(&set_, &sig);
            if (sig != SIGUSR1) {
                signalled_ = true;
                fn();
            }
        });
    }
    bool signalled() const { return signalled_; }

private:
    sigset_t set_{};
    std::thread thread_;
    std::atomic<bool> signalled_{false};
};

/// Serves the review API while driving `engine`. Returns the exit code.
int serve_engine(Engine& engine, const std::string& bind, const std::string& ui_dir,
                 std::optional<double> human_timeout_s, bool linger) {
    SignalWatcher signals;
    const auto [host, port] = parse_bind_address(bind);
    std::optional<fs::path> ui;
    if (!ui_dir.empty()) {
        ui = ui_dir;
    }
    ReviewServer server(engine, ui);
    server.bind(host, port);
    server.start();
    std::printf("review API on http://%s:%d/api/run\n", host.c_str(), server.port());
    std::fflush(stdout);
    signals.on_signal([&server] { server.stop(); });

    std::optional<std::chrono::milliseconds> timeout;
    if (human_timeout_s) {
        timeout = std::chrono::milliseconds(static_cast<long long>(*human_timeout_s * 1000.0));
    }
    const auto status = server.drive(timeout);

    if (!engine.state().rounds.empty()) {
        print_table_header();
        for (const auto& r : engine.state().rounds) {
            print_round(r, engine);
        }
    }
    print_summary(engine);

    if (status == RunStatus::Stopped && linger && !signals.signalled()) {
        std::printf("run finished; still serving until interrupted\n");
        std::fflush(stdout);
        while (!signals.signalled()) {
            std::this_thread::sleep_for(std::chrono::milliseconds(100));
        }
    }
    server.stop();
    if (status == RunStatus::AwaitingHuman && !(linger && signals.signalled())) {
        std::fprintf(stderr, "round %d is still waiting for a review decision; state is saved, continue with "
                             "`gal resume --serve`\n",
                     engine.state().pending->round);
        return kNeedsHuman;
    }
    return kOk;
}

int guarded(const std::function<int()>& body) {
    try {
        return body();
    } catch (const BackendError& e) {
        std::fprintf(stderr, "backend error: %s", e.what());
        if (e.status() != 0) {
            std::fprintf(stderr, " (status %d after %d attempt(s))", e.status(), e.attempts());
        }
        std::fprintf(stderr, "\n");
        return kBackend;
    } catch (const ProtocolError& e) {
        std::fprintf(stderr, "backend protocol error: %s\n", e.what());
        return kBackend;
    } catch (const BindError& e) {
        std::fprintf(stderr, "%s\n", e.what());
        return kBackend;
    } catch (const StateError& e) {
        std::fprintf(stderr, "%s\n", e.what());
        return kConfig;
    } catch (const Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kConfig;
    }
}

std::vector<std::string> split_list(const std::vector<std::string>& raw) {
    std::vector<std::string> out;
    for (const auto& item : raw) {
        std::size_t start = 0;
        while (start <= item.size()) {
            const auto comma = item.find(',', start);
            const auto piece = item.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
            if (!piece.empty()) {
                out.push_back(piece);
            }
            if (comma == std::string::npos) {
                break;
            }
            start = comma + 1;
        }
    }
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Generative active learning for image-synthesis personalization"};
    app.require_subcommand(1);

    // run
    CommonOpts run_opts;
    std::string run_serve, run_ui;
    std::optional<double> run_timeout;
    auto* run = app.add_subcommand("run", "Start a run and drive it until it stops");
    add_common(run, run_opts, true);
    run->add_option("--serve", run_serve, "Serve the review API on HOST:PORT (needed for --strategy human)");
    run->add_option("--ui-dir", run_ui, "Static review UI assets");
    run->add_option("--human-timeout", run_timeout, "Seconds to wait for a review decision before exiting 3");

    // resume
    std::string resume_dir, resume_serve, resume_ui;
    std::optional<double> resume_timeout;
    auto* resume = app.add_subcommand("resume", "Continue a run from its run directory");
    resume->add_option("--run-dir", resume_dir, "Run directory (default: $GAL_RUN_DIR)");
    resume->add_option("--serve", resume_serve, "Serve the review API on HOST:PORT");
    resume->add_option("--ui-dir", resume_ui, "Static review UI assets");
    resume->add_option("--human-timeout", resume_timeout, "Seconds to wait for a review decision");

    // compare
    CommonOpts cmp_opts;
    std::vector<std::string> cmp_strategies{"random", "uncertainty", "uncertainty+balance"};
    int cmp_seeds = 10;
    std::string cmp_out;
    auto* compare = app.add_subcommand("compare", "Run several strategies over seeds and tabulate final metrics");
    add_common(compare, cmp_opts, false);
    compare->add_option("--strategies", cmp_strategies, "Comma-separated, e.g. random,uncertainty+balance")
        ->delimiter(',');
    compare->add_option("--seeds", cmp_seeds, "Number of seeds")->capture_default_str();
    compare->add_option("--out", cmp_out, "Output directory (default: run dir)");

    // sweep
    CommonOpts sw_opts;
    std::string sw_param;
    std::vector<std::string> sw_values;
    int sw_seeds = 10;
    std::string sw_out;
    auto* sweep = app.add_subcommand("sweep", "Vary one hyperparameter and tabulate mean final metrics");
    add_common(sweep, sw_opts, true);
    sweep->add_option("--param", sw_param, "lambda | k | anchors")->required();
    sweep->add_option("--values", sw_values, "Comma-separated values")->delimiter(',');
    sweep->add_option("--seeds", sw_seeds, "Seeds per value")->capture_default_str();
    sweep->add_option("--out", sw_out, "Output directory (default: run dir)");

    // serve
    CommonOpts srv_opts;
    std::string srv_bind = "127.0.0.1:8077", srv_ui;
    auto* serve = app.add_subcommand("serve", "Host the review API for a run (starts or resumes it)");
    add_common(serve, srv_opts, true);
    serve->add_option("--bind", srv_bind, "HOST:PORT")->capture_default_str();
    serve->add_option("--ui-dir", srv_ui, "Static review UI assets");

    // export
    std::string exp_dir, exp_kind = "rounds", exp_out;
    auto* exp = app.add_subcommand("export", "Write embeddings, rounds or the training set from a run");
    exp->add_option("--run-dir", exp_dir, "Run directory (default: $GAL_RUN_DIR)");
    exp->add_option("--kind", exp_kind, "embeddings | rounds | training-set")->capture_default_str();
    exp->add_option("--out", exp_out, "Output directory (default: run dir)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kConfig;
    }

    if (*run) {
        return guarded([&] {
            const auto cfg = resolve_config(run_opts);
            if (cfg.strategy == strategy::StrategyKind::Human && run_serve.empty()) {
                std::fprintf(stderr,
                             "the human strategy needs a reviewer: add --serve HOST:PORT and open the review UI,\n"
                             "or use `gal serve`. Nothing was started.\n");
                return static_cast<int>(kNeedsHuman);
            }
            if (!run_serve.empty()) {
                const auto [host, port] = parse_bind_address(run_serve);
                ensure_bindable(host, port);
            }
            auto engine = Engine::init_run(cfg);
            if (!run_serve.empty()) {
                return serve_engine(engine, run_serve, run_ui, run_timeout, false);
            }
            print_table_header();
            engine.run_until_pause([&](const RoundRecord& r) { print_round(r, engine); });
            print_summary(engine);
            return static_cast<int>(kOk);
        });
    }
    if (*resume) {
        return guarded([&] {
            auto engine = Engine::resume(resolve_run_dir(resume_dir));
            if (!resume_serve.empty()) {
                return serve_engine(engine, resume_serve, resume_ui, resume_timeout, false);
            }
            if (engine.state().status == RunStatus::AwaitingHuman) {
                std::fprintf(stderr, "round %d awaits a review decision; resume with --serve HOST:PORT\n",
                             engine.state().pending->round);
                return static_cast<int>(kNeedsHuman);
            }
            print_table_header();
            for (const auto& r : engine.state().rounds) {
                print_round(r, engine);
            }
            engine.run_until_pause([&](const RoundRecord& r) { print_round(r, engine); });
            print_summary(engine);
            return static_cast<int>(kOk);
        });
    }
    if (*compare) {
        return guarded([&] {
            const auto cfg = resolve_config(cmp_opts);
            std::vector<experiments::Variant> variants;
            for (const auto& s : split_list(cmp_strategies)) {
                variants.push_back(experiments::parse_variant(s));
            }
            const fs::path out = cmp_out.empty() ? fs::path(cfg.run_dir) : fs::path(cmp_out);
            const auto outcomes = experiments::compare(cfg, variants, cmp_seeds, out);
            const auto csv = experiments::render_comparison_csv(outcomes, variants);
            write_text_file(out / "comparison.csv", csv);
            std::cout << csv << "wrote " << (out / "comparison.csv").string() << '\n';
            return static_cast<int>(kOk);
        });
    }
    if (*sweep) {
        return guarded([&] {
            const auto param = experiments::parse_sweep_param(sw_param);
            const auto cfg = resolve_config(sw_opts);
            const fs::path out = sw_out.empty() ? fs::path(cfg.run_dir) : fs::path(sw_out);
            const auto rows = experiments::sweep(cfg, param, split_list(sw_values), sw_seeds, out);
            const auto csv = experiments::render_sweep_csv(param, rows);
            write_text_file(out / "sweep.csv", csv);
            std::cout << csv << "wrote " << (out / "sweep.csv").string() << '\n';
            return static_cast<int>(kOk);
        });
    }
    if (*serve) {
        return guarded([&] {
            const auto cfg = resolve_config(srv_opts);
            // Check the address before touching the run directory.
            const auto [host, port] = parse_bind_address(srv_bind);
            ensure_bindable(host, port);
            auto engine = fs::exists(fs::path(cfg.run_dir) / "state.json") ? Engine::resume(cfg.run_dir)
                                                                             : Engine::init_run(cfg);
            return serve_engine(engine, srv_bind, srv_ui, std::nullopt, true);
        });
    }
    if (*exp) {
        return guarded([&] {
            ExportKind kind;
            if (exp_kind == "embeddings") {
                kind = ExportKind::Embeddings;
            } else if (exp_kind == "rounds") {
                kind = ExportKind::Rounds;
            } else if (exp_kind == "training-set") {
                kind = ExportKind::TrainingSet;
            } else {
                throw ConfigError("unknown export kind \"" + exp_kind + "\"");
            }
            const auto dir = resolve_run_dir(exp_dir);
            auto engine = Engine::resume(dir);
            std::optional<fs::path> out;
            if (!exp_out.empty()) {
                out = exp_out;
            }
            engine.export_state(kind, out);
            return static_cast<int>(kOk);
        });
    }
    return kConfig;
}
