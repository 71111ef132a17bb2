#include "gal/experiments.hpp"

#include <cstdio>
#include <sstream>

#include "gal/simulated_backend.hpp"

namespace gal::experiments {

namespace fs = std::filesystem;

std::string Variant::label() const {
    std::string s(strategy::to_string(kind));
    if (balance) {
        s += "+balance";
    }
    return s;
}

Variant parse_variant(const std::string& name) {
    Variant v;
    std::string base = name;
    constexpr std::string_view suffix = "+balance";
    if (base.size() > suffix.size() && base.compare(base.size() - suffix.size(), suffix.size(), suffix) == 0) {
        v.balance = true;
        base.resize(base.size() - suffix.size());
    }
    if (base == "random") {
        v.kind = strategy::StrategyKind::Random;
    } else if (base == "uncertainty") {
        v.kind = strategy::StrategyKind::Uncertainty;
    } else {
        throw ConfigError("unknown strategy \"" + name +
                          "\"; expected random or uncertainty, optionally with +balance");
    }
    return v;
}

Outcome run_to_completion(RunConfig config) {
    if (config.backend.kind != BackendKind::Simulated) {
        throw ConfigError("experiments need the simulated backend");
    }
    if (config.strategy == strategy::StrategyKind::Human) {
        throw ConfigError("experiments cannot use the human strategy");
    }
    const fs::path dir = config.run_dir;
    std::error_code ec;
    fs::remove_all(dir, ec);

    Outcome out;
    out.seed = config.master_seed;
    out.label = Variant{config.strategy, config.balance_enabled}.label();

    auto engine = Engine::init_run(std::move(config));
    engine.run_until_pause();
    const auto& st = engine.state();
    out.rounds = st.current_round;
    out.status = st.status;
    out.stop_reason = st.stop_reason;
    if (!st.rounds.empty()) {
        out.first = st.rounds.front().metrics.value_or(MetricsTriple{});
        out.final = st.rounds.back().metrics.value_or(MetricsTriple{});
    }
    if (const auto* sim = dynamic_cast<const backend::SimulatedBackend*>(&engine.backend())) {
        out.mean_g = sim->mean_alignment();
    }
    return out;
}

std::vector<Outcome> compare(const RunConfig& base, const std::vector<Variant>& variants, int seeds,
                             const fs::path& out_dir) {
    if (base.backend.kind != BackendKind::Simulated) {
        throw ConfigError("compare needs the simulated backend; a remote backend would launch " +
                          std::to_string(seeds * static_cast<int>(variants.size())) + " fine-tuning runs");
    }
    if (seeds < 1) {
        throw ConfigError("seeds must be >= 1");
    }
    if (variants.empty()) {
        throw ConfigError("no strategies given");
    }
    std::vector<Outcome> out;
    for (const auto& v : variants) {
        for (int i = 0; i < seeds; ++i) {
            RunConfig cfg = base;
            cfg.strategy = v.kind;
            cfg.balance_enabled = v.balance;
            cfg.master_seed = base.master_seed + static_cast<std::uint64_t>(i);
            cfg.run_dir = (out_dir / "runs" / v.label() / ("seed-" + std::to_string(cfg.master_seed))).string();
            out.push_back(run_to_completion(std::move(cfg)));
        }
    }
    return out;
}

namespace {

std::string f8(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.8f", v);
    return buf;
}

}  // namespace

std::string render_comparison_csv(const std::vector<Outcome>& outcomes, const std::vector<Variant>& variants) {
    std::ostringstream os;
    os << "strategy,seed,rounds,stop_reason,txt_aln,img_aln,ovf,round1_ovf,mean_g\n";
    for (const auto& o : outcomes) {
        os << o.label << ',' << o.seed << ',' << o.rounds << ',' << to_string(o.stop_reason) << ','
           << f8(o.final.txt_aln) << ',' << f8(o.final.img_aln) << ',' << f8(o.final.ovf) << ','
           << f8(o.first.ovf) << ',' << (o.mean_g ? f8(*o.mean_g) : "") << '\n';
    }
    for (const auto& v : variants) {
        const auto label = v.label();
        double rounds = 0, txt = 0, img = 0, ovf = 0, ovf1 = 0, g = 0;
        int n = 0;
        bool have_g = true;
        for (const auto& o : outcomes) {
            if (o.label != label) {
                continue;
            }
            ++n;
            rounds += o.rounds;
            txt += o.final.txt_aln;
            img += o.final.img_aln;
            ovf += o.final.ovf;
            ovf1 += o.first.ovf;
            have_g = have_g && o.mean_g.has_value();
            g += o.mean_g.value_or(0.0);
        }
        if (n == 0) {
            continue;
        }
        os << label << ",mean," << f8(rounds / n) << ",," << f8(txt / n) << ',' << f8(img / n) << ','
           << f8(ovf / n) << ',' << f8(ovf1 / n) << ',' << (have_g ? f8(g / n) : "") << '\n';
    }
    return os.str();
}

SweepParam parse_sweep_param(const std::string& name) {
    if (name == "lambda") {
        return SweepParam::Lambda;
    }
    if (name == "k") {
        return SweepParam::K;
    }
    if (name == "anchors") {
        return SweepParam::Anchors;
    }
    throw ConfigError("unsupported sweep parameter \"" + name + "\"; expected lambda, k or anchors");
}

namespace {

std::string_view param_name(SweepParam p) {
    switch (p) {
        case SweepParam::K:
            return "k";
        case SweepParam::Anchors:
            return "anchors";
        case SweepParam::Lambda:
            break;
    }
    return "lambda";
}

void apply(RunConfig& cfg, SweepParam param, const std::string& value) {
    try {
        std::size_t used = 0;
        switch (param) {
            case SweepParam::Lambda:
                cfg.lambda = std::stod(value, &used);
                break;
            case SweepParam::K:
                cfg.k = std::stoi(value, &used);
                break;
            case SweepParam::Anchors: {
                const int n = std::stoi(value, &used);
                if (n < 1 || static_cast<std::size_t>(n) > cfg.anchors.size()) {
                    throw ConfigError("anchors value " + value + " outside [1, " +
                                      std::to_string(cfg.anchors.size()) + "]");
                }
                cfg.anchors.resize(static_cast<std::size_t>(n));
                if (static_cast<std::size_t>(cfg.k) > cfg.anchors.size()) {
                    cfg.k = n;
                }
                break;
            }
        }
        if (used != value.size()) {
            throw ConfigError("");
        }
    } catch (const ConfigError& e) {
        if (*e.what() != '\0') {
            throw;
        }
        throw ConfigError("bad " + std::string(param_name(param)) + " value \"" + value + "\"");
    } catch (const std::exception&) {
        throw ConfigError("bad " + std::string(param_name(param)) + " value \"" + value + "\"");
    }
    cfg.validate();
}

}  // namespace

std::vector<SweepRow> sweep(const RunConfig& base, SweepParam param, const std::vector<std::string>& values,
                            int seeds, const fs::path& out_dir) {
    if (values.empty()) {
        throw ConfigError("sweep needs at least one value");
    }
    if (base.backend.kind != BackendKind::Simulated) {
        throw ConfigError("sweep needs the simulated backend");
    }
    if (seeds < 1) {
        throw ConfigError("seeds must be >= 1");
    }
    // Validate every value before spending time on runs.
    std::vector<RunConfig> configs;
    for (const auto& v : values) {
        RunConfig cfg = base;
        apply(cfg, param, v);
        configs.push_back(std::move(cfg));
    }
    std::vector<SweepRow> rows;
    for (std::size_t i = 0; i < values.size(); ++i) {
        SweepRow row;
        row.value = values[i];
        row.seeds = seeds;
        for (int s = 0; s < seeds; ++s) {
            RunConfig cfg = configs[i];
            cfg.master_seed = base.master_seed + static_cast<std::uint64_t>(s);
            cfg.run_dir = (out_dir / "runs" / (std::string(param_name(param)) + "-" + values[i]) /
                           ("seed-" + std::to_string(cfg.master_seed)))
                              .string();
            const auto o = run_to_completion(std::move(cfg));
            row.mean_rounds += o.rounds;
            row.mean_final.txt_aln += o.final.txt_aln;
            row.mean_final.img_aln += o.final.img_aln;
            row.mean_final.ovf += o.final.ovf;
        }
        row.mean_rounds /= seeds;
        row.mean_final.txt_aln /= seeds;
        row.mean_final.img_aln /= seeds;
        row.mean_final.ovf /= seeds;
        rows.push_back(std::move(row));
    }
    return rows;
}

std::string render_sweep_csv(SweepParam param, const std::vector<SweepRow>& rows) {
    std::ostringstream os;
    os << "param,value,seeds,mean_rounds,txt_aln,img_aln,ovf\n";
    for (const auto& r : rows) {
        os << param_name(param) << ',' << r.value << ',' << r.seeds << ',' << f8(r.mean_rounds) << ','
           << f8(r.mean_final.txt_aln) << ',' << f8(r.mean_final.img_aln) << ',' << f8(r.mean_final.ovf) << '\n';
    }
    return os.str();
}

}  // namespace gal::experiments
