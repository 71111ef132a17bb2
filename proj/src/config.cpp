#include "gal/config.hpp"

#include <set>

#include "gal/anchor_banks.hpp"
#include "gal/hashing.hpp"
#include "gal/toml_lite.hpp"

namespace gal {

void RunConfig::validate() const {
    if (anchors.empty()) {
        throw ConfigError("anchors must not be empty");
    }
    if (references.empty()) {
        throw ConfigError("at least one reference image is required");
    }
    if (m < 1) {
        throw ConfigError("m must be >= 1");
    }
    if (k < 1 || static_cast<std::size_t>(k) > anchors.size()) {
        throw ConfigError("k must lie in [1, |anchors|]");
    }
    if (!(lambda > 0.0 && lambda <= 1.0)) {
        throw ConfigError("lambda must lie in (0, 1]");
    }
    if (max_rounds < 1) {
        throw ConfigError("max_rounds must be >= 1");
    }
    if (embedding_dim < 2) {
        throw ConfigError("embedding_dim must be >= 2");
    }
    if (soi.pseudo_token.empty()) {
        throw ConfigError("soi.pseudo_token must not be empty");
    }
    if (soi.non_soi_text.empty()) {
        throw ConfigError("soi.non_soi_text must not be empty");
    }
    try {
        render_prompt(soi.reference_caption_template, soi.pseudo_token);
        for (const auto& a : anchors) {
            render_prompt(a, soi.pseudo_token);
        }
        for (const auto& e : eval_prompts) {
            render_prompt(e, soi.pseudo_token);
        }
    } catch (const TemplateError& e) {
        throw ConfigError(e.what());
    }
    std::set<std::string> unique(anchors.begin(), anchors.end());
    if (unique.size() != anchors.size()) {
        throw ConfigError("anchor templates must be distinct");
    }
    if (metrics_on == MetricsSource::Eval && eval_prompts.empty()) {
        throw ConfigError("metrics_on = \"eval\" needs eval_prompts");
    }
    const auto& sim = backend.simulated;
    if (backend.kind == BackendKind::Simulated) {
        if (!(sim.sigma >= 0.0) || !(sim.base_gain >= 0.0) || !(sim.weight_scale >= 0.0) ||
            !(sim.overfit_penalty >= 0.0)) {
            throw ConfigError("simulated backend parameters must be non-negative");
        }
        if (!(0.0 <= sim.g_min && sim.g_min <= sim.g_max && sim.g_max <= 1.0)) {
            throw ConfigError("simulated g range must satisfy 0 <= g_min <= g_max <= 1");
        }
        if (sim.g_init && !(*sim.g_init >= 0.0 && *sim.g_init <= 1.0)) {
            throw ConfigError("simulated g_init must lie in [0, 1]");
        }
    } else {
        if (backend.remote.endpoint.empty()) {
            throw ConfigError("remote backend needs an endpoint");
        }
        if (backend.remote.max_attempts < 1) {
            throw ConfigError("remote max_attempts must be >= 1");
        }
    }
}

bool RunConfig::metrics_use_eval() const {
    switch (metrics_on) {
        case MetricsSource::Eval:
            return true;
        case MetricsSource::Anchors:
            return false;
        case MetricsSource::Auto:
            break;
    }
    return !eval_prompts.empty();
}

namespace {

std::string metrics_source_name(MetricsSource s) {
    switch (s) {
        case MetricsSource::Eval:
            return "eval";
        case MetricsSource::Anchors:
            return "anchors";
        case MetricsSource::Auto:
            break;
    }
    return "auto";
}

MetricsSource metrics_source_from(const std::string& s) {
    if (s == "eval") {
        return MetricsSource::Eval;
    }
    if (s == "anchors") {
        return MetricsSource::Anchors;
    }
    if (s == "auto") {
        return MetricsSource::Auto;
    }
    throw ConfigError("metrics_on must be auto, eval or anchors");
}

void reject_unknown(const Json& j, std::initializer_list<std::string_view> allowed, const std::string& where) {
    if (!j.is_object()) {
        throw ConfigError(where + " must be a table");
    }
    for (const auto& [key, _] : j.items()) {
        bool ok = false;
        for (auto a : allowed) {
            ok = ok || key == a;
        }
        if (!ok) {
            throw ConfigError("unknown key '" + key + "' in " + where);
        }
    }
}

template <typename T>
void read(const Json& j, const char* key, T& out) {
    if (!j.contains(key)) {
        return;
    }
    try {
        out = j.at(key).get<T>();
    } catch (const Json::exception&) {
        throw ConfigError(std::string("config key '") + key + "' has the wrong type");
    }
}

}  // namespace

Json to_json(const RunConfig& c) {
    Json j;
    j["soi"] = {{"pseudo_token", c.soi.pseudo_token},
                {"non_soi_text", c.soi.non_soi_text},
                {"reference_caption_template", c.soi.reference_caption_template}};
    j["anchors"] = c.anchors;
    j["references"] = c.references;
    j["eval_prompts"] = c.eval_prompts;
    j["m"] = c.m;
    j["k"] = c.k;
    j["lambda"] = c.lambda;
    j["max_rounds"] = c.max_rounds;
    j["strategy"] = std::string(strategy::to_string(c.strategy));
    j["balance_enabled"] = c.balance_enabled;

    Json b;
    if (c.backend.kind == BackendKind::Simulated) {
        const auto& s = c.backend.simulated;
        b["kind"] = "simulated";
        b["sigma"] = s.sigma;
        b["base_gain"] = s.base_gain;
        b["weight_scale"] = s.weight_scale;
        b["g_min"] = s.g_min;
        b["g_max"] = s.g_max;
        b["g_init"] = s.g_init ? Json(*s.g_init) : Json(nullptr);
        b["overfit_penalty"] = s.overfit_penalty;
    } else {
        const auto& r = c.backend.remote;
        b["kind"] = "remote";
        b["endpoint"] = r.endpoint;
        b["timeout_ms"] = r.timeout_ms;
        b["max_attempts"] = r.max_attempts;
        b["backoff_ms"] = r.backoff_ms;
        b["poll_interval_ms"] = r.poll_interval_ms;
        b["job_timeout_ms"] = r.job_timeout_ms;
    }
    j["backend"] = b;
    j["master_seed"] = c.master_seed;
    j["embedding_dim"] = c.embedding_dim;
    j["run_dir"] = c.run_dir;
    j["strip_pseudo_token"] = c.strip_pseudo_token;
    j["metrics_on"] = metrics_source_name(c.metrics_on);
    return j;
}

RunConfig config_from_json(const Json& j) {
    reject_unknown(j,
                   {"soi", "anchors", "references", "eval_prompts", "m", "k", "lambda", "max_rounds",
                    "strategy", "balance_enabled", "backend", "master_seed", "embedding_dim", "run_dir",
                    "strip_pseudo_token", "metrics_on"},
                   "config");
    RunConfig c;
    if (j.contains("soi")) {
        const auto& s = j.at("soi");
        reject_unknown(s, {"pseudo_token", "non_soi_text", "reference_caption_template"}, "soi");
        read(s, "pseudo_token", c.soi.pseudo_token);
        read(s, "non_soi_text", c.soi.non_soi_text);
        read(s, "reference_caption_template", c.soi.reference_caption_template);
    }
    read(j, "anchors", c.anchors);
    read(j, "references", c.references);
    read(j, "eval_prompts", c.eval_prompts);
    read(j, "m", c.m);
    read(j, "k", c.k);
    read(j, "lambda", c.lambda);
    read(j, "max_rounds", c.max_rounds);
    if (j.contains("strategy")) {
        std::string s;
        read(j, "strategy", s);
        try {
            c.strategy = strategy::strategy_from_string(s);
        } catch (const ValidationError& e) {
            throw ConfigError(e.what());
        }
    }
    read(j, "balance_enabled", c.balance_enabled);
    if (j.contains("backend")) {
        const auto& b = j.at("backend");
        std::string kind = "simulated";
        read(b, "kind", kind);
        if (kind == "simulated") {
            reject_unknown(b, {"kind", "sigma", "base_gain", "weight_scale", "g_min", "g_max", "g_init",
                               "overfit_penalty"},
                           "backend");
            auto& s = c.backend.simulated;
            c.backend.kind = BackendKind::Simulated;
            read(b, "sigma", s.sigma);
            read(b, "base_gain", s.base_gain);
            read(b, "weight_scale", s.weight_scale);
            read(b, "g_min", s.g_min);
            read(b, "g_max", s.g_max);
            if (b.contains("g_init") && !b.at("g_init").is_null()) {
                double g = 0.0;
                read(b, "g_init", g);
                s.g_init = g;
            }
            read(b, "overfit_penalty", s.overfit_penalty);
        } else if (kind == "remote") {
            reject_unknown(b, {"kind", "endpoint", "timeout_ms", "max_attempts", "backoff_ms",
                               "poll_interval_ms", "job_timeout_ms"},
                           "backend");
            auto& r = c.backend.remote;
            c.backend.kind = BackendKind::Remote;
            read(b, "endpoint", r.endpoint);
            read(b, "timeout_ms", r.timeout_ms);
            read(b, "max_attempts", r.max_attempts);
            read(b, "backoff_ms", r.backoff_ms);
            read(b, "poll_interval_ms", r.poll_interval_ms);
            read(b, "job_timeout_ms", r.job_timeout_ms);
        } else {
            throw ConfigError("backend.kind must be simulated or remote");
        }
    }
    if (j.contains("master_seed")) {
        const auto& s = j.at("master_seed");
        if (s.is_number_unsigned()) {
            c.master_seed = s.get<std::uint64_t>();
        } else if (s.is_number_integer() && s.get<std::int64_t>() >= 0) {
            c.master_seed = static_cast<std::uint64_t>(s.get<std::int64_t>());
        } else if (s.is_string()) {
            try {
                c.master_seed = std::stoull(s.get<std::string>(), nullptr, 0);
            } catch (const std::exception&) {
                throw ConfigError("master_seed string is not an unsigned integer");
            }
        } else {
            throw ConfigError("master_seed must be a non-negative integer");
        }
    }
    read(j, "embedding_dim", c.embedding_dim);
    read(j, "run_dir", c.run_dir);
    read(j, "strip_pseudo_token", c.strip_pseudo_token);
    if (j.contains("metrics_on")) {
        std::string s;
        read(j, "metrics_on", s);
        c.metrics_on = metrics_source_from(s);
    }
    return c;
}

RunConfig load_config_file(const std::filesystem::path& path) {
    std::string text;
    try {
        text = read_text_file(path);
    } catch (const PersistenceError& e) {
        throw ConfigError(e.what());
    }
    if (path.extension() == ".json") {
        try {
            return config_from_json(Json::parse(text));
        } catch (const Json::exception& e) {
            throw ConfigError(path.string() + ": " + e.what());
        }
    }
    return config_from_json(parse_toml(text));
}

std::string config_hash(const RunConfig& c) {
    auto j = to_json(c);
    j.erase("run_dir");
    return sha256_hex(j.dump());
}

RunConfig default_simulated_config() {
    RunConfig c;
    c.soi.pseudo_token = "S*";
    c.soi.non_soi_text = "a cat";
    c.soi.reference_caption_template = "a painting of a cat in style {SOI}";
    for (auto a : anchor_banks::kStyle) {
        c.anchors.emplace_back(a);
    }
    c.references = {"ref/reference-0.png"};
    return c;
}

}  // namespace gal
