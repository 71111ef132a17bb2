#include "gal/json_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

namespace gal {

Json to_json(const Embedding& e) {
    Json arr = Json::array();
    for (float v : e.values()) {
        arr.push_back(static_cast<double>(v));
    }
    return arr;
}

Embedding embedding_from_json(const Json& j) {
    if (!j.is_array()) {
        throw ValidationError("embedding must be a JSON array");
    }
    std::vector<float> values;
    values.reserve(j.size());
    for (const auto& v : j) {
        values.push_back(static_cast<float>(v.get<double>()));
    }
    return Embedding::from_unit(std::move(values));
}

Json to_json(const DirectionStats& s) {
    Json j;
    j["anchor_id"] = s.anchor_id;
    j["beta"] = s.beta;
    j["entropy"] = s.entropy;
    j["best_sample_id"] = s.best_sample_id ? Json(*s.best_sample_id) : Json(nullptr);
    return j;
}

DirectionStats direction_stats_from_json(const Json& j) {
    DirectionStats s;
    s.anchor_id = j.at("anchor_id").get<int>();
    s.beta = j.at("beta").get<double>();
    s.entropy = j.at("entropy").get<double>();
    if (const auto& b = j.at("best_sample_id"); !b.is_null()) {
        s.best_sample_id = b.get<std::string>();
    }
    return s;
}

Json to_json(const MetricsTriple& m) {
    Json j;
    j["txt_aln"] = m.txt_aln;
    j["img_aln"] = m.img_aln;
    j["ovf"] = m.ovf;
    j["eval_prompt_count"] = m.eval_prompt_count;
    j["samples_per_prompt"] = m.samples_per_prompt;
    return j;
}

MetricsTriple metrics_from_json(const Json& j) {
    MetricsTriple m;
    m.txt_aln = j.at("txt_aln").get<double>();
    m.img_aln = j.at("img_aln").get<double>();
    m.ovf = j.at("ovf").get<double>();
    m.eval_prompt_count = j.at("eval_prompt_count").get<int>();
    m.samples_per_prompt = j.at("samples_per_prompt").get<int>();
    return m;
}

Json to_json(const Selection& s) {
    Json j;
    j["anchor_id"] = s.anchor_id;
    j["sample_id"] = s.sample_id;
    return j;
}

Selection selection_from_json(const Json& j) {
    return {j.at("anchor_id").get<int>(), j.at("sample_id").get<std::string>()};
}

Json to_json(const RoundRecord& r) {
    Json j;
    j["round"] = r.round;
    auto& stats = j["stats"] = Json::array();
    for (const auto& s : r.stats) {
        stats.push_back(to_json(s));
    }
    auto& sel = j["selected"] = Json::array();
    for (const auto& s : r.selected) {
        sel.push_back(to_json(s));
    }
    j["delta"] = r.openness;
    j["stopped"] = r.stopped;
    j["stop_reason"] = std::string(to_string(r.stop_reason));
    j["degenerate_weight"] = r.degenerate_weight;
    j["metrics"] = r.metrics ? to_json(*r.metrics) : Json(nullptr);
    return j;
}

RoundRecord round_record_from_json(const Json& j) {
    RoundRecord r;
    r.round = j.at("round").get<int>();
    for (const auto& s : j.at("stats")) {
        r.stats.push_back(direction_stats_from_json(s));
    }
    for (const auto& s : j.at("selected")) {
        r.selected.push_back(selection_from_json(s));
    }
    r.openness = j.at("delta").get<double>();
    r.stopped = j.at("stopped").get<bool>();
    r.stop_reason = stop_reason_from_string(j.at("stop_reason").get<std::string>());
    r.degenerate_weight = j.value("degenerate_weight", false);
    if (const auto& m = j.at("metrics"); !m.is_null()) {
        r.metrics = metrics_from_json(m);
    }
    return r;
}

Json to_json(const ReferenceItem& r) {
    Json j;
    j["image_ref"] = r.image_ref;
    j["caption"] = r.caption;
    j["weight"] = static_cast<double>(r.weight);
    j["origin"] = std::string(to_string(r.origin));
    j["round_added"] = r.round_added;
    j["sample_id"] = r.sample_id ? Json(*r.sample_id) : Json(nullptr);
    j["anchor_id"] = r.anchor_id ? Json(*r.anchor_id) : Json(nullptr);
    j["embedding"] = to_json(r.embedding);
    return j;
}

ReferenceItem reference_from_json(const Json& j) {
    ReferenceItem r;
    r.image_ref = j.at("image_ref").get<std::string>();
    r.caption = j.at("caption").get<std::string>();
    r.weight = static_cast<float>(j.at("weight").get<double>());
    r.origin = origin_from_string(j.at("origin").get<std::string>());
    r.round_added = j.at("round_added").get<int>();
    if (const auto& s = j.at("sample_id"); !s.is_null()) {
        r.sample_id = s.get<std::string>();
    }
    if (const auto& a = j.at("anchor_id"); !a.is_null()) {
        r.anchor_id = a.get<int>();
    }
    r.embedding = embedding_from_json(j.at("embedding"));
    return r;
}

Json sample_to_json(const GeneratedSample& s) {
    Json j;
    j["sample_id"] = s.sample_id;
    j["seed"] = s.seed;
    j["image_ref"] = s.image_ref;
    j["sim_to_anchor"] = static_cast<double>(s.sim_to_anchor);
    j["sim_to_non_soi"] = static_cast<double>(s.sim_to_non_soi);
    j["overfit"] = s.overfit;
    return j;
}

void write_text_file(const std::filesystem::path& path, const std::string& content) {
    if (path.has_parent_path()) {
        std::filesystem::create_directories(path.parent_path());
    }
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) {
            throw std::filesystem::filesystem_error("cannot open for writing", tmp,
                                                    std::make_error_code(std::errc::io_error));
        }
        out << content;
        out.flush();
        if (!out) {
            throw std::filesystem::filesystem_error("write failed", tmp,
                                                    std::make_error_code(std::errc::io_error));
        }
    }
    std::filesystem::rename(tmp, path);
}

std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw PersistenceError(path.string(), "cannot open");
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

Json read_json_file(const std::filesystem::path& path) {
    const auto text = read_text_file(path);
    try {
        return Json::parse(text);
    } catch (const Json::exception& e) {
        throw PersistenceError(path.string(), std::string("malformed JSON: ") + e.what());
    }
}

void write_embedding_file(const std::filesystem::path& path, const Embedding& e) {
    std::string bytes(e.dim() * sizeof(std::uint32_t), '\0');
    for (std::size_t i = 0; i < e.dim(); ++i) {
        auto bits = std::bit_cast<std::uint32_t>(e[i]);
        for (std::size_t b = 0; b < 4; ++b) {
            bytes[i * 4 + b] = static_cast<char>((bits >> (8 * b)) & 0xFFU);
        }
    }
    write_text_file(path, bytes);
}

Embedding read_embedding_file(const std::filesystem::path& path, std::size_t expected_dim) {
    const auto bytes = read_text_file(path);
    if (bytes.size() != expected_dim * 4) {
        throw PersistenceError(path.string(), "expected " + std::to_string(expected_dim * 4) +
                                                  " bytes, found " + std::to_string(bytes.size()));
    }
    std::vector<float> values(expected_dim);
    for (std::size_t i = 0; i < expected_dim; ++i) {
        std::uint32_t bits = 0;
        for (std::size_t b = 0; b < 4; ++b) {
            bits |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[i * 4 + b])) << (8 * b);
        }
        values[i] = std::bit_cast<float>(bits);
    }
    try {
        return Embedding::from_unit(std::move(values));
    } catch (const Error& e) {
        throw PersistenceError(path.string(), e.what());
    }
}

}  // namespace gal
