#include "gal/metrics.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "gal/json_io.hpp"

namespace gal::metrics {

double txt_aln(std::span<const GeneratedSample> samples, std::span<const Embedding> prompt_embeddings) {
    if (samples.empty()) {
        throw EmptyBatchError("txt_aln needs at least one sample");
    }
    if (samples.size() != prompt_embeddings.size()) {
        throw ValidationError("txt_aln: every sample needs its prompt embedding");
    }
    double sum = 0.0;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        sum += cosine_sim(samples[i].embedding, prompt_embeddings[i]);
    }
    return sum / static_cast<double>(samples.size());
}

double img_aln(std::span<const GeneratedSample> samples, std::span<const Embedding> reference_embeddings) {
    if (samples.empty()) {
        throw EmptyBatchError("img_aln needs at least one sample");
    }
    if (reference_embeddings.empty()) {
        throw EmptyBatchError("img_aln needs at least one reference");
    }
    const auto d = reference_embeddings.front().dim();
    std::vector<double> centroid(d, 0.0);
    for (const auto& r : reference_embeddings) {
        if (r.dim() != d) {
            throw DimensionError("img_aln: reference dimensions differ");
        }
        for (std::size_t i = 0; i < d; ++i) {
            centroid[i] += r[i];
        }
    }
    const Embedding c = normalize(std::span<const double>(centroid));
    double sum = 0.0;
    for (const auto& s : samples) {
        sum += cosine_sim(s.embedding, c);
    }
    return sum / static_cast<double>(samples.size());
}

double ovf(std::span<const GeneratedSample> samples) {
    if (samples.empty()) {
        throw EmptyBatchError("ovf needs at least one sample");
    }
    std::size_t n = 0;
    for (const auto& s : samples) {
        n += s.overfit ? 1 : 0;
    }
    return static_cast<double>(n) / static_cast<double>(samples.size());
}

MetricsTriple compute(std::span<const GeneratedSample> samples, std::span<const Embedding> prompt_embeddings,
                      std::span<const Embedding> reference_embeddings, int eval_prompt_count) {
    MetricsTriple m;
    m.txt_aln = txt_aln(samples, prompt_embeddings);
    m.img_aln = img_aln(samples, reference_embeddings);
    m.ovf = ovf(samples);
    m.eval_prompt_count = eval_prompt_count;
    m.samples_per_prompt =
        eval_prompt_count > 0 ? static_cast<int>(samples.size()) / eval_prompt_count : 0;
    return m;
}

namespace {

std::string fixed(double v, int digits) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

}  // namespace

std::string render_report_csv(std::span<const RoundRecord> rounds, const ReportContext& ctx) {
    std::ostringstream os;
    os << kReportHeader << '\n';
    for (const auto& r : rounds) {
        os << r.round << ',' << ctx.strategy << ',' << (ctx.balance ? "true" : "false") << ',';
        if (r.metrics) {
            os << fixed(r.metrics->txt_aln, 8) << ',' << fixed(r.metrics->img_aln, 8) << ','
               << fixed(r.metrics->ovf, 8);
        } else {
            os << ",,";
        }
        os << ',' << fixed(r.openness, 10) << ',' << r.selected.size() << ','
           << (r.stopped ? "true" : "false") << ',' << to_string(r.stop_reason) << '\n';
    }
    return os.str();
}

void emit_report(std::span<const RoundRecord> rounds, const ReportContext& ctx,
                 const std::filesystem::path& dir) {
    if (rounds.empty()) {
        throw EmptyBatchError("emit_report needs at least one round");
    }
    std::filesystem::create_directories(dir);
    write_text_file(dir / "report.csv", render_report_csv(rounds, ctx));

    nlohmann::ordered_json j;
    j["strategy"] = ctx.strategy;
    j["balance"] = ctx.balance;
    auto& arr = j["rounds"] = nlohmann::ordered_json::array();
    for (const auto& r : rounds) {
        arr.push_back(to_json(r));
    }
    write_text_file(dir / "report.json", j.dump(2) + "\n");
}

}  // namespace gal::metrics
