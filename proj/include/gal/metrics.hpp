#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "gal/core.hpp"

namespace gal::metrics {

/// Mean cosine between each sample and the embedding of the prompt it was
/// generated from. `prompt_embeddings[i]` belongs to `samples[i]`.
double txt_aln(std::span<const GeneratedSample> samples, std::span<const Embedding> prompt_embeddings);

/// Mean cosine between each sample and the re-normalized centroid of the
/// reference embeddings.
double img_aln(std::span<const GeneratedSample> samples, std::span<const Embedding> reference_embeddings);

/// Fraction of samples flagged overfit.
double ovf(std::span<const GeneratedSample> samples);

MetricsTriple compute(std::span<const GeneratedSample> samples, std::span<const Embedding> prompt_embeddings,
                      std::span<const Embedding> reference_embeddings, int eval_prompt_count);

struct ReportContext {
    std::string strategy;
    bool balance = true;
};

inline constexpr const char* kReportHeader =
    "round,strategy,balance,txt_aln,img_aln,ovf,delta,selected_count,stopped,stop_reason";

/// Renders report.csv content. Byte-stable for identical input.
std::string render_report_csv(std::span<const RoundRecord> rounds, const ReportContext& ctx);

/// Writes report.csv and report.json into `dir`. Throws EmptyBatchError when
/// there are no rounds and std::filesystem errors on IO failure.
void emit_report(std::span<const RoundRecord> rounds, const ReportContext& ctx,
                 const std::filesystem::path& dir);

}  // namespace gal::metrics
