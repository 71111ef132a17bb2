#pragma once

#include <filesystem>
#include <string>

#include <json.hpp>

#include "gal/core.hpp"

namespace gal {

using Json = nlohmann::ordered_json;

Json to_json(const Embedding& e);
Embedding embedding_from_json(const Json& j);

Json to_json(const DirectionStats& s);
DirectionStats direction_stats_from_json(const Json& j);

Json to_json(const MetricsTriple& m);
MetricsTriple metrics_from_json(const Json& j);

Json to_json(const Selection& s);
Selection selection_from_json(const Json& j);

/// Round record without per-sample detail.
Json to_json(const RoundRecord& r);
RoundRecord round_record_from_json(const Json& j);

Json to_json(const ReferenceItem& r);
ReferenceItem reference_from_json(const Json& j);

/// Sample scores; the embedding lives in its own .emb file.
Json sample_to_json(const GeneratedSample& s);

/// Writes through a temporary file and renames, so readers never see a
/// partial file.
void write_text_file(const std::filesystem::path& path, const std::string& content);
std::string read_text_file(const std::filesystem::path& path);

/// Parses `path`, raising PersistenceError naming the file on failure.
Json read_json_file(const std::filesystem::path& path);

/// Raw little-endian float32 components.
void write_embedding_file(const std::filesystem::path& path, const Embedding& e);
Embedding read_embedding_file(const std::filesystem::path& path, std::size_t expected_dim);

}  // namespace gal
