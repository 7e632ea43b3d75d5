#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "acton/act2vec.hpp"
#include "acton/core.hpp"
#include "acton/ingest.hpp"
#include "acton/models.hpp"

namespace acton {

/// Writes `bytes` to a sibling temp file and renames it over `path`.
void write_file_atomic(const std::filesystem::path& path, std::string_view bytes);
std::string read_file(const std::filesystem::path& path);

nlohmann::json train_config_to_json(const TrainConfig& cfg);
/// Keys present in `j` override `base`.
TrainConfig train_config_from_json(const nlohmann::json& j, TrainConfig base = {});

// ---------------------------------------------------------------------------
// Embeddings (text)

std::string serialize_embeddings(const EmbeddingSpace& space);
/// Throws HeaderMismatch, TruncatedFile, DimensionMismatch (also when
/// `expected_dim` is given and differs) and DigestMismatch.
EmbeddingSpace parse_embeddings(std::string_view text,
                                std::optional<std::size_t> expected_dim = std::nullopt);

void save_embeddings(const std::filesystem::path& path, const EmbeddingSpace& space);
EmbeddingSpace load_embeddings(const std::filesystem::path& path,
                               std::optional<std::size_t> expected_dim = std::nullopt);

// ---------------------------------------------------------------------------
// Checkpoints (binary)

inline constexpr std::uint32_t kCheckpointVersion = 1;

std::string serialize_checkpoint(const TrainingState& state);
/// Throws HeaderMismatch (bad magic), VersionMismatch, TruncatedFile,
/// DigestMismatch and ShapeMismatch.
TrainingState parse_checkpoint(std::string_view bytes);

void save_checkpoint(const std::filesystem::path& path, const TrainingState& state);
TrainingState load_checkpoint(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Datasets and vocabularies

/// Same layout the parsers read; missing counts are written as NA and
/// missing labels as -1.
void write_activity_csv(std::ostream& out, const Dataset& ds);
void write_labels_csv(std::ostream& out, const Dataset& ds);

/// `<raw> <count>` per symbol, then `UNK <count>`.
std::string serialize_vocabulary(const Vocabulary& vocab);
Vocabulary parse_vocabulary(std::string_view text);

}  // namespace acton
