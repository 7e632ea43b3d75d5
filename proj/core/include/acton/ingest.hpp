#pragma once

#include <istream>
#include <string>
#include <vector>

#include "acton/core.hpp"

namespace acton {

struct EmbeddingSpace;

struct Provenance {
  std::vector<std::string> sources;
  std::string digest;  // sha256 over the parsed inputs
};

/// A raw corpus: activity sequences plus (optionally) labels for a subset.
struct Dataset {
  std::vector<RawSequence> sequences;
  LabelTable labels;
  Provenance provenance;

  /// Subject ids unique; every labelled subject present among the sequences.
  void validate() const;
  std::size_t index_of(const std::string& subject_id) const;
};

/// Activity CSV: `subject_id,timestamp_index,activity_count`, count may be `NA`.
/// Subjects keep first-appearance order; unobserved slots become missing.
Dataset parse_activity_csv(std::istream& in, int sampling_period_s = kDefaultSamplingPeriod);

/// Labels CSV: `subject_id` followed by task columns; -1 marks a missing label.
LabelTable parse_labels_csv(std::istream& in);

Vocabulary build_vocabulary(const Dataset& dataset);
/// Vocabulary over the union of several corpora (labelled + unlabelled).
Vocabulary build_vocabulary(std::span<const Dataset* const> datasets);

/// Truncates every sequence to `days` days and right-pads short ones with
/// missing values. Returns the ids of subjects whose missing fraction
/// exceeds `flag_threshold` after alignment; they are kept.
std::vector<std::string> align_lengths(Dataset& dataset, int days = kDefaultDays,
                                       double flag_threshold = 0.10);

std::vector<ActivitySequence> encode_dataset(const Vocabulary& vocab, const Dataset& dataset);

enum class OovSource { SymbolVectors, SymbolOutWeights };

/// Vector for a raw value absent from the vocabulary: mean of the vectors of
/// its nearest in-vocabulary numeric neighbours (one below, one above).
std::vector<double> resolve_oov(const Vocabulary& vocab, const EmbeddingSpace& space, RawCount raw,
                                OovSource source = OovSource::SymbolVectors);

}  // namespace acton
