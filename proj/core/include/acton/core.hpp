#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "acton/error.hpp"

namespace acton {

/// Raw activity count as read from a device export. Negative means missing.
using RawCount = std::int32_t;
inline constexpr RawCount kMissingCount = -1;

using SymbolId = std::int32_t;
using SegmentId = std::int64_t;

inline constexpr int kDefaultSamplingPeriod = 30;
inline constexpr int kDefaultDays = 7;

// ---------------------------------------------------------------------------
// Granularity

enum class GranularityLevel { Sample, Hour, Day, Week };

std::string_view to_string(GranularityLevel level) noexcept;
GranularityLevel parse_granularity(std::string_view name);

/// Segment length in samples for a level at a given sampling period.
/// At 30 s sampling: Sample 1, Hour 120, Day 2880, Week 20160.
struct Granularity {
  GranularityLevel level = GranularityLevel::Day;
  std::size_t samples_per_segment = 2880;

  static Granularity make(GranularityLevel level, int sampling_period_s = kDefaultSamplingPeriod);

  bool operator==(const Granularity&) const = default;
};

/// Number of samples in `days` days at the given sampling period.
std::size_t samples_for_days(int days, int sampling_period_s);

// ---------------------------------------------------------------------------
// Vocabulary

class Vocabulary {
public:
  Vocabulary() = default;

  /// Builds the symbol table from a raw corpus. Ids are assigned in ascending
  /// raw-value order; UNK takes the last id. Missing entries count toward UNK.
  static Vocabulary from_counts(const std::map<RawCount, std::uint64_t>& value_counts,
                                std::uint64_t missing_count);

  SymbolId encode(RawCount raw) const noexcept;
  SymbolId encode(std::optional<RawCount> raw) const noexcept;
  /// Raw value for an id; nullopt for UNK.
  std::optional<RawCount> decode(SymbolId id) const;
  bool contains(RawCount raw) const noexcept;

  std::size_t size() const noexcept { return counts_.size(); }
  SymbolId unk_id() const noexcept { return static_cast<SymbolId>(raw_values_.size()); }
  std::span<const std::uint64_t> counts() const noexcept { return counts_; }
  /// Sorted raw values; index i is symbol id i.
  std::span<const RawCount> raw_values() const noexcept { return raw_values_; }
  std::uint64_t in_vocabulary_total() const noexcept;

  /// Nearest in-vocabulary raw values bracketing `raw` (one below, one above
  /// where they exist). Empty only for an empty vocabulary.
  std::vector<SymbolId> numeric_neighbors(RawCount raw) const;

private:
  std::vector<RawCount> raw_values_;
  std::vector<std::uint64_t> counts_;  // size = raw_values_.size() + 1 (UNK last)
};

// ---------------------------------------------------------------------------
// Sequences and segments

/// One subject's raw activity counts.
struct RawSequence {
  std::string subject_id;
  std::vector<RawCount> counts;
  int sampling_period_s = kDefaultSamplingPeriod;
};

/// One subject's symbol sequence.
struct ActivitySequence {
  std::string subject_id;
  std::vector<SymbolId> symbols;
  int sampling_period_s = kDefaultSamplingPeriod;
};

ActivitySequence encode_sequence(const Vocabulary& vocab, const RawSequence& raw);

struct TimeSegment {
  SegmentId global_id = 0;
  std::size_t subject_index = 0;
  std::size_t index_in_sequence = 0;
  std::size_t begin = 0;  // half-open span [begin, end)
  std::size_t end = 0;

  std::size_t length() const noexcept { return end - begin; }
};

/// Splits a sequence of length n into n / samples_per_segment tiles.
/// Throws IndivisibleLength when n is not a multiple of the segment length.
std::vector<TimeSegment> segment_sequence(std::size_t sequence_length, const Granularity& g,
                                          std::size_t subject_index = 0,
                                          SegmentId first_global_id = 0);

/// Segment table for a corpus. Global ids follow subject order, then time.
class SegmentIndex {
public:
  SegmentIndex() = default;
  SegmentIndex(std::span<const ActivitySequence> corpus, const Granularity& g);

  const Granularity& granularity() const noexcept { return granularity_; }
  std::size_t size() const noexcept { return segments_.size(); }
  std::size_t subject_count() const noexcept { return offsets_.size() - 1; }
  const TimeSegment& operator[](SegmentId id) const { return segments_.at(static_cast<std::size_t>(id)); }
  std::span<const TimeSegment> segments() const noexcept { return segments_; }
  /// Segments of subject s, in temporal order.
  std::span<const TimeSegment> of_subject(std::size_t s) const;
  SegmentId id_of(std::size_t subject_index, std::size_t index_in_sequence) const;

  /// Immediate neighbours within the same subject: radius 1 for set size 2,
  /// radius 2 for set size 4. Truncated at sequence boundaries.
  std::vector<SegmentId> neighbors(SegmentId id, int neighbor_set_size) const;

private:
  Granularity granularity_;
  std::vector<TimeSegment> segments_;
  std::vector<std::size_t> offsets_{0};
};

/// Concatenates equally sized segment vectors in order.
std::vector<double> concat_features(std::span<const std::vector<double>> segment_vectors);

// ---------------------------------------------------------------------------
// Labels

enum class Task { Apnea = 0, Diabetes = 1, Hypertension = 2, Insomnia = 3 };
inline constexpr std::size_t kTaskCount = 4;
inline constexpr std::array<Task, kTaskCount> kAllTasks = {Task::Apnea, Task::Diabetes,
                                                           Task::Hypertension, Task::Insomnia};

std::string_view to_string(Task task) noexcept;
std::optional<Task> parse_task(std::string_view name) noexcept;
int class_count(Task task) noexcept;

struct LabelRecord {
  std::string subject_id;
  std::array<std::optional<int>, kTaskCount> values{};

  std::optional<int>& operator[](Task t) { return values[static_cast<std::size_t>(t)]; }
  const std::optional<int>& operator[](Task t) const { return values[static_cast<std::size_t>(t)]; }
  bool any() const noexcept;
};

using LabelTable = std::map<std::string, LabelRecord>;

}  // namespace acton
