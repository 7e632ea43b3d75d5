#include "acton/core.hpp"

#include <algorithm>
#include <numeric>

namespace acton {

std::string_view to_string(GranularityLevel level) noexcept {
  switch (level) {
    case GranularityLevel::Sample: return "sample";
    case GranularityLevel::Hour: return "hour";
    case GranularityLevel::Day: return "day";
    case GranularityLevel::Week: return "week";
  }
  return "day";
}

GranularityLevel parse_granularity(std::string_view name) {
  if (name == "sample") return GranularityLevel::Sample;
  if (name == "hour") return GranularityLevel::Hour;
  if (name == "day") return GranularityLevel::Day;
  if (name == "week") return GranularityLevel::Week;
  fail(ErrorCode::InvalidConfig, "unknown granularity '" + std::string(name) + "'");
}

Granularity Granularity::make(GranularityLevel level, int sampling_period_s) {
  require(sampling_period_s > 0, ErrorCode::InvalidConfig, "sampling period must be positive");
  auto span_seconds = [&]() -> long {
    switch (level) {
      case GranularityLevel::Sample: return sampling_period_s;
      case GranularityLevel::Hour: return 3600;
      case GranularityLevel::Day: return 86400;
      case GranularityLevel::Week: return 604800;
    }
    return sampling_period_s;
  }();
  require(span_seconds % sampling_period_s == 0, ErrorCode::InvalidConfig,
          "sampling period " + std::to_string(sampling_period_s) + " s does not divide a " +
              std::string(to_string(level)));
  return Granularity{level, static_cast<std::size_t>(span_seconds / sampling_period_s)};
}

std::size_t samples_for_days(int days, int sampling_period_s) {
  require(days > 0 && sampling_period_s > 0 && 86400 % sampling_period_s == 0,
          ErrorCode::InvalidConfig, "invalid days / sampling period");
  return static_cast<std::size_t>(days) * static_cast<std::size_t>(86400 / sampling_period_s);
}

// ---------------------------------------------------------------------------

Vocabulary Vocabulary::from_counts(const std::map<RawCount, std::uint64_t>& value_counts,
                                   std::uint64_t missing_count) {
  Vocabulary v;
  v.raw_values_.reserve(value_counts.size());
  v.counts_.reserve(value_counts.size() + 1);
  for (const auto& [raw, count] : value_counts) {
    require(raw >= 0, ErrorCode::PreconditionViolation, "raw values must be non-negative");
    v.raw_values_.push_back(raw);
    v.counts_.push_back(count);
  }
  v.counts_.push_back(missing_count);
  return v;
}

SymbolId Vocabulary::encode(RawCount raw) const noexcept {
  if (raw < 0) return unk_id();
  auto it = std::lower_bound(raw_values_.begin(), raw_values_.end(), raw);
  if (it == raw_values_.end() || *it != raw) return unk_id();
  return static_cast<SymbolId>(it - raw_values_.begin());
}

SymbolId Vocabulary::encode(std::optional<RawCount> raw) const noexcept {
  return raw ? encode(*raw) : unk_id();
}

std::optional<RawCount> Vocabulary::decode(SymbolId id) const {
  require(id >= 0 && static_cast<std::size_t>(id) < size(), ErrorCode::IdOutOfRange,
          "symbol id " + std::to_string(id));
  if (id == unk_id()) return std::nullopt;
  return raw_values_[static_cast<std::size_t>(id)];
}

bool Vocabulary::contains(RawCount raw) const noexcept {
  return raw >= 0 && std::binary_search(raw_values_.begin(), raw_values_.end(), raw);
}

std::uint64_t Vocabulary::in_vocabulary_total() const noexcept {
  if (counts_.empty()) return 0;
  return std::accumulate(counts_.begin(), counts_.end() - 1, std::uint64_t{0});
}

std::vector<SymbolId> Vocabulary::numeric_neighbors(RawCount raw) const {
  std::vector<SymbolId> out;
  auto it = std::lower_bound(raw_values_.begin(), raw_values_.end(), raw);
  if (it != raw_values_.begin()) out.push_back(static_cast<SymbolId>(it - raw_values_.begin() - 1));
  if (it != raw_values_.end()) {
    // exact hits are not neighbours; skip past them
    if (*it == raw) ++it;
    if (it != raw_values_.end()) out.push_back(static_cast<SymbolId>(it - raw_values_.begin()));
  }
  return out;
}

ActivitySequence encode_sequence(const Vocabulary& vocab, const RawSequence& raw) {
  ActivitySequence seq{raw.subject_id, {}, raw.sampling_period_s};
  seq.symbols.reserve(raw.counts.size());
  for (RawCount c : raw.counts) seq.symbols.push_back(vocab.encode(c));
  return seq;
}

// ---------------------------------------------------------------------------

std::vector<TimeSegment> segment_sequence(std::size_t n, const Granularity& g,
                                          std::size_t subject_index, SegmentId first_global_id) {
  const std::size_t L = g.samples_per_segment;
  require(L > 0, ErrorCode::InvalidConfig, "segment length must be positive");
  require(n > 0 && n % L == 0, ErrorCode::IndivisibleLength,
          "sequence length " + std::to_string(n) + " is not a positive multiple of " +
              std::to_string(L));
  std::vector<TimeSegment> out;
  out.reserve(n / L);
  for (std::size_t k = 0; k < n / L; ++k) {
    out.push_back(TimeSegment{first_global_id + static_cast<SegmentId>(k), subject_index, k, k * L,
                              (k + 1) * L});
  }
  return out;
}

SegmentIndex::SegmentIndex(std::span<const ActivitySequence> corpus, const Granularity& g)
    : granularity_(g) {
  for (std::size_t s = 0; s < corpus.size(); ++s) {
    auto segs = segment_sequence(corpus[s].symbols.size(), g, s,
                                 static_cast<SegmentId>(segments_.size()));
    segments_.insert(segments_.end(), segs.begin(), segs.end());
    offsets_.push_back(segments_.size());
  }
}

std::span<const TimeSegment> SegmentIndex::of_subject(std::size_t s) const {
  require(s + 1 < offsets_.size(), ErrorCode::IdOutOfRange, "subject index " + std::to_string(s));
  return std::span<const TimeSegment>(segments_).subspan(offsets_[s], offsets_[s + 1] - offsets_[s]);
}

SegmentId SegmentIndex::id_of(std::size_t subject_index, std::size_t index_in_sequence) const {
  auto segs = of_subject(subject_index);
  require(index_in_sequence < segs.size(), ErrorCode::UnknownSegment, "segment index out of range");
  return segs[index_in_sequence].global_id;
}

std::vector<SegmentId> SegmentIndex::neighbors(SegmentId id, int neighbor_set_size) const {
  require(neighbor_set_size == 2 || neighbor_set_size == 4, ErrorCode::InvalidConfig,
          "neighbor set size must be 2 or 4");
  const auto& seg = (*this)[id];
  const auto segs = of_subject(seg.subject_index);
  const long radius = neighbor_set_size / 2;
  const long k = static_cast<long>(seg.index_in_sequence);
  std::vector<SegmentId> out;
  for (long j = k - radius; j <= k + radius; ++j) {
    if (j == k || j < 0 || j >= static_cast<long>(segs.size())) continue;
    out.push_back(segs[static_cast<std::size_t>(j)].global_id);
  }
  return out;
}

std::vector<double> concat_features(std::span<const std::vector<double>> segment_vectors) {
  if (segment_vectors.empty()) return {};
  const std::size_t d = segment_vectors.front().size();
  std::vector<double> out;
  out.reserve(d * segment_vectors.size());
  for (const auto& v : segment_vectors) {
    require(v.size() == d, ErrorCode::DimensionMismatch, "ragged segment vectors");
    out.insert(out.end(), v.begin(), v.end());
  }
  return out;
}

// ---------------------------------------------------------------------------

std::string_view to_string(Task task) noexcept {
  switch (task) {
    case Task::Apnea: return "apnea";
    case Task::Diabetes: return "diabetes";
    case Task::Hypertension: return "hypertension";
    case Task::Insomnia: return "insomnia";
  }
  return "apnea";
}

std::optional<Task> parse_task(std::string_view name) noexcept {
  for (Task t : kAllTasks)
    if (to_string(t) == name) return t;
  return std::nullopt;
}

int class_count(Task task) noexcept {
  return (task == Task::Diabetes || task == Task::Insomnia) ? 3 : 2;
}

bool LabelRecord::any() const noexcept {
  return std::any_of(values.begin(), values.end(), [](const auto& v) { return v.has_value(); });
}

}  // namespace acton
