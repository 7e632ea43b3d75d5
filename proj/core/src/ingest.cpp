#include "acton/ingest.hpp"

#include <algorithm>
#include <charconv>
#include <unordered_map>

#include "acton/act2vec.hpp"
#include "acton/digest.hpp"

namespace acton {
namespace {

std::vector<std::string_view> split_csv(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    auto pos = line.find(',', start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      break;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return out;
}

template <class Int>
bool parse_int(std::string_view s, Int& out) {
  if (s.empty()) return false;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

bool next_line(std::istream& in, std::string& line, Sha256& digest) {
  if (!std::getline(in, line)) return false;
  digest.update(line).update("\n", 1);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  return true;
}

[[noreturn]] void malformed(std::size_t line_no, const std::string& what) {
  fail(ErrorCode::MalformedRow, "line " + std::to_string(line_no) + ": " + what);
}

}  // namespace

void Dataset::validate() const {
  std::unordered_map<std::string, std::size_t> seen;
  for (std::size_t i = 0; i < sequences.size(); ++i) {
    require(seen.emplace(sequences[i].subject_id, i).second, ErrorCode::PreconditionViolation,
            "duplicate subject id " + sequences[i].subject_id);
  }
  for (const auto& [id, rec] : labels) {
    require(seen.count(id) > 0, ErrorCode::PreconditionViolation,
            "labelled subject " + id + " has no activity sequence");
  }
}

std::size_t Dataset::index_of(const std::string& subject_id) const {
  for (std::size_t i = 0; i < sequences.size(); ++i)
    if (sequences[i].subject_id == subject_id) return i;
  fail(ErrorCode::UnknownSegment, "unknown subject " + subject_id);
}

Dataset parse_activity_csv(std::istream& in, int sampling_period_s) {
  Sha256 digest;
  std::string line;
  std::size_t line_no = 1;
  require(next_line(in, line, digest), ErrorCode::EmptyInput, "activity input is empty");
  if (line != "subject_id,timestamp_index,activity_count")
    fail(ErrorCode::MalformedRow, "line 1: unexpected header '" + line + "'");

  Dataset ds;
  std::unordered_map<std::string, std::size_t> index;
  // per subject: (timestamp, count) in arrival order
  std::vector<std::vector<std::pair<std::size_t, RawCount>>> rows;

  while (next_line(in, line, digest)) {
    ++line_no;
    if (line.empty()) continue;
    auto fields = split_csv(line);
    if (fields.size() != 3) malformed(line_no, "expected 3 fields");
    if (fields[0].empty()) malformed(line_no, "empty subject id");
    std::size_t ts = 0;
    if (!parse_int(fields[1], ts)) malformed(line_no, "timestamp_index is not a non-negative integer");
    RawCount count = kMissingCount;
    if (fields[2] != "NA") {
      if (!parse_int(fields[2], count) || count < 0)
        malformed(line_no, "activity_count is not a non-negative integer or NA");
    }
    std::string sid(fields[0]);
    auto [it, inserted] = index.emplace(sid, ds.sequences.size());
    if (inserted) {
      ds.sequences.push_back(RawSequence{sid, {}, sampling_period_s});
      rows.emplace_back();
    }
    rows[it->second].emplace_back(ts, count);
  }
  require(!ds.sequences.empty(), ErrorCode::EmptyInput, "activity input has no data rows");

  for (std::size_t s = 0; s < ds.sequences.size(); ++s) {
    auto& r = rows[s];
    std::size_t n = 0;
    for (auto& [ts, c] : r) n = std::max(n, ts + 1);
    auto& counts = ds.sequences[s].counts;
    counts.assign(n, kMissingCount);
    std::vector<bool> filled(n, false);
    for (auto& [ts, c] : r) {
      require(!filled[ts], ErrorCode::DuplicateTimestamp,
              "subject " + ds.sequences[s].subject_id + " timestamp " + std::to_string(ts));
      filled[ts] = true;
      counts[ts] = c;
    }
  }
  ds.provenance.digest = digest.hex();
  return ds;
}

LabelTable parse_labels_csv(std::istream& in) {
  Sha256 digest;
  std::string line;
  require(next_line(in, line, digest), ErrorCode::EmptyInput, "labels input is empty");
  auto header = split_csv(line);
  require(!header.empty() && header[0] == "subject_id", ErrorCode::MalformedRow,
          "line 1: first column must be subject_id");
  std::vector<Task> columns;
  for (std::size_t i = 1; i < header.size(); ++i) {
    auto t = parse_task(header[i]);
    require(t.has_value(), ErrorCode::UnknownTaskColumn, std::string(header[i]));
    require(std::find(columns.begin(), columns.end(), *t) == columns.end(),
            ErrorCode::UnknownTaskColumn, "duplicate column " + std::string(header[i]));
    columns.push_back(*t);
  }

  LabelTable table;
  std::size_t line_no = 1;
  while (next_line(in, line, digest)) {
    ++line_no;
    if (line.empty()) continue;
    auto fields = split_csv(line);
    if (fields.size() != columns.size() + 1) malformed(line_no, "wrong field count");
    LabelRecord rec;
    rec.subject_id = std::string(fields[0]);
    for (std::size_t c = 0; c < columns.size(); ++c) {
      int v = 0;
      if (!parse_int(fields[c + 1], v)) malformed(line_no, "label is not an integer");
      if (v == -1) continue;
      require(v >= 0 && v < class_count(columns[c]), ErrorCode::OutOfRangeClass,
              "line " + std::to_string(line_no) + ": " + std::string(to_string(columns[c])) + "=" +
                  std::to_string(v));
      rec[columns[c]] = v;
    }
    require(table.emplace(rec.subject_id, rec).second, ErrorCode::MalformedRow,
            "line " + std::to_string(line_no) + ": duplicate subject " + rec.subject_id);
  }
  return table;
}

Vocabulary build_vocabulary(std::span<const Dataset* const> datasets) {
  std::map<RawCount, std::uint64_t> counts;
  std::uint64_t missing = 0;
  std::size_t n_sequences = 0;
  for (const Dataset* ds : datasets) {
    for (const auto& seq : ds->sequences) {
      ++n_sequences;
      for (RawCount c : seq.counts) {
        if (c < 0) ++missing;
        else ++counts[c];
      }
    }
  }
  require(n_sequences > 0, ErrorCode::EmptyInput, "no sequences to build a vocabulary from");
  return Vocabulary::from_counts(counts, missing);
}

Vocabulary build_vocabulary(const Dataset& dataset) {
  const Dataset* one[] = {&dataset};
  return build_vocabulary(std::span<const Dataset* const>(one));
}

std::vector<std::string> align_lengths(Dataset& dataset, int days, double flag_threshold) {
  std::vector<std::string> flagged;
  for (auto& seq : dataset.sequences) {
    const std::size_t n = samples_for_days(days, seq.sampling_period_s);
    seq.counts.resize(n, kMissingCount);
    const auto missing = std::count_if(seq.counts.begin(), seq.counts.end(),
                                       [](RawCount c) { return c < 0; });
    if (static_cast<double>(missing) > flag_threshold * static_cast<double>(n))
      flagged.push_back(seq.subject_id);
  }
  return flagged;
}

std::vector<ActivitySequence> encode_dataset(const Vocabulary& vocab, const Dataset& dataset) {
  std::vector<ActivitySequence> out;
  out.reserve(dataset.sequences.size());
  for (const auto& s : dataset.sequences) out.push_back(encode_sequence(vocab, s));
  return out;
}

std::vector<double> resolve_oov(const Vocabulary& vocab, const EmbeddingSpace& space, RawCount raw,
                                OovSource source) {
  require(!vocab.contains(raw), ErrorCode::PreconditionViolation,
          "raw value " + std::to_string(raw) + " is in the vocabulary");
  const Matrix& table =
      source == OovSource::SymbolVectors ? space.symbol_vectors : space.symbol_out_weights;
  require(!table.empty(), ErrorCode::NoSymbolVectors, "embedding space has no symbol-level table");
  require(table.rows() >= vocab.size(), ErrorCode::DimensionMismatch,
          "symbol table does not cover the vocabulary");
  const auto neighbors = vocab.numeric_neighbors(raw);
  require(!neighbors.empty(), ErrorCode::NoSymbolVectors, "vocabulary has no in-vocabulary values");
  std::vector<double> out(table.cols(), 0.0);
  for (SymbolId id : neighbors) axpy(1.0, table.row(static_cast<std::size_t>(id)), out);
  for (auto& v : out) v /= static_cast<double>(neighbors.size());
  return out;
}

}  // namespace acton
