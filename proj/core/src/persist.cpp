#include "acton/persist.hpp"

#include <charconv>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>
#include <unistd.h>

#include "acton/digest.hpp"
#include "acton/error.hpp"

namespace acton {

namespace fs = std::filesystem;

void write_file_atomic(const fs::path& path, std::string_view bytes) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    require(static_cast<bool>(out), ErrorCode::IoError, "cannot open " + tmp.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    require(static_cast<bool>(out), ErrorCode::IoError, "write failed for " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp);
    fail(ErrorCode::IoError, "cannot rename onto " + path.string() + ": " + ec.message());
  }
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorCode::IoError, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// ---------------------------------------------------------------------------
// TrainConfig <-> JSON

nlohmann::json train_config_to_json(const TrainConfig& c) {
  nlohmann::json j{{"granularity", std::string(to_string(c.granularity))},
                   {"dim", c.dim},
                   {"window", c.window},
                   {"negatives", c.negatives},
                   {"eta", c.eta},
                   {"neighbor_set_size", c.neighbor_set_size},
                   {"epochs", c.epochs},
                   {"lr_start", c.lr_start},
                   {"lr_end", c.lr_end},
                   {"seed", c.seed},
                   {"convergence_tol", c.convergence_tol},
                   {"threads", c.threads}};
  auto opt = [](const std::optional<bool>& b) { return b ? nlohmann::json(*b) : nlohmann::json(nullptr); };
  j["use_segment_loss"] = opt(c.use_segment_loss);
  j["use_neighbor_loss"] = opt(c.use_neighbor_loss);
  j["use_smoothing_loss"] = opt(c.use_smoothing_loss);
  return j;
}

TrainConfig train_config_from_json(const nlohmann::json& j, TrainConfig c) {
  if (j.contains("granularity")) c.granularity = parse_granularity(j["granularity"].get<std::string>());
  c.dim = j.value("dim", c.dim);
  c.window = j.value("window", c.window);
  c.negatives = j.value("negatives", c.negatives);
  c.eta = j.value("eta", c.eta);
  c.neighbor_set_size = j.value("neighbor_set_size", c.neighbor_set_size);
  c.epochs = j.value("epochs", c.epochs);
  c.lr_start = j.value("lr_start", c.lr_start);
  c.lr_end = j.value("lr_end", c.lr_end);
  c.seed = j.value("seed", c.seed);
  c.convergence_tol = j.value("convergence_tol", c.convergence_tol);
  c.threads = j.value("threads", c.threads);
  auto opt = [&](const char* key, std::optional<bool>& dst) {
    if (!j.contains(key)) return;
    dst = j[key].is_null() ? std::nullopt : std::optional<bool>(j[key].get<bool>());
  };
  opt("use_segment_loss", c.use_segment_loss);
  opt("use_neighbor_loss", c.use_neighbor_loss);
  opt("use_smoothing_loss", c.use_smoothing_loss);
  return c;
}

// ---------------------------------------------------------------------------
// Embedding text format

namespace {

void append_row(std::string& out, std::size_t id, std::span<const double> row) {
  char buf[40];
  out += std::to_string(id);
  for (double v : row) {
    std::snprintf(buf, sizeof buf, " %.17g", v);
    out += buf;
  }
  out += '\n';
}

void append_table(std::string& out, const char* name, const Matrix& m) {
  out += "@" + std::string(name) + " " + std::to_string(m.rows()) + " " + std::to_string(m.cols()) + "\n";
  for (std::size_t r = 0; r < m.rows(); ++r) append_row(out, r, m.row(r));
}

class LineReader {
public:
  explicit LineReader(std::string_view text) : text_(text) {}
  bool done() const { return pos_ >= text_.size(); }
  std::string_view peek() const { return line_at(pos_).first; }
  std::string_view next() {
    auto [line, end] = line_at(pos_);
    pos_ = end;
    ++line_no_;
    return line;
  }
  std::size_t offset() const { return pos_; }
  std::size_t line_no() const { return line_no_; }

private:
  std::pair<std::string_view, std::size_t> line_at(std::size_t p) const {
    const auto nl = text_.find('\n', p);
    if (nl == std::string_view::npos) return {text_.substr(p), text_.size()};
    return {text_.substr(p, nl - p), nl + 1};
  }
  std::string_view text_;
  std::size_t pos_ = 0;
  std::size_t line_no_ = 0;
};

std::vector<std::string_view> split_ws(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && (s[i] == ' ' || s[i] == '\t' || s[i] == '\r')) ++i;
    const std::size_t b = i;
    while (i < s.size() && s[i] != ' ' && s[i] != '\t' && s[i] != '\r') ++i;
    if (i > b) out.push_back(s.substr(b, i - b));
  }
  return out;
}

template <class T>
bool parse_int(std::string_view s, T& v) {
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  return ec == std::errc() && p == s.data() + s.size();
}

double parse_double(std::string_view s, std::size_t line) {
  const std::string tmp(s);
  char* end = nullptr;
  const double v = std::strtod(tmp.c_str(), &end);
  require(end == tmp.c_str() + tmp.size() && !tmp.empty(), ErrorCode::MalformedRow,
          "line " + std::to_string(line) + ": bad number '" + tmp + "'");
  return v;
}

void read_table(LineReader& in, Matrix& m, std::size_t rows, std::size_t cols, const std::string& what) {
  m = Matrix(rows, cols);
  for (std::size_t r = 0; r < rows; ++r) {
    require(!in.done() && !in.peek().starts_with("@"), ErrorCode::TruncatedFile,
            what + ": header announces " + std::to_string(rows) + " rows, found " + std::to_string(r));
    const auto line = in.next();
    const auto tok = split_ws(line);
    require(tok.size() == cols + 1, ErrorCode::DimensionMismatch,
            what + " row " + std::to_string(r) + " has " + std::to_string(tok.empty() ? 0 : tok.size() - 1) +
                " values, expected " + std::to_string(cols));
    std::size_t id = 0;
    require(parse_int(tok[0], id) && id == r, ErrorCode::HeaderMismatch,
            what + ": expected row id " + std::to_string(r) + " at line " + std::to_string(in.line_no()));
    for (std::size_t c = 0; c < cols; ++c) m(r, c) = parse_double(tok[c + 1], in.line_no());
  }
}

}  // namespace

std::string serialize_embeddings(const EmbeddingSpace& s) {
  const bool sample = s.granularity.level == GranularityLevel::Sample;
  const Matrix& primary = sample ? s.symbol_vectors : s.segment_vectors;
  std::string out = std::to_string(primary.rows()) + " " + std::to_string(s.dim) + " " +
                    std::string(to_string(s.granularity.level)) + "\n";
  for (std::size_t r = 0; r < primary.rows(); ++r) append_row(out, r, primary.row(r));
  append_table(out, "symbol_out", s.symbol_out_weights);
  append_table(out, "segment_out", s.segment_out_weights);
  if (!sample) append_table(out, "symbol_in", s.symbol_vectors);
  nlohmann::json meta{{"samples_per_segment", s.granularity.samples_per_segment},
                      {"sampling_period_s", s.sampling_period_s},
                      {"config", train_config_to_json(s.config)},
                      {"subject_ids", s.subject_ids},
                      {"segments_per_subject", s.segments_per_subject},
                      {"symbol_counts", s.symbol_counts},
                      {"corpus_digest", s.corpus_digest}};
  out += "@meta " + meta.dump() + "\n";
  out += "@digest " + sha256_hex(out) + "\n";
  return out;
}

EmbeddingSpace parse_embeddings(std::string_view text, std::optional<std::size_t> expected_dim) {
  LineReader in(text);
  require(!in.done(), ErrorCode::HeaderMismatch, "empty embedding file");
  const auto head = split_ws(in.next());
  std::size_t count = 0, dim = 0;
  require(head.size() == 3 && parse_int(head[0], count) && parse_int(head[1], dim) && dim > 0,
          ErrorCode::HeaderMismatch, "first line must be '<count> <dim> <granularity>'");
  EmbeddingSpace s;
  try {
    s.granularity.level = parse_granularity(head[2]);
  } catch (const Error&) {
    fail(ErrorCode::HeaderMismatch, "unknown granularity '" + std::string(head[2]) + "'");
  }
  s.dim = dim;
  if (expected_dim)
    require(*expected_dim == dim, ErrorCode::DimensionMismatch,
            "file holds " + std::to_string(dim) + "-d vectors, consumer expects " +
                std::to_string(*expected_dim));
  const bool sample = s.granularity.level == GranularityLevel::Sample;
  read_table(in, sample ? s.symbol_vectors : s.segment_vectors, count, dim, "vectors");

  bool have_meta = false;
  std::optional<std::string> digest;
  std::size_t digest_offset = 0;
  while (!in.done()) {
    const std::size_t at = in.offset();
    const auto line = in.next();
    if (line.empty()) continue;
    const auto tok = split_ws(line);
    require(!tok.empty() && tok[0].starts_with("@"), ErrorCode::TruncatedFile,
            "unexpected row at line " + std::to_string(in.line_no()) + " (more rows than announced?)");
    const auto tag = tok[0].substr(1);
    if (tag == "digest") {
      require(tok.size() == 2, ErrorCode::HeaderMismatch, "malformed digest trailer");
      digest = std::string(tok[1]);
      digest_offset = at;
      break;
    }
    if (tag == "meta") {
      const auto payload = line.substr(line.find(' ') + 1);
      nlohmann::json m;
      try {
        m = nlohmann::json::parse(payload);
        s.granularity.samples_per_segment = m.at("samples_per_segment").get<std::size_t>();
        s.sampling_period_s = m.at("sampling_period_s").get<int>();
        s.config = train_config_from_json(m.at("config"));
        s.subject_ids = m.at("subject_ids").get<std::vector<std::string>>();
        s.segments_per_subject = m.at("segments_per_subject").get<std::vector<std::size_t>>();
        s.symbol_counts = m.at("symbol_counts").get<std::vector<std::uint64_t>>();
        s.corpus_digest = m.at("corpus_digest").get<std::string>();
      } catch (const nlohmann::json::exception& e) {
        fail(ErrorCode::HeaderMismatch, std::string("bad metadata section: ") + e.what());
      }
      have_meta = true;
      continue;
    }
    std::size_t rows = 0, cols = 0;
    require(tok.size() == 3 && parse_int(tok[1], rows) && parse_int(tok[2], cols),
            ErrorCode::HeaderMismatch, "bad section header '" + std::string(line) + "'");
    Matrix* dst = nullptr;
    if (tag == "symbol_out") dst = &s.symbol_out_weights;
    else if (tag == "segment_out") dst = &s.segment_out_weights;
    else if (tag == "symbol_in" && !sample) dst = &s.symbol_vectors;
    require(dst != nullptr, ErrorCode::HeaderMismatch, "unknown section '" + std::string(tag) + "'");
    require(rows == 0 || cols == dim, ErrorCode::DimensionMismatch,
            std::string(tag) + " has width " + std::to_string(cols));
    read_table(in, *dst, rows, cols, std::string(tag));
  }
  require(digest.has_value(), ErrorCode::TruncatedFile, "missing digest trailer");
  require(have_meta, ErrorCode::TruncatedFile, "missing metadata section");
  require(sha256_hex(text.substr(0, digest_offset)) == *digest, ErrorCode::DigestMismatch,
          "embedding file content does not match its digest");
  require(s.granularity == Granularity::make(s.granularity.level, s.sampling_period_s),
          ErrorCode::HeaderMismatch, "segment span disagrees with granularity and period");
  require(s.config.dim == dim, ErrorCode::HeaderMismatch, "stored config dimension disagrees with header");
  return s;
}

void save_embeddings(const fs::path& path, const EmbeddingSpace& space) {
  write_file_atomic(path, serialize_embeddings(space));
}

EmbeddingSpace load_embeddings(const fs::path& path, std::optional<std::size_t> expected_dim) {
  return parse_embeddings(read_file(path), expected_dim);
}

// ---------------------------------------------------------------------------
// Checkpoints

namespace {

constexpr char kMagic[8] = {'A', 'C', 'T', 'N', 'C', 'K', 'P', 'T'};

struct Writer {
  std::string buf;
  template <class T>
  void pod(const T& v) {
    buf.append(reinterpret_cast<const char*>(&v), sizeof v);
  }
  void str(std::string_view s) {
    pod<std::uint64_t>(s.size());
    buf.append(s);
  }
  void doubles(std::span<const double> v) {
    pod<std::uint64_t>(v.size());
    buf.append(reinterpret_cast<const char*>(v.data()), v.size() * sizeof(double));
  }
  void tensor(const Tensor& t) {
    pod<std::uint64_t>(t.rank());
    for (auto d : t.shape()) pod<std::uint64_t>(d);
    doubles(t.values());
  }
};

struct Reader {
  std::string_view buf;
  std::size_t pos = 0;
  void need(std::size_t n) const {
    require(buf.size() - pos >= n, ErrorCode::TruncatedFile, "checkpoint ends early");
  }
  template <class T>
  T pod() {
    need(sizeof(T));
    T v;
    std::memcpy(&v, buf.data() + pos, sizeof v);
    pos += sizeof v;
    return v;
  }
  std::string str() {
    const auto n = pod<std::uint64_t>();
    need(n);
    std::string s(buf.substr(pos, n));
    pos += n;
    return s;
  }
  std::vector<double> doubles() {
    const auto n = pod<std::uint64_t>();
    require(n <= (buf.size() - pos) / sizeof(double), ErrorCode::TruncatedFile, "checkpoint ends early");
    std::vector<double> v(n);
    std::memcpy(v.data(), buf.data() + pos, n * sizeof(double));
    pos += n * sizeof(double);
    return v;
  }
  Tensor tensor() {
    const auto rank = pod<std::uint64_t>();
    require(rank <= 8, ErrorCode::HeaderMismatch, "implausible tensor rank");
    std::vector<std::size_t> shape;
    for (std::uint64_t i = 0; i < rank; ++i) shape.push_back(pod<std::uint64_t>());
    auto data = doubles();
    Tensor t(shape);
    require(t.size() == data.size(), ErrorCode::ShapeMismatch, "tensor blob disagrees with its shape");
    t.storage() = std::move(data);
    return t;
  }
};

void assign_checked(Tensor& dst, Tensor src, const std::string& what) {
  require(dst.same_shape(src), ErrorCode::ShapeMismatch,
          what + ": stored " + shape_string(src.shape()) + " vs model " + shape_string(dst.shape()));
  dst = std::move(src);
}

}  // namespace

std::string serialize_checkpoint(const TrainingState& st) {
  Writer w;
  nlohmann::json cfg = st.config;
  w.str(cfg.dump());
  w.pod<std::int32_t>(st.epochs_done);
  const auto names = st.model.parameter_names();
  const auto params = st.model.parameters();
  w.pod<std::uint64_t>(params.size());
  for (std::size_t i = 0; i < params.size(); ++i) {
    w.str(names[i]);
    w.tensor(params[i]->value);
    const AdamMoments& m = st.moments.at(i);
    w.pod<std::uint64_t>(m.step);
    w.pod<std::uint8_t>(m.m.size() ? 1 : 0);
    if (m.m.size()) {
      w.tensor(m.m);
      w.tensor(m.v);
    }
  }
  const auto bufs = st.model.buffers();
  w.pod<std::uint64_t>(bufs.size());
  for (const auto* b : bufs) w.tensor(*b);
  w.pod<std::uint64_t>(st.trace.size());
  for (const auto& e : st.trace) {
    w.pod<std::int32_t>(e.epoch);
    w.pod<double>(e.loss);
    w.pod<std::uint64_t>(e.batches);
    w.pod<double>(e.train_accuracy);
  }

  std::string out(kMagic, sizeof kMagic);
  Writer head;
  head.pod<std::uint32_t>(kCheckpointVersion);
  head.pod<std::uint64_t>(w.buf.size());
  out += head.buf;
  out += w.buf;
  out += sha256_hex(w.buf);
  return out;
}

TrainingState parse_checkpoint(std::string_view bytes) {
  require(bytes.size() >= sizeof kMagic && std::memcmp(bytes.data(), kMagic, sizeof kMagic) == 0,
          ErrorCode::HeaderMismatch, "not a checkpoint file");
  Reader h{bytes, sizeof kMagic};
  const auto version = h.pod<std::uint32_t>();
  require(version == kCheckpointVersion, ErrorCode::VersionMismatch,
          "checkpoint version " + std::to_string(version) + ", supported " +
              std::to_string(kCheckpointVersion));
  const auto len = h.pod<std::uint64_t>();
  require(bytes.size() - h.pos >= 64 && bytes.size() - h.pos - 64 >= len, ErrorCode::TruncatedFile,
          "checkpoint ends early");
  const auto payload = bytes.substr(h.pos, len);
  require(sha256_hex(payload) == bytes.substr(h.pos + len, 64), ErrorCode::DigestMismatch,
          "checkpoint payload does not match its digest");

  Reader r{payload};
  TrainingState st;
  try {
    st.config = nlohmann::json::parse(r.str()).get<ModelTrainConfig>();
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::HeaderMismatch, std::string("bad architecture record: ") + e.what());
  }
  st.epochs_done = r.pod<std::int32_t>();
  st.model = CnnModel(st.config.spec, st.config.seed);
  const auto names = st.model.parameter_names();
  auto params = st.model.parameters();
  const auto n = r.pod<std::uint64_t>();
  require(n == params.size(), ErrorCode::ShapeMismatch, "parameter count disagrees with architecture");
  st.moments.resize(params.size());
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto name = r.str();
    require(name == names[i], ErrorCode::ShapeMismatch, "expected parameter " + names[i] + ", found " + name);
    assign_checked(params[i]->value, r.tensor(), name);
    AdamMoments& m = st.moments[i];
    m.step = r.pod<std::uint64_t>();
    if (r.pod<std::uint8_t>()) {
      m.m = r.tensor();
      m.v = r.tensor();
      require(m.m.same_shape(params[i]->value) && m.v.same_shape(params[i]->value),
              ErrorCode::ShapeMismatch, name + ": optimiser state shape");
    }
  }
  auto bufs = st.model.buffers();
  require(r.pod<std::uint64_t>() == bufs.size(), ErrorCode::ShapeMismatch, "buffer count disagrees");
  for (auto* b : bufs) assign_checked(*b, r.tensor(), "batch-norm statistics");
  const auto ne = r.pod<std::uint64_t>();
  for (std::uint64_t i = 0; i < ne; ++i) {
    ModelEpoch e;
    e.epoch = r.pod<std::int32_t>();
    e.loss = r.pod<double>();
    e.batches = r.pod<std::uint64_t>();
    e.train_accuracy = r.pod<double>();
    st.trace.push_back(e);
  }
  require(r.pos == payload.size(), ErrorCode::HeaderMismatch, "trailing bytes in checkpoint payload");
  return st;
}

void save_checkpoint(const fs::path& path, const TrainingState& state) {
  write_file_atomic(path, serialize_checkpoint(state));
}

TrainingState load_checkpoint(const fs::path& path) { return parse_checkpoint(read_file(path)); }

// ---------------------------------------------------------------------------
// CSV and vocabulary

void write_activity_csv(std::ostream& out, const Dataset& ds) {
  out << "subject_id,timestamp_index,activity_count\n";
  for (const auto& s : ds.sequences)
    for (std::size_t i = 0; i < s.counts.size(); ++i) {
      out << s.subject_id << ',' << i << ',';
      if (s.counts[i] == kMissingCount) out << "NA";
      else out << s.counts[i];
      out << '\n';
    }
}

void write_labels_csv(std::ostream& out, const Dataset& ds) {
  out << "subject_id";
  for (Task t : kAllTasks) out << ',' << to_string(t);
  out << '\n';
  for (const auto& s : ds.sequences) {
    auto it = ds.labels.find(s.subject_id);
    if (it == ds.labels.end()) continue;
    out << s.subject_id;
    for (Task t : kAllTasks) {
      const auto& v = it->second[t];
      out << ',' << (v ? *v : -1);
    }
    out << '\n';
  }
}

std::string serialize_vocabulary(const Vocabulary& vocab) {
  std::string out;
  const auto raw = vocab.raw_values();
  const auto counts = vocab.counts();
  for (std::size_t i = 0; i < raw.size(); ++i)
    out += std::to_string(raw[i]) + " " + std::to_string(counts[i]) + "\n";
  out += "UNK " + std::to_string(counts.back()) + "\n";
  return out;
}

Vocabulary parse_vocabulary(std::string_view text) {
  LineReader in(text);
  std::map<RawCount, std::uint64_t> counts;
  std::optional<std::uint64_t> unk;
  while (!in.done()) {
    const auto tok = split_ws(in.next());
    if (tok.empty()) continue;
    require(tok.size() == 2 && !unk, ErrorCode::MalformedRow,
            "vocabulary line " + std::to_string(in.line_no()));
    std::uint64_t c = 0;
    require(parse_int(tok[1], c), ErrorCode::MalformedRow, "vocabulary line " + std::to_string(in.line_no()));
    if (tok[0] == "UNK") {
      unk = c;
      continue;
    }
    RawCount v = 0;
    require(parse_int(tok[0], v) && !counts.contains(v), ErrorCode::MalformedRow,
            "vocabulary line " + std::to_string(in.line_no()));
    counts[v] = c;
  }
  require(unk.has_value(), ErrorCode::TruncatedFile, "vocabulary lacks the UNK line");
  return Vocabulary::from_counts(counts, *unk);
}

}  // namespace acton
