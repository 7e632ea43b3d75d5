#include "acton/act2vec.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numeric>
#include <thread>

#include "acton/digest.hpp"

namespace acton {

// ---------------------------------------------------------------------------
// Config

TrainConfig TrainConfig::defaults_for(GranularityLevel level) {
  TrainConfig c;
  c.granularity = level;
  switch (level) {
    case GranularityLevel::Sample: c.window = 20; c.eta = 0.0; break;
    case GranularityLevel::Hour: c.window = 20; c.eta = 0.5; break;
    case GranularityLevel::Day: c.window = 30; c.eta = 0.25; break;
    case GranularityLevel::Week: c.window = 50; c.eta = 0.0; break;
  }
  return c;
}

bool TrainConfig::segment_loss_enabled() const {
  return use_segment_loss.value_or(true);
}

bool TrainConfig::neighbor_loss_enabled() const {
  const bool dflt = granularity == GranularityLevel::Hour || granularity == GranularityLevel::Day;
  return use_neighbor_loss.value_or(dflt);
}

bool TrainConfig::smoothing_enabled() const {
  if (granularity == GranularityLevel::Week || granularity == GranularityLevel::Sample) return false;
  return use_smoothing_loss.value_or(true) && eta > 0.0;
}

void TrainConfig::validate(const Granularity& g) const {
  require(dim > 0, ErrorCode::InvalidConfig, "dim must be positive");
  require(window > 0, ErrorCode::InvalidConfig, "window must be positive");
  require(negatives > 0, ErrorCode::InvalidConfig, "negatives must be positive");
  require(eta >= 0.0, ErrorCode::InvalidConfig, "eta must be non-negative");
  require(neighbor_set_size == 2 || neighbor_set_size == 4, ErrorCode::InvalidConfig,
          "neighbor_set_size must be 2 or 4");
  require(epochs > 0, ErrorCode::InvalidConfig, "epochs must be positive");
  require(lr_start > 0.0 && lr_end >= 0.0, ErrorCode::InvalidConfig, "invalid learning rates");
  require(threads >= 1, ErrorCode::InvalidConfig, "threads must be >= 1");
  if (g.level != GranularityLevel::Sample)
    require(window <= g.samples_per_segment, ErrorCode::InvalidConfig,
            "window exceeds the segment length");
}

std::optional<std::size_t> EmbeddingSpace::subject_index(const std::string& subject_id) const {
  auto it = std::find(subject_ids.begin(), subject_ids.end(), subject_id);
  if (it == subject_ids.end()) return std::nullopt;
  return static_cast<std::size_t>(it - subject_ids.begin());
}

SegmentId EmbeddingSpace::first_segment_of(std::size_t s) const {
  return static_cast<SegmentId>(
      std::accumulate(segments_per_subject.begin(), segments_per_subject.begin() + static_cast<long>(s),
                      std::size_t{0}));
}

// ---------------------------------------------------------------------------
// Scalar helpers

double sigmoid(double z) noexcept {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

double neg_log_sigmoid(double z) noexcept {
  // -log s(z) = log(1 + e^{-z})
  return std::max(-z, 0.0) + std::log1p(std::exp(-std::abs(z)));
}

// ---------------------------------------------------------------------------
// Pure kernels

NegativeSamplingGrad negative_sampling_loss_grad(std::span<const double> x, const Matrix& table,
                                                 std::int64_t positive,
                                                 std::span<const std::int64_t> negatives) {
  const std::size_t d = x.size();
  require(table.cols() == d, ErrorCode::DimensionMismatch, "output table width");
  NegativeSamplingGrad g;
  g.d_input.assign(d, 0.0);
  g.d_outputs.assign((1 + negatives.size()) * d, 0.0);
  auto term = [&](std::size_t slot, std::int64_t row, double label) {
    require(row >= 0 && static_cast<std::size_t>(row) < table.rows(), ErrorCode::IdOutOfRange,
            "output row " + std::to_string(row));
    auto w = table.row(static_cast<std::size_t>(row));
    const double z = dot(w, x);
    g.loss += label > 0.5 ? neg_log_sigmoid(z) : neg_log_sigmoid(-z);
    const double coef = sigmoid(z) - label;
    axpy(coef, w, g.d_input);
    axpy(coef, x, std::span<double>(g.d_outputs).subspan(slot * d, d));
  };
  term(0, positive, 1.0);
  for (std::size_t m = 0; m < negatives.size(); ++m) term(m + 1, negatives[m], 0.0);
  return g;
}

NegativeSamplingGrad loss_grad_segment(const EmbeddingSpace& space, SegmentId segment,
                                       SymbolId target, std::span<const std::int64_t> negatives) {
  require(segment >= 0 && static_cast<std::size_t>(segment) < space.segment_vectors.rows(),
          ErrorCode::UnknownSegment, "segment " + std::to_string(segment));
  return negative_sampling_loss_grad(space.segment_vectors.row(static_cast<std::size_t>(segment)),
                                     space.symbol_out_weights, target, negatives);
}

NegativeSamplingGrad loss_grad_neighbor(const EmbeddingSpace& space, SegmentId segment,
                                        SegmentId neighbor, std::span<const std::int64_t> negatives) {
  require(segment >= 0 && static_cast<std::size_t>(segment) < space.segment_vectors.rows(),
          ErrorCode::UnknownSegment, "segment " + std::to_string(segment));
  return negative_sampling_loss_grad(space.segment_vectors.row(static_cast<std::size_t>(segment)),
                                     space.segment_out_weights, neighbor, negatives);
}

SmoothingGrad smoothing_loss_grad(std::span<const double> center,
                                  std::span<const std::span<const double>> neighbors, double eta) {
  SmoothingGrad g;
  g.d_center.assign(center.size(), 0.0);
  if (neighbors.empty() || eta == 0.0) return g;
  const double scale = eta / static_cast<double>(neighbors.size());
  for (auto nb : neighbors) {
    require(nb.size() == center.size(), ErrorCode::DimensionMismatch, "neighbour width");
    for (std::size_t i = 0; i < center.size(); ++i) {
      const double diff = center[i] - nb[i];
      g.loss += scale * diff * diff;
      g.d_center[i] += 2.0 * scale * diff;
    }
  }
  return g;
}

SmoothingGrad loss_grad_smoothing(const EmbeddingSpace& space, SegmentId segment,
                                  std::span<const SegmentId> neighbors, double eta) {
  std::vector<std::span<const double>> rows;
  for (SegmentId n : neighbors) rows.push_back(space.segment_vectors.row(static_cast<std::size_t>(n)));
  return smoothing_loss_grad(space.segment_vectors.row(static_cast<std::size_t>(segment)), rows, eta);
}

// ---------------------------------------------------------------------------
// In-place SGD steps

namespace {

// Plain access for the deterministic single-writer path.
struct PlainAccess {
  static double load(const double& v) noexcept { return v; }
  static void store(double& v, double x) noexcept { v = x; }
};

// Relaxed atomic access for the throughput mode: concurrent writers may lose
// each other's updates but never tear a value.
struct RelaxedAccess {
  static double load(const double& v) noexcept {
    return std::atomic_ref<double>(const_cast<double&>(v)).load(std::memory_order_relaxed);
  }
  static void store(double& v, double x) noexcept {
    std::atomic_ref<double>(v).store(x, std::memory_order_relaxed);
  }
};

struct StepScratch {
  std::vector<double> d_input;
  std::vector<double> coef;
  std::vector<std::int64_t> negatives;
};

// One exact gradient step on the negative-sampling loss. All coefficients are
// evaluated at the current parameters before any row is written, so repeated
// rows accumulate like a simultaneous update.
template <class Access, bool kUpdateOutputs, class Table>
double negative_sampling_step(std::span<double> x, Table& table, std::int64_t positive,
                              std::span<const std::int64_t> negatives, double lr,
                              StepScratch& scratch) {
  const std::size_t d = x.size();
  scratch.d_input.assign(d, 0.0);
  scratch.coef.resize(1 + negatives.size());
  double loss = 0.0;
  for (std::size_t slot = 0; slot <= negatives.size(); ++slot) {
    const auto row = static_cast<std::size_t>(slot == 0 ? positive : negatives[slot - 1]);
    const double label = slot == 0 ? 1.0 : 0.0;
    auto w = table.row(row);
    double z = 0.0;
    for (std::size_t i = 0; i < d; ++i) z += Access::load(w[i]) * Access::load(x[i]);
    loss += label > 0.5 ? neg_log_sigmoid(z) : neg_log_sigmoid(-z);
    const double c = sigmoid(z) - label;
    scratch.coef[slot] = c;
    for (std::size_t i = 0; i < d; ++i) scratch.d_input[i] += c * Access::load(w[i]);
  }
  if constexpr (kUpdateOutputs) {
    for (std::size_t slot = 0; slot <= negatives.size(); ++slot) {
      const auto row = static_cast<std::size_t>(slot == 0 ? positive : negatives[slot - 1]);
      auto w = table.row(row);
      const double step = lr * scratch.coef[slot];
      for (std::size_t i = 0; i < d; ++i) Access::store(w[i], Access::load(w[i]) - step * Access::load(x[i]));
    }
  }
  for (std::size_t i = 0; i < d; ++i) Access::store(x[i], Access::load(x[i]) - lr * scratch.d_input[i]);
  return loss;
}

double smoothing_step(Matrix& vectors, std::size_t center, std::span<const SegmentId> neighbors,
                      double eta, double lr, std::vector<double>& grad) {
  if (neighbors.empty() || eta == 0.0) return 0.0;
  const std::size_t d = vectors.cols();
  grad.assign(d, 0.0);
  const double scale = eta / static_cast<double>(neighbors.size());
  double loss = 0.0;
  auto x = vectors.row(center);
  for (SegmentId n : neighbors) {
    auto nb = vectors.row(static_cast<std::size_t>(n));
    for (std::size_t i = 0; i < d; ++i) {
      const double diff = x[i] - nb[i];
      loss += scale * diff * diff;
      grad[i] += 2.0 * scale * diff;
    }
  }
  for (std::size_t i = 0; i < d; ++i) x[i] -= lr * grad[i];
  return loss;
}

constexpr std::uint64_t kInitStream = 1;
constexpr std::uint64_t kEpochStream = 2;
constexpr std::uint64_t kWorkerStream = 3;

struct LinearSchedule {
  double start, end;
  std::uint64_t total;
  double at(std::uint64_t processed) const noexcept {
    if (total == 0) return start;
    const double frac = std::min(1.0, static_cast<double>(processed) / static_cast<double>(total));
    return start - (start - end) * frac;
  }
};

std::size_t windows_in(std::size_t length, std::size_t w) { return (length + w - 1) / w; }

struct Trainer {
  std::span<const ActivitySequence> corpus;
  const TrainConfig& cfg;
  SegmentIndex segments;
  EmbeddingSpace& space;
  NoiseTable symbol_noise;
  NoiseTable segment_noise;
  bool seg_loss, nb_loss, smooth;
  LinearSchedule schedule;
  std::atomic<std::uint64_t> processed{0};

  template <class Access>
  void process_subject(std::size_t s, Rng& rng, EpochLoss& acc, StepScratch& scratch,
                       std::vector<double>& grad) {
    const auto& symbols = corpus[s].symbols;
    const std::size_t M = cfg.negatives;
    scratch.negatives.resize(M);

    if (space.granularity.level == GranularityLevel::Sample) {
      const auto n = static_cast<long>(symbols.size());
      for (long j = 0; j < n; ++j) {
        const double lr = schedule.at(processed.fetch_add(1, std::memory_order_relaxed));
        const long b = 1 + static_cast<long>(uniform_index(rng, cfg.window));
        auto x = space.symbol_vectors.row(static_cast<std::size_t>(symbols[static_cast<std::size_t>(j)]));
        for (long c = std::max(0L, j - b); c <= std::min(n - 1, j + b); ++c) {
          if (c == j) continue;
          symbol_noise.sample(rng, scratch.negatives);
          acc.symbol_loss += negative_sampling_step<Access, true>(
              x, space.symbol_out_weights, symbols[static_cast<std::size_t>(c)], scratch.negatives,
              lr, scratch);
        }
        ++acc.targets;
      }
      return;
    }

    for (const auto& seg : segments.of_subject(s)) {
      const auto row = static_cast<std::size_t>(seg.global_id);
      auto x = space.segment_vectors.row(row);
      const auto nbrs = segments.neighbors(seg.global_id, cfg.neighbor_set_size);
      for (std::size_t start = seg.begin; start < seg.end; start += cfg.window) {
        const std::size_t len = std::min(cfg.window, seg.end - start);
        const SymbolId target = symbols[start + uniform_index(rng, len)];
        const double lr = schedule.at(processed.fetch_add(1, std::memory_order_relaxed));
        ++acc.targets;
        if (seg_loss) {
          symbol_noise.sample(rng, scratch.negatives);
          acc.symbol_loss += negative_sampling_step<Access, true>(
              x, space.symbol_out_weights, target, scratch.negatives, lr, scratch);
        }
        if (nb_loss && !nbrs.empty()) {
          const SegmentId ti = nbrs[uniform_index(rng, nbrs.size())];
          segment_noise.sample(rng, scratch.negatives);
          acc.neighbor_loss += negative_sampling_step<Access, true>(
              x, space.segment_out_weights, ti, scratch.negatives, lr, scratch);
        }
        if (smooth) acc.smoothing_loss += smoothing_step(space.segment_vectors, row, nbrs, cfg.eta, lr, grad);
      }
    }
  }
};

}  // namespace

TrainResult train(std::span<const ActivitySequence> corpus, std::size_t vocab_size,
                  const TrainConfig& cfg_in) {
  require(!corpus.empty(), ErrorCode::EmptyInput, "empty training corpus");
  TrainConfig cfg = cfg_in;
  if (cfg.granularity == GranularityLevel::Week) cfg.eta = 0.0;
  const int period = corpus.front().sampling_period_s;
  for (const auto& s : corpus)
    require(s.sampling_period_s == period, ErrorCode::GranularityMismatch,
            "mixed sampling periods in corpus");
  const Granularity g = Granularity::make(cfg.granularity, period);
  cfg.validate(g);

  TrainResult result;
  EmbeddingSpace& space = result.space;
  space.granularity = g;
  space.sampling_period_s = period;
  space.dim = cfg.dim;
  space.config = cfg;

  Sha256 digest;
  space.symbol_counts.assign(vocab_size, 0);
  for (const auto& s : corpus) {
    space.subject_ids.push_back(s.subject_id);
    digest.update(s.subject_id).update("\n", 1);
    digest.update(s.symbols.data(), s.symbols.size() * sizeof(SymbolId));
    for (SymbolId id : s.symbols) {
      require(id >= 0 && static_cast<std::size_t>(id) < vocab_size, ErrorCode::IdOutOfRange,
              "symbol id " + std::to_string(id) + " outside vocabulary");
      ++space.symbol_counts[static_cast<std::size_t>(id)];
    }
  }
  space.corpus_digest = digest.hex();

  Trainer t{corpus, cfg, SegmentIndex(corpus, g), space, {}, {},
            cfg.segment_loss_enabled(), cfg.neighbor_loss_enabled(), cfg.smoothing_enabled(),
            {}, {}};
  if (g.level == GranularityLevel::Sample) {
    t.seg_loss = true;
    t.nb_loss = false;
    t.smooth = false;
  }
  for (std::size_t s = 0; s < corpus.size(); ++s)
    space.segments_per_subject.push_back(t.segments.of_subject(s).size());

  // Initialisation: U(-0.5/d, 0.5/d) for every table, fixed order.
  const double r = 0.5 / static_cast<double>(cfg.dim);
  Rng init_rng(derive_seed(cfg.seed, kInitStream));
  const std::size_t n_seg = t.segments.size();
  if (g.level == GranularityLevel::Sample) {
    space.symbol_vectors = Matrix(vocab_size, cfg.dim);
    space.symbol_vectors.fill_uniform(init_rng, -r, r);
  } else {
    space.segment_vectors = Matrix(n_seg, cfg.dim);
    space.segment_vectors.fill_uniform(init_rng, -r, r);
  }
  space.symbol_out_weights = Matrix(vocab_size, cfg.dim);
  space.symbol_out_weights.fill_uniform(init_rng, -r, r);
  if (t.nb_loss) {
    space.segment_out_weights = Matrix(n_seg, cfg.dim);
    space.segment_out_weights.fill_uniform(init_rng, -r, r);
  }

  t.symbol_noise = NoiseTable(space.symbol_counts);
  if (t.nb_loss) {
    // unigram counts of segment ids as neighbour targets
    std::vector<std::uint64_t> seg_counts(n_seg, 0);
    for (const auto& seg : t.segments.segments())
      for (SegmentId n : t.segments.neighbors(seg.global_id, cfg.neighbor_set_size))
        ++seg_counts[static_cast<std::size_t>(n)];
    if (std::any_of(seg_counts.begin(), seg_counts.end(), [](auto c) { return c > 0; }))
      t.segment_noise = NoiseTable(seg_counts);
    else
      t.nb_loss = false;  // every subject has a single segment
  }

  std::uint64_t per_epoch = 0;
  if (g.level == GranularityLevel::Sample) {
    for (const auto& s : corpus) per_epoch += s.symbols.size();
  } else {
    for (const auto& seg : t.segments.segments()) per_epoch += windows_in(seg.length(), cfg.window);
  }
  t.schedule = LinearSchedule{cfg.lr_start, cfg.lr_end, per_epoch * static_cast<std::uint64_t>(cfg.epochs)};

  std::vector<std::size_t> order(corpus.size());
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    Rng rng(derive_seed(cfg.seed, kEpochStream, static_cast<std::uint64_t>(epoch)));
    std::iota(order.begin(), order.end(), std::size_t{0});
    shuffle(order.begin(), order.end(), rng);
    EpochLoss acc;
    acc.epoch = epoch;

    if (cfg.threads <= 1) {
      StepScratch scratch;
      std::vector<double> grad;
      for (std::size_t s : order) t.process_subject<PlainAccess>(s, rng, acc, scratch, grad);
    } else {
      const auto workers = static_cast<std::size_t>(cfg.threads);
      std::vector<EpochLoss> partial(workers);
      {
        std::vector<std::jthread> pool;
        for (std::size_t w = 0; w < workers; ++w) {
          pool.emplace_back([&, w] {
            Rng wrng(derive_seed(cfg.seed, kWorkerStream,
                                 static_cast<std::uint64_t>(epoch) * workers + w));
            StepScratch scratch;
            std::vector<double> grad;
            for (std::size_t i = w; i < order.size(); i += workers)
              t.process_subject<RelaxedAccess>(order[i], wrng, partial[w], scratch, grad);
          });
        }
      }
      for (const auto& p : partial) {
        acc.symbol_loss += p.symbol_loss;
        acc.neighbor_loss += p.neighbor_loss;
        acc.smoothing_loss += p.smoothing_loss;
        acc.targets += p.targets;
      }
    }

    for (double v : {acc.symbol_loss, acc.neighbor_loss, acc.smoothing_loss})
      require(std::isfinite(v), ErrorCode::NumericFailure, "non-finite embedding loss");
    result.trace.push_back(acc);

    if (result.trace.size() >= 2 && cfg.convergence_tol > 0.0) {
      const double prev = result.trace[result.trace.size() - 2].combined_mean();
      const double cur = acc.combined_mean();
      if (prev != 0.0 && std::abs(cur - prev) / std::abs(prev) < cfg.convergence_tol) break;
    }
  }
  return result;
}

// ---------------------------------------------------------------------------
// Inference and features

std::vector<std::vector<double>> infer_sequence(const EmbeddingSpace& space,
                                                const ActivitySequence& seq,
                                                const InferConfig& cfg) {
  require(seq.sampling_period_s == space.sampling_period_s, ErrorCode::GranularityMismatch,
          "sequence sampling period differs from the embedding space");
  require(cfg.steps >= 0, ErrorCode::InvalidConfig, "steps must be non-negative");
  const std::size_t vocab = space.symbol_out_weights.rows();
  for (SymbolId id : seq.symbols)
    require(id >= 0 && static_cast<std::size_t>(id) < vocab, ErrorCode::IdOutOfRange,
            "symbol id " + std::to_string(id));

  if (space.granularity.level == GranularityLevel::Sample) {
    require(!space.symbol_vectors.empty(), ErrorCode::NoSymbolVectors, "no symbol vectors");
    std::vector<std::vector<double>> out;
    out.reserve(seq.symbols.size());
    for (SymbolId id : seq.symbols) {
      auto row = space.symbol_vectors.row(static_cast<std::size_t>(id));
      out.emplace_back(row.begin(), row.end());
    }
    return out;
  }

  std::vector<TimeSegment> segs;
  try {
    segs = segment_sequence(seq.symbols.size(), space.granularity);
  } catch (const Error& e) {
    fail(ErrorCode::GranularityMismatch, e.what());
  }

  const std::size_t d = space.dim;
  const double r = 0.5 / static_cast<double>(d);
  Rng rng(cfg.seed);
  Matrix vectors(segs.size(), d);
  vectors.fill_uniform(rng, -r, r);
  if (cfg.steps == 0) {
    std::vector<std::vector<double>> out;
    for (std::size_t k = 0; k < segs.size(); ++k) out.emplace_back(vectors.row(k).begin(), vectors.row(k).end());
    return out;
  }

  const TrainConfig& tc = space.config;
  const NoiseTable noise(space.symbol_counts);
  const bool smooth = tc.smoothing_enabled() && segs.size() > 1;
  std::uint64_t per_pass = 0;
  for (const auto& s : segs) per_pass += windows_in(s.length(), tc.window);
  const LinearSchedule schedule{cfg.lr_start.value_or(tc.lr_start), cfg.lr_end.value_or(tc.lr_end),
                                per_pass * static_cast<std::uint64_t>(cfg.steps)};

  // output weights stay frozen; the step only writes the segment row
  const Matrix& frozen = space.symbol_out_weights;
  StepScratch scratch;
  scratch.negatives.resize(tc.negatives);
  std::vector<double> grad;
  std::uint64_t processed = 0;
  const long radius = tc.neighbor_set_size / 2;
  for (int step = 0; step < cfg.steps; ++step) {
    for (std::size_t k = 0; k < segs.size(); ++k) {
      std::vector<SegmentId> nbrs;
      for (long j = static_cast<long>(k) - radius; j <= static_cast<long>(k) + radius; ++j)
        if (j != static_cast<long>(k) && j >= 0 && j < static_cast<long>(segs.size()))
          nbrs.push_back(j);
      for (std::size_t start = segs[k].begin; start < segs[k].end; start += tc.window) {
        const std::size_t len = std::min(tc.window, segs[k].end - start);
        const SymbolId target = seq.symbols[start + uniform_index(rng, len)];
        const double lr = schedule.at(processed++);
        noise.sample(rng, scratch.negatives);
        negative_sampling_step<PlainAccess, false>(vectors.row(k), frozen, target,
                                                   scratch.negatives, lr, scratch);
        if (smooth) smoothing_step(vectors, k, nbrs, tc.eta, lr, grad);
      }
    }
  }
  std::vector<std::vector<double>> out;
  for (std::size_t k = 0; k < segs.size(); ++k) out.emplace_back(vectors.row(k).begin(), vectors.row(k).end());
  return out;
}

std::vector<double> sequence_features(const EmbeddingSpace& space, const ActivitySequence& seq) {
  if (space.granularity.level == GranularityLevel::Sample) {
    require(!space.symbol_vectors.empty(), ErrorCode::NoSymbolVectors, "no symbol vectors");
    std::vector<double> out;
    out.reserve(seq.symbols.size() * space.dim);
    for (SymbolId id : seq.symbols) {
      require(id >= 0 && static_cast<std::size_t>(id) < space.symbol_vectors.rows(),
              ErrorCode::IdOutOfRange, "symbol id " + std::to_string(id));
      auto row = space.symbol_vectors.row(static_cast<std::size_t>(id));
      out.insert(out.end(), row.begin(), row.end());
    }
    return out;
  }
  const auto s = space.subject_index(seq.subject_id);
  require(s.has_value(), ErrorCode::UnknownSegment,
          "subject " + seq.subject_id + " has no stored segment vectors");
  const auto first = static_cast<std::size_t>(space.first_segment_of(*s));
  const std::size_t K = space.segments_per_subject[*s];
  std::vector<std::vector<double>> rows;
  rows.reserve(K);
  for (std::size_t k = 0; k < K; ++k) {
    auto row = space.segment_vectors.row(first + k);
    rows.emplace_back(row.begin(), row.end());
  }
  return concat_features(rows);
}

std::vector<std::vector<double>> corpus_features(const EmbeddingSpace& space,
                                                 std::span<const ActivitySequence> seqs,
                                                 const InferConfig& infer) {
  std::vector<std::vector<double>> out;
  out.reserve(seqs.size());
  for (std::size_t i = 0; i < seqs.size(); ++i) {
    const bool member = space.granularity.level == GranularityLevel::Sample ||
                        space.subject_index(seqs[i].subject_id).has_value();
    if (member) {
      out.push_back(sequence_features(space, seqs[i]));
    } else {
      InferConfig c = infer;
      c.seed = derive_seed(infer.seed, 11, i);
      out.push_back(concat_features(infer_sequence(space, seqs[i], c)));
    }
  }
  return out;
}

}  // namespace acton
