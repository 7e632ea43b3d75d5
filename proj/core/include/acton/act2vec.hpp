#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "acton/core.hpp"
#include "acton/matrix.hpp"
#include "acton/noise.hpp"

namespace acton {

/// Hyperparameters of the unsupervised activity-embedding learner.
struct TrainConfig {
  GranularityLevel granularity = GranularityLevel::Day;
  std::size_t dim = 100;
  std::size_t window = 30;      // target-sampling window (segments) or context radius (sample)
  std::size_t negatives = 5;
  double eta = 0.25;             // smoothing strength; forced to 0 for week
  int neighbor_set_size = 2;     // 2 or 4
  int epochs = 20;
  double lr_start = 0.025;
  double lr_end = 1e-4;
  std::uint64_t seed = 7;
  double convergence_tol = 1e-4;
  int threads = 1;               // > 1 enables the non-deterministic throughput mode

  // Objective switches; unset means the granularity default
  // (hour/day: all three, week: segment only, sample: skip-gram only).
  std::optional<bool> use_segment_loss;
  std::optional<bool> use_neighbor_loss;
  std::optional<bool> use_smoothing_loss;

  /// Tuned defaults per granularity: window 20/20/30/50, eta 0/0.5/0.25/0.
  static TrainConfig defaults_for(GranularityLevel level);

  bool segment_loss_enabled() const;
  bool neighbor_loss_enabled() const;
  bool smoothing_enabled() const;
  /// Throws InvalidConfig on inconsistent settings.
  void validate(const Granularity& g) const;

  bool operator==(const TrainConfig&) const = default;
};

/// Learned tables. Segment tables are indexed by global segment id, symbol
/// tables by symbol id. Sample granularity keeps symbol input vectors and no
/// segment tables.
struct EmbeddingSpace {
  Granularity granularity;
  int sampling_period_s = kDefaultSamplingPeriod;
  std::size_t dim = 0;
  TrainConfig config;

  Matrix segment_vectors;      // input vectors of segments
  Matrix segment_out_weights;  // output weights for neighbour prediction
  Matrix symbol_vectors;       // input vectors of symbols (sample granularity)
  Matrix symbol_out_weights;   // output weights for symbol prediction

  std::vector<std::string> subject_ids;            // corpus order
  std::vector<std::size_t> segments_per_subject;
  std::vector<std::uint64_t> symbol_counts;         // corpus counts behind the noise table
  std::string corpus_digest;

  std::optional<std::size_t> subject_index(const std::string& subject_id) const;
  SegmentId first_segment_of(std::size_t subject_index) const;

  bool operator==(const EmbeddingSpace&) const = default;
};

struct EpochLoss {
  int epoch = 0;
  double symbol_loss = 0.0;     // segment-specific (or skip-gram) term, summed
  double neighbor_loss = 0.0;
  double smoothing_loss = 0.0;
  std::uint64_t targets = 0;    // sampled targets (segments) or centre positions (sample)

  double combined_mean() const noexcept {
    return targets ? (symbol_loss + neighbor_loss + smoothing_loss) / static_cast<double>(targets)
                   : 0.0;
  }
};

struct TrainResult {
  EmbeddingSpace space;
  std::vector<EpochLoss> trace;
};

// ---------------------------------------------------------------------------
// Loss kernels. These evaluate losses and exact gradients without touching
// the parameters; the trainer applies the same kernels in place.

/// Loss -log s(w_pos . x) - sum_m log s(-w_neg_m . x) and its gradients.
struct NegativeSamplingGrad {
  double loss = 0.0;
  std::vector<double> d_input;    // d loss / d x
  std::vector<double> d_outputs;  // row-major (1 + M) x d: positive first, then negatives
};

NegativeSamplingGrad negative_sampling_loss_grad(std::span<const double> input,
                                                 const Matrix& output_table,
                                                 std::int64_t positive,
                                                 std::span<const std::int64_t> negatives);

NegativeSamplingGrad loss_grad_segment(const EmbeddingSpace& space, SegmentId segment,
                                       SymbolId target, std::span<const std::int64_t> negatives);

NegativeSamplingGrad loss_grad_neighbor(const EmbeddingSpace& space, SegmentId segment,
                                        SegmentId neighbor, std::span<const std::int64_t> negatives);

struct SmoothingGrad {
  double loss = 0.0;
  std::vector<double> d_center;  // only the centre segment receives a gradient
};

SmoothingGrad smoothing_loss_grad(std::span<const double> center,
                                  std::span<const std::span<const double>> neighbors, double eta);

SmoothingGrad loss_grad_smoothing(const EmbeddingSpace& space, SegmentId segment,
                                  std::span<const SegmentId> neighbors, double eta);

/// -log sigmoid(z), evaluated without overflow.
double neg_log_sigmoid(double z) noexcept;
double sigmoid(double z) noexcept;

// ---------------------------------------------------------------------------

/// Trains segment (or symbol) embeddings over an encoded corpus with SGD.
/// `vocab_size` fixes the symbol table height (ids must be < vocab_size).
TrainResult train(std::span<const ActivitySequence> corpus, std::size_t vocab_size,
                  const TrainConfig& cfg);

struct InferConfig {
  int steps = 50;
  std::uint64_t seed = 7;
  std::optional<double> lr_start;  // default: space.config.lr_start
  std::optional<double> lr_end;
};

/// Embeds a sequence that was not part of training by fitting fresh segment
/// vectors against the frozen output weights. For sample granularity the
/// symbol vectors are looked up directly.
std::vector<std::vector<double>> infer_sequence(const EmbeddingSpace& space,
                                                const ActivitySequence& seq,
                                                const InferConfig& cfg = {});

/// Feature vector of a training member: stored segment vectors (or symbol
/// vectors at sample granularity) concatenated in temporal order.
std::vector<double> sequence_features(const EmbeddingSpace& space, const ActivitySequence& seq);

/// Feature vectors for a batch; members use stored vectors, others are inferred.
std::vector<std::vector<double>> corpus_features(const EmbeddingSpace& space,
                                                 std::span<const ActivitySequence> seqs,
                                                 const InferConfig& infer = {});

}  // namespace acton
