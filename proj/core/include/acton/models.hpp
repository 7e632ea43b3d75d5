#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "acton/core.hpp"
#include "acton/gradcheck.hpp"
#include "acton/layers.hpp"
#include "acton/random.hpp"

namespace acton {

struct EmbeddingSpace;

// ---------------------------------------------------------------------------
// Baselines

/// Most frequent class among `labels`; ties go to the lowest class id.
int majority_class(std::span<const int> labels, int n_classes);
std::vector<int> predict_majority(int majority, std::size_t n);
/// Uniform class draws from a seeded generator.
std::vector<int> predict_random(std::size_t n, int n_classes, std::uint64_t seed);

/// Index of the largest score, lowest index on ties.
std::size_t argmax(std::span<const double> scores) noexcept;

// ---------------------------------------------------------------------------
// Logistic regression probe

struct LogRegConfig {
  double l2 = 1e-4;
  int epochs = 100;
  double lr = 0.05;
  std::uint64_t seed = 7;
};

/// Standardised linear model. Binary tasks keep one logistic unit for the
/// positive class; K > 2 uses K one-vs-all units.
struct LinearModel {
  int n_classes = 2;
  std::vector<double> mean;
  std::vector<double> scale;
  std::vector<std::vector<double>> weights;  // per unit: d weights then bias

  std::vector<double> class_scores(std::span<const double> x) const;
  int predict(std::span<const double> x) const;
  std::vector<int> predict(const std::vector<std::vector<double>>& xs) const;
};

/// Throws SingleClassTrainingSet when fewer than two classes are present.
LinearModel train_logreg(const std::vector<std::vector<double>>& features,
                         std::span<const int> labels, int n_classes,
                         const LogRegConfig& cfg = {});

// ---------------------------------------------------------------------------
// CNN

/// Architecture of the (multi-task) convolutional classifier.
struct NetworkSpec {
  std::size_t vocab_size = 0;
  std::size_t seq_len = 0;
  std::size_t embed_dim = 100;
  std::size_t filters = 64;
  std::size_t kernel = 5;
  std::optional<std::size_t> padding;      // default kernel - 1 (wide)
  std::size_t pool_window = 4;
  std::optional<std::size_t> pool_stride;  // default pool_window
  std::size_t depth = 3;
  std::size_t dense_units = 64;
  double dropout = 0.5;
  double l1 = 0.25;
  double l2 = 0.25;
  std::vector<Task> tasks{Task::Apnea};
  std::array<double, kTaskCount> alpha{1.0, 0.0, 0.0, 0.0};

  std::size_t conv_padding() const { return padding.value_or(kernel - 1); }
  std::size_t stride() const { return pool_stride.value_or(pool_window); }
  /// Sequence length after the conv/pool stack; throws WindowTooLarge.
  std::size_t final_length() const;
  /// Checks shapes and that alpha sums to one (AlphaSumViolation).
  void validate() const;

  bool operator==(const NetworkSpec&) const = default;
};

void to_json(nlohmann::json& j, const NetworkSpec& s);
void from_json(const nlohmann::json& j, NetworkSpec& s);

/// Conv depth per task and for the shared multi-task encoder.
std::size_t default_depth(Task task) noexcept;
inline constexpr std::size_t kMultiTaskDepth = 3;
// Mixture-weight presets in Task order (apnea, diabetes, hypertension, insomnia).
inline constexpr std::array<double, kTaskCount> kAlphaNoPretrain{0.2, 0.2, 0.2, 0.4};
// Published as 0.3 / 0.25 / 0.15 / 0.35, which sums to 1.05; rescaled to one.
inline constexpr std::array<double, kTaskCount> kAlphaPretrain{0.3 / 1.05, 0.25 / 1.05, 0.15 / 1.05,
                                                              0.35 / 1.05};

/// sum_m alpha_m L_m. Throws AlphaSumViolation unless alpha sums to one
/// within 1e-9 with no negative entry.
double multitask_loss(std::span<const double> losses, std::span<const double> alpha);
/// Same over the tasks flagged present, with alpha renormalised over them.
/// Returns 0 when no present task carries weight.
double multitask_loss(std::span<const double> losses, std::span<const double> alpha,
                      std::span<const bool> present);

struct Head {
  Task task = Task::Apnea;
  Dense layer;
};

/// embed -> (conv+ReLU -> avg pool -> batchnorm) x depth -> dense+ReLU ->
/// dropout -> one softmax head per task on the shared representation.
class CnnModel {
public:
  CnnModel() = default;
  CnnModel(const NetworkSpec& spec, std::uint64_t seed);

  const NetworkSpec& spec() const { return spec_; }

  /// Per-head class probabilities, in `spec().tasks` order. `ids` holds
  /// `batch` sequences of length `seq_len` back to back.
  std::vector<Tensor> forward(std::span<const SymbolId> ids, std::size_t batch, Mode mode,
                              Rng& rng);
  /// Back-propagates per-head logit gradients from the last forward call.
  /// Heads without a gradient (nullptr) are left untouched.
  void backward(std::span<const Tensor* const> d_logits);

  /// Named parameters: shared first, then heads.
  std::vector<Param*> parameters();
  std::vector<const Param*> parameters() const;
  std::vector<Param*> shared_parameters();
  /// Stable paths aligned with parameters(), e.g. "conv0.weight", "head.apnea.bias".
  std::vector<std::string> parameter_names() const;
  Head& head(Task task);
  const Head& head(Task task) const;
  std::optional<std::size_t> head_index(Task task) const;

  /// Running batch-norm statistics, in layer order (mean, var per layer).
  std::vector<Tensor*> buffers();
  std::vector<const Tensor*> buffers() const;

  Embedding embed;
  std::vector<Conv1D> convs;
  std::vector<AvgPool1D> pools;
  std::vector<BatchNorm> norms;
  Dense dense;
  Dropout drop;
  std::vector<Head> heads;

private:
  NetworkSpec spec_;
  std::size_t batch_ = 0;
  std::vector<std::size_t> pre_flatten_shape_;
};

/// Seed streams used for model construction.
inline constexpr std::uint64_t kShapeInitStream = 21;
inline constexpr std::uint64_t kHeadInitStream = 22;
inline constexpr std::uint64_t kBatchStream = 23;

struct ModelTrainConfig {
  NetworkSpec spec;
  int epochs = 30;
  std::size_t batch_size = 32;
  AdamConfig adam;
  std::uint64_t seed = 7;
  bool track_accuracy = false;  // eval-mode training accuracy per epoch (one extra pass)
};

void to_json(nlohmann::json& j, const ModelTrainConfig& c);
void from_json(const nlohmann::json& j, ModelTrainConfig& c);

struct ModelEpoch {
  int epoch = 0;
  double loss = 0.0;           // mean multi-task loss over trained batches
  std::size_t batches = 0;
  double train_accuracy = 0.0; // mean over trained heads, eval mode
};

/// Everything needed to continue training exactly where it stopped.
struct TrainingState {
  ModelTrainConfig config;
  CnnModel model;
  std::vector<AdamMoments> moments;  // aligned with model.parameters()
  int epochs_done = 0;
  std::vector<ModelEpoch> trace;
};

/// Builds the model. With `pretrained` the embedding table is copied from its
/// symbol vectors (NoSymbolVectors / DimensionMismatch on a bad table).
TrainingState init_training(const ModelTrainConfig& cfg, const EmbeddingSpace* pretrained = nullptr);

/// Runs `epochs` more epochs. Each epoch draws its batch order and dropout
/// masks from (seed, epoch) so split runs match straight runs bit-exactly.
/// Throws NoLabeledSubjects if no subject has a label for a weighted task.
void train_epochs(TrainingState& state, std::span<const ActivitySequence> seqs,
                  std::span<const LabelRecord> labels, int epochs);

TrainingState train_model(const ModelTrainConfig& cfg, std::span<const ActivitySequence> seqs,
                          std::span<const LabelRecord> labels,
                          const EmbeddingSpace* pretrained = nullptr);

/// Eval-mode class predictions per head (spec().tasks order), batched.
std::vector<std::vector<int>> predict(CnnModel& model, std::span<const ActivitySequence> seqs,
                                      std::size_t batch_size = 32);
/// Eval-mode probabilities of one sequence per head.
std::vector<std::vector<double>> predict_proba(CnnModel& model, const ActivitySequence& seq);

/// Finite-difference check of every parameter of a freshly built network on a
/// random batch (dropout disabled, batch-norm in training mode). The loss is
/// the alpha-weighted elastic-net cross-entropy over all heads.
GradCheckReport check_network_gradients(const NetworkSpec& spec, std::size_t batch,
                                        std::uint64_t seed, double tolerance = 1e-4,
                                        std::size_t max_per_param = 0);

}  // namespace acton
