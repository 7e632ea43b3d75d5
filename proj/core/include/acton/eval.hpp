#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace acton {

/// K x K counts, rows = gold, columns = predicted.
class ConfusionMatrix {
public:
  ConfusionMatrix() = default;
  explicit ConfusionMatrix(int n_classes);

  /// Throws LengthMismatch / LabelOutOfRange.
  static ConfusionMatrix from(std::span<const int> preds, std::span<const int> golds, int n_classes);

  void add(int gold, int pred);
  int classes() const noexcept { return k_; }
  std::uint64_t at(int gold, int pred) const;
  std::uint64_t total() const noexcept;
  std::uint64_t support(int cls) const;    // row sum
  std::uint64_t predicted(int cls) const;  // column sum
  std::uint64_t correct() const;           // trace

  bool operator==(const ConfusionMatrix&) const = default;

private:
  int k_ = 0;
  std::vector<std::uint64_t> counts_;
};

struct BinaryMetrics {
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double specificity = 0.0;
  double f1 = 0.0;
  bool degenerate = false;  // some ratio was 0/0 and reported as 0
};

/// Metrics for `positive` against the rest of a 2 x 2 matrix.
BinaryMetrics binary_metrics(const ConfusionMatrix& cm, int positive = 1);

struct ClassMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double specificity = 0.0;
  double f1 = 0.0;
  std::uint64_t support = 0;
};

struct MulticlassMetrics {
  double accuracy = 0.0;
  std::vector<ClassMetrics> per_class;
  double weighted_precision = 0.0;
  double weighted_recall = 0.0;
  double weighted_f1 = 0.0;
  double macro_f1 = 0.0;
  double micro_f1_all = 0.0;
  double micro_f1_non_majority = 0.0;  // pooled over all but the largest-support class
  bool degenerate = false;
};

/// Throws InvalidConfig for K < 2. Micro-F1 over all classes and weighted
/// recall are computed so that they equal accuracy exactly.
MulticlassMetrics multiclass_metrics(const ConfusionMatrix& cm);

/// Named scalar metrics of one evaluation; binary matrices add the
/// positive-class accuracy/precision/recall/specificity/F1 columns.
std::vector<std::pair<std::string, double>> flatten_metrics(const ConfusionMatrix& cm);

/// Per-run metric table plus its column means.
struct MetricsReport {
  std::string name;
  int n_classes = 0;
  std::vector<std::string> metric_names;
  std::vector<std::vector<double>> runs;  // runs x metrics
  std::vector<std::uint64_t> seeds;
  std::vector<double> mean;
  std::vector<double> stddev;

  std::size_t repeats() const noexcept { return runs.size(); }
  double metric(const std::string& name) const;
  std::vector<double> per_run(const std::string& name) const;
  nlohmann::json to_json() const;
};

/// One finished run: predictions against gold labels.
struct Evaluation {
  std::vector<int> preds;
  std::vector<int> golds;
  int n_classes = 2;
};

/// Builds a report from finished runs; checks the metric identities.
MetricsReport summarize(const std::string& name, std::span<const Evaluation> runs,
                        std::span<const std::uint64_t> seeds);

/// Runs `experiment(seed)` for seeds base..base+repeats-1 (concurrently when
/// threads > 1) and averages in seed order.
MetricsReport run_protocol(const std::string& name,
                           const std::function<Evaluation(std::uint64_t)>& experiment,
                           int repeats = 10, std::uint64_t seed_base = 0, int threads = 1);

/// Aligned plain-text table: one row per report, the given metric columns
/// as percentages with one decimal.
std::string format_table(std::span<const MetricsReport> reports,
                         std::span<const std::string> columns);

}  // namespace acton
