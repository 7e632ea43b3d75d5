#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "acton/core.hpp"
#include "acton/eval.hpp"
#include "acton/ingest.hpp"
#include "acton/models.hpp"

namespace acton {

/// Fixed train/dev/test partition of subject indices.
struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> dev;
  std::vector<std::size_t> test;
};

/// Seeded shuffle, then test and dev (default 10%) shares off the front.
Split make_split(std::size_t n, double test_fraction, double dev_fraction = 0.1,
                 std::uint64_t seed = 0);

/// Encoded corpus with one label record per sequence (empty when unlabelled).
struct PreparedCorpus {
  Vocabulary vocab;
  std::vector<ActivitySequence> sequences;
  std::vector<LabelRecord> labels;
};

PreparedCorpus prepare_corpus(const Dataset& ds);

/// Indices from `idx` that carry a label for `task`, and those labels.
struct TaskRows {
  std::vector<std::size_t> index;
  std::vector<int> label;
};
TaskRows task_rows(std::span<const LabelRecord> labels, Task task, std::span<const std::size_t> idx);

/// Logistic probe trained on the labelled train rows, evaluated on the
/// labelled test rows.
Evaluation probe_evaluation(const std::vector<std::vector<double>>& features,
                            std::span<const LabelRecord> labels, Task task, const Split& split,
                            const LogRegConfig& cfg = {});

/// Majority class of the train rows, evaluated on the test rows.
Evaluation majority_evaluation(std::span<const LabelRecord> labels, Task task, const Split& split);

/// Eval-mode CNN predictions for `task` on the labelled rows of `idx`.
Evaluation cnn_evaluation(CnnModel& model, std::span<const ActivitySequence> seqs,
                          std::span<const LabelRecord> labels, Task task,
                          std::span<const std::size_t> idx);

/// Copies of the records with labels kept only at `keep` indices.
std::vector<LabelRecord> restrict_labels(std::span<const LabelRecord> labels,
                                         std::span<const std::size_t> keep);

}  // namespace acton
