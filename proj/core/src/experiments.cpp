#include "acton/experiments.hpp"

#include <cmath>
#include <numeric>

#include "acton/error.hpp"
#include "acton/random.hpp"

namespace acton {

Split make_split(std::size_t n, double test_fraction, double dev_fraction, std::uint64_t seed) {
  require(test_fraction >= 0.0 && dev_fraction >= 0.0 && test_fraction + dev_fraction < 1.0,
          ErrorCode::InvalidConfig, "split fractions must leave a training share");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  shuffle(order.begin(), order.end(), rng);
  const auto n_test = static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(n)));
  const auto n_dev = static_cast<std::size_t>(std::llround(dev_fraction * static_cast<double>(n)));
  Split s;
  s.test.assign(order.begin(), order.begin() + static_cast<long>(n_test));
  s.dev.assign(order.begin() + static_cast<long>(n_test),
               order.begin() + static_cast<long>(n_test + n_dev));
  s.train.assign(order.begin() + static_cast<long>(n_test + n_dev), order.end());
  return s;
}

PreparedCorpus prepare_corpus(const Dataset& ds) {
  PreparedCorpus c;
  c.vocab = build_vocabulary(ds);
  c.sequences = encode_dataset(c.vocab, ds);
  for (const auto& s : ds.sequences) {
    auto it = ds.labels.find(s.subject_id);
    if (it != ds.labels.end()) {
      c.labels.push_back(it->second);
    } else {
      LabelRecord r;
      r.subject_id = s.subject_id;
      c.labels.push_back(r);
    }
  }
  return c;
}

TaskRows task_rows(std::span<const LabelRecord> labels, Task task, std::span<const std::size_t> idx) {
  TaskRows r;
  for (std::size_t i : idx)
    if (auto y = labels[i][task]) {
      r.index.push_back(i);
      r.label.push_back(*y);
    }
  return r;
}

Evaluation probe_evaluation(const std::vector<std::vector<double>>& features,
                            std::span<const LabelRecord> labels, Task task, const Split& split,
                            const LogRegConfig& cfg) {
  const auto tr = task_rows(labels, task, split.train);
  const auto te = task_rows(labels, task, split.test);
  std::vector<std::vector<double>> xs;
  for (std::size_t i : tr.index) xs.push_back(features[i]);
  const auto model = train_logreg(xs, tr.label, class_count(task), cfg);
  Evaluation e;
  e.n_classes = class_count(task);
  e.golds = te.label;
  for (std::size_t i : te.index) e.preds.push_back(model.predict(features[i]));
  return e;
}

Evaluation majority_evaluation(std::span<const LabelRecord> labels, Task task, const Split& split) {
  const auto tr = task_rows(labels, task, split.train);
  const auto te = task_rows(labels, task, split.test);
  Evaluation e;
  e.n_classes = class_count(task);
  e.golds = te.label;
  e.preds = predict_majority(majority_class(tr.label, e.n_classes), te.label.size());
  return e;
}

Evaluation cnn_evaluation(CnnModel& model, std::span<const ActivitySequence> seqs,
                          std::span<const LabelRecord> labels, Task task,
                          std::span<const std::size_t> idx) {
  const auto rows = task_rows(labels, task, idx);
  std::vector<ActivitySequence> subset;
  for (std::size_t i : rows.index) subset.push_back(seqs[i]);
  const std::size_t h = model.head_index(task).value_or(model.heads.size());
  require(h < model.heads.size(), ErrorCode::InvalidConfig, "model has no head for the task");
  Evaluation e;
  e.n_classes = class_count(task);
  e.golds = rows.label;
  e.preds = subset.empty() ? std::vector<int>{} : predict(model, subset)[h];
  return e;
}

std::vector<LabelRecord> restrict_labels(std::span<const LabelRecord> labels,
                                         std::span<const std::size_t> keep) {
  std::vector<LabelRecord> out;
  for (const auto& l : labels) {
    LabelRecord r;
    r.subject_id = l.subject_id;
    out.push_back(r);
  }
  for (std::size_t i : keep) out[i] = labels[i];
  return out;
}

}  // namespace acton
