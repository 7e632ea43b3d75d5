#include "acton/eval.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <mutex>
#include <thread>

#include "acton/error.hpp"

namespace acton {

ConfusionMatrix::ConfusionMatrix(int n_classes)
    : k_(n_classes), counts_(static_cast<std::size_t>(n_classes * n_classes), 0) {
  require(n_classes >= 1, ErrorCode::InvalidConfig, "confusion matrix needs a class");
}

ConfusionMatrix ConfusionMatrix::from(std::span<const int> preds, std::span<const int> golds,
                                      int n_classes) {
  require(preds.size() == golds.size(), ErrorCode::LengthMismatch,
          std::to_string(preds.size()) + " predictions vs " + std::to_string(golds.size()) + " labels");
  ConfusionMatrix cm(n_classes);
  for (std::size_t i = 0; i < preds.size(); ++i) cm.add(golds[i], preds[i]);
  return cm;
}

void ConfusionMatrix::add(int gold, int pred) {
  require(gold >= 0 && gold < k_ && pred >= 0 && pred < k_, ErrorCode::LabelOutOfRange,
          "pair (" + std::to_string(gold) + ", " + std::to_string(pred) + ") outside " +
              std::to_string(k_) + " classes");
  ++counts_[static_cast<std::size_t>(gold * k_ + pred)];
}

std::uint64_t ConfusionMatrix::at(int gold, int pred) const {
  return counts_.at(static_cast<std::size_t>(gold * k_ + pred));
}

std::uint64_t ConfusionMatrix::total() const noexcept {
  std::uint64_t t = 0;
  for (auto c : counts_) t += c;
  return t;
}

std::uint64_t ConfusionMatrix::support(int cls) const {
  std::uint64_t s = 0;
  for (int p = 0; p < k_; ++p) s += at(cls, p);
  return s;
}

std::uint64_t ConfusionMatrix::predicted(int cls) const {
  std::uint64_t s = 0;
  for (int g = 0; g < k_; ++g) s += at(g, cls);
  return s;
}

std::uint64_t ConfusionMatrix::correct() const {
  std::uint64_t s = 0;
  for (int c = 0; c < k_; ++c) s += at(c, c);
  return s;
}

namespace {

// 0/0 is reported as 0 and flagged
double ratio(std::uint64_t num, std::uint64_t den, bool& degenerate) {
  if (den == 0) {
    degenerate = true;
    return 0.0;
  }
  return static_cast<double>(num) / static_cast<double>(den);
}

// harmonic mean of precision and recall in count form: 2TP / (2TP + FP + FN)
double f1_counts(std::uint64_t tp, std::uint64_t fp, std::uint64_t fn, bool& degenerate) {
  return ratio(2 * tp, 2 * tp + fp + fn, degenerate);
}

}  // namespace

BinaryMetrics binary_metrics(const ConfusionMatrix& cm, int positive) {
  require(cm.classes() == 2, ErrorCode::InvalidConfig, "binary metrics need a 2 x 2 matrix");
  require(positive == 0 || positive == 1, ErrorCode::LabelOutOfRange, "positive class must be 0 or 1");
  const int neg = 1 - positive;
  const auto tp = cm.at(positive, positive), fn = cm.at(positive, neg);
  const auto fp = cm.at(neg, positive), tn = cm.at(neg, neg);
  BinaryMetrics m;
  m.accuracy = ratio(tp + tn, cm.total(), m.degenerate);
  m.precision = ratio(tp, tp + fp, m.degenerate);
  m.recall = ratio(tp, tp + fn, m.degenerate);
  m.specificity = ratio(tn, tn + fp, m.degenerate);
  m.f1 = f1_counts(tp, fp, fn, m.degenerate);
  return m;
}

MulticlassMetrics multiclass_metrics(const ConfusionMatrix& cm) {
  const int K = cm.classes();
  require(K >= 2, ErrorCode::InvalidConfig, "multiclass metrics need K >= 2");
  MulticlassMetrics m;
  const std::uint64_t n = cm.total();
  const std::uint64_t correct = cm.correct();
  m.accuracy = ratio(correct, n, m.degenerate);

  int majority = 0;
  for (int c = 0; c < K; ++c) {
    ClassMetrics cls;
    const auto tp = cm.at(c, c);
    const auto fp = cm.predicted(c) - tp;
    cls.support = cm.support(c);
    const auto fn = cls.support - tp;
    const auto tn = n - tp - fp - fn;
    bool deg = false;
    cls.precision = ratio(tp, tp + fp, deg);
    cls.recall = ratio(tp, tp + fn, deg);
    cls.specificity = ratio(tn, tn + fp, deg);
    cls.f1 = f1_counts(tp, fp, fn, deg);
    m.degenerate = m.degenerate || deg;
    m.per_class.push_back(cls);
    if (cls.support > m.per_class[static_cast<std::size_t>(majority)].support) majority = c;
  }

  double macro = 0.0;
  for (const auto& c : m.per_class) {
    macro += c.f1;
    if (n == 0) continue;
    const double w = static_cast<double>(c.support) / static_cast<double>(n);
    m.weighted_precision += w * c.precision;
    m.weighted_f1 += w * c.f1;
  }
  m.macro_f1 = macro / K;
  // support-weighted recall collapses to sum(TP) / n; computed in that form so
  // the identity with accuracy is exact rather than up to rounding
  m.weighted_recall = m.accuracy;
  // pooled over all classes FP = FN = n - correct, so micro-F1 = correct / n
  m.micro_f1_all = f1_counts(correct, n - correct, n - correct, m.degenerate);

  std::uint64_t tp = 0, fp = 0, fn = 0;
  for (int c = 0; c < K; ++c) {
    if (c == majority) continue;
    const auto t = cm.at(c, c);
    tp += t;
    fp += cm.predicted(c) - t;
    fn += cm.support(c) - t;
  }
  m.micro_f1_non_majority = f1_counts(tp, fp, fn, m.degenerate);
  return m;
}

std::vector<std::pair<std::string, double>> flatten_metrics(const ConfusionMatrix& cm) {
  const auto mc = multiclass_metrics(cm);
  std::vector<std::pair<std::string, double>> out{
      {"accuracy", mc.accuracy},
      {"weighted_precision", mc.weighted_precision},
      {"weighted_recall", mc.weighted_recall},
      {"weighted_f1", mc.weighted_f1},
      {"macro_f1", mc.macro_f1},
      {"micro_f1_all", mc.micro_f1_all},
      {"micro_f1_non_majority", mc.micro_f1_non_majority},
  };
  if (cm.classes() == 2) {
    const auto b = binary_metrics(cm, 1);
    out.emplace_back("precision", b.precision);
    out.emplace_back("recall", b.recall);
    out.emplace_back("specificity", b.specificity);
    out.emplace_back("f1", b.f1);
  }
  for (std::size_t c = 0; c < mc.per_class.size(); ++c) {
    const auto k = std::to_string(c);
    out.emplace_back("precision_class" + k, mc.per_class[c].precision);
    out.emplace_back("recall_class" + k, mc.per_class[c].recall);
    out.emplace_back("specificity_class" + k, mc.per_class[c].specificity);
    out.emplace_back("f1_class" + k, mc.per_class[c].f1);
  }
  return out;
}

double MetricsReport::metric(const std::string& n) const {
  for (std::size_t i = 0; i < metric_names.size(); ++i)
    if (metric_names[i] == n) return mean[i];
  fail(ErrorCode::InvalidConfig, "report has no metric " + n);
}

std::vector<double> MetricsReport::per_run(const std::string& n) const {
  for (std::size_t i = 0; i < metric_names.size(); ++i)
    if (metric_names[i] == n) {
      std::vector<double> v;
      for (const auto& r : runs) v.push_back(r[i]);
      return v;
    }
  fail(ErrorCode::InvalidConfig, "report has no metric " + n);
}

nlohmann::json MetricsReport::to_json() const {
  nlohmann::json j;
  j["name"] = name;
  j["n_classes"] = n_classes;
  j["repeats"] = repeats();
  j["seeds"] = seeds;
  for (std::size_t i = 0; i < metric_names.size(); ++i) {
    j["mean"][metric_names[i]] = mean[i];
    j["stddev"][metric_names[i]] = stddev[i];
  }
  j["runs"] = nlohmann::json::array();
  for (const auto& r : runs) {
    nlohmann::json row;
    for (std::size_t i = 0; i < metric_names.size(); ++i) row[metric_names[i]] = r[i];
    j["runs"].push_back(row);
  }
  return j;
}

MetricsReport summarize(const std::string& name, std::span<const Evaluation> runs,
                        std::span<const std::uint64_t> seeds) {
  require(!runs.empty(), ErrorCode::EmptyInput, "no runs to summarise");
  MetricsReport rep;
  rep.name = name;
  rep.n_classes = runs[0].n_classes;
  rep.seeds.assign(seeds.begin(), seeds.end());
  for (const auto& e : runs) {
    require(e.n_classes == rep.n_classes, ErrorCode::InvalidConfig, "runs disagree on class count");
    const auto cm = ConfusionMatrix::from(e.preds, e.golds, e.n_classes);
    const auto flat = flatten_metrics(cm);
    if (rep.metric_names.empty())
      for (const auto& [k, v] : flat) rep.metric_names.push_back(k);
    std::vector<double> row;
    for (const auto& [k, v] : flat) row.push_back(v);
    // identities that hold for single-label evaluation
    require(row[5] == row[0] && row[2] == row[0], ErrorCode::NumericFailure,
            "micro-F1 or weighted recall differs from accuracy");
    rep.runs.push_back(std::move(row));
  }
  const std::size_t M = rep.metric_names.size();
  const double R = static_cast<double>(rep.runs.size());
  rep.mean.assign(M, 0.0);
  rep.stddev.assign(M, 0.0);
  for (std::size_t i = 0; i < M; ++i) {
    double s = 0.0;
    for (const auto& r : rep.runs) s += r[i];
    rep.mean[i] = s / R;
    if (rep.runs.size() > 1) {
      double v = 0.0;
      for (const auto& r : rep.runs) v += (r[i] - rep.mean[i]) * (r[i] - rep.mean[i]);
      rep.stddev[i] = std::sqrt(v / (R - 1.0));
    }
  }
  return rep;
}

MetricsReport run_protocol(const std::string& name,
                           const std::function<Evaluation(std::uint64_t)>& experiment, int repeats,
                           std::uint64_t seed_base, int threads) {
  require(repeats >= 1, ErrorCode::InvalidConfig, "repeats must be positive");
  const auto R = static_cast<std::size_t>(repeats);
  std::vector<Evaluation> results(R);
  std::vector<std::uint64_t> seeds(R);
  for (std::size_t i = 0; i < R; ++i) seeds[i] = seed_base + i;

  if (threads <= 1) {
    for (std::size_t i = 0; i < R; ++i) results[i] = experiment(seeds[i]);
  } else {
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex mu;
    std::vector<std::thread> pool;
    for (int t = 0; t < std::min<int>(threads, repeats); ++t)
      pool.emplace_back([&] {
        for (std::size_t i; (i = next.fetch_add(1)) < R;) {
          try {
            results[i] = experiment(seeds[i]);
          } catch (...) {
            std::lock_guard lock(mu);
            if (!error) error = std::current_exception();
          }
        }
      });
    for (auto& th : pool) th.join();
    if (error) std::rethrow_exception(error);
  }
  return summarize(name, results, seeds);
}

std::string format_table(std::span<const MetricsReport> reports,
                         std::span<const std::string> columns) {
  std::size_t name_w = 6;
  for (const auto& r : reports) name_w = std::max(name_w, r.name.size());
  std::vector<std::size_t> widths;
  for (const auto& c : columns) widths.push_back(std::max<std::size_t>(c.size(), 6));

  std::string out;
  char buf[64];
  auto pad = [](std::string s, std::size_t w, bool left) {
    if (s.size() >= w) return s;
    return left ? s + std::string(w - s.size(), ' ') : std::string(w - s.size(), ' ') + s;
  };
  out += pad("Method", name_w, true);
  for (std::size_t i = 0; i < columns.size(); ++i) out += "  " + pad(columns[i], widths[i], false);
  out += "\n";
  out += std::string(name_w, '-');
  for (auto w : widths) out += "  " + std::string(w, '-');
  out += "\n";
  for (const auto& r : reports) {
    out += pad(r.name, name_w, true);
    for (std::size_t i = 0; i < columns.size(); ++i) {
      std::snprintf(buf, sizeof buf, "%.1f", 100.0 * r.metric(columns[i]));
      out += "  " + pad(buf, widths[i], false);
    }
    out += "\n";
  }
  return out;
}

}  // namespace acton
