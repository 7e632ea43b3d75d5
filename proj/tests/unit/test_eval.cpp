#include <doctest.h>

#include <algorithm>
#include <cmath>

#include <acton/error.hpp>
#include <acton/eval.hpp>
#include <acton/random.hpp>

using namespace acton;

namespace {

ConfusionMatrix binary(std::uint64_t tp, std::uint64_t fp, std::uint64_t fn, std::uint64_t tn) {
  ConfusionMatrix cm(2);
  for (std::uint64_t i = 0; i < tp; ++i) cm.add(1, 1);
  for (std::uint64_t i = 0; i < fp; ++i) cm.add(0, 1);
  for (std::uint64_t i = 0; i < fn; ++i) cm.add(1, 0);
  for (std::uint64_t i = 0; i < tn; ++i) cm.add(0, 0);
  return cm;
}

Evaluation random_eval(std::uint64_t seed, int K, std::size_t n) {
  Rng rng(seed);
  Evaluation e;
  e.n_classes = K;
  for (std::size_t i = 0; i < n; ++i) {
    const int g = static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(K)));
    e.golds.push_back(g);
    // biased towards the gold label so metrics are not all equal
    e.preds.push_back(uniform01(rng) < 0.5 ? g : static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(K))));
  }
  return e;
}

}  // namespace

TEST_CASE("confusion matrix") {
  const std::vector<int> y{0, 1, 2, 1};
  const auto cm = ConfusionMatrix::from(y, y, 3);
  for (int g = 0; g < 3; ++g)
    for (int p = 0; p < 3; ++p) CHECK(cm.at(g, p) == (g == p ? (g == 1 ? 2u : 1u) : 0u));

  const std::vector<int> zeros(6, 0), golds{0, 1, 0, 1, 0, 1};
  const auto c2 = ConfusionMatrix::from(zeros, golds, 2);
  CHECK(c2.at(1, 0) == 3);  // FN
  CHECK(c2.at(1, 1) == 0);  // TP

  const auto empty = ConfusionMatrix::from({}, {}, 2);
  CHECK(empty.total() == 0);

  const std::vector<int> short_preds{0};
  CHECK_THROWS_AS(ConfusionMatrix::from(short_preds, golds, 2), Error);
  const std::vector<int> bad{0, 5, 0, 1, 0, 1};
  CHECK_THROWS_AS(ConfusionMatrix::from(bad, golds, 2), Error);
}

TEST_CASE("binary metrics") {
  auto m = binary_metrics(binary(1, 1, 1, 1));
  CHECK(m.accuracy == 0.5);
  CHECK(m.precision == 0.5);
  CHECK(m.recall == 0.5);
  CHECK(m.specificity == 0.5);
  CHECK(m.f1 == 0.5);

  m = binary_metrics(binary(2, 1, 1, 6));
  CHECK(m.precision == doctest::Approx(2.0 / 3));
  CHECK(m.recall == doctest::Approx(2.0 / 3));
  CHECK(m.f1 == doctest::Approx(2.0 / 3));
  CHECK_FALSE(m.degenerate);

  // constant majority predictor on 746 negatives / 254 positives
  m = binary_metrics(binary(0, 0, 254, 746));
  CHECK(m.accuracy == doctest::Approx(0.746));
  CHECK(m.precision == 0.0);
  CHECK(m.recall == 0.0);
  CHECK(m.specificity == 1.0);
  CHECK(m.f1 == 0.0);
  CHECK(m.degenerate);
}

TEST_CASE("multiclass metrics") {
  const std::vector<int> y{0, 1, 2, 2, 1, 0, 0};
  const auto perfect = multiclass_metrics(ConfusionMatrix::from(y, y, 3));
  CHECK(perfect.accuracy == 1.0);
  CHECK(perfect.macro_f1 == 1.0);
  CHECK(perfect.weighted_f1 == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(perfect.micro_f1_non_majority == 1.0);

  Rng rng(3);
  ConfusionMatrix cm(3);
  for (int i = 0; i < 90000; ++i)
    cm.add(static_cast<int>(uniform_index(rng, 3)), static_cast<int>(uniform_index(rng, 3)));
  const auto m = multiclass_metrics(cm);
  CHECK(std::abs(m.micro_f1_all - 1.0 / 3) < 3 * std::sqrt(2.0 / 9 / 90000));

  // single-class gold: weighted = that class
  const std::vector<int> gold(5, 1), pred{1, 1, 0, 2, 1};
  const auto s = multiclass_metrics(ConfusionMatrix::from(pred, gold, 3));
  CHECK(s.weighted_precision == s.per_class[1].precision);
  CHECK(s.weighted_recall == s.per_class[1].recall);
  CHECK(s.weighted_f1 == s.per_class[1].f1);

  // micro over non-majority pools classes 0 and 2 only
  ConfusionMatrix k(3);
  k.add(1, 1); k.add(1, 1); k.add(1, 0); k.add(0, 0); k.add(0, 2); k.add(2, 2);
  const auto nm = multiclass_metrics(k);
  // class 0: TP 1, FP 1, FN 1; class 2: TP 1, FP 1, FN 0
  CHECK(nm.micro_f1_non_majority == doctest::Approx(2.0 * 2 / (2.0 * 2 + 2 + 1)));
  CHECK_THROWS_AS(multiclass_metrics(ConfusionMatrix(1)), Error);
}

TEST_CASE("property: identities hold exactly and permutation does not matter") {
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    const int K = 2 + static_cast<int>(seed % 4);
    auto e = random_eval(seed, K, 1 + seed * 3);
    const auto a = multiclass_metrics(ConfusionMatrix::from(e.preds, e.golds, K));
    CHECK(a.micro_f1_all == a.accuracy);
    CHECK(a.weighted_recall == a.accuracy);
    for (const auto& c : a.per_class) {
      CHECK(c.precision >= 0.0);
      CHECK(c.f1 <= 1.0);
    }
    Rng rng(seed);
    std::vector<std::size_t> order(e.preds.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    shuffle(order.begin(), order.end(), rng);
    Evaluation p = e;
    for (std::size_t i = 0; i < order.size(); ++i) {
      p.preds[i] = e.preds[order[i]];
      p.golds[i] = e.golds[order[i]];
    }
    CHECK(flatten_metrics(ConfusionMatrix::from(p.preds, p.golds, K)) ==
          flatten_metrics(ConfusionMatrix::from(e.preds, e.golds, K)));
  }
}

TEST_CASE("flattened metric columns") {
  const auto f = flatten_metrics(binary(2, 1, 1, 6));
  std::vector<std::string> names;
  for (const auto& [n, v] : f) names.push_back(n);
  CHECK(names[0] == "accuracy");
  CHECK(names[5] == "micro_f1_all");
  CHECK(std::find(names.begin(), names.end(), "specificity") != names.end());
  CHECK(std::find(names.begin(), names.end(), "f1_class2") == names.end());
}

TEST_CASE("protocol averaging") {
  auto fixed = [](std::uint64_t) { return random_eval(42, 3, 60); };
  const auto r = run_protocol("fixed", fixed, 5);
  for (double sd : r.stddev) CHECK(sd == 0.0);
  CHECK(r.seeds == std::vector<std::uint64_t>{0, 1, 2, 3, 4});

  auto varied = [](std::uint64_t s) { return random_eval(s, 3, 80); };
  const auto one = run_protocol("one", varied, 1, 9);
  const auto direct = flatten_metrics(ConfusionMatrix::from(varied(9).preds, varied(9).golds, 3));
  for (std::size_t i = 0; i < direct.size(); ++i) CHECK(one.mean[i] == direct[i].second);

  const auto ten = run_protocol("ten", varied, 10, 0, 1);
  const auto par = run_protocol("ten", varied, 10, 0, 4);
  CHECK(ten.mean == par.mean);
  CHECK(ten.runs == par.runs);
  for (std::size_t m = 0; m < ten.metric_names.size(); ++m) {
    double s = 0;
    for (const auto& run : ten.runs) s += run[m];
    CHECK(std::abs(s / 10 - ten.mean[m]) < 1e-12);
  }
  CHECK(ten.metric("accuracy") == ten.mean[0]);
  CHECK(ten.per_run("accuracy").size() == 10);
  CHECK(ten.to_json()["runs"].size() == 10);

  const MetricsReport both[] = {one, ten};
  const std::string cols[] = {"accuracy", "macro_f1"};
  const auto table = format_table(both, cols);
  CHECK(table.find("accuracy") != std::string::npos);
  CHECK(table.find("ten") != std::string::npos);
}
