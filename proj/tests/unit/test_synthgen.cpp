#include <doctest.h>

#include <cmath>

#include <acton/synthgen.hpp>

#include "support.hpp"

using namespace acton;

namespace {

// Plain Pearson over subjects holding both labels; independent of the library.
double pearson(const LabelTable& t, Task a, Task b) {
  double n = 0, sa = 0, sb = 0, saa = 0, sbb = 0, sab = 0;
  for (const auto& [id, r] : t) {
    if (!r[a] || !r[b]) continue;
    const double x = *r[a], y = *r[b];
    n += 1;
    sa += x;
    sb += y;
    saa += x * x;
    sbb += y * y;
    sab += x * y;
  }
  const double cov = sab / n - sa / n * sb / n;
  return cov / std::sqrt((saa / n - sa / n * sa / n) * (sbb / n - sb / n * sb / n));
}

}  // namespace

TEST_CASE("generate_cohort is deterministic and thread independent") {
  auto cfg = testing::tiny_config(30, 7, 600);
  const auto a = generate_cohort(cfg);
  const auto b = generate_cohort(cfg);
  cfg.threads = 3;
  const auto c = generate_cohort(cfg);
  REQUIRE(a.dataset.sequences.size() == 30);
  for (std::size_t i = 0; i < 30; ++i) {
    CHECK(a.dataset.sequences[i].counts == b.dataset.sequences[i].counts);
    CHECK(a.dataset.sequences[i].counts == c.dataset.sequences[i].counts);
  }
  CHECK(a.dataset.provenance.digest == c.dataset.provenance.digest);
  cfg.seed = 8;
  CHECK(generate_cohort(cfg).dataset.provenance.digest != a.dataset.provenance.digest);
}

TEST_CASE("activity counts stay in [0, 5000] and have the configured length") {
  auto cfg = testing::tiny_config(20, 1, 30);
  cfg.base.amplitude_median = 2000;  // push the tail into the clamp
  const auto out = generate_cohort(cfg);
  for (const auto& s : out.dataset.sequences) {
    CHECK(s.counts.size() == 20160);
    for (RawCount c : s.counts) {
      REQUIRE(c >= 0);
      REQUIRE(c <= kMaxActivityCount);
    }
  }
}

TEST_CASE("planted comorbidity is realised") {
  SynthConfig cfg;
  cfg.n_subjects = 2000;
  cfg.sampling_period_s = 3600;
  cfg.seed = 7;
  cfg.comorbidity[0][2] = cfg.comorbidity[2][0] = 0.6;
  const auto out = generate_cohort(cfg);
  const double rho = pearson(out.dataset.labels, Task::Apnea, Task::Hypertension);
  CHECK(std::abs(rho - 0.6) <= 0.05);
  const auto lc = label_correlation(out.dataset.labels);
  CHECK(lc.matrix[0][2] == doctest::Approx(rho).epsilon(1e-9));
  CHECK(std::abs(lc.matrix[0][1]) < 0.08);  // independent pair
}

TEST_CASE("label_correlation conventions") {
  LabelTable same;
  for (int i = 0; i < 5; ++i) {
    LabelRecord r;
    r.subject_id = "s" + std::to_string(i);
    r[Task::Apnea] = 1;
    r[Task::Diabetes] = i % 3;
    r[Task::Hypertension] = i % 2;
    r[Task::Insomnia] = i % 2;
    same[r.subject_id] = r;
  }
  const auto lc = label_correlation(same);
  CHECK(lc.degenerate[0]);
  CHECK(lc.matrix[0][1] == 0.0);
  CHECK(lc.matrix[2][3] == doctest::Approx(1.0));
  CHECK(lc.matrix[3][3] == doctest::Approx(1.0));

  LabelTable one;
  one["x"].subject_id = "x";
  one["x"][Task::Apnea] = 1;
  CHECK_THROWS_AS(label_correlation(one), Error);
}

TEST_CASE("latent calibration inverts the implied correlation") {
  const std::vector<double> ta{0.5244}, tb{-0.4307, 0.4307};
  for (double target : {-0.3, 0.0, 0.2, 0.6}) {
    const double r = calibrate_latent_correlation(target, ta, tb);
    CHECK(implied_label_correlation(r, ta, tb) == doctest::Approx(target).epsilon(1e-6));
  }
  CHECK_THROWS_AS(calibrate_latent_correlation(0.999, ta, tb), Error);
}

TEST_CASE("nearest_correlation repairs an infeasible matrix") {
  CorrelationMatrix m = identity_correlation();
  m[0][1] = m[1][0] = 0.7;
  m[0][2] = m[2][0] = 0.7;
  m[1][2] = m[2][1] = -0.7;
  const auto r = nearest_correlation(m);
  for (std::size_t i = 0; i < kTaskCount; ++i) {
    CHECK(r[i][i] == doctest::Approx(1.0));
    for (std::size_t j = 0; j < kTaskCount; ++j) CHECK(r[i][j] == doctest::Approx(r[j][i]));
  }
  SynthConfig cfg;
  cfg.n_subjects = 50;
  cfg.sampling_period_s = 3600;
  cfg.comorbidity = m;
  const auto out = generate_cohort(cfg);
  CHECK_FALSE(out.warnings.empty());
}

TEST_CASE("class balance at 500 subjects") {
  SynthConfig cfg;
  cfg.n_subjects = 500;
  cfg.sampling_period_s = 3600;
  const auto out = generate_cohort(cfg);
  for (Task t : kAllTasks) {
    std::vector<int> freq(static_cast<std::size_t>(class_count(t)), 0);
    int n = 0;
    for (const auto& [id, r] : out.dataset.labels)
      if (r[t]) {
        ++freq[static_cast<std::size_t>(*r[t])];
        ++n;
      }
    for (int f : freq) CHECK(f >= n / 10);
  }
}

TEST_CASE("archetype produces a measurable daytime gap") {
  auto cfg = testing::tiny_config(200, 5, 300);
  const auto gap = daytime_activity_gap(generate_cohort(cfg).dataset, Task::Apnea);
  REQUIRE(gap.positives > 0);
  REQUIRE(gap.negatives > 0);
  CHECK(gap.positive_mean < 0.75 * gap.negative_mean);

  cfg.tasks[0].archetype = Archetype{};
  const auto flat = daytime_activity_gap(generate_cohort(cfg).dataset, Task::Apnea);
  CHECK(std::abs(flat.positive_mean - flat.negative_mean) < 0.1 * flat.negative_mean);
}

TEST_CASE("labeled_fraction and json round trip") {
  auto cfg = testing::tiny_config(100, 2, 3600);
  cfg.labeled_fraction = 0.3;
  cfg.tasks[0].archetype.negative_suppression_days = {1, 2};
  const auto out = generate_cohort(cfg);
  // per-subject Bernoulli draw: 30 expected, sd about 4.6
  CHECK(out.dataset.labels.size() >= 16);
  CHECK(out.dataset.labels.size() <= 44);
  out.dataset.validate();

  nlohmann::json j = cfg;
  const auto back = j.get<SynthConfig>();
  nlohmann::json j2 = back;
  CHECK(j == j2);
  CHECK(back.tasks[0].archetype.negative_suppression_days == std::vector<int>{1, 2});
  CHECK_THROWS_AS(nlohmann::json::parse(R"({"tasks":{"gout":{}}})").get<SynthConfig>(), Error);
}
