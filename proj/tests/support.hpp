#pragma once

#include <cmath>
#include <string>
#include <vector>

#include <acton/experiments.hpp>
#include <acton/synthgen.hpp>

namespace acton::testing {

/// Small cohort with a visible apnea archetype. Coarse sampling keeps the
/// sequences short enough for unit-test budgets.
inline SynthConfig tiny_config(std::size_t n, std::uint64_t seed, int period = 900) {
  SynthConfig c;
  c.n_subjects = n;
  c.sampling_period_s = period;
  c.seed = seed;
  auto& a = c.tasks[0];
  a.prevalence = 0.4;
  a.archetype.daytime_suppression = 0.5;
  a.archetype.fragmentation_rate = 0.1;
  return c;
}

inline PreparedCorpus tiny_corpus(std::size_t n, std::uint64_t seed, int period = 900) {
  return prepare_corpus(generate_cohort(tiny_config(n, seed, period)).dataset);
}

inline double cosine(const std::vector<double>& a, const std::vector<double>& b) {
  double ab = 0, aa = 0, bb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ab += a[i] * b[i];
    aa += a[i] * a[i];
    bb += b[i] * b[i];
  }
  return ab / std::sqrt(aa * bb);
}

}  // namespace acton::testing
