#include "acton/noise.hpp"

#include <algorithm>
#include <cmath>

#include "acton/error.hpp"

namespace acton {

NoiseTable::NoiseTable(std::span<const std::uint64_t> counts, double power) {
  require(std::any_of(counts.begin(), counts.end(), [](auto c) { return c > 0; }),
          ErrorCode::AllZeroCounts, "noise distribution needs at least one positive count");
  probabilities_.resize(counts.size());
  double total = 0.0;
  for (std::size_t i = 0; i < counts.size(); ++i) {
    probabilities_[i] = counts[i] > 0 ? std::pow(static_cast<double>(counts[i]), power) : 0.0;
    total += probabilities_[i];
  }
  cumulative_.resize(counts.size());
  double running = 0.0;
  for (std::size_t i = 0; i < counts.size(); ++i) {
    probabilities_[i] /= total;
    running += probabilities_[i];
    cumulative_[i] = running;
  }
  // guard the last bucket against rounding so every draw lands somewhere
  for (std::size_t i = counts.size(); i-- > 0;) {
    if (probabilities_[i] > 0.0) {
      for (std::size_t j = i; j < counts.size(); ++j) cumulative_[j] = 1.0;
      break;
    }
  }
}

std::int64_t NoiseTable::sample(Rng& rng) const {
  const double u = uniform01(rng);
  auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), u);
  return static_cast<std::int64_t>(it - cumulative_.begin());
}

}  // namespace acton
