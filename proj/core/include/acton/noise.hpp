#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "acton/random.hpp"

namespace acton {

/// Sampling table for the negative-sampling noise distribution
/// P(i) = count_i^power / sum_j count_j^power.
class NoiseTable {
public:
  NoiseTable() = default;
  /// Throws AllZeroCounts when no count is positive.
  NoiseTable(std::span<const std::uint64_t> counts, double power = 0.75);

  std::size_t size() const noexcept { return probabilities_.size(); }
  bool empty() const noexcept { return probabilities_.empty(); }
  double probability(std::size_t id) const { return probabilities_.at(id); }
  std::span<const double> probabilities() const noexcept { return probabilities_; }

  std::int64_t sample(Rng& rng) const;
  void sample(Rng& rng, std::span<std::int64_t> out) const {
    for (auto& o : out) o = sample(rng);
  }

private:
  std::vector<double> probabilities_;
  std::vector<double> cumulative_;
};

inline NoiseTable build_noise_table(std::span<const std::uint64_t> counts, double power = 0.75) {
  return NoiseTable(counts, power);
}

}  // namespace acton
