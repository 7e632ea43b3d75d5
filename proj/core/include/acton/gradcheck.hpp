#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace acton {

/// One parameter block to verify: its live values (perturbed in place and
/// restored) and the analytic gradient computed beforehand.
struct GradTarget {
  std::string path;
  std::span<double> values;
  std::span<const double> analytic;
};

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::string worst_path;     // parameter block holding the worst entry
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  std::size_t checked = 0;
  double tolerance = 0.0;
  bool passed = true;
};

/// |a - n| / max(|a|, |n|, floor); the floor keeps round-off on near-zero
/// gradients from dominating.
double relative_error(double analytic, double numeric, double floor = 1e-6) noexcept;

/// Central differences (f(x+h) - f(x-h)) / 2h for every entry, or for at most
/// `max_per_target` evenly spaced entries of each block when nonzero.
GradCheckReport check_gradients(const std::function<double()>& loss,
                                std::span<const GradTarget> targets, double tolerance,
                                double step = 1e-5, std::size_t max_per_target = 0);

}  // namespace acton
