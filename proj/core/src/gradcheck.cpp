#include "acton/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "acton/error.hpp"

namespace acton {

double relative_error(double analytic, double numeric, double floor) noexcept {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), floor});
  return std::abs(analytic - numeric) / denom;
}

GradCheckReport check_gradients(const std::function<double()>& loss,
                                std::span<const GradTarget> targets, double tolerance,
                                double step, std::size_t max_per_target) {
  GradCheckReport r;
  r.tolerance = tolerance;
  for (const auto& t : targets) {
    require(t.values.size() == t.analytic.size(), ErrorCode::ShapeMismatch,
            "gradient block " + t.path + " does not mirror its parameter");
    const std::size_t n = t.values.size();
    const std::size_t count = max_per_target && max_per_target < n ? max_per_target : n;
    for (std::size_t j = 0; j < count; ++j) {
      const std::size_t i = count == n ? j : j * n / count;
      const double saved = t.values[i];
      t.values[i] = saved + step;
      const double up = loss();
      t.values[i] = saved - step;
      const double down = loss();
      t.values[i] = saved;
      const double numeric = (up - down) / (2.0 * step);
      const double err = relative_error(t.analytic[i], numeric);
      ++r.checked;
      const double e = std::isnan(err) ? INFINITY : err;
      if (r.checked == 1 || e > r.max_rel_error) {
        r.max_rel_error = e;
        r.worst_path = t.path;
        r.worst_index = i;
        r.worst_analytic = t.analytic[i];
        r.worst_numeric = numeric;
      }
    }
  }
  r.passed = r.max_rel_error < tolerance;
  return r;
}

}  // namespace acton
