// SPDX-License-Identifier: Apache-2.0
#include "daggru/gradcheck.hpp"

#include <algorithm>
#include <cmath>

namespace daggru {

double relative_error(double analytic, double numeric, double floor) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), floor});
  return std::abs(analytic - numeric) / denom;
}

const GradCheckEntry* GradCheckReport::worst() const {
  if (entries.empty()) return nullptr;
  return &*std::max_element(entries.begin(), entries.end(),
                            [](const auto& a, const auto& b) { return a.rel_error < b.rel_error; });
}

GradCheckReport finite_diff_check(const std::function<double()>& f,
                                  std::span<const GradCheckTarget> targets, double step,
                                  double tolerance, double floor) {
  const double first = f();
  const double second = f();
  if (first != second) {
    throw NondeterministicFunction("finite_diff_check: function is not deterministic (" +
                                   std::to_string(first) + " vs " + std::to_string(second) + ")");
  }

  GradCheckReport report;
  for (const auto& target : targets) {
    if (!target.value || !target.analytic || !target.value->same_shape(*target.analytic)) {
      throw ShapeError("finite_diff_check: target '" + target.name +
                       "' has missing or mismatched analytic gradient");
    }
    Tensor& x = *target.value;
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double saved = x[i];
      x[i] = saved + step;
      const double up = f();
      x[i] = saved - step;
      const double down = f();
      x[i] = saved;

      GradCheckEntry e;
      e.name = target.name;
      e.index = i;
      e.analytic = (*target.analytic)[i];
      e.numeric = (up - down) / (2.0 * step);
      e.rel_error = relative_error(e.analytic, e.numeric, floor);
      e.pass = e.rel_error < tolerance;
      report.max_rel_error = std::max(report.max_rel_error, e.rel_error);
      if (!e.pass) ++report.failures;
      report.entries.push_back(std::move(e));
    }
  }
  return report;
}

}  // namespace daggru
