// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "daggru/tensor.hpp"

namespace daggru {

/// A parameter to perturb together with the analytic gradient to compare.
struct GradCheckTarget {
  std::string name;
  Tensor* value = nullptr;
  const Tensor* analytic = nullptr;
};

struct GradCheckEntry {
  std::string name;
  std::size_t index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  double rel_error = 0.0;
  bool pass = false;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> entries;
  double max_rel_error = 0.0;
  std::size_t failures = 0;
  bool passed() const { return failures == 0; }
  /// Worst entry, or null if nothing was checked.
  const GradCheckEntry* worst() const;
};

class NondeterministicFunction : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// |a - n| / max(|a|, |n|, floor). The floor keeps gradients that are zero up
/// to rounding from reporting huge relative errors.
double relative_error(double analytic, double numeric, double floor = 1e-6);

/// Central differences (f(x+h) - f(x-h)) / 2h for every element of every
/// target, compared against the analytic gradient. Each value is restored
/// after perturbation. Throws NondeterministicFunction when two evaluations
/// at the unperturbed point disagree.
GradCheckReport finite_diff_check(const std::function<double()>& f,
                                  std::span<const GradCheckTarget> targets, double step,
                                  double tolerance, double floor = 1e-6);

}  // namespace daggru
