// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "daggru/corpus.hpp"

namespace daggru {

struct PrfScore {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t true_positives = 0;
  std::size_t predicted = 0;  // predicted non-NIL
  std::size_t gold = 0;       // gold non-NIL
};

/// Token-level micro scores over non-NIL labels. A token is a true positive
/// when prediction == gold != NIL. Zero denominators give 0.
PrfScore micro_f1(std::span<const LabelId> predictions, std::span<const LabelId> gold);

/// Same, from raw counts.
PrfScore prf_from_counts(std::size_t true_positives, std::size_t predicted, std::size_t gold);

/// Two-sided Student-t quantile t_{dof, p}.
double student_t_quantile(double p, double dof);

/// t_{n-1, 0.975} * std / sqrt(n): half-width of the 95% interval on a mean.
double ci_halfwidth(double std_dev, std::size_t n);

struct Summary {
  std::size_t n = 0;
  double mean = 0.0;
  double min = 0.0;
  double max = 0.0;
  double std_dev = 0.0;  // sample (n - 1) standard deviation; 0 when n < 2
  double ci = 0.0;       // ci_halfwidth(std_dev, n); 0 when n < 2
};

Summary summarize(std::span<const double> values);

struct TTest {
  double t = 0.0;
  double dof = 0.0;
  double p = 1.0;
};

/// Welch two-sample t-test with Welch–Satterthwaite degrees of freedom,
/// two-sided p. Needs at least two values per sample. Two constant samples
/// with equal means give t = 0, p = 1; with different means, p = 0.
TTest welch_t_test(std::span<const double> a, std::span<const double> b);

struct ScorePair {
  double dev = 0.0;
  double test = 0.0;
};

struct BootstrapResult {
  double test_mean = 0.0;
  double test_std = 0.0;
  double dev_mean = 0.0;
  double ci = 0.0;  // ci_halfwidth(test_std, reps)
  std::size_t k = 0;
  std::size_t reps = 0;
};

/// Index of the pair selected from a drawn sample: highest dev, then highest
/// test, then first position in the sample.
std::size_t select_best(std::span<const ScorePair> pairs, std::span<const std::size_t> drawn);

/// Repeats `reps` times: draw k pairs uniformly with replacement, keep the
/// selected pair's scores. Reports mean/std of the kept test scores and the
/// mean kept dev score.
BootstrapResult bootstrap_selection(std::span<const ScorePair> pairs, std::size_t k = 5,
                                    std::size_t reps = 1000, std::uint64_t seed = 1);

}  // namespace daggru
