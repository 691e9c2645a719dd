// SPDX-License-Identifier: Apache-2.0
#include "daggru/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include <boost/math/distributions/students_t.hpp>

#include "daggru/rng.hpp"

namespace daggru {

PrfScore prf_from_counts(std::size_t tp, std::size_t predicted, std::size_t gold) {
  PrfScore s;
  s.true_positives = tp;
  s.predicted = predicted;
  s.gold = gold;
  s.precision = predicted ? static_cast<double>(tp) / static_cast<double>(predicted) : 0.0;
  s.recall = gold ? static_cast<double>(tp) / static_cast<double>(gold) : 0.0;
  const double denom = s.precision + s.recall;
  s.f1 = denom > 0.0 ? 2.0 * s.precision * s.recall / denom : 0.0;
  return s;
}

PrfScore micro_f1(std::span<const LabelId> predictions, std::span<const LabelId> gold) {
  if (predictions.size() != gold.size()) {
    throw std::invalid_argument("micro_f1: " + std::to_string(predictions.size()) +
                                " predictions for " + std::to_string(gold.size()) + " gold labels");
  }
  std::size_t tp = 0, predicted = 0, gold_count = 0;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    const bool p = predictions[i] != LabelVocab::kNil;
    const bool g = gold[i] != LabelVocab::kNil;
    predicted += p;
    gold_count += g;
    tp += p && predictions[i] == gold[i];
  }
  return prf_from_counts(tp, predicted, gold_count);
}

double student_t_quantile(double p, double dof) {
  boost::math::students_t dist(dof);
  return boost::math::quantile(dist, p);
}

double ci_halfwidth(double std_dev, std::size_t n) {
  if (n < 2) throw std::invalid_argument("ci_halfwidth: need n >= 2");
  if (std_dev < 0.0) throw std::invalid_argument("ci_halfwidth: negative std");
  if (std_dev == 0.0) return 0.0;
  return student_t_quantile(0.975, static_cast<double>(n - 1)) * std_dev /
         std::sqrt(static_cast<double>(n));
}

Summary summarize(std::span<const double> values) {
  Summary s;
  s.n = values.size();
  if (values.empty()) return s;
  s.min = *std::min_element(values.begin(), values.end());
  s.max = *std::max_element(values.begin(), values.end());
  double total = 0.0;
  for (double v : values) total += v;
  s.mean = total / static_cast<double>(s.n);
  // Guard rounding so min <= mean <= max always holds.
  s.mean = std::clamp(s.mean, s.min, s.max);
  if (s.n >= 2) {
    double ss = 0.0;
    for (double v : values) ss += (v - s.mean) * (v - s.mean);
    s.std_dev = std::sqrt(ss / static_cast<double>(s.n - 1));
    s.ci = ci_halfwidth(s.std_dev, s.n);
  }
  return s;
}

TTest welch_t_test(std::span<const double> a, std::span<const double> b) {
  if (a.size() < 2 || b.size() < 2) {
    throw std::invalid_argument("welch_t_test: each sample needs at least 2 values");
  }
  const Summary sa = summarize(a);
  const Summary sb = summarize(b);
  const double na = static_cast<double>(sa.n), nb = static_cast<double>(sb.n);
  const double va = sa.std_dev * sa.std_dev / na;
  const double vb = sb.std_dev * sb.std_dev / nb;
  const double se2 = va + vb;
  TTest out;
  if (se2 == 0.0) {
    if (sa.mean == sb.mean) return out;
    out.t = sa.mean > sb.mean ? std::numeric_limits<double>::infinity()
                              : -std::numeric_limits<double>::infinity();
    out.dof = na + nb - 2.0;
    out.p = 0.0;
    return out;
  }
  out.t = (sa.mean - sb.mean) / std::sqrt(se2);
  out.dof = se2 * se2 / (va * va / (na - 1.0) + vb * vb / (nb - 1.0));
  boost::math::students_t dist(out.dof);
  out.p = 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(out.t)));
  return out;
}

std::size_t select_best(std::span<const ScorePair> pairs, std::span<const std::size_t> drawn) {
  std::size_t best = drawn[0];
  for (std::size_t i = 1; i < drawn.size(); ++i) {
    const ScorePair& c = pairs[drawn[i]];
    const ScorePair& b = pairs[best];
    if (c.dev > b.dev || (c.dev == b.dev && c.test > b.test)) best = drawn[i];
  }
  return best;
}

BootstrapResult bootstrap_selection(std::span<const ScorePair> pairs, std::size_t k,
                                    std::size_t reps, std::uint64_t seed) {
  if (pairs.empty()) throw std::invalid_argument("bootstrap_selection: no score pairs");
  if (k == 0 || reps == 0) throw std::invalid_argument("bootstrap_selection: k and reps must be >= 1");
  Rng rng(derive_seed(seed, 0xB007));
  std::vector<std::size_t> drawn(k);
  std::vector<double> tests;
  tests.reserve(reps);
  double dev_total = 0.0;
  for (std::size_t r = 0; r < reps; ++r) {
    for (auto& d : drawn) d = rng.below(pairs.size());
    const ScorePair& chosen = pairs[select_best(pairs, drawn)];
    tests.push_back(chosen.test);
    dev_total += chosen.dev;
  }
  const Summary s = summarize(tests);
  BootstrapResult out;
  out.test_mean = s.mean;
  out.test_std = s.std_dev;
  out.dev_mean = dev_total / static_cast<double>(reps);
  out.ci = s.ci;
  out.k = k;
  out.reps = reps;
  return out;
}

}  // namespace daggru
