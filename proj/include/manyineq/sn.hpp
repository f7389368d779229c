// Self-normalized critical values: the one-step union-bound value and the
// two-step variant with inequality selection.
#pragma once

#include <cmath>
#include <stdexcept>
#include <string>

#include "manyineq/core.hpp"
#include "manyineq/gaussian.hpp"

namespace manyineq {

struct SnConfig {
  double alpha = 0.05;
  double beta = 0.001;
  bool use_selection = true;

  void validate() const {
    if (!(alpha > 0.0 && alpha < 0.5)) throw std::invalid_argument("alpha must lie in (0, 0.5)");
    if (use_selection && !(beta > 0.0 && beta < alpha / 3.0))
      throw std::invalid_argument("beta must lie in (0, alpha/3) for two-step SN");
  }
};

namespace detail {

// z / sqrt(1 - z^2/n) with z = Phi^{-1}(1 - level_tail).
inline double moderate_deviation_cv(double level_tail, std::size_t n) {
  const double z = normal_quantile(1.0 - level_tail);
  const double ratio = z * z / static_cast<double>(n);
  if (!(ratio < 1.0))
    throw precondition_error("SN critical value undefined: p too large relative to n");
  return z / std::sqrt(1.0 - ratio);
}

}  // namespace detail

/// One-step SN critical value Phi^{-1}(1-a/p) / sqrt(1 - Phi^{-1}(1-a/p)^2 / n).
inline double sn_one_step(double alpha, std::size_t p, std::size_t n) {
  if (!(alpha > 0.0 && alpha < 0.5)) throw std::invalid_argument("alpha must lie in (0, 0.5)");
  if (p == 0 || n == 0) throw std::invalid_argument("sn_one_step: p and n must be positive");
  return detail::moderate_deviation_cv(alpha / static_cast<double>(p), n);
}

/// Columns whose score exceeds -2 c_SN(beta). A degenerate column is kept iff
/// its mean is nonnegative.
inline IndexSet sn_select(const MomentSummary& s, double beta) {
  if (!(beta > 0.0 && beta < 0.5)) throw std::invalid_argument("beta must lie in (0, 0.5)");
  const double threshold = -2.0 * sn_one_step(beta, s.p(), s.n);
  const double rn = std::sqrt(static_cast<double>(s.n));
  IndexSet out;
  for (std::size_t j = 0; j < s.p(); ++j) {
    const bool keep = s.degenerate[j] ? s.means[j] >= 0.0 : rn * s.means[j] / s.sds[j] > threshold;
    if (keep) out.push_back(j);
  }
  return out;
}

/// Two-step SN critical value for a realized selection size k: the one-step
/// formula at tail (alpha - 2 beta)/k, or 0 when nothing was selected.
inline double sn_two_step_critical(double alpha, double beta, std::size_t k, std::size_t n) {
  if (k == 0) return 0.0;
  return detail::moderate_deviation_cv((alpha - 2.0 * beta) / static_cast<double>(k), n);
}

/// Two-step SN test. The statistic is the full max over all columns; only the
/// critical value depends on the selected set.
inline TestDecision sn_two_step(const MomentSummary& s, const SnConfig& cfg) {
  cfg.validate();
  TestDecision d;
  d.method.method = cfg.use_selection ? Method::SN2 : Method::SN1;
  d.method.alpha = cfg.alpha;
  d.method.beta = cfg.beta;
  if (cfg.use_selection) {
    d.selected = sn_select(s, cfg.beta);
    d.critical_value = sn_two_step_critical(cfg.alpha, cfg.beta, d.selected.size(), s.n);
  } else {
    d.selected = full_index_set(s.p());
    d.critical_value = sn_one_step(cfg.alpha, s.p(), s.n);
  }
  const auto t = test_statistic(s);
  d.statistic = t.value;
  d.degenerate = t.degenerate;
  d.reject = exceeds(s, d.critical_value);
  return d;
}

}  // namespace manyineq
