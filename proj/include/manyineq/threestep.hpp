// Three-step MB/EB tests for parametric moment inequalities: uninformative
// inequalities are dropped with the usual two-step rule and weakly informative
// ones (flat in theta at the tested point) with a bootstrap test on the
// gradient means.
#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>

#include <Eigen/Core>

#include "manyineq/bootstrap.hpp"
#include "manyineq/core.hpp"

namespace manyineq {

/// g(i, j) = g_j(xi_i, theta0); v(i, j * r + l) = d g_j / d theta_l at (xi_i, theta0).
class ParametricMomentData {
 public:
  ParametricMomentData(Eigen::MatrixXd g, Eigen::MatrixXd v, std::size_t r)
      : g_(std::move(g)), v_(std::move(v)), r_(r) {
    if (r_ == 0) throw input_error("parameter dimension r must be positive");
    if (v_.rows() != g_.rows())
      throw input_error("gradient array has " + std::to_string(v_.rows()) + " rows, expected " +
                        std::to_string(g_.rows()));
    if (static_cast<std::size_t>(v_.cols()) != static_cast<std::size_t>(g_.cols()) * r_)
      throw input_error("gradient array has " + std::to_string(v_.cols()) + " columns, expected p*r = " +
                        std::to_string(static_cast<std::size_t>(g_.cols()) * r_));
    SampleMatrix check_g(g_);
    SampleMatrix check_v(v_);
  }

  [[nodiscard]] std::size_t n() const noexcept { return static_cast<std::size_t>(g_.rows()); }
  [[nodiscard]] std::size_t p() const noexcept { return static_cast<std::size_t>(g_.cols()); }
  [[nodiscard]] std::size_t r() const noexcept { return r_; }
  [[nodiscard]] const Eigen::MatrixXd& g() const noexcept { return g_; }
  [[nodiscard]] const Eigen::MatrixXd& v() const noexcept { return v_; }

 private:
  Eigen::MatrixXd g_;
  Eigen::MatrixXd v_;
  std::size_t r_;
};

struct ThreeStepConfig {
  double alpha = 0.05;
  double beta = 0.001;
  std::optional<double> phi;  // default min(beta/2, 1/log n)
  Scheme scheme = Scheme::MB;
  std::size_t replications = 1000;
  SeededStream stream{0};
  unsigned threads = 1;

  [[nodiscard]] double phi_for(std::size_t n) const {
    return phi ? *phi : std::min(beta / 2.0, 1.0 / std::log(static_cast<double>(n)));
  }

  void validate(std::size_t n) const {
    if (!(alpha > 0.0 && alpha < 0.5)) throw std::invalid_argument("alpha must lie in (0, 0.5)");
    if (!(beta > 0.0 && beta < alpha / 2.0)) throw std::invalid_argument("beta must lie in (0, alpha/2)");
    // The final quantile level 1 - alpha + 4 beta has to stay below one.
    if (!(4.0 * beta < alpha)) throw std::invalid_argument("three-step test needs 4*beta < alpha");
    const double f = phi_for(n);
    if (!(f > 0.0 && f < beta)) throw std::invalid_argument("phi must lie in (0, beta)");
    if (replications < 100) throw std::invalid_argument("bootstrap needs at least 100 replications");
  }
};

/// Means and n-divisor sds of every gradient column; flattened as j * r + l.
inline MomentSummary gradient_summary(const ParametricMomentData& data) {
  const auto s = summarize(SampleMatrix(data.v()));
  if (s.any_degenerate()) {
    const std::size_t k = s.degenerate_columns().front();
    throw precondition_error("gradient column (j=" + std::to_string(k / data.r() + 1) +
                             ", l=" + std::to_string(k % data.r() + 1) + ") has zero variance");
  }
  return s;
}

namespace detail {

inline BootstrapScores gradient_scores(const ParametricMomentData& data, const MomentSummary& vs,
                                       const ThreeStepConfig& cfg) {
  return BootstrapScores(studentize(data.v(), vs), {}, cfg.scheme, cfg.replications,
                         cfg.stream.child("grad-select"), cfg.threads);
}

// Columns j whose r gradient scores all exceed -factor * c.
inline IndexSet gradient_select(const MomentSummary& vs, std::size_t r, double factor, double c) {
  const double rn = std::sqrt(static_cast<double>(vs.n));
  IndexSet out;
  for (std::size_t j = 0; j < vs.p() / r; ++j) {
    bool keep = true;
    for (std::size_t l = 0; l < r && keep; ++l) {
      const std::size_t k = j * r + l;
      keep = rn * vs.means[k] / vs.sds[k] > -factor * c;
    }
    if (keep) out.push_back(j);
  }
  return out;
}

}  // namespace detail

/// c^{B,V}(gamma): conditional (1 - gamma)-quantile of the gradient bootstrap max.
inline double gradient_bootstrap_critical(const ParametricMomentData& data, double gamma,
                                          const ThreeStepConfig& cfg) {
  if (!(gamma > 0.0 && gamma < 1.0)) throw std::domain_error("gamma must lie in (0, 1)");
  const auto vs = gradient_summary(data);
  const auto scores = detail::gradient_scores(data, vs, cfg);
  return empirical_quantile(scores.max_over(full_index_set(vs.p())), 1.0 - gamma);
}

struct ThreeStepSets {
  IndexSet j_b;              // score_j > -2 c^B(beta)
  IndexSet j_prime;          // all gradient scores > -c^{B,V}(beta + phi)
  IndexSet j_double_prime;   // all gradient scores > -3 c^{B,V}(beta - phi)
  double c_beta = 0.0;
  double c_grad_plus = 0.0;
  double c_grad_minus = 0.0;
};

struct ThreeStepDecision {
  TestDecision decision;
  ThreeStepSets sets;
  double phi = 0.0;
};

namespace detail {

// Both gradient thresholds come from the same gradient draws.
inline ThreeStepSets three_step_sets(const ParametricMomentData& data, const ThreeStepConfig& cfg,
                                     BootstrapCriticalValues& engine) {
  const double phi = cfg.phi_for(data.n());
  const auto vs = gradient_summary(data);
  const auto grad = gradient_scores(data, vs, cfg).max_over(full_index_set(vs.p()));
  ThreeStepSets out;
  out.c_beta = empirical_quantile(engine.selection().max_over(full_index_set(data.p())), 1.0 - cfg.beta);
  out.j_b = threshold_select(engine.summary(), out.c_beta);
  out.c_grad_plus = empirical_quantile(grad, 1.0 - (cfg.beta + phi));
  out.c_grad_minus = empirical_quantile(grad, 1.0 - (cfg.beta - phi));
  out.j_prime = gradient_select(vs, data.r(), 1.0, out.c_grad_plus);
  out.j_double_prime = gradient_select(vs, data.r(), 3.0, out.c_grad_minus);
  return out;
}

inline BootstrapCriticalValues three_step_engine(const ParametricMomentData& data,
                                                 const ThreeStepConfig& cfg) {
  return BootstrapCriticalValues(data.g(), summarize(SampleMatrix(data.g())), cfg.scheme,
                                 cfg.replications, cfg.stream, cfg.threads);
}

}  // namespace detail

/// The selection sets J_B, J'_B and J''_B.
inline ThreeStepSets three_step_sets(const ParametricMomentData& data, const ThreeStepConfig& cfg) {
  cfg.validate(data.n());
  auto engine = detail::three_step_engine(data, cfg);
  return detail::three_step_sets(data, cfg, engine);
}

/// Rejects iff T^B = max_{j in J'} score_j exceeds the quantile at level
/// 1 - alpha + 4 beta over J_B intersected with J''. An empty J' gives T^B = 0,
/// critical value 0 and no rejection.
inline ThreeStepDecision three_step_test(const ParametricMomentData& data, const ThreeStepConfig& cfg) {
  cfg.validate(data.n());
  auto engine = detail::three_step_engine(data, cfg);
  ThreeStepDecision out;
  out.phi = cfg.phi_for(data.n());
  out.sets = detail::three_step_sets(data, cfg, engine);
  auto& d = out.decision;
  d.method = CriticalValueSpec{cfg.scheme == Scheme::MB ? Method::MB2 : Method::EB2, cfg.alpha, cfg.beta,
                               cfg.replications, cfg.stream.master_seed()};
  const auto& s = engine.summary();
  if (out.sets.j_prime.empty()) return out;

  IndexSet crit_set;
  std::set_intersection(out.sets.j_b.begin(), out.sets.j_b.end(), out.sets.j_double_prime.begin(),
                        out.sets.j_double_prime.end(), std::back_inserter(crit_set));
  d.selected = crit_set;
  d.critical_value = engine.quantile(crit_set, 1.0 - cfg.alpha + 4.0 * cfg.beta);
  const auto t = test_statistic(s, out.sets.j_prime);
  d.statistic = t.value;
  d.degenerate = t.degenerate;
  d.reject = exceeds(s, d.critical_value, out.sets.j_prime);
  return out;
}

}  // namespace manyineq
