// Block multiplier bootstrap (BMB) for dependent data. Rows are split into
// alternating large blocks I_1..I_m of length q and small blocks J_1..J_m of
// length r (plus the remainder J_{m+1}); each large block gets one N(0,1)
// multiplier and the small blocks are ignored.
#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "manyineq/bootstrap.hpp"
#include "manyineq/core.hpp"

namespace manyineq {

/// Half-open 0-based row range [begin, end).
struct BlockRange {
  std::size_t begin = 0;
  std::size_t end = 0;
  [[nodiscard]] std::size_t size() const noexcept { return end - begin; }
  bool operator==(const BlockRange&) const = default;
};

struct BlockPlan {
  std::size_t n = 0;
  std::size_t q = 0;
  std::size_t r = 0;
  std::size_t m = 0;
  std::vector<BlockRange> large_blocks;  // I_1..I_m
  std::vector<BlockRange> small_blocks;  // J_1..J_{m+1}; J_{m+1} may be empty
};

/// Bernstein blocking of rows 1..n. J_{m+1} starts at m(q+r)+1 so that the
/// blocks partition the rows.
inline BlockPlan make_blocks(std::size_t n, std::size_t q, std::size_t r) {
  if (r == 0 || q <= r) throw std::invalid_argument("block lengths need 0 < r < q");
  if (2 * (q + r) > n)
    throw std::invalid_argument("block lengths need q + r <= n/2 (q=" + std::to_string(q) + ", r=" +
                                std::to_string(r) + ", n=" + std::to_string(n) + ")");
  BlockPlan plan{n, q, r, n / (q + r), {}, {}};
  for (std::size_t l = 0; l < plan.m; ++l) {
    const std::size_t start = l * (q + r);
    plan.large_blocks.push_back({start, start + q});
    plan.small_blocks.push_back({start + q, start + q + r});
  }
  plan.small_blocks.push_back({plan.m * (q + r), n});
  return plan;
}

namespace detail {

// floor(n^(1/k)) computed exactly.
inline std::size_t integer_root(std::size_t n, int k) {
  auto v = static_cast<std::size_t>(std::floor(std::pow(static_cast<double>(n), 1.0 / k)));
  auto pw = [k](std::size_t b) {
    long double x = 1;
    for (int i = 0; i < k; ++i) x *= static_cast<long double>(b);
    return x;
  };
  while (v > 0 && pw(v) > static_cast<long double>(n)) --v;
  while (pw(v + 1) <= static_cast<long double>(n)) ++v;
  return v;
}

}  // namespace detail

/// Default block lengths q = floor(n^(1/3)), r = max(1, floor(n^(1/6))).
inline BlockPlan default_block_plan(std::size_t n) {
  return make_blocks(n, detail::integer_root(n, 3), std::max<std::size_t>(1, detail::integer_root(n, 6)));
}

/// max_j sqrt(n) * mean_j.
inline double nonstudentized_statistic(const MomentSummary& s) {
  const double rn = std::sqrt(static_cast<double>(s.n));
  double t = -std::numeric_limits<double>::infinity();
  for (double m : s.means) t = std::max(t, rn * m);
  return t;
}

namespace detail {

// Large-block sums of the centered data: S(l, j) = sum_{i in I_l} (X_ij - mean_j).
inline Eigen::MatrixXd block_sums(const Eigen::MatrixXd& x, const MomentSummary& s, const BlockPlan& plan) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(plan.m), x.cols());
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    const double mean = s.means[static_cast<std::size_t>(j)];
    for (std::size_t l = 0; l < plan.m; ++l) {
      double acc = 0.0;
      for (std::size_t i = plan.large_blocks[l].begin; i < plan.large_blocks[l].end; ++i)
        acc += x(static_cast<Eigen::Index>(i), j) - mean;
      out(static_cast<Eigen::Index>(l), j) = acc;
    }
  }
  return out;
}

inline void check_plan(const BlockPlan& plan, std::size_t n) {
  if (plan.n != n)
    throw std::invalid_argument("block plan is for n=" + std::to_string(plan.n) + " but the sample has " +
                                std::to_string(n) + " rows");
}

}  // namespace detail

/// Draws of W = max_j (mq)^{-1/2} sum_l eps_l S(l, j); replication b uses (stream, "rep", b).
inline BootstrapDraws bmb_draws(const SampleMatrix& sample, const BlockPlan& plan, std::size_t replications,
                                const SeededStream& stream, unsigned threads = 1) {
  detail::check_plan(plan, sample.n());
  if (replications == 0) throw std::invalid_argument("replications must be positive");
  const auto s = summarize(sample);
  const auto sums = detail::block_sums(sample.data(), s, plan);
  const auto w = detail::replication_weights(Scheme::MB, plan.m, replications, stream, threads);
  const double scale = 1.0 / std::sqrt(static_cast<double>(plan.m * plan.q));
  const auto scores = detail::weighted_column_sums(w, sums, scale, threads);
  BootstrapDraws d;
  d.restricted_to = full_index_set(sample.p());
  d.values.resize(replications);
  for (Eigen::Index b = 0; b < scores.rows(); ++b) d.values[static_cast<std::size_t>(b)] = scores.row(b).maxCoeff();
  return d;
}

/// BMB critical value: conditional (1 - alpha)-quantile of W.
inline double bmb_critical(const SampleMatrix& sample, const BlockPlan& plan, double alpha,
                           std::size_t replications, const SeededStream& stream, unsigned threads = 1) {
  if (!(alpha > 0.0 && alpha < 0.5)) throw std::invalid_argument("alpha must lie in (0, 0.5)");
  return empirical_quantile(bmb_draws(sample, plan, replications, stream, threads), 1.0 - alpha);
}

/// Rejects iff max_j sqrt(n) mean_j exceeds the BMB critical value.
inline TestDecision bmb_test(const SampleMatrix& sample, const BlockPlan& plan, double alpha,
                             std::size_t replications, const SeededStream& stream, unsigned threads = 1) {
  TestDecision d;
  d.critical_value = bmb_critical(sample, plan, alpha, replications, stream, threads);
  d.statistic = nonstudentized_statistic(summarize(sample));
  d.reject = d.statistic > d.critical_value;
  d.selected = full_index_set(sample.p());
  d.method = CriticalValueSpec{Method::MB1, alpha, 0.0, replications, stream.master_seed()};
  return d;
}

}  // namespace manyineq
