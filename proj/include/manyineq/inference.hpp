// Confidence regions by test inversion over a grid of parameter values, and
// the two-step bootstrap test for approximate moment inequalities.
#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "manyineq/bootstrap.hpp"
#include "manyineq/core.hpp"
#include "manyineq/parallel.hpp"

namespace manyineq {

/// g_values(i, j) = g_j(xi_i, theta) at one candidate theta.
struct GridPoint {
  std::string label;
  std::vector<double> theta;
  SampleMatrix g_values;
};

struct PointResult {
  std::string label;
  std::vector<double> theta;
  bool accepted = false;
  std::optional<TestDecision> decision;
  std::optional<std::string> error;  // set when the test could not be run at this point
};

struct ConfidenceRegion {
  std::vector<std::string> accepted;  // labels, in grid order
  double alpha = 0.05;
  CriticalValueSpec method;
  std::vector<PointResult> points;

  [[nodiscard]] bool has_failures() const {
    for (const auto& p : points)
      if (p.error) return true;
    return false;
  }
};

/// Stream used for the grid point with this label.
inline SeededStream grid_point_stream(std::uint64_t seed, const std::string& label) {
  return SeededStream(seed).child("theta/" + label);
}

/// { theta in grid : the test at theta does not reject }. Each point draws
/// from its own (seed, label) substream. Points where a statistical
/// precondition fails are kept in `points` with the error and are not accepted.
inline ConfidenceRegion invert_region(const std::vector<GridPoint>& grid, const CriticalValueSpec& spec,
                                      unsigned threads = 1) {
  detail::validate_spec(spec);
  for (const auto& g : grid)
    if (g.g_values.n() != grid.front().g_values.n())
      throw input_error("grid point '" + g.label + "' has " + std::to_string(g.g_values.n()) +
                        " rows, expected " + std::to_string(grid.front().g_values.n()));
  ConfidenceRegion region;
  region.alpha = spec.alpha;
  region.method = spec;
  region.points.resize(grid.size());
  parallel_for(grid.size(), threads, [&](std::size_t k) {
    const auto& g = grid[k];
    auto& out = region.points[k];
    out.label = g.label;
    out.theta = g.theta;
    try {
      const auto& x = g.g_values;
      out.decision = decide(x.data(), summarize(x), spec, grid_point_stream(spec.seed, g.label));
      out.accepted = !out.decision->reject;
    } catch (const precondition_error& e) {
      out.error = e.what();
    }
  });
  for (const auto& p : region.points)
    if (p.accepted) region.accepted.push_back(p.label);
  return region;
}

/// Estimated moment functions xhat(i, j) together with externally supplied
/// estimates muhat_j of their means.
struct ApproxSample {
  Eigen::MatrixXd xhat;
  std::vector<double> muhat;

  void validate() const {
    SampleMatrix check(xhat);
    if (muhat.size() != static_cast<std::size_t>(xhat.cols()))
      throw input_error("muhat has " + std::to_string(muhat.size()) + " entries, expected " +
                        std::to_string(xhat.cols()));
    for (double m : muhat)
      if (!std::isfinite(m)) throw input_error("muhat has a non-finite entry");
  }
};

/// Two-step MB/EB test with sigma_j^2 = E_n[(xhat_ij - muhat_j)^2] and the
/// bootstrap run on xhat centered at muhat.
inline TestDecision approximate_two_step_test(const ApproxSample& approx, const CriticalValueSpec& spec,
                                              unsigned threads = 1) {
  if (spec.method != Method::MB2 && spec.method != Method::EB2)
    throw std::invalid_argument("approximate-inequality test needs a two-step bootstrap method (mb2 or eb2)");
  approx.validate();
  const auto s = summarize_about(approx.xhat, approx.muhat);
  return decide(approx.xhat, s, spec, SeededStream(spec.seed), threads);
}

}  // namespace manyineq
