// Monte Carlo designs 1-8, the rejection-rate harness and the power sweep.
//
// Data are X_i = mu + A^T eps_i with unit-variance i.i.d. innovations eps_ij
// and Sigma = A^T A either equicorrelated (designs 1, 2, 5, 6) or
// autocorrelated with Sigma_jk = rho^|j-k| (designs 3, 4, 7, 8).
#pragma once

#include <chrono>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include "manyineq/bootstrap.hpp"
#include "manyineq/core.hpp"
#include "manyineq/gaussian.hpp"
#include "manyineq/parallel.hpp"

namespace manyineq {

enum class Structure { EQUI, AR };
enum class Dist { T4, UNIFORM, GAUSSIAN };

inline constexpr std::string_view structure_name(Structure s) { return s == Structure::EQUI ? "equi" : "ar"; }

inline constexpr std::string_view dist_name(Dist d) {
  switch (d) {
    case Dist::T4: return "t4";
    case Dist::UNIFORM: return "uniform";
    case Dist::GAUSSIAN: return "gaussian";
  }
  return "?";
}

inline std::optional<Dist> parse_dist(std::string_view s) {
  for (Dist d : {Dist::T4, Dist::UNIFORM, Dist::GAUSSIAN})
    if (dist_name(d) == s) return d;
  return std::nullopt;
}

struct DesignSpec {
  int design = 1;
  std::size_t n = 400;
  std::size_t p = 200;
  double rho = 0.0;
  Dist dist = Dist::T4;
  double gamma = 0.1;

  [[nodiscard]] Structure structure() const {
    return (design == 3 || design == 4 || design == 7 || design == 8) ? Structure::AR : Structure::EQUI;
  }

  void validate() const {
    if (design < 1 || design > 8) throw std::invalid_argument("design must be 1..8");
    if (n < 2) throw std::invalid_argument("n must be at least 2");
    if (p < 1) throw std::invalid_argument("p must be positive");
    if (!(rho >= 0.0 && rho < 1.0)) throw std::invalid_argument("rho must lie in [0, 1)");
    if (!(gamma >= 0.0 && gamma <= 1.0)) throw std::invalid_argument("gamma must lie in [0, 1]");
  }

  /// E[X_ij] per column.
  [[nodiscard]] std::vector<double> mean_vector() const {
    const auto nonslack = static_cast<std::size_t>(std::floor(gamma * static_cast<double>(p) + 1e-9));
    std::vector<double> mu(p, 0.0);
    for (std::size_t j = 0; j < p; ++j) {
      const bool head = j < nonslack;
      switch (design) {
        case 1: case 3: mu[j] = 0.0; break;
        case 2: case 4: mu[j] = head ? 0.0 : -0.8; break;
        case 5: case 7: mu[j] = 0.05; break;
        default: mu[j] = head ? 0.05 : -0.75; break;
      }
    }
    return mu;
  }
};

/// A data-generating process: dimensions, correlation, innovation law and mean.
struct DataModel {
  std::size_t n = 0;
  std::size_t p = 0;
  double rho = 0.0;
  Structure structure = Structure::EQUI;
  Dist dist = Dist::T4;
  std::vector<double> mean;
};

inline DataModel model_of(const DesignSpec& spec) {
  spec.validate();
  return DataModel{spec.n, spec.p, spec.rho, spec.structure(), spec.dist, spec.mean_vector()};
}

/// A with A^T A = Sigma: the symmetric closed form a I + b 11^T for EQUI, and
/// L^T from the Cholesky factor Sigma = L L^T for AR.
inline Eigen::MatrixXd covariance_factor(std::size_t p, double rho, Structure structure) {
  if (!(rho >= 0.0 && rho < 1.0)) throw std::invalid_argument("rho must lie in [0, 1)");
  if (p == 0) throw std::invalid_argument("p must be positive");
  const auto pp = static_cast<Eigen::Index>(p);
  if (structure == Structure::EQUI) {
    const double a = std::sqrt(1.0 - rho);
    const double b = (std::sqrt(1.0 - rho + static_cast<double>(p) * rho) - a) / static_cast<double>(p);
    Eigen::MatrixXd A = Eigen::MatrixXd::Constant(pp, pp, b);
    A.diagonal().array() += a;
    return A;
  }
  Eigen::MatrixXd sigma(pp, pp);
  for (Eigen::Index j = 0; j < pp; ++j)
    for (Eigen::Index k = 0; k < pp; ++k) sigma(j, k) = std::pow(rho, static_cast<double>(std::abs(j - k)));
  Eigen::LLT<Eigen::MatrixXd> llt(sigma);
  return llt.matrixL().transpose();
}

namespace detail {

inline double innovation(CounterRng& rng, Dist dist) {
  switch (dist) {
    case Dist::GAUSSIAN:
      return rng.standard_normal();
    case Dist::UNIFORM:
      return std::sqrt(3.0) * (2.0 * rng.uniform01() - 1.0);
    case Dist::T4: {
      // Z / sqrt(chi2_4 / 4) has variance 2; chi2_4 = -2 log(U1 U2).
      const double z = rng.standard_normal();
      const double chi2 = -2.0 * std::log(rng.uniform01() * rng.uniform01());
      return z / std::sqrt(chi2 / 4.0) / std::sqrt(2.0);
    }
  }
  return 0.0;
}

}  // namespace detail

/// One n x p sample. Innovations are drawn row by row from (stream, "data").
/// EQUI applies the closed-form factor in O(p) per row; AR applies L through
/// the recursion X_1 = e_1, X_j = rho X_{j-1} + sqrt(1 - rho^2) e_j.
inline SampleMatrix draw_sample(const DataModel& model, const SeededStream& stream) {
  if (model.mean.size() != model.p) throw std::invalid_argument("mean vector length must equal p");
  const auto n = static_cast<Eigen::Index>(model.n), p = static_cast<Eigen::Index>(model.p);
  auto rng = stream.child("data").rng();
  Eigen::MatrixXd x(n, p);
  std::vector<double> eps(model.p);
  const double a = std::sqrt(1.0 - model.rho);
  const double b = (std::sqrt(1.0 - model.rho + static_cast<double>(p) * model.rho) - a) / static_cast<double>(p);
  const double c = std::sqrt(1.0 - model.rho * model.rho);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (auto& e : eps) e = detail::innovation(rng, model.dist);
    if (model.structure == Structure::EQUI) {
      double total = 0.0;
      for (double e : eps) total += e;
      for (Eigen::Index j = 0; j < p; ++j)
        x(i, j) = model.mean[static_cast<std::size_t>(j)] + a * eps[static_cast<std::size_t>(j)] + b * total;
    } else {
      double prev = eps[0];
      x(i, 0) = model.mean[0] + prev;
      for (Eigen::Index j = 1; j < p; ++j) {
        prev = model.rho * prev + c * eps[static_cast<std::size_t>(j)];
        x(i, j) = model.mean[static_cast<std::size_t>(j)] + prev;
      }
    }
  }
  return SampleMatrix(std::move(x));
}

inline SampleMatrix draw_sample(const DesignSpec& spec, const SeededStream& stream) {
  return draw_sample(model_of(spec), stream);
}

struct McConfig {
  std::size_t sims = 1000;
  std::size_t bootstrap_reps = 1000;
  double alpha = 0.05;
  double beta = 0.001;
  std::vector<Method> methods{Method::SN1, Method::SN2, Method::MB1, Method::MB2, Method::EB1, Method::EB2};
  std::uint64_t seed = 0;
  unsigned threads = 1;

  [[nodiscard]] CriticalValueSpec spec_for(Method m) const { return {m, alpha, beta, bootstrap_reps, seed}; }

  void validate() const {
    if (sims == 0) throw std::invalid_argument("sims must be positive");
    if (methods.empty()) throw std::invalid_argument("at least one method is required");
    for (Method m : methods) detail::validate_spec(spec_for(m));
  }
};

struct MethodRate {
  Method method = Method::SN1;
  std::size_t rejections = 0;
  std::size_t sims = 0;

  [[nodiscard]] double rate() const { return static_cast<double>(rejections) / static_cast<double>(sims); }
  /// Binomial standard error sqrt(f (1 - f) / sims).
  [[nodiscard]] double se() const { return std::sqrt(rate() * (1.0 - rate()) / static_cast<double>(sims)); }
};

struct McResult {
  DataModel model;
  std::optional<DesignSpec> design;
  McConfig config;
  std::vector<MethodRate> rates;
  double wall_seconds = 0.0;

  [[nodiscard]] const MethodRate& rate_of(Method m) const {
    for (const auto& r : rates)
      if (r.method == m) return r;
    throw std::out_of_range("method not in result: " + std::string(method_name(m)));
  }
};

/// Decisions of every configured method on replication k. The sample comes
/// from (seed, "mc", k) and the bootstrap from its child "bootstrap", so
/// replications are independent of execution order.
inline std::vector<bool> mc_replication(const DataModel& model, const McConfig& mc, std::size_t k) {
  const auto rep = SeededStream(mc.seed).child("mc", k);
  const auto sample = draw_sample(model, rep);
  const auto s = summarize(sample);
  const auto boot = rep.child("bootstrap");
  std::optional<BootstrapCriticalValues> engines[2];
  std::vector<bool> out;
  out.reserve(mc.methods.size());
  for (Method m : mc.methods) {
    BootstrapCriticalValues* engine = nullptr;
    if (is_bootstrap(m)) {
      const Scheme scheme = detail::method_scheme(m);
      auto& slot = engines[scheme == Scheme::MB ? 0 : 1];
      if (!slot) slot.emplace(sample.data(), s, scheme, mc.bootstrap_reps, scheme_stream(boot, scheme), 1);
      engine = &*slot;
    }
    IndexSet selected;
    const double c = critical_value_for(m, mc.spec_for(m), s, engine, selected);
    out.push_back(exceeds(s, c));
  }
  return out;
}

inline McResult run_mc(const DataModel& model, const McConfig& mc) {
  mc.validate();
  const auto start = std::chrono::steady_clock::now();
  std::vector<std::vector<bool>> decisions(mc.sims);
  parallel_for(mc.sims, mc.threads, [&](std::size_t k) {
    try {
      decisions[k] = mc_replication(model, mc, k);
    } catch (const precondition_error& e) {
      throw precondition_error("replication " + std::to_string(k + 1) + ": " + e.what());
    } catch (const input_error& e) {
      throw input_error("replication " + std::to_string(k + 1) + ": " + e.what());
    }
  });
  McResult res;
  res.model = model;
  res.config = mc;
  for (std::size_t m = 0; m < mc.methods.size(); ++m) {
    MethodRate r{mc.methods[m], 0, mc.sims};
    for (const auto& d : decisions) r.rejections += d[m] ? 1 : 0;
    res.rates.push_back(r);
  }
  res.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return res;
}

inline McResult run_mc(const DesignSpec& spec, const McConfig& mc) {
  auto res = run_mc(model_of(spec), mc);
  res.design = spec;
  return res;
}

struct PowerPoint {
  double r = 0.0;
  McResult result;
};

/// Rejection frequencies under mu_j = r sigma_j for every j, Gaussian
/// innovations. All points share the Monte Carlo seed.
inline std::vector<PowerPoint> power_sweep(std::size_t n, std::size_t p, double rho,
                                           const std::vector<double>& r_values, const McConfig& mc,
                                           Structure structure = Structure::EQUI) {
  std::vector<PowerPoint> out;
  for (double r : r_values) {
    if (!(r >= 0.0) || !std::isfinite(r)) throw std::invalid_argument("r values must be nonnegative");
    const DataModel model{n, p, rho, structure, Dist::GAUSSIAN, std::vector<double>(p, r)};
    out.push_back({r, run_mc(model, mc)});
  }
  return out;
}

}  // namespace manyineq
