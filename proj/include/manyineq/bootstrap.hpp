// Multiplier (MB) and empirical (EB) bootstrap critical values: one-step,
// two-step with inequality selection, and the SN-selected hybrid.
//
// Both schemes reduce to weighted column sums of the studentized data
// Z_ij = (X_ij - mu_j) / sigma_j:
//
//   MB:  W_bj = n^{-1/2} sum_i eps_bi Z_ij,   eps_bi ~ N(0,1)
//   EB:  W_bj = n^{-1/2} sum_i cnt_bi Z_ij,   cnt_b ~ Multinomial(n; 1/n, ...)
//
// Replication b draws its weights from the substream (stream, "rep", b). The
// B x p score matrix is computed once per stream and every index set J is a
// row-wise max over its columns, so methods that share a stream share draws.
#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "manyineq/core.hpp"
#include "manyineq/gaussian.hpp"
#include "manyineq/parallel.hpp"
#include "manyineq/sn.hpp"

namespace manyineq {

enum class Scheme { MB, EB };

inline constexpr std::string_view scheme_name(Scheme s) { return s == Scheme::MB ? "mb" : "eb"; }

/// Realizations of max_{j in J} W_j, one per replication.
struct BootstrapDraws {
  std::vector<double> values;
  IndexSet restricted_to;
};

struct BootstrapConfig {
  Scheme scheme = Scheme::MB;
  std::size_t replications = 1000;
  SeededStream stream{0};
  double beta = 0.001;
  double alpha = 0.05;
  unsigned threads = 1;

  void validate(bool uses_selection) const {
    if (replications < 100) throw std::invalid_argument("bootstrap needs at least 100 replications");
    if (!(alpha > 0.0 && alpha < 0.5)) throw std::invalid_argument("alpha must lie in (0, 0.5)");
    if (uses_selection && !(beta > 0.0 && beta < alpha / 2.0))
      throw std::invalid_argument("beta must lie in (0, alpha/2) for two-step bootstrap");
  }
};

namespace detail {

inline constexpr Eigen::Index kRowTile = 8;
inline constexpr Eigen::Index kColTile = 4;
inline constexpr Eigen::Index kRowPanel = 64;

inline Eigen::Index round_up(Eigen::Index v, Eigen::Index m) { return (v + m - 1) / m * m; }

// out(b, j) = scale * sum_i weights(b, i) * z(i, j).
//
// Every output entry is accumulated by a single running sum in increasing i,
// so its value does not depend on the other columns, on the tiling, or on how
// work is split across threads.
inline Eigen::MatrixXd weighted_column_sums(const Eigen::MatrixXd& weights, const Eigen::MatrixXd& z,
                                            double scale, unsigned threads = 1) {
  const Eigen::Index rows = weights.rows(), n = weights.cols(), p = z.cols();
  if (z.rows() != n) throw std::invalid_argument("weighted_column_sums: shape mismatch");
  const Eigen::Index row_tiles = round_up(rows, kRowTile) / kRowTile;
  const Eigen::Index col_tiles = round_up(p, kColTile) / kColTile;

  // Packed, zero-padded copies: tile-major then i then lane.
  std::vector<double> pw(static_cast<std::size_t>(row_tiles * n * kRowTile), 0.0);
  for (Eigen::Index t = 0; t < row_tiles; ++t)
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index bb = 0; bb < kRowTile; ++bb) {
        const Eigen::Index b = t * kRowTile + bb;
        if (b < rows) pw[static_cast<std::size_t>((t * n + i) * kRowTile + bb)] = weights(b, i);
      }
  std::vector<double> pz(static_cast<std::size_t>(col_tiles * n * kColTile), 0.0);
  for (Eigen::Index t = 0; t < col_tiles; ++t)
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index jj = 0; jj < kColTile; ++jj) {
        const Eigen::Index j = t * kColTile + jj;
        if (j < p) pz[static_cast<std::size_t>((t * n + i) * kColTile + jj)] = z(i, j);
      }

  Eigen::MatrixXd out(rows, p);
  const Eigen::Index tiles_per_panel = kRowPanel / kRowTile;
  const Eigen::Index panels = (row_tiles + tiles_per_panel - 1) / tiles_per_panel;
  parallel_for(static_cast<std::size_t>(panels), threads, [&](std::size_t panel) {
    const Eigen::Index t_begin = static_cast<Eigen::Index>(panel) * tiles_per_panel;
    const Eigen::Index t_end = std::min(row_tiles, t_begin + tiles_per_panel);
    for (Eigen::Index ct = 0; ct < col_tiles; ++ct) {
      const double* zp = pz.data() + ct * n * kColTile;
      for (Eigen::Index t = t_begin; t < t_end; ++t) {
        const double* wp = pw.data() + t * n * kRowTile;
        double acc[kColTile][kRowTile] = {};
        for (Eigen::Index i = 0; i < n; ++i) {
          const double* wi = wp + i * kRowTile;
          const double* zi = zp + i * kColTile;
          for (Eigen::Index jj = 0; jj < kColTile; ++jj) {
            const double zz = zi[jj];
            for (Eigen::Index bb = 0; bb < kRowTile; ++bb) acc[jj][bb] += zz * wi[bb];
          }
        }
        for (Eigen::Index jj = 0; jj < kColTile; ++jj) {
          const Eigen::Index j = ct * kColTile + jj;
          if (j >= p) break;
          for (Eigen::Index bb = 0; bb < kRowTile; ++bb) {
            const Eigen::Index b = t * kRowTile + bb;
            if (b < rows) out(b, j) = acc[jj][bb] * scale;
          }
        }
      }
    }
  });
  return out;
}

// Replication weights, row b from (stream, "rep", b).
inline Eigen::MatrixXd replication_weights(Scheme scheme, std::size_t n, std::size_t replications,
                                           const SeededStream& stream, unsigned threads) {
  Eigen::MatrixXd w(static_cast<Eigen::Index>(replications), static_cast<Eigen::Index>(n));
  parallel_for(replications, threads, [&](std::size_t b) {
    auto rng = stream.child("rep", b).rng();
    const auto row = static_cast<Eigen::Index>(b);
    if (scheme == Scheme::MB) {
      for (std::size_t i = 0; i < n; ++i) w(row, static_cast<Eigen::Index>(i)) = rng.standard_normal();
    } else {
      w.row(row).setZero();
      for (std::size_t k = 0; k < n; ++k) w(row, static_cast<Eigen::Index>(rng.uniform_index(n))) += 1.0;
    }
  });
  return w;
}

inline std::string column_list(const IndexSet& cols) {
  std::string s;
  for (std::size_t k = 0; k < cols.size(); ++k) {
    if (k) s += ", ";
    s += std::to_string(cols[k] + 1);
  }
  return s;
}

}  // namespace detail

/// Studentized data (X_ij - center_j) / sd_j; degenerate columns are zero
/// placeholders and must never be read through a draw.
inline Eigen::MatrixXd studentize(const Eigen::MatrixXd& x, const MomentSummary& s) {
  Eigen::MatrixXd z(x.rows(), x.cols());
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    const auto jj = static_cast<std::size_t>(j);
    if (s.degenerate[jj])
      z.col(j).setZero();
    else
      z.col(j) = (x.col(j).array() - s.means[jj]) / s.sds[jj];
  }
  return z;
}

/// Bootstrap score matrix for one dataset and one stream.
class BootstrapScores {
 public:
  BootstrapScores(const Eigen::MatrixXd& studentized, IndexSet degenerate, Scheme scheme,
                  std::size_t replications, SeededStream stream, unsigned threads = 1)
      : degenerate_(std::move(degenerate)) {
    const auto n = static_cast<std::size_t>(studentized.rows());
    const auto w = detail::replication_weights(scheme, n, replications, stream, threads);
    scores_ = detail::weighted_column_sums(w, studentized, 1.0 / std::sqrt(static_cast<double>(n)),
                                           threads);
  }

  /// max_{j in J} W_bj for every replication; all zeros when J is empty.
  [[nodiscard]] BootstrapDraws max_over(const IndexSet& columns) const {
    IndexSet bad;
    std::set_intersection(columns.begin(), columns.end(), degenerate_.begin(), degenerate_.end(),
                          std::back_inserter(bad));
    if (!bad.empty())
      throw precondition_error("bootstrap undefined for zero-variance column(s): " +
                               detail::column_list(bad));
    BootstrapDraws d;
    d.restricted_to = columns;
    d.values.assign(static_cast<std::size_t>(scores_.rows()), 0.0);
    if (columns.empty()) return d;
    for (Eigen::Index b = 0; b < scores_.rows(); ++b) {
      double m = scores_(b, static_cast<Eigen::Index>(columns.front()));
      for (std::size_t j : columns) m = std::max(m, scores_(b, static_cast<Eigen::Index>(j)));
      d.values[static_cast<std::size_t>(b)] = m;
    }
    return d;
  }

  [[nodiscard]] const Eigen::MatrixXd& matrix() const noexcept { return scores_; }

 private:
  IndexSet degenerate_;
  Eigen::MatrixXd scores_;
};

namespace detail {

inline BootstrapDraws scheme_draws(Scheme scheme, const SampleMatrix& sample, const MomentSummary& s,
                                   const IndexSet& columns, std::size_t replications,
                                   const SeededStream& stream) {
  if (replications == 0) throw std::invalid_argument("replications must be positive");
  const BootstrapScores scores(studentize(sample.data(), s), s.degenerate_columns(), scheme,
                               replications, stream);
  return scores.max_over(columns);
}

}  // namespace detail

/// Multiplier bootstrap draws of max_{j in J} sqrt(n) E_n[eps_i (X_ij - mu_j)] / sigma_j.
inline BootstrapDraws mb_draws(const SampleMatrix& sample, const MomentSummary& s,
                               const IndexSet& columns, std::size_t replications,
                               const SeededStream& stream) {
  return detail::scheme_draws(Scheme::MB, sample, s, columns, replications, stream);
}

/// Empirical bootstrap draws of max_{j in J} sqrt(n) E_n[X*_ij - mu_j] / sigma_j.
inline BootstrapDraws eb_draws(const SampleMatrix& sample, const MomentSummary& s,
                               const IndexSet& columns, std::size_t replications,
                               const SeededStream& stream) {
  return detail::scheme_draws(Scheme::EB, sample, s, columns, replications, stream);
}

/// The ceil(level * B)-th order statistic (1-indexed) of the draws.
inline double empirical_quantile(const std::vector<double>& values, double level) {
  if (!(level > 0.0 && level < 1.0))
    throw std::domain_error("empirical_quantile: level must lie in (0, 1)");
  if (values.empty()) throw std::invalid_argument("empirical_quantile: no draws");
  const auto B = static_cast<double>(values.size());
  // The slack absorbs representation error in levels such as 1 - 0.05 + 0.002.
  auto k = static_cast<std::size_t>(std::ceil(level * B - 1e-9));
  k = std::clamp<std::size_t>(k, 1, values.size());
  std::vector<double> v = values;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(k - 1), v.end());
  return v[k - 1];
}

inline double empirical_quantile(const BootstrapDraws& draws, double level) {
  return empirical_quantile(draws.values, level);
}

/// Columns with score > -2 c (degenerate columns kept iff mean >= 0).
inline IndexSet threshold_select(const MomentSummary& s, double c) {
  const double rn = std::sqrt(static_cast<double>(s.n));
  IndexSet out;
  for (std::size_t j = 0; j < s.p(); ++j) {
    const bool keep = s.degenerate[j] ? s.means[j] >= 0.0 : rn * s.means[j] / s.sds[j] > -2.0 * c;
    if (keep) out.push_back(j);
  }
  return out;
}

/// All critical values for one dataset and one bootstrap scheme. Selection
/// draws come from (stream, "select") and critical-value draws from
/// (stream, "crit"); each score matrix is generated on first use.
class BootstrapCriticalValues {
 public:
  BootstrapCriticalValues(const Eigen::MatrixXd& x, MomentSummary summary, Scheme scheme,
                          std::size_t replications, SeededStream stream, unsigned threads = 1)
      : summary_(std::move(summary)),
        z_(studentize(x, summary_)),
        scheme_(scheme),
        replications_(replications),
        stream_(std::move(stream)),
        threads_(threads) {}

  BootstrapCriticalValues(const SampleMatrix& sample, const BootstrapConfig& cfg)
      : BootstrapCriticalValues(sample.data(), summarize(sample), cfg.scheme, cfg.replications,
                                cfg.stream, cfg.threads) {}

  [[nodiscard]] const MomentSummary& summary() const noexcept { return summary_; }

  /// Conditional quantile of the critical-value draws restricted to J.
  double quantile(const IndexSet& columns, double level) {
    if (columns.empty()) return 0.0;
    return empirical_quantile(crit().max_over(columns), level);
  }

  /// c^B(alpha): full-set quantile at 1 - alpha.
  double one_step(double alpha) { return quantile(full_index_set(summary_.p()), 1.0 - alpha); }

  /// J_B = { j : score_j > -2 c^B(beta) }, c^B(beta) from the selection draws.
  IndexSet select(double beta) {
    const double c = empirical_quantile(selection().max_over(full_index_set(summary_.p())), 1.0 - beta);
    return threshold_select(summary_, c);
  }

  /// Quantile at 1 - alpha + 2 beta over J_B (0 if J_B is empty).
  double two_step(double alpha, double beta, IndexSet* selected = nullptr) {
    auto J = select(beta);
    const double c = quantile(J, 1.0 - alpha + 2.0 * beta);
    if (selected) *selected = std::move(J);
    return c;
  }

  /// Quantile at 1 - alpha + 2 beta over the SN-selected set.
  double hybrid(double alpha, double beta, IndexSet* selected = nullptr) {
    auto J = sn_select(summary_, beta);
    const double c = quantile(J, 1.0 - alpha + 2.0 * beta);
    if (selected) *selected = std::move(J);
    return c;
  }

  const BootstrapScores& crit() { return scores(crit_, "crit"); }
  const BootstrapScores& selection() { return scores(select_, "select"); }

 private:
  const BootstrapScores& scores(std::optional<BootstrapScores>& slot, const char* label) {
    if (!slot)
      slot.emplace(z_, summary_.degenerate_columns(), scheme_, replications_, stream_.child(label),
                   threads_);
    return *slot;
  }

  MomentSummary summary_;
  Eigen::MatrixXd z_;
  Scheme scheme_;
  std::size_t replications_;
  SeededStream stream_;
  unsigned threads_;
  std::optional<BootstrapScores> crit_;
  std::optional<BootstrapScores> select_;
};

/// One-step MB/EB critical value: conditional (1 - alpha)-quantile over all columns.
inline double one_step_critical(const SampleMatrix& sample, const BootstrapConfig& cfg) {
  cfg.validate(false);
  BootstrapCriticalValues cv(sample, cfg);
  return cv.one_step(cfg.alpha);
}

/// Two-step selection set J_B.
inline IndexSet select_set(const SampleMatrix& sample, const BootstrapConfig& cfg) {
  cfg.validate(true);
  BootstrapCriticalValues cv(sample, cfg);
  return cv.select(cfg.beta);
}

/// Two-step MB/EB critical value.
inline double two_step_critical(const SampleMatrix& sample, const BootstrapConfig& cfg) {
  cfg.validate(true);
  BootstrapCriticalValues cv(sample, cfg);
  return cv.two_step(cfg.alpha, cfg.beta);
}

/// Hybrid critical value: SN selection at level beta, bootstrap quantile at 1 - alpha + 2 beta.
inline double hybrid_critical(const SampleMatrix& sample, const BootstrapConfig& cfg, double beta) {
  cfg.validate(false);
  if (!(beta > 0.0 && beta <= cfg.alpha / 3.0))
    throw std::invalid_argument("hybrid method needs 0 < beta <= alpha/3");
  BootstrapCriticalValues cv(sample, cfg);
  return cv.hybrid(cfg.alpha, beta);
}

/// Root stream of the given scheme for a test seeded with `seed`.
inline SeededStream scheme_stream(const SeededStream& root, Scheme scheme) {
  return root.child(std::string(scheme_name(scheme)));
}

namespace detail {

inline void validate_spec(const CriticalValueSpec& spec) {
  if (!(spec.alpha > 0.0 && spec.alpha < 0.5)) throw std::invalid_argument("alpha must lie in (0, 0.5)");
  switch (spec.method) {
    case Method::SN2:
    case Method::HybridMB:
    case Method::HybridEB:
      if (!(spec.beta > 0.0 && spec.beta < spec.alpha / 3.0))
        throw std::invalid_argument("beta must lie in (0, alpha/3) for this method");
      break;
    case Method::MB2:
    case Method::EB2:
      if (!(spec.beta > 0.0 && spec.beta < spec.alpha / 2.0))
        throw std::invalid_argument("beta must lie in (0, alpha/2) for this method");
      break;
    default:
      break;
  }
  if (is_bootstrap(spec.method) && spec.replications < 100)
    throw std::invalid_argument("bootstrap needs at least 100 replications");
}

inline Scheme method_scheme(Method m) {
  return (m == Method::EB1 || m == Method::EB2 || m == Method::HybridEB) ? Scheme::EB : Scheme::MB;
}

}  // namespace detail

/// Critical value and selected set for `spec`, using a caller-owned engine so
/// several methods can share bootstrap draws on the same data.
inline double critical_value_for(Method method, const CriticalValueSpec& spec,
                                 const MomentSummary& s, BootstrapCriticalValues* engine,
                                 IndexSet& selected) {
  switch (method) {
    case Method::SN1:
      selected = full_index_set(s.p());
      return sn_one_step(spec.alpha, s.p(), s.n);
    case Method::SN2:
      selected = sn_select(s, spec.beta);
      return sn_two_step_critical(spec.alpha, spec.beta, selected.size(), s.n);
    case Method::MB1:
    case Method::EB1:
      selected = full_index_set(s.p());
      return engine->one_step(spec.alpha);
    case Method::MB2:
    case Method::EB2:
      return engine->two_step(spec.alpha, spec.beta, &selected);
    case Method::HybridMB:
    case Method::HybridEB:
      return engine->hybrid(spec.alpha, spec.beta, &selected);
  }
  throw std::logic_error("unknown method");
}

/// Runs one test: statistic, the method's critical value, and the decision
/// under the zero-variance convention.
inline TestDecision decide(const Eigen::MatrixXd& x, const MomentSummary& s,
                           const CriticalValueSpec& spec, const SeededStream& root,
                           unsigned threads = 1) {
  detail::validate_spec(spec);
  std::optional<BootstrapCriticalValues> engine;
  if (is_bootstrap(spec.method)) {
    const Scheme scheme = detail::method_scheme(spec.method);
    engine.emplace(x, s, scheme, spec.replications, scheme_stream(root, scheme), threads);
  }
  TestDecision d;
  d.method = spec;
  d.critical_value = critical_value_for(spec.method, spec, s, engine ? &*engine : nullptr, d.selected);
  const auto t = test_statistic(s);
  d.statistic = t.value;
  d.degenerate = t.degenerate;
  d.reject = exceeds(s, d.critical_value);
  return d;
}

inline TestDecision run_test(const SampleMatrix& sample, const CriticalValueSpec& spec,
                             unsigned threads = 1) {
  return decide(sample.data(), summarize(sample), spec, SeededStream(spec.seed), threads);
}

}  // namespace manyineq
