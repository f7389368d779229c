// Sample summaries, the max-studentized statistic, and the decision types
// shared by every critical-value procedure.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

namespace manyineq {

/// Malformed or non-finite input data.
class input_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A statistical precondition does not hold (degenerate column where a
/// bootstrap needs a positive variance, p too large for the SN formula, ...).
class precondition_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Sorted column indices, 0-based.
using IndexSet = std::vector<std::size_t>;

inline IndexSet full_index_set(std::size_t p) {
  IndexSet all(p);
  for (std::size_t j = 0; j < p; ++j) all[j] = j;
  return all;
}

/// n x p data matrix; row i is an observation, column j an inequality.
class SampleMatrix {
 public:
  SampleMatrix() = default;

  explicit SampleMatrix(Eigen::MatrixXd data) : data_(std::move(data)) {
    if (data_.rows() < 2) throw input_error("sample needs at least 2 rows");
    if (data_.cols() < 1) throw input_error("sample needs at least 1 column");
    for (Eigen::Index j = 0; j < data_.cols(); ++j)
      for (Eigen::Index i = 0; i < data_.rows(); ++i)
        if (!std::isfinite(data_(i, j)))
          throw input_error("non-finite entry at row " + std::to_string(i + 1) + ", column " +
                            std::to_string(j + 1));
  }

  [[nodiscard]] std::size_t n() const noexcept { return static_cast<std::size_t>(data_.rows()); }
  [[nodiscard]] std::size_t p() const noexcept { return static_cast<std::size_t>(data_.cols()); }
  [[nodiscard]] const Eigen::MatrixXd& data() const noexcept { return data_; }
  [[nodiscard]] double operator()(std::size_t i, std::size_t j) const {
    return data_(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
  }

 private:
  Eigen::MatrixXd data_;
};

/// Per-column sample means and n-divisor standard deviations.
struct MomentSummary {
  std::vector<double> means;
  std::vector<double> sds;
  std::vector<bool> degenerate;
  std::size_t n = 0;

  [[nodiscard]] std::size_t p() const noexcept { return means.size(); }
  [[nodiscard]] bool any_degenerate() const {
    return std::find(degenerate.begin(), degenerate.end(), true) != degenerate.end();
  }
  [[nodiscard]] IndexSet degenerate_columns() const {
    IndexSet out;
    for (std::size_t j = 0; j < degenerate.size(); ++j)
      if (degenerate[j]) out.push_back(j);
    return out;
  }
};

namespace detail {

// Neumaier compensated sum.
class CompensatedSum {
 public:
  void add(double x) noexcept {
    const double t = sum_ + x;
    if (std::fabs(sum_) >= std::fabs(x))
      comp_ += (sum_ - t) + x;
    else
      comp_ += (x - t) + sum_;
    sum_ = t;
  }
  [[nodiscard]] double value() const noexcept { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

inline double column_mean(const double* col, std::size_t n) {
  CompensatedSum s;
  bool constant = true;
  for (std::size_t i = 0; i < n; ++i) {
    s.add(col[i]);
    constant = constant && col[i] == col[0];
  }
  // A constant column must come out with an exact mean and a zero sd.
  return constant ? col[0] : s.value() / static_cast<double>(n);
}

// sqrt(E_n[(x - center)^2]).
inline double column_sd(const double* col, std::size_t n, double center) {
  CompensatedSum sq;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = col[i] - center;
    sq.add(d * d);
  }
  return std::sqrt(sq.value() / static_cast<double>(n));
}

}  // namespace detail

/// Summary around externally supplied centers: sds[j]^2 = E_n[(X_ij - centers[j])^2].
inline MomentSummary summarize_about(const Eigen::MatrixXd& x, const std::vector<double>& centers) {
  const auto n = static_cast<std::size_t>(x.rows());
  const auto p = static_cast<std::size_t>(x.cols());
  if (centers.size() != p) throw input_error("center vector length does not match column count");
  MomentSummary s;
  s.n = n;
  s.means = centers;
  s.sds.resize(p);
  s.degenerate.resize(p);
  for (std::size_t j = 0; j < p; ++j) {
    s.sds[j] = detail::column_sd(x.col(static_cast<Eigen::Index>(j)).data(), n, centers[j]);
    s.degenerate[j] = (s.sds[j] == 0.0);
  }
  return s;
}

/// Column means and n-divisor standard deviations.
inline MomentSummary summarize(const SampleMatrix& sample) {
  const auto& x = sample.data();
  std::vector<double> means(sample.p());
  for (std::size_t j = 0; j < sample.p(); ++j)
    means[j] = detail::column_mean(x.col(static_cast<Eigen::Index>(j)).data(), sample.n());
  return summarize_about(x, means);
}

/// sqrt(n) * mean / sd per column; std::nullopt for degenerate columns.
inline std::vector<std::optional<double>> studentized_scores(const MomentSummary& s) {
  const double rn = std::sqrt(static_cast<double>(s.n));
  std::vector<std::optional<double>> out(s.p());
  for (std::size_t j = 0; j < s.p(); ++j)
    if (!s.degenerate[j]) out[j] = rn * s.means[j] / s.sds[j];
  return out;
}

/// Value of the max-studentized statistic. When some column is degenerate the
/// statistic is undefined; `value` then covers the regular columns only and
/// the decision must go through exceeds().
struct TestStatistic {
  double value = -std::numeric_limits<double>::infinity();
  std::optional<std::size_t> argmax;  // lowest index attaining the max
  IndexSet degenerate;

  [[nodiscard]] bool is_degenerate() const noexcept { return !degenerate.empty(); }
};

inline TestStatistic test_statistic(const MomentSummary& s, const IndexSet& columns) {
  TestStatistic t;
  const double rn = std::sqrt(static_cast<double>(s.n));
  for (std::size_t j : columns) {
    if (s.degenerate[j]) {
      t.degenerate.push_back(j);
      continue;
    }
    const double score = rn * s.means[j] / s.sds[j];
    if (!t.argmax || score > t.value) {
      t.value = score;
      t.argmax = j;
    }
  }
  return t;
}

inline TestStatistic test_statistic(const MomentSummary& s) {
  return test_statistic(s, full_index_set(s.p()));
}

/// True iff sqrt(n) * mean_j > c * sd_j for some j in `columns`. For regular
/// columns this is score_j > c; a degenerate column exceeds iff its mean is
/// positive.
inline bool exceeds(const MomentSummary& s, double c, const IndexSet& columns) {
  if (!std::isfinite(c)) throw std::invalid_argument("exceeds: critical value must be finite");
  const double rn = std::sqrt(static_cast<double>(s.n));
  for (std::size_t j : columns) {
    // Regular columns compare the same score test_statistic reports.
    const bool hit = s.degenerate[j] ? s.means[j] > 0.0 : rn * s.means[j] / s.sds[j] > c;
    if (hit) return true;
  }
  return false;
}

inline bool exceeds(const MomentSummary& s, double c) {
  return exceeds(s, c, full_index_set(s.p()));
}

/// In-sample plug-in analogues of M_{n,3}, M_{n,4} and B_n.
struct RegularityDiagnostics {
  double m3 = 1.0;
  double m4 = 1.0;
  double bn = 1.0;
};

inline RegularityDiagnostics regularity_diagnostics(const SampleMatrix& sample) {
  const auto s = summarize(sample);
  if (s.any_degenerate())
    throw precondition_error("regularity diagnostics undefined: column " +
                             std::to_string(s.degenerate_columns().front() + 1) +
                             " has zero variance");
  const std::size_t n = sample.n(), p = sample.p();
  const double nn = static_cast<double>(n);
  std::vector<double> row_max4(n, 0.0);
  RegularityDiagnostics d{0.0, 0.0, 0.0};
  for (std::size_t j = 0; j < p; ++j) {
    detail::CompensatedSum a3, a4;
    for (std::size_t i = 0; i < n; ++i) {
      const double z = (sample(i, j) - s.means[j]) / s.sds[j];
      const double z2 = z * z;
      a3.add(z2 * std::fabs(z));
      a4.add(z2 * z2);
      row_max4[i] = std::max(row_max4[i], z2 * z2);
    }
    d.m3 = std::max(d.m3, std::cbrt(a3.value() / nn));
    d.m4 = std::max(d.m4, std::sqrt(std::sqrt(a4.value() / nn)));
  }
  detail::CompensatedSum b;
  for (double v : row_max4) b.add(v);
  d.bn = std::sqrt(std::sqrt(b.value() / nn));
  return d;
}

// ---------------------------------------------------------------------------
// Critical-value method selection and decisions.

enum class Method { SN1, SN2, MB1, MB2, EB1, EB2, HybridMB, HybridEB };

inline constexpr std::string_view method_name(Method m) {
  switch (m) {
    case Method::SN1: return "sn1";
    case Method::SN2: return "sn2";
    case Method::MB1: return "mb1";
    case Method::MB2: return "mb2";
    case Method::EB1: return "eb1";
    case Method::EB2: return "eb2";
    case Method::HybridMB: return "hyb-mb";
    case Method::HybridEB: return "hyb-eb";
  }
  return "?";
}

inline std::optional<Method> parse_method(std::string_view name) {
  for (Method m : {Method::SN1, Method::SN2, Method::MB1, Method::MB2, Method::EB1, Method::EB2,
                   Method::HybridMB, Method::HybridEB})
    if (method_name(m) == name) return m;
  return std::nullopt;
}

inline constexpr bool is_bootstrap(Method m) { return m != Method::SN1 && m != Method::SN2; }

struct CriticalValueSpec {
  Method method = Method::SN1;
  double alpha = 0.05;
  double beta = 0.001;
  std::size_t replications = 1000;
  std::uint64_t seed = 0;
};

struct TestDecision {
  double statistic = 0.0;       // max over regular columns of the relevant statistic
  double critical_value = 0.0;
  bool reject = false;
  IndexSet selected;            // columns entering the critical value
  IndexSet degenerate;          // zero-variance columns, if any
  CriticalValueSpec method;
  std::optional<RegularityDiagnostics> diagnostics;
};

}  // namespace manyineq
