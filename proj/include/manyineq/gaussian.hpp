// Standard normal distribution function, quantile function, and reproducible
// counter-based random streams.
//
// Every random quantity in the library is drawn from a SeededStream. A stream
// is identified by a master seed and a path of (label, index) pairs; its
// output depends on nothing else, so sibling paths can be consumed from any
// thread in any order and still reproduce bit for bit.
#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace manyineq {

/// Standard normal distribution function.
inline double normal_cdf(double x) {
  return 0.5 * std::erfc(-x * std::numbers::sqrt2 * 0.5);
}

/// Standard normal density.
inline double normal_pdf(double x) {
  constexpr double inv_sqrt_2pi = 0.3989422804014326779399461;
  return inv_sqrt_2pi * std::exp(-0.5 * x * x);
}

namespace detail {

template <std::size_t N>
constexpr double horner(const std::array<double, N>& c, double x) {
  double acc = c[N - 1];
  for (std::size_t k = N - 1; k-- > 0;) acc = acc * x + c[k];
  return acc;
}

// Wichura's AS241 (PPND16) rational approximations, coefficients in
// ascending powers. Relative accuracy is about 1e-16 over (0, 1).
inline constexpr std::array<double, 8> kCentralNum = {
    3.3871328727963666080e0, 1.3314166789178437745e+2,
    1.9715909503065514427e+3, 1.3731693765509461125e+4,
    4.5921953931549871457e+4, 6.7265770927008700853e+4,
    3.3430575583588128105e+4, 2.5090809287301226727e+3};
inline constexpr std::array<double, 8> kCentralDen = {
    1.0, 4.2313330701600911252e+1,
    6.8718700749205790830e+2, 5.3941960214247511077e+3,
    2.1213794301586595867e+4, 3.9307895800092710610e+4,
    2.8729085735721942674e+4, 5.2264952788528545610e+3};
inline constexpr std::array<double, 8> kNearNum = {
    1.42343711074968357734e0, 4.63033784615654529590e0,
    5.76949722146069140550e0, 3.64784832476320460504e0,
    1.27045825245236838258e0, 2.41780725177450611770e-1,
    2.27238449892691845833e-2, 7.74545014278341407640e-4};
inline constexpr std::array<double, 8> kNearDen = {
    1.0, 2.05319162663775882187e0,
    1.67638483018380384940e0, 6.89767334985100004550e-1,
    1.48103976427480074590e-1, 1.51986665636164571966e-2,
    5.47593808499534494600e-4, 1.05075007164441684324e-9};
inline constexpr std::array<double, 8> kFarNum = {
    6.65790464350110377720e0, 5.46378491116411436990e0,
    1.78482653991729133580e0, 2.96560571828504891230e-1,
    2.65321895265761230930e-2, 1.24266094738807843860e-3,
    2.71155556874348757815e-5, 2.01033439929228813265e-7};
inline constexpr std::array<double, 8> kFarDen = {
    1.0, 5.99832206555887937690e-1,
    1.36929880922735805310e-1, 1.48753612908506148525e-2,
    7.86869131145613259100e-4, 1.84631831751005468180e-5,
    1.42151175831644588870e-7, 2.04426310338993978564e-15};

// Rational approximation only; u must lie in (0, 1).
inline double normal_quantile_approx(double u) {
  const double q = u - 0.5;
  if (std::fabs(q) <= 0.425) {
    const double r = 0.180625 - q * q;
    return q * horner(kCentralNum, r) / horner(kCentralDen, r);
  }
  double r = std::sqrt(-std::log(q < 0.0 ? u : 1.0 - u));
  double x;
  if (r <= 5.0) {
    r -= 1.6;
    x = horner(kNearNum, r) / horner(kNearDen, r);
  } else {
    r -= 5.0;
    x = horner(kFarNum, r) / horner(kFarDen, r);
  }
  return q < 0.0 ? -x : x;
}

}  // namespace detail

/// Standard normal quantile function. Rational approximation followed by one
/// Newton step against normal_cdf, evaluated in the smaller tail.
///
/// Throws std::domain_error unless 0 < u < 1.
inline double normal_quantile(double u) {
  if (!(u > 0.0 && u < 1.0))
    throw std::domain_error("normal_quantile: argument must lie in (0, 1)");
  double x = detail::normal_quantile_approx(u);
  const double dens = normal_pdf(x);
  if (dens > 0.0) {
    // Residual in the tail that holds the most relative precision.
    const double resid = (u <= 0.5)
                             ? normal_cdf(x) - u
                             : (1.0 - u) - 0.5 * std::erfc(x * std::numbers::sqrt2 * 0.5);
    x += (u <= 0.5 ? -resid : resid) / dens;
  }
  return x;
}

// ---------------------------------------------------------------------------
// Philox4x32-10 counter-based generator.

namespace detail {

using philox_ctr = std::array<std::uint32_t, 4>;
using philox_key = std::array<std::uint32_t, 2>;

inline philox_ctr philox4x32_10(philox_ctr ctr, philox_key key) {
  constexpr std::uint32_t m0 = 0xD2511F53u, m1 = 0xCD9E8D57u;
  constexpr std::uint32_t w0 = 0x9E3779B9u, w1 = 0xBB67AE85u;
  for (int round = 0; round < 10; ++round) {
    if (round > 0) {
      key[0] += w0;
      key[1] += w1;
    }
    const std::uint64_t p0 = static_cast<std::uint64_t>(m0) * ctr[0];
    const std::uint64_t p1 = static_cast<std::uint64_t>(m1) * ctr[2];
    const auto hi0 = static_cast<std::uint32_t>(p0 >> 32), lo0 = static_cast<std::uint32_t>(p0);
    const auto hi1 = static_cast<std::uint32_t>(p1 >> 32), lo1 = static_cast<std::uint32_t>(p1);
    ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
  }
  return ctr;
}

inline constexpr std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

inline constexpr std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xCBF29CE484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001B3ull;
  }
  return h;
}

}  // namespace detail

/// Sequential view of one Philox stream. Satisfies UniformRandomBitGenerator.
class CounterRng {
 public:
  using result_type = std::uint64_t;

  explicit CounterRng(std::uint64_t key) noexcept
      : key_{static_cast<std::uint32_t>(key), static_cast<std::uint32_t>(key >> 32)} {}

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return ~result_type{0}; }

  result_type operator()() noexcept {
    if (used_ == 2) refill();
    return buffer_[used_++];
  }

  /// Uniform on the open interval (0, 1), 53 bits of resolution.
  double uniform01() noexcept {
    return static_cast<double>((*this)() >> 11) * 0x1.0p-53 + 0x1.0p-54;
  }

  /// Uniform on {0, ..., bound-1}; unbiased multiply-and-reject.
  std::uint64_t uniform_index(std::uint64_t bound) noexcept {
    unsigned __int128 m = static_cast<unsigned __int128>((*this)()) * bound;
    auto low = static_cast<std::uint64_t>(m);
    if (low < bound) {
      const std::uint64_t threshold = (0 - bound) % bound;
      while (low < threshold) {
        m = static_cast<unsigned __int128>((*this)()) * bound;
        low = static_cast<std::uint64_t>(m);
      }
    }
    return static_cast<std::uint64_t>(m >> 64);
  }

  /// N(0,1) by inversion of a uniform draw.
  double standard_normal() noexcept {
    return detail::normal_quantile_approx(uniform01());
  }

 private:
  void refill() noexcept {
    const detail::philox_ctr ctr{static_cast<std::uint32_t>(block_),
                                 static_cast<std::uint32_t>(block_ >> 32), 0u, 0u};
    const auto out = detail::philox4x32_10(ctr, key_);
    buffer_[0] = (static_cast<std::uint64_t>(out[1]) << 32) | out[0];
    buffer_[1] = (static_cast<std::uint64_t>(out[3]) << 32) | out[2];
    ++block_;
    used_ = 0;
  }

  detail::philox_key key_;
  std::uint64_t block_ = 0;
  std::array<std::uint64_t, 2> buffer_{};
  int used_ = 2;
};

/// Identifies a reproducible random substream: a master seed plus a path of
/// (label, index) pairs. Cheap to copy; derive children instead of sharing.
class SeededStream {
 public:
  struct PathElement {
    std::string label;
    std::uint64_t index = 0;
    bool operator==(const PathElement&) const = default;
  };

  explicit SeededStream(std::uint64_t master_seed = 0)
      : master_seed_(master_seed), key_(detail::mix64(master_seed ^ 0x6A09E667F3BCC908ull)) {}

  [[nodiscard]] SeededStream child(std::string label, std::uint64_t index = 0) const {
    SeededStream s = *this;
    s.key_ = detail::mix64(s.key_ ^ detail::fnv1a(label));
    s.key_ = detail::mix64(s.key_ + 0x9E3779B97F4A7C15ull * (index + 1));
    s.path_.push_back({std::move(label), index});
    return s;
  }

  [[nodiscard]] CounterRng rng() const noexcept { return CounterRng(key_); }

  [[nodiscard]] std::uint64_t master_seed() const noexcept { return master_seed_; }
  [[nodiscard]] const std::vector<PathElement>& path() const noexcept { return path_; }
  [[nodiscard]] std::uint64_t key() const noexcept { return key_; }

  bool operator==(const SeededStream& other) const {
    return master_seed_ == other.master_seed_ && path_ == other.path_;
  }

 private:
  std::uint64_t master_seed_;
  std::uint64_t key_;
  std::vector<PathElement> path_;
};

/// `count` i.i.d. N(0,1) draws, fully determined by the stream identity.
inline std::vector<double> standard_normal_draws(const SeededStream& stream, std::size_t count) {
  if (count == 0) throw std::invalid_argument("standard_normal_draws: count must be positive");
  auto rng = stream.rng();
  std::vector<double> out(count);
  for (auto& v : out) v = rng.standard_normal();
  return out;
}

}  // namespace manyineq
