#include <gtest/gtest.h>

#include <cmath>

#include "manyineq/simulate.hpp"

using namespace manyineq;

namespace {

Eigen::MatrixXd sigma_of(std::size_t p, double rho, Structure s) {
  Eigen::MatrixXd m(p, p);
  for (std::size_t j = 0; j < p; ++j)
    for (std::size_t k = 0; k < p; ++k)
      m(j, k) = j == k ? 1.0 : (s == Structure::EQUI ? rho : std::pow(rho, std::abs(int(j) - int(k))));
  return m;
}

Eigen::MatrixXd correlation(const Eigen::MatrixXd& x) {
  Eigen::MatrixXd c = x.rowwise() - x.colwise().mean();
  Eigen::MatrixXd cov = c.transpose() * c / static_cast<double>(x.rows());
  Eigen::VectorXd d = cov.diagonal().cwiseSqrt().cwiseInverse();
  return d.asDiagonal() * cov * d.asDiagonal();
}

}  // namespace

TEST(CovarianceFactor, IdentityAtZeroCorrelation) {
  for (Structure s : {Structure::EQUI, Structure::AR})
    EXPECT_EQ(covariance_factor(7, 0.0, s), Eigen::MatrixXd::Identity(7, 7));
}

TEST(CovarianceFactor, SmallCases) {
  const auto A = covariance_factor(2, 0.5, Structure::EQUI);
  const Eigen::MatrixXd s = A.transpose() * A;
  EXPECT_NEAR(s(0, 0), 1.0, 1e-12);
  EXPECT_NEAR(s(0, 1), 0.5, 1e-12);
  EXPECT_NEAR(s(1, 1), 1.0, 1e-12);
  const auto L = covariance_factor(3, 0.9, Structure::AR);
  EXPECT_NEAR((L.transpose() * L)(0, 2), 0.81, 1e-12);
}

TEST(CovarianceFactor, ReconstructsSigma) {
  for (Structure s : {Structure::EQUI, Structure::AR})
    for (std::size_t p : {1u, 2u, 5u, 50u, 300u})
      for (double rho : {0.0, 0.3, 0.5, 0.9, 0.99}) {
        const auto A = covariance_factor(p, rho, s);
        const Eigen::MatrixXd diff = A.transpose() * A - sigma_of(p, rho, s);
        EXPECT_LE(diff.cwiseAbs().maxCoeff(), 1e-10) << p << " " << rho;
      }
  EXPECT_THROW(covariance_factor(3, 1.0, Structure::AR), std::invalid_argument);
  EXPECT_THROW(covariance_factor(3, -0.1, Structure::EQUI), std::invalid_argument);
}

TEST(DesignSpec, MeanVectors) {
  DesignSpec d;
  d.p = 200;
  for (int k = 1; k <= 8; ++k) {
    d.design = k;
    const auto mu = d.mean_vector();
    const double head = (k <= 4) ? 0.0 : 0.05;
    const double tail = (k == 2 || k == 4) ? -0.8 : (k == 6 || k == 8) ? -0.75 : head;
    for (std::size_t j = 0; j < 200; ++j) EXPECT_EQ(mu[j], j < 20 ? head : tail) << k << " " << j;
    EXPECT_EQ(d.structure(), (k == 3 || k == 4 || k == 7 || k == 8) ? Structure::AR : Structure::EQUI);
  }
  d.design = 9;
  EXPECT_THROW(d.validate(), std::invalid_argument);
}

TEST(DrawSample, MatchesFactorApplication) {
  // Replaying the innovation stream and applying A^T directly gives the same rows.
  for (Structure st : {Structure::EQUI, Structure::AR})
    for (Dist dist : {Dist::T4, Dist::UNIFORM, Dist::GAUSSIAN}) {
      const DataModel model{30, 12, 0.7, st, dist, std::vector<double>(12, 0.25)};
      const auto stream = SeededStream(5).child("x");
      const auto x = draw_sample(model, stream);
      const auto A = covariance_factor(12, 0.7, st);
      auto rng = stream.child("data").rng();
      for (Eigen::Index i = 0; i < 30; ++i) {
        Eigen::VectorXd e(12);
        for (Eigen::Index j = 0; j < 12; ++j) e(j) = detail::innovation(rng, dist);
        const Eigen::VectorXd row = (A.transpose() * e).array() + 0.25;
        EXPECT_LE((x.data().row(i).transpose() - row).cwiseAbs().maxCoeff(), 1e-12);
      }
    }
}

TEST(DrawSample, MomentsForDesignOne) {
  for (Dist dist : {Dist::T4, Dist::UNIFORM, Dist::GAUSSIAN}) {
    DesignSpec d{1, 100'000, 4, 0.0, dist};
    const auto x = draw_sample(d, SeededStream(7));
    const auto s = summarize(x);
    for (std::size_t j = 0; j < 4; ++j) {
      EXPECT_LT(std::fabs(s.means[j]), 4.0 / std::sqrt(1e5)) << dist_name(dist);
      EXPECT_NEAR(s.sds[j] * s.sds[j], 1.0, 0.1) << dist_name(dist);
    }
  }
}

TEST(DrawSample, EquicorrelatedCorrelations) {
  const DesignSpec d{1, 20'000, 6, 0.9, Dist::UNIFORM};
  const auto c = correlation(draw_sample(d, SeededStream(8)).data());
  for (int j = 0; j < 6; ++j)
    for (int k = 0; k < j; ++k) EXPECT_NEAR(c(j, k), 0.9, 0.05);
  const DesignSpec ar{3, 20'000, 4, 0.5, Dist::T4};
  const auto ca = correlation(draw_sample(ar, SeededStream(9)).data());
  EXPECT_NEAR(ca(0, 1), 0.5, 0.05);
  EXPECT_NEAR(ca(0, 2), 0.25, 0.05);
}

TEST(DrawSample, UnitVarianceInnovations) {
  for (Dist dist : {Dist::T4, Dist::UNIFORM, Dist::GAUSSIAN}) {
    auto rng = SeededStream(10).child(std::string(dist_name(dist))).rng();
    detail::CompensatedSum s, s2;
    for (int k = 0; k < 1'000'000; ++k) {
      const double e = detail::innovation(rng, dist);
      s.add(e);
      s2.add(e * e);
    }
    const double m = s.value() / 1e6;
    EXPECT_NEAR(s2.value() / 1e6 - m * m, 1.0, 0.01) << dist_name(dist);
  }
}

TEST(DrawSample, Deterministic) {
  const DesignSpec d{8, 50, 30, 0.5, Dist::T4};
  EXPECT_EQ(draw_sample(d, SeededStream(11)).data(), draw_sample(d, SeededStream(11)).data());
  EXPECT_NE(draw_sample(d, SeededStream(11)).data(), draw_sample(d, SeededStream(12)).data());
}

TEST(RunMc, ReplicationMatchesStandaloneDecision) {
  const DesignSpec d{2, 100, 20, 0.0, Dist::T4};
  McConfig mc;
  mc.sims = 5;
  mc.bootstrap_reps = 200;
  mc.methods = {Method::SN1, Method::SN2, Method::MB1, Method::MB2, Method::EB1, Method::EB2, Method::HybridMB,
                Method::HybridEB};
  mc.seed = 13;
  for (std::size_t k = 0; k < mc.sims; ++k) {
    const auto dec = mc_replication(model_of(d), mc, k);
    const auto rep = SeededStream(13).child("mc", k);
    const auto x = draw_sample(d, rep);
    for (std::size_t m = 0; m < mc.methods.size(); ++m) {
      const auto single = decide(x.data(), summarize(x), mc.spec_for(mc.methods[m]), rep.child("bootstrap"));
      EXPECT_EQ(dec[m], single.reject) << method_name(mc.methods[m]);
    }
  }
}

TEST(RunMc, ThreadCountAndOrderIndependence) {
  const DesignSpec d{1, 100, 30, 0.5, Dist::UNIFORM};
  McConfig mc;
  mc.sims = 40;
  mc.bootstrap_reps = 200;
  mc.seed = 14;
  const auto a = run_mc(d, mc);
  mc.threads = 4;
  const auto b = run_mc(d, mc);
  std::vector<std::size_t> reversed(mc.methods.size(), 0);
  for (std::size_t k = mc.sims; k-- > 0;) {
    const auto dec = mc_replication(model_of(d), mc, k);
    for (std::size_t m = 0; m < dec.size(); ++m) reversed[m] += dec[m];
  }
  for (std::size_t m = 0; m < mc.methods.size(); ++m) {
    EXPECT_EQ(a.rates[m].rejections, b.rates[m].rejections);
    EXPECT_EQ(a.rates[m].rejections, reversed[m]);
    EXPECT_GE(a.rates[m].rate(), 0.0);
    EXPECT_LE(a.rates[m].rate(), 1.0);
  }
}

TEST(RunMc, StandardError) {
  MethodRate r{Method::SN1, 47, 1000};
  EXPECT_DOUBLE_EQ(r.rate(), 0.047);
  EXPECT_DOUBLE_EQ(r.se(), std::sqrt(0.047 * 0.953 / 1000));
  EXPECT_EQ((MethodRate{Method::SN1, 0, 10}).se(), 0.0);
}

TEST(RunMc, Validation) {
  McConfig mc;
  mc.sims = 0;
  EXPECT_THROW(run_mc(DesignSpec{}, mc), std::invalid_argument);
  mc.sims = 1;
  mc.methods = {};
  EXPECT_THROW(run_mc(DesignSpec{}, mc), std::invalid_argument);
  mc.methods = {Method::MB2};
  mc.beta = 0.03;
  EXPECT_THROW(run_mc(DesignSpec{}, mc), std::invalid_argument);
}

TEST(RunMc, SizeEnvelopeAtDeskScale) {
  for (int design : {1, 3}) {
    const DesignSpec d{design, 200, 50, 0.5, Dist::T4};
    McConfig mc;
    mc.sims = 300;
    mc.bootstrap_reps = 300;
    mc.seed = 15;
    const auto res = run_mc(d, mc);
    for (const auto& r : res.rates) EXPECT_LE(r.rate(), mc.alpha + 0.03) << design << " " << method_name(r.method);
  }
}

TEST(PowerSweep, NondecreasingInR) {
  McConfig mc;
  mc.sims = 200;
  mc.bootstrap_reps = 200;
  mc.methods = {Method::SN1, Method::MB1};
  mc.seed = 16;
  const auto curve = power_sweep(200, 20, 0.0, {0.0, 0.05, 0.1, 0.15, 0.2, 0.3}, mc);
  ASSERT_EQ(curve.size(), 6u);
  for (std::size_t m = 0; m < 2; ++m) {
    EXPECT_LE(curve[0].result.rates[m].rate(), 0.1);
    EXPECT_GE(curve[5].result.rates[m].rate(), 0.95);
    for (std::size_t k = 1; k < curve.size(); ++k) {
      const auto& lo = curve[k - 1].result.rates[m];
      const auto& hi = curve[k].result.rates[m];
      EXPECT_GE(hi.rate() + 2.0 * std::max(hi.se(), lo.se()), lo.rate());
    }
  }
  EXPECT_THROW(power_sweep(200, 20, 0.0, {-0.1}, mc), std::invalid_argument);
}
