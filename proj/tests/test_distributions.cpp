#include <cmath>
#include <numbers>

#include <gtest/gtest.h>

#include "imap/distributions.hpp"
#include "imap/errors.hpp"
#include "imap/rng.hpp"
#include "support.hpp"

using namespace imap;
using imap::testing::mean_se;
using imap::testing::simpson;

namespace {

double gauss_pdf(double x, double m, double s) {
  const double z = (x - m) / s;
  return std::exp(-0.5 * z * z) / (s * std::sqrt(2.0 * std::numbers::pi));
}

}  // namespace

TEST(Rng, StandardNormalMoments) {
  auto eng = make_engine(1);
  std::vector<double> x, x2;
  for (int k = 0; k < 200000; ++k) {
    const double z = standard_normal(eng);
    x.push_back(z);
    x2.push_back(z * z);
  }
  const auto m = mean_se(x), v = mean_se(x2);
  EXPECT_NEAR(m.mean, 0.0, 4.0 * m.se);
  EXPECT_NEAR(v.mean, 1.0, 4.0 * v.se);
}

TEST(Rng, UniformOpenNeverHitsEndpoints) {
  auto eng = make_engine(2);
  for (int k = 0; k < 100000; ++k) {
    const double u = uniform_open(eng);
    ASSERT_GT(u, 0.0);
    ASSERT_LT(u, 1.0);
  }
}

TEST(Rng, PathSeedsAreDistinct) {
  EXPECT_NE(path_seed(1, 0), path_seed(1, 1));
  EXPECT_NE(path_seed(1, 0), path_seed(2, 0));
  EXPECT_NE(stream_seed(5, Stream::chain), stream_seed(5, Stream::impulse));
}

// =============================================================================
// Closed-form moments against quadrature
// =============================================================================

TEST(Distributions, PointMassAndTwoPointMomentsByEnumeration) {
  const JumpDistribution pm = PointMass{1.5};
  const JumpDistribution tp = TwoPoint{-1.0, 2.0, 0.25};
  for (int k = 0; k <= 8; ++k) {
    EXPECT_DOUBLE_EQ(pm.moment(k), std::pow(1.5, k));
    EXPECT_NEAR(tp.moment(k), 0.25 * std::pow(-1.0, k) + 0.75 * std::pow(2.0, k), 1e-12);
  }
}

TEST(Distributions, GaussianMomentsMatchQuadrature) {
  const JumpDistribution d = Gaussian{0.3, 0.7};
  for (int k = 0; k <= 8; ++k) {
    const double q = simpson([&](double x) { return std::pow(x, k) * gauss_pdf(x, 0.3, 0.7); }, 0.3 - 14 * 0.7,
                             0.3 + 14 * 0.7, 20000);
    EXPECT_NEAR(d.moment(k), q, 1e-9 * std::max(1.0, std::abs(q))) << "k=" << k;
  }
}

TEST(Distributions, UniformMomentsMatchQuadrature) {
  const JumpDistribution d = Uniform{-0.5, 2.0};
  for (int k = 0; k <= 8; ++k) {
    const double q = simpson([&](double x) { return std::pow(x, k) / 2.5; }, -0.5, 2.0, 2000);
    EXPECT_NEAR(d.moment(k), q, 1e-10 * std::max(1.0, std::abs(q)));
  }
}

TEST(Distributions, DoubleExponentialMomentsMatchQuadrature) {
  const double p = 0.4, eu = 3.0, ed = 2.0;
  const JumpDistribution d = DoubleExponential{p, eu, ed};
  for (int k = 0; k <= 8; ++k) {
    const double up = simpson([&](double x) { return std::pow(x, k) * p * eu * std::exp(-eu * x); }, 0.0, 40.0, 40000);
    const double dn =
        simpson([&](double x) { return std::pow(-x, k) * (1 - p) * ed * std::exp(-ed * x); }, 0.0, 60.0, 60000);
    EXPECT_NEAR(d.moment(k), up + dn, 1e-8 * std::max(1.0, std::abs(up + dn))) << "k=" << k;
  }
}

TEST(Distributions, SampleMeansMatchMoments) {
  const std::vector<JumpDistribution> laws = {PointMass{0.5}, TwoPoint{-1.0, 1.0, 0.3}, Gaussian{0.2, 1.1},
                                              Uniform{-1.0, 3.0}, DoubleExponential{0.6, 2.0, 4.0}};
  for (const auto& d : laws) {
    auto eng = make_engine(77);
    std::vector<double> x, x2;
    for (int k = 0; k < 100000; ++k) {
      const double v = d.sample(eng);
      x.push_back(v);
      x2.push_back(v * v);
    }
    const auto m = mean_se(x), s = mean_se(x2);
    EXPECT_NEAR(m.mean, d.moment(1), 4.0 * m.se + 1e-12) << d.name();
    EXPECT_NEAR(s.mean, d.moment(2), 4.0 * s.se + 1e-12) << d.name();
  }
}

TEST(Distributions, ExponentialMomentVerdicts) {
  const JumpDistribution g = Gaussian{0.0, 1.0};
  const JumpDistribution de = DoubleExponential{0.5, 2.0, 3.0};
  EXPECT_TRUE(g.exponential_moment_finite(5.0, 1));
  EXPECT_FALSE(g.exponential_moment_finite(0.1, 3));
  EXPECT_TRUE(de.exponential_moment_finite(1.9, 1));
  EXPECT_FALSE(de.exponential_moment_finite(2.1, 1));
  EXPECT_TRUE(JumpDistribution(Uniform{-1.0, 1.0}).exponential_moment_finite(100.0, 3));
}

TEST(Distributions, RejectsMalformedParameters) {
  EXPECT_THROW(JumpDistribution(TwoPoint{0.0, 1.0, 1.5}), ValidationError);
  EXPECT_THROW(JumpDistribution(Gaussian{0.0, -1.0}), ValidationError);
  EXPECT_THROW(JumpDistribution(Uniform{1.0, 1.0}), ValidationError);
  EXPECT_THROW(JumpDistribution(DoubleExponential{0.5, 0.0, 1.0}), ValidationError);
  EXPECT_THROW(JumpDistribution(PointMass{1.0}).moment(-1), ValidationError);
}
