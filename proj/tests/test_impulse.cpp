#include <algorithm>
#include <cmath>

#include <gtest/gtest.h>

#include "imap/chain.hpp"
#include "imap/errors.hpp"
#include "imap/impulse.hpp"
#include "imap/levy.hpp"
#include "imap/rng.hpp"
#include "support.hpp"

using namespace imap;
using imap::testing::brownian_params;
using imap::testing::mean_se;
using imap::testing::one_state;
using imap::testing::two_state;

namespace {

JumpLawSet laws_of(JumpDistribution d, int n) {
  JumpLawSet s;
  s.laws.assign(static_cast<std::size_t>(n), d);
  return s;
}

struct Sample {
  ChainPath chain;
  ImpulsePath impulse;
};

Sample draw(const ChainSpec& spec, const JumpLawSet& laws, int order, std::uint64_t seed, double step = 1.0 / 16) {
  Sample s;
  s.chain = simulate_chain(spec, 1.0, stream_seed(seed, Stream::chain));
  CountingSet counts(s.chain, spec);
  s.impulse = simulate_impulse(s.chain, counts, laws, order, make_grid(1.0, step), stream_seed(seed, Stream::impulse));
  return s;
}

}  // namespace

// =============================================================================
// JumpLawSet
// =============================================================================

TEST(JumpLawSet, MomentsAndValidation) {
  JumpLawSet s;
  s.laws = {JumpDistribution::Law(PointMass{2.0}), JumpDistribution::Law(Gaussian{0.0, 1.0})};
  EXPECT_NO_THROW(s.validate(2));
  EXPECT_THROW(s.validate(3), ValidationError);
  EXPECT_EQ(s.moment(0, 3), 8.0);
  EXPECT_EQ(s.moment(1, 4), 3.0);
  EXPECT_THROW(s.moment(2, 1), ValidationError);
}

TEST(SimulateImpulse, RejectsOrderBeyondMoments) {
  const auto spec = two_state(1.0, 1.0);
  auto laws = laws_of(JumpDistribution::Law(Gaussian{}), 2);
  laws.max_moment_order = 2;
  EXPECT_THROW(draw(spec, laws, 3, 1), ValidationError);
}

// =============================================================================
// Catalog reductions
// =============================================================================

TEST(SimulateImpulse, ZeroLawGivesZeroProcesses) {
  const auto spec = two_state(1.0, 1.0);
  const auto s = draw(spec, laws_of(JumpDistribution::Law(PointMass{0.0}), 2), 3, 5);
  for (int i = 0; i < 2; ++i)
    for (int l = 1; l <= 3; ++l)
      for (double v : s.impulse.psi_bar(i, l)) EXPECT_EQ(v, 0.0);
}

TEST(SimulateImpulse, PointMassIsScaledCounting) {
  const auto spec = two_state(1.0, 2.0);
  const double c = -1.7;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const auto s = draw(spec, laws_of(JumpDistribution::Law(PointMass{c}), 2), 2, seed);
    CountingSet counts(s.chain, spec);
    const auto times = s.impulse.grid.times();
    for (int i = 0; i < 2; ++i)
      for (std::size_t g = 0; g < times.size(); ++g) {
        EXPECT_NEAR(s.impulse.psi(i, 1)[g], c * counts.count(i, times[g]), 1e-12);
        EXPECT_NEAR(s.impulse.psi_bar(i, 1)[g], c * counts.compensated(i, times[g]), 1e-12);
      }
  }
}

// (+-1)^2 = 1 collapses the second order onto the counting martingale.
TEST(SimulateImpulse, TwoPointSecondOrderIsCompensatedCount) {
  const auto spec = two_state(1.0, 1.0);
  const auto laws = laws_of(JumpDistribution::Law(TwoPoint{-1.0, 1.0, 0.5}), 2);
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const auto s = draw(spec, laws, 2, seed);
    CountingSet counts(s.chain, spec);
    const auto times = s.impulse.grid.times();
    for (int i = 0; i < 2; ++i)
      for (std::size_t g = 0; g < times.size(); ++g)
        EXPECT_NEAR(s.impulse.psi_bar(i, 2)[g], counts.compensated(i, times[g]), 1e-12);
  }
}

TEST(SimulateImpulse, CompensatedImpulsesAreCentred) {
  const auto spec = two_state(1.0, 3.0);
  JumpLawSet laws;
  laws.laws = {JumpDistribution::Law(TwoPoint{-1.0, 1.0, 0.5}), JumpDistribution::Law(Gaussian{0.5, 1.0})};
  std::vector<std::vector<double>> v(6);
  for (int p = 0; p < 100000; ++p) {
    const auto s = draw(spec, laws, 3, path_seed(9, p), 0.5);
    for (int i = 0; i < 2; ++i)
      for (int l = 1; l <= 3; ++l) v[static_cast<std::size_t>(3 * i + l - 1)].push_back(s.impulse.psi_bar(i, l).back());
  }
  for (std::size_t k = 0; k < v.size(); ++k) {
    const auto r = mean_se(v[k]);
    EXPECT_NEAR(r.mean, 0.0, 4.0 * r.se) << "slot " << k;
  }
}

// =============================================================================
// Pathwise structure
// =============================================================================

TEST(SimulateImpulse, JumpsSitAtEpochsIntoTheirState) {
  ChainSpec spec;
  spec.intensities.resize(3, 3);
  spec.intensities << -2.0, 1.0, 1.0, 1.0, -2.0, 1.0, 1.0, 1.0, -2.0;
  spec.initial_dist = Eigen::Vector3d(1.0, 0.0, 0.0);
  const auto laws = laws_of(JumpDistribution::Law(Uniform{-1.0, 2.0}), 3);
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const auto s = draw(spec, laws, 3, seed);
    std::size_t total = 0;
    for (int i = 0; i < 3; ++i) {
      const auto& js = s.impulse.jumps[static_cast<std::size_t>(i)];
      total += js.size();
      std::vector<double> sums(3, 0.0);
      for (const auto& j : js) {
        const auto it = std::find(s.chain.epochs.begin(), s.chain.epochs.end(), j.time);
        ASSERT_NE(it, s.chain.epochs.end());
        EXPECT_EQ(s.chain.states[static_cast<std::size_t>(it - s.chain.epochs.begin()) + 1], i);
        for (int l = 1; l <= 3; ++l) sums[static_cast<std::size_t>(l - 1)] += std::pow(j.value, l);
      }
      for (int l = 1; l <= 3; ++l)
        EXPECT_NEAR(s.impulse.psi(i, l).back(), sums[static_cast<std::size_t>(l - 1)], 1e-12);
    }
    EXPECT_EQ(total, s.chain.n_epochs());
  }
}

TEST(SimulateImpulse, NoCommonJumpsWithLevyPart) {
  const auto spec = two_state(5.0, 5.0);
  auto params = brownian_params(2);
  params.jump_rate = 5.0;
  params.jump_law = JumpDistribution::Law(Gaussian{});
  for (int p = 0; p < 500; ++p) {
    const auto seed = path_seed(2, p);
    const auto chain = simulate_chain(spec, 1.0, stream_seed(seed, Stream::chain));
    const auto levy = simulate_levy(params, chain, 1.0 / 8, seed);
    for (const auto& j : levy.jumps)
      EXPECT_EQ(std::find(chain.epochs.begin(), chain.epochs.end(), j.time), chain.epochs.end());
  }
}

// =============================================================================
// assemble_X
// =============================================================================

TEST(AssembleX, ZeroImpulsesLeaveXbar) {
  const auto spec = two_state(1.0, 1.0);
  const auto params = brownian_params(2);
  const auto chain = simulate_chain(spec, 1.0, 3);
  CountingSet counts(chain, spec);
  const auto levy = simulate_levy(params, chain, 1.0 / 32, 3);
  const auto imp = simulate_impulse(chain, counts, laws_of(JumpDistribution::Law(PointMass{0.0}), 2), 1,
                                    levy.grid, 3);
  EXPECT_EQ(assemble_X(levy, imp).values, levy.values);
}

TEST(AssembleX, PureImpulseProcess) {
  const auto spec = two_state(2.0, 1.0);
  const auto params = brownian_params(2, 0.0);
  const auto laws = laws_of(JumpDistribution::Law(Gaussian{1.0, 0.5}), 2);
  const auto chain = simulate_chain(spec, 1.0, 8);
  CountingSet counts(chain, spec);
  const auto levy = simulate_levy(params, chain, 1.0 / 32, 8);
  const auto imp = simulate_impulse(chain, counts, laws, 1, levy.grid, 8);
  const auto x = assemble_X(levy, imp);
  for (std::size_t g = 0; g < x.values.size(); ++g)
    EXPECT_DOUBLE_EQ(x.values[g], imp.psi(0, 1)[g] + imp.psi(1, 1)[g]);
}

TEST(AssembleX, RejectsMismatchedChainOrGrid) {
  const auto spec = two_state(1.0, 1.0);
  const auto params = brownian_params(2);
  const auto laws = laws_of(JumpDistribution::Law(PointMass{1.0}), 2);
  const auto a = simulate_chain(spec, 1.0, 1);
  const auto b = simulate_chain(spec, 1.0, 2);
  CountingSet cb(b, spec), ca(a, spec);
  const auto levy = simulate_levy(params, a, 1.0 / 8, 1);
  EXPECT_THROW(assemble_X(levy, simulate_impulse(b, cb, laws, 1, levy.grid, 1)), ValidationError);
  EXPECT_THROW(assemble_X(levy, simulate_impulse(a, ca, laws, 1, make_grid(1.0, 0.25), 1)), ValidationError);
}

// N = 1, gamma = identity, U = 0: X is Levy, so increments over [0, 1/2]
// and [1/2, 1] share a law. Welch z-test on the location at the 1% level.
TEST(AssembleX, LevyCaseHasStationaryIncrements) {
  const auto spec = one_state();
  auto params = brownian_params(1);
  params.mu0(0) = 0.3;
  params.jump_rate = 2.0;
  params.jump_law = JumpDistribution::Law(DoubleExponential{0.3, 2.0, 1.0});
  const auto laws = laws_of(JumpDistribution::Law(PointMass{0.0}), 1);
  std::vector<double> first, second;
  for (int p = 0; p < 20000; ++p) {
    const auto seed = path_seed(4, p);
    const auto chain = simulate_chain(spec, 1.0, seed);
    CountingSet counts(chain, spec);
    const auto levy = simulate_levy(params, chain, 0.5, seed);
    const auto x = assemble_X(levy, simulate_impulse(chain, counts, laws, 1, levy.grid, seed)).values;
    first.push_back(x[1] - x[0]);
    second.push_back(x[2] - x[1]);
  }
  const auto a = mean_se(first), b = mean_se(second);
  const double z = (a.mean - b.mean) / std::hypot(a.se, b.se);
  EXPECT_LT(std::abs(z), 2.576);
}
