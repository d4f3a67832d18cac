#include <cmath>

#include <gtest/gtest.h>

#include "imap/chain.hpp"
#include "imap/errors.hpp"
#include "imap/impulse.hpp"
#include "imap/levy.hpp"
#include "imap/ortho.hpp"
#include "imap/rng.hpp"
#include "support.hpp"

using namespace imap;
using imap::testing::brownian_params;
using imap::testing::one_state;
using imap::testing::two_state;

namespace {

JumpLawSet laws_of(JumpDistribution d, int n) {
  JumpLawSet s;
  s.laws.assign(static_cast<std::size_t>(n), d);
  return s;
}

GramMatrix gram_of(Eigen::MatrixXd m, GramKind kind = GramKind::impulse) {
  GramMatrix g;
  g.kind = kind;
  g.entries = std::move(m);
  return g;
}

// Coefficients over {1, y, y^2, ...} of He_n((y - m) / s) / sqrt(n!), built
// from the three-term recursion He_{n+1} = x He_n - n He_{n-1}.
Eigen::MatrixXd hermite_rows(int d, double m, double s) {
  Eigen::MatrixXd he = Eigen::MatrixXd::Zero(d, d);  // over powers of x
  he(0, 0) = 1.0;
  if (d > 1) he(1, 1) = 1.0;
  for (int n = 1; n + 1 < d; ++n) {
    for (int k = 1; k < d; ++k) he(n + 1, k) += he(n, k - 1);
    he.row(n + 1) -= n * he.row(n - 1);
  }
  // x = (y - m) / s, expand x^k binomially in y
  Eigen::MatrixXd to_y = Eigen::MatrixXd::Zero(d, d);
  for (int k = 0; k < d; ++k)
    for (int r = 0; r <= k; ++r)
      to_y(k, r) = std::tgamma(k + 1) / (std::tgamma(r + 1) * std::tgamma(k - r + 1)) * std::pow(-m, k - r) /
                   std::pow(s, k);
  Eigen::MatrixXd out = he * to_y;
  for (int n = 0; n < d; ++n) out.row(n) /= std::sqrt(std::tgamma(n + 1));
  return out;
}

}  // namespace

// =============================================================================
// Gram matrices
// =============================================================================

TEST(ImpulseGram, PointMassIsRankOne) {
  const auto spec = two_state(1.0, 1.0);
  const auto g = impulse_gram(laws_of(JumpDistribution::Law(PointMass{2.0}), 2), spec, 0, 2);
  Eigen::Matrix2d expected;
  expected << 1.0, 2.0, 2.0, 4.0;
  EXPECT_TRUE(g.entries.isApprox(0.5 * expected, 1e-12));
  EXPECT_NEAR(g.entries.determinant(), 0.0, 1e-12);
}

TEST(ImpulseGram, TwoPointAndGaussianEntries) {
  const auto spec = two_state(1.0, 1.0);
  Eigen::Matrix3d tp, ga;
  tp << 1, 0, 1, 0, 1, 0, 1, 0, 1;
  ga << 1, 0, 1, 0, 1, 0, 1, 0, 3;
  const auto g1 = impulse_gram(laws_of(JumpDistribution::Law(TwoPoint{-1.0, 1.0, 0.5}), 2), spec, 1, 3);
  const auto g2 = impulse_gram(laws_of(JumpDistribution::Law(Gaussian{0.0, 1.0}), 2), spec, 1, 3);
  EXPECT_TRUE(g1.entries.isApprox(0.5 * tp, 1e-12));
  EXPECT_TRUE(g2.entries.isApprox(0.5 * ga, 1e-12));
  EXPECT_NEAR(g1.scale, 0.5, 1e-12);
}

TEST(ImpulseGram, UnreachableStateIsRefused) {
  const auto spec = two_state(0.0, 1.0, {1.0, 0.0});
  EXPECT_THROW(impulse_gram(laws_of(JumpDistribution::Law(Gaussian{}), 2), spec, 1, 2), ValidationError);
  EXPECT_THROW(impulse_gram(laws_of(JumpDistribution::Law(Gaussian{}), 1), one_state(), 0, 2), ValidationError);
}

TEST(TeugelsGram, BrownianOnlyKeepsFirstOrder) {
  const auto g = teugels_gram(brownian_params(1), 0, 2);
  Eigen::Matrix2d expected;
  expected << 1, 0, 0, 0;
  EXPECT_EQ(g.entries, Eigen::MatrixXd(expected));
  const auto c = orthonormalize(g);
  EXPECT_EQ(c.kept_indices, std::vector<int>{0});
}

TEST(TeugelsGram, UnitJumpsAreRankOne) {
  auto p = brownian_params(1, 0.0);
  p.jump_rate = 2.5;
  p.jump_law = JumpDistribution::Law(PointMass{1.0});
  const auto g = teugels_gram(p, 0, 2);
  EXPECT_TRUE(g.entries.isApprox(Eigen::MatrixXd::Constant(2, 2, 2.5), 1e-14));
  EXPECT_EQ(orthonormalize(g).kept_indices, std::vector<int>{0});
}

TEST(TeugelsGram, SymmetricTwoPointIsDiagonal) {
  auto p = brownian_params(1, 0.0);
  p.jump_rate = 3.0;
  p.jump_law = JumpDistribution::Law(TwoPoint{-1.0, 1.0, 0.5});
  const auto g = teugels_gram(p, 0, 2);
  EXPECT_TRUE(g.entries.isApprox(3.0 * Eigen::MatrixXd::Identity(2, 2), 1e-14));
}

// Entry (k, h) against direct enumeration of the two-point law with sigma.
TEST(TeugelsGram, EntriesByEnumeration) {
  auto p = brownian_params(2, 0.7);
  p.jump_rate = 1.5;
  p.jump_law = JumpDistribution::Law(TwoPoint{-0.5, 2.0, 0.4});
  p.gamma = {JumpTransform::identity(), JumpTransform::affine_odd(0.3, 0.1)};
  const auto g = teugels_gram(p, 1, 3);
  for (int k = 0; k < 3; ++k)
    for (int h = 0; h < 3; ++h) {
      const int e = k + h + 2;
      double v = 1.5 * (0.4 * std::pow(p.gamma[1](-0.5), e) + 0.6 * std::pow(p.gamma[1](2.0), e));
      if (k == 0 && h == 0) v += 0.49;
      EXPECT_NEAR(g.entries(k, h), v, 1e-12 * std::max(1.0, std::abs(v)));
    }
}

// =============================================================================
// orthonormalize
// =============================================================================

TEST(Orthonormalize, IdentityGramGivesIdentity) {
  const auto c = orthonormalize(gram_of(Eigen::MatrixXd::Identity(4, 4)));
  EXPECT_EQ(c.coefficients, Eigen::MatrixXd(Eigen::MatrixXd::Identity(4, 4)));
  EXPECT_EQ(c.kept_indices, (std::vector<int>{0, 1, 2, 3}));
}

TEST(Orthonormalize, StandardGaussianGivesHermite) {
  Eigen::Matrix3d ga;
  ga << 1, 0, 1, 0, 1, 0, 1, 0, 3;
  const auto c = orthonormalize(gram_of(ga));
  Eigen::Matrix3d expected;
  expected << 1, 0, 0, 0, 1, 0, -1 / std::sqrt(2.0), 0, 1 / std::sqrt(2.0);
  EXPECT_LT((c.coefficients - expected).cwiseAbs().maxCoeff(), 1e-10);
}

// Non-standard Gaussian, higher order, through the chain's E Phi(1) scale.
TEST(Orthonormalize, ShiftedGaussianImpulseMatchesHermiteRecursion) {
  const auto spec = two_state(2.0, 0.5, {0.9, 0.1});
  const double m = 0.4, s = 1.3;
  const int d = 5;
  const auto gram = impulse_gram(laws_of(JumpDistribution::Law(Gaussian{m, s}), 2), spec, 1, d);
  const auto c = orthonormalize(gram, 1e-12);
  ASSERT_EQ(c.size(), d);
  const Eigen::MatrixXd expected = hermite_rows(d, m, s) / std::sqrt(gram.scale);
  EXPECT_LT((c.coefficients - expected).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(Orthonormalize, TwoPointDropsThirdDirection) {
  Eigen::Matrix3d tp;
  tp << 1, 0, 1, 0, 1, 0, 1, 0, 1;
  const auto c = orthonormalize(gram_of(tp));
  EXPECT_EQ(c.kept_indices, (std::vector<int>{0, 1}));
  EXPECT_FALSE(c.row_for(2).has_value());
}

TEST(Orthonormalize, PointMassKeepsOnlyCounting) {
  const auto spec = two_state(1.0, 1.0);
  const auto c = orthonormalize(impulse_gram(laws_of(JumpDistribution::Law(PointMass{0.7}), 2), spec, 0, 4));
  EXPECT_EQ(c.kept_indices, std::vector<int>{0});
}

TEST(Orthonormalize, ProducesLowerTriangularOrthonormalRows) {
  const auto spec = two_state(1.0, 1.0);
  const auto gram =
      impulse_gram(laws_of(JumpDistribution::Law(DoubleExponential{0.3, 2.0, 3.0}), 2), spec, 0, 4);
  const auto c = orthonormalize(gram);
  const Eigen::MatrixXd check = c.coefficients * gram.entries * c.coefficients.transpose();
  EXPECT_LT((check - Eigen::MatrixXd::Identity(c.size(), c.size())).cwiseAbs().maxCoeff(), 1e-8);
  for (int r = 0; r < c.size(); ++r)
    for (int k = c.kept_indices[static_cast<std::size_t>(r)] + 1; k < 4; ++k) EXPECT_EQ(c.coefficients(r, k), 0.0);
}

TEST(Orthonormalize, RankFilterIsScaleInvariant) {
  Eigen::Matrix3d tp;
  tp << 1, 0, 1, 0, 1, 0, 1, 0, 1;
  for (double scale : {1e-6, 1.0, 1e6})
    EXPECT_EQ(orthonormalize(gram_of(scale * tp)).kept_indices, (std::vector<int>{0, 1}));
}

TEST(Orthonormalize, RejectsIndefiniteGram) {
  Eigen::Matrix2d m;
  m << 1, 2, 2, 1;
  EXPECT_THROW(orthonormalize(gram_of(m)), NumericError);
  m << 1, 0.5, 0.4, 1;
  EXPECT_THROW(orthonormalize(gram_of(m)), NumericError);
}

// =============================================================================
// Basis paths
// =============================================================================

TEST(BasisPaths, IdentityCoefficientsReturnRawPaths) {
  BasisSet set;
  for (int i = 0; i < 2; ++i) {
    set.teugels.push_back(orthonormalize(gram_of(Eigen::MatrixXd::Identity(2, 2), GramKind::teugels)));
    set.impulse.emplace_back(orthonormalize(gram_of(Eigen::MatrixXd::Identity(3, 3))));
  }
  RawMartingales raw;
  auto eng = make_engine(3);
  auto rnd = [&] {
    std::vector<double> v(5);
    for (auto& x : v) x = standard_normal(eng);
    return v;
  };
  for (int i = 0; i < 2; ++i) {
    raw.regime_teugels.push_back({rnd(), rnd()});
    raw.phi_bar.push_back(rnd());
    raw.psi_bar.push_back({rnd(), rnd()});
  }
  const auto b = assemble_basis_paths(set, raw);
  ASSERT_EQ(b.h.size(), 2u);
  for (int k = 0; k < 2; ++k)
    for (std::size_t t = 0; t < 5; ++t)
      EXPECT_DOUBLE_EQ(b.h[static_cast<std::size_t>(k)][t],
                       raw.regime_teugels[0][static_cast<std::size_t>(k)][t] +
                           raw.regime_teugels[1][static_cast<std::size_t>(k)][t]);
  for (std::size_t i = 0; i < 2; ++i) {
    EXPECT_EQ(b.g[i][0], raw.phi_bar[i]);
    EXPECT_EQ(b.g[i][1], raw.psi_bar[i][0]);
    EXPECT_EQ(b.g[i][2], raw.psi_bar[i][1]);
  }
}

TEST(BasisPaths, RejectsMissingOrders) {
  BasisSet set;
  set.teugels.push_back(orthonormalize(gram_of(Eigen::MatrixXd::Identity(3, 3), GramKind::teugels)));
  set.impulse.emplace_back(std::nullopt);
  RawMartingales raw;
  raw.regime_teugels = {{{0.0}, {0.0}}};
  raw.phi_bar = {{0.0}};
  raw.psi_bar = {{}};
  EXPECT_THROW(assemble_basis_paths(set, raw), ValidationError);
}

// Point-mass impulses: the only G element is a multiple of Phibar, pathwise.
TEST(BasisPaths, PointMassImpulseIsProportionalToCounting) {
  const auto spec = two_state(1.0, 2.0);
  const auto laws = laws_of(JumpDistribution::Law(PointMass{1.5}), 2);
  const auto params = brownian_params(2);
  const auto basis = build_basis(params, laws, spec, 1, 2, 1e-10);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto chain = simulate_chain(spec, 1.0, seed);
    CountingSet counts(chain, spec);
    const auto levy = simulate_levy(params, chain, 1.0 / 16, seed);
    const auto imp = simulate_impulse(chain, counts, laws, 2, levy.grid, seed);
    RawMartingales raw;
    raw.regime_teugels = regime_teugels(levy, params, chain, 1);
    const auto times = levy.grid.times();
    for (int i = 0; i < 2; ++i) {
      std::vector<double> pb;
      for (double t : times) pb.push_back(counts.compensated(i, t));
      raw.phi_bar.push_back(pb);
      raw.psi_bar.push_back({imp.psi_bar(i, 1), imp.psi_bar(i, 2)});
    }
    const auto b = assemble_basis_paths(basis, raw);
    for (std::size_t i = 0; i < 2; ++i) {
      ASSERT_EQ(b.g[i].size(), 1u);
      const double c = 1.0 / std::sqrt(expected_jumps_per_unit(spec, static_cast<int>(i)));
      for (std::size_t t = 0; t < times.size(); ++t) {
        EXPECT_NEAR(b.g[i][0][t], c * raw.phi_bar[i][t], 1e-12);
        // and Psibar^(1) = 1.5 Phibar exactly
        EXPECT_NEAR(raw.psi_bar[i][0][t], 1.5 * raw.phi_bar[i][t], 1e-12);
      }
    }
  }
}

TEST(BasisPaths, RegimeTeugelsSumToTeugels) {
  const auto spec = two_state(1.0, 2.0);
  auto params = brownian_params(2);
  params.mu0 = Eigen::Vector2d(0.1, 0.4);
  params.jump_rate = 2.0;
  params.jump_law = JumpDistribution::Law(Uniform{-1.0, 2.0});
  params.gamma = {JumpTransform::identity(), JumpTransform::linear(0.5)};
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto chain = simulate_chain(spec, 1.0, seed);
    const auto levy = simulate_levy(params, chain, 1.0 / 32, seed);
    const auto fam = power_jump_family(levy, params, chain, 3);
    const auto split = regime_teugels(levy, params, chain, 3);
    for (int k = 1; k <= 3; ++k)
      for (std::size_t g = 0; g < levy.values.size(); ++g)
        EXPECT_NEAR(split[0][static_cast<std::size_t>(k - 1)][g] + split[1][static_cast<std::size_t>(k - 1)][g],
                    fam.teugels(k)[g], 1e-12);
  }
}

TEST(BasisReport, FormatListsKeptRows) {
  Eigen::Matrix3d tp;
  tp << 1, 0, 1, 0, 1, 0, 1, 0, 1;
  const auto text = format_coefficients(orthonormalize(gram_of(tp)));
  EXPECT_NE(text.find("kept=0,1"), std::string::npos);
  EXPECT_NE(text.find("\n1 1 0 1 0\n"), std::string::npos);
}
