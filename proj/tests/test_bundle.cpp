#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>

#include <gtest/gtest.h>

#include "imap/bundle.hpp"
#include "imap/errors.hpp"
#include "imap/rng.hpp"
#include "support.hpp"

using namespace imap;
using imap::testing::small_canonical;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const auto d = fs::temp_directory_path() / ("imap_test_" + name);
  fs::remove_all(d);
  return d;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

bool same_files(const fs::path& a, const fs::path& b) {
  for (const char* f : {"paths.csv", "jumps.csv", "paths.schema.json", "coefficients.txt", "manifest.json"})
    if (slurp(a / f) != slurp(b / f)) return false;
  return true;
}

ScenarioConfig rich_config() {
  auto c = small_canonical(1000, 1.0 / 64);
  c.chain.intensities << -1.0, 1.0, 2.0, -2.0;
  c.levy.mu0 = Eigen::Vector2d(0.2, -0.1);
  c.levy.sigma0 = Eigen::Vector2d(1.0, 0.5);
  c.levy.gamma = {JumpTransform::identity(), JumpTransform::linear(1.5)};
  c.levy.jump_law = JumpDistribution(Gaussian{0.1, 0.6});
  c.impulse.laws = {JumpDistribution(Uniform{-1.0, 2.0}), JumpDistribution(Gaussian{0.0, 1.0})};
  return c;
}

}  // namespace

TEST(PathSet, OverlapOnlyWithinOneSeed) {
  EXPECT_TRUE((PathSet{1, 0, 10}.overlaps({1, 9, 5})));
  EXPECT_FALSE((PathSet{1, 0, 10}.overlaps({1, 10, 5})));
  EXPECT_FALSE((PathSet{1, 0, 10}.overlaps({2, 0, 10})));
  const auto c = ScenarioConfig::canonical();
  EXPECT_FALSE(estimation_set(c).overlaps(evaluation_set(c)));
}

// Every accessor must reproduce the module-level pipeline run on the same
// per-path seeds.
TEST(PathBundle, MatchesModulePipeline) {
  const auto cfg = rich_config();
  const PathSet set{cfg.seed, 17, 1000};
  const auto b = run_scenario(cfg, set, 2);
  const int stride = cfg.report_stride();
  for (int p : {0, 1, 500, 999}) {
    const auto seed = path_seed(cfg.seed, 17 + static_cast<std::uint64_t>(p));
    const auto chain = simulate_chain(cfg.chain, cfg.horizon, stream_seed(seed, Stream::chain));
    const CountingSet counts(chain, cfg.chain);
    const auto levy = simulate_levy(cfg.levy, chain, cfg.grid_step, seed);
    const auto fam = power_jump_family(levy, cfg.levy, chain, cfg.max_power_order);
    const auto imp = simulate_impulse(chain, counts, cfg.impulse, cfg.max_impulse_order, cfg.report_grid(),
                                      stream_seed(seed, Stream::impulse));
    RawMartingales raw;
    raw.regime_teugels = regime_teugels(levy, cfg.levy, chain, cfg.max_power_order);
    for (int i = 0; i < 2; ++i) {
      std::vector<double> pb;
      for (double t : cfg.report_grid().times()) pb.push_back(counts.compensated(i, t));
      raw.phi_bar.push_back(pb);
      raw.psi_bar.emplace_back();
      for (int l = 1; l <= cfg.max_impulse_order; ++l) raw.psi_bar.back().push_back(imp.psi_bar(i, l));
      for (auto& v : raw.regime_teugels[static_cast<std::size_t>(i)]) {
        std::vector<double> sub;
        for (int t = 0; t <= cfg.report_steps; ++t) sub.push_back(v[static_cast<std::size_t>(t * stride)]);
        v = sub;
      }
    }
    const auto basis = assemble_basis_paths(b.basis(), raw);
    for (int t = 0; t < b.n_times(); ++t) {
      const auto g = static_cast<std::size_t>(t * stride);
      const double tt = b.times()[static_cast<std::size_t>(t)];
      EXPECT_EQ(b.state(p, t), chain.state_at(tt));
      EXPECT_NEAR(b.xbar(p, t), levy.values[g], 1e-12);
      for (int k = 1; k <= 3; ++k) EXPECT_NEAR(b.teugels(p, t, k), fam.teugels(k)[g], 1e-11);
      for (int k = 2; k <= 3; ++k) EXPECT_NEAR(b.power_jump(p, t, k), fam.raw[static_cast<std::size_t>(k - 1)][g], 1e-11);
      double x = levy.values[g];
      for (int i = 0; i < 2; ++i) {
        EXPECT_NEAR(b.phi_bar(p, t, i), counts.compensated(i, tt), 1e-12);
        EXPECT_NEAR(b.compensator(p, t, i), counts.compensator(i, tt), 1e-12);
        for (int l = 1; l <= 3; ++l)
          EXPECT_NEAR(b.psi_bar(p, t, i, l), imp.psi_bar(i, l)[static_cast<std::size_t>(t)], 1e-11);
        x += imp.psi(i, 1)[static_cast<std::size_t>(t)];
        for (int e = 0; e < b.n_g(i); ++e)
          EXPECT_NEAR(b.g(p, t, i, e), basis.g[static_cast<std::size_t>(i)][static_cast<std::size_t>(e)][static_cast<std::size_t>(t)], 1e-11);
      }
      EXPECT_NEAR(b.x_full(p, t), x, 1e-12);
      for (int e = 0; e < b.n_h(); ++e)
        EXPECT_NEAR(b.h(p, t, e), basis.h[static_cast<std::size_t>(e)][static_cast<std::size_t>(t)], 1e-11);
    }
    EXPECT_EQ(b.jumps(p).size(), chain.n_epochs() + levy.jumps.size());
  }
}

TEST(PathBundle, WorkerCountDoesNotChangeBytes) {
  const auto cfg = small_canonical(1000, 1.0 / 64);
  const auto set = estimation_set(cfg);
  const auto a = run_scenario(cfg, set, 1);
  const auto b = run_scenario(cfg, set, 8);
  EXPECT_TRUE(a.identical(b));
  const auto c = run_scenario(cfg, PathSet{cfg.seed + 1, 0, 1000}, 1);
  EXPECT_FALSE(a.identical(c));
}

TEST(PathBundle, ReductionsDropColumns) {
  auto cfg = small_canonical(1000, 1.0 / 64);
  cfg.chain = imap::testing::one_state();
  cfg.levy.mu0 = Eigen::VectorXd::Zero(1);
  cfg.levy.sigma0 = Eigen::VectorXd::Ones(1);
  cfg.levy.gamma = {JumpTransform::identity()};
  cfg.levy.jump_rate = 0.0;
  cfg.impulse.laws = {JumpDistribution(PointMass{0.0})};
  const auto b = run_scenario(cfg, estimation_set(cfg), 1);
  EXPECT_FALSE(b.has_chain());
  EXPECT_EQ(b.columns().size(), 1u);
  EXPECT_EQ(b.n_h(), 1);
  EXPECT_EQ(b.n_g(0), 0);
  std::vector<std::string> names;
  for (const auto& c : persisted_columns(b)) names.push_back(c.process);
  EXPECT_EQ(names, (std::vector<std::string>{"regime_power", "Xbar", "Xbar_k", "H"}));
}

TEST(PathBundle, RefusesBadRequests) {
  auto cfg = small_canonical(1000, 1.0 / 64);
  EXPECT_THROW(run_scenario(cfg, estimation_set(cfg), 0), ValidationError);
  cfg.estimation_paths = 10;
  EXPECT_THROW(run_scenario(cfg, estimation_set(cfg), 1), ValidationError);
  PathBundle b(small_canonical(1000), {1, 0, 2}, 2);
  EXPECT_THROW(b.set_jumps({{}}), ValidationError);
}

// =============================================================================
// Persistence
// =============================================================================

TEST(Persistence, WriteReadWriteIsByteIdentical) {
  const auto cfg = rich_config();
  const auto b = run_scenario(cfg, estimation_set(cfg), 2);
  const auto d1 = scratch("rt1"), d2 = scratch("rt2");
  write_bundle(b, d1.string(), 300);
  const auto back = read_bundle(d1.string());
  EXPECT_EQ(back.n_paths(), 300);
  write_bundle(back, d2.string(), 300);
  EXPECT_TRUE(same_files(d1, d2));
  for (int p : {0, 150, 299})
    for (int t = 0; t < b.n_times(); ++t) {
      EXPECT_EQ(back.state(p, t), b.state(p, t));
      EXPECT_NEAR(back.xbar(p, t), b.xbar(p, t), 1e-14);
      EXPECT_NEAR(back.h(p, t, 1), b.h(p, t, 1), 1e-13);
    }
  EXPECT_EQ(back.jumps(150).size(), b.jumps(150).size());
}

TEST(Persistence, ManifestNamesConfigHash) {
  const auto cfg = small_canonical(1000, 1.0 / 64);
  const auto b = run_scenario(cfg, estimation_set(cfg), 1);
  const auto d = scratch("manifest");
  write_bundle(b, d.string(), 10);
  const auto m = nlohmann::json::parse(slurp(d / "manifest.json"));
  EXPECT_EQ(m["config_hash"], cfg.hash());
  EXPECT_EQ(m["seed"], cfg.seed);
  EXPECT_EQ(m["persisted_paths"], 10);
  const auto s = nlohmann::json::parse(slurp(d / "paths.schema.json"));
  EXPECT_EQ(s["config_hash"], cfg.hash());
}

TEST(Persistence, TamperedDerivedColumnIsDetected) {
  const auto cfg = small_canonical(1000, 1.0 / 64);
  const auto b = run_scenario(cfg, estimation_set(cfg), 1);
  const auto d = scratch("tamper");
  write_bundle(b, d.string(), 200);
  auto text = slurp(d / "paths.csv");
  // first Xbar row of path 0 at a positive time
  const auto at = text.find("\n0,0.125,Xbar,0,0,");
  ASSERT_NE(at, std::string::npos);
  const auto value = text.find_last_of(',', text.find('\n', at + 1)) + 1;
  text.insert(value, "1");
  std::ofstream(d / "paths.csv", std::ios::binary) << text;
  EXPECT_THROW(read_bundle(d.string()), NumericError);
}

TEST(Persistence, ConfigHashMismatchIsRefused) {
  const auto cfg = small_canonical(1000, 1.0 / 64);
  const auto b = run_scenario(cfg, estimation_set(cfg), 1);
  const auto d = scratch("hash");
  write_bundle(b, d.string(), 5);
  auto schema = nlohmann::json::parse(slurp(d / "paths.schema.json"));
  schema["config_hash"] = "0000000000000000";
  std::ofstream(d / "paths.schema.json") << schema.dump(2);
  EXPECT_THROW(read_bundle(d.string()), ValidationError);
  EXPECT_THROW(read_bundle(scratch("missing").string()), ValidationError);
}
