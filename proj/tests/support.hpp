#pragma once

#include <cmath>
#include <vector>

#include <Eigen/Dense>

#include "imap/chain.hpp"
#include "imap/config.hpp"
#include "imap/levy.hpp"

namespace imap::testing {

struct MeanSe {
  double mean = 0.0;
  double se = 0.0;
};

inline MeanSe mean_se(const std::vector<double>& v) {
  double s = 0.0, ss = 0.0;
  for (double x : v) s += x;
  const double n = static_cast<double>(v.size());
  const double m = s / n;
  for (double x : v) ss += (x - m) * (x - m);
  return {m, std::sqrt(ss / (n - 1.0) / n)};
}

inline ChainSpec two_state(double l12, double l21, Eigen::Vector2d init = {0.5, 0.5}) {
  ChainSpec s;
  s.intensities.resize(2, 2);
  s.intensities << -l12, l12, l21, -l21;
  s.initial_dist = init;
  return s;
}

inline ChainSpec one_state() {
  ChainSpec s;
  s.intensities = Eigen::MatrixXd::Zero(1, 1);
  s.initial_dist = Eigen::VectorXd::Ones(1);
  return s;
}

inline RegimeLevyParams brownian_params(int n, double sigma = 1.0) {
  RegimeLevyParams p;
  p.mu0 = Eigen::VectorXd::Zero(n);
  p.sigma0 = Eigen::VectorXd::Constant(n, sigma);
  p.gamma.assign(static_cast<std::size_t>(n), JumpTransform::identity());
  return p;
}

/// Canonical scenario shrunk to `paths` per set and a coarser simulation grid.
inline ScenarioConfig small_canonical(int paths, double grid_step = 1.0 / 256.0) {
  auto c = ScenarioConfig::canonical();
  c.estimation_paths = c.evaluation_paths = paths;
  c.grid_step = grid_step;
  return c;
}

/// Simpson rule on [a, b] with n (even) panels.
template <class F>
double simpson(F f, double a, double b, int n) {
  const double h = (b - a) / n;
  double s = f(a) + f(b);
  for (int k = 1; k < n; ++k) s += (k % 2 ? 4.0 : 2.0) * f(a + k * h);
  return s * h / 3.0;
}

}  // namespace imap::testing
