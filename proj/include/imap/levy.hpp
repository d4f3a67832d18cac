#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "imap/chain.hpp"
#include "imap/distributions.hpp"

namespace imap {

/// Per-state jump transform gamma_i(x) = beta x + kappa x^3. Identity is
/// beta = 1, kappa = 0; linear has kappa = 0.
struct JumpTransform {
  enum class Kind { identity, linear, affine_odd };
  Kind kind = Kind::identity;
  double beta = 1.0;
  double kappa = 0.0;

  static JumpTransform identity() { return {}; }
  static JumpTransform linear(double beta) { return {Kind::linear, beta, 0.0}; }
  static JumpTransform affine_odd(double beta, double kappa) {
    return {Kind::affine_odd, beta, kappa};
  }

  double operator()(double x) const { return beta * x + kappa * x * x * x; }
  /// Polynomial growth degree of |gamma(x)| for large |x|.
  int degree() const { return kappa != 0.0 ? 3 : 1; }
  /// E[gamma(xi)^k] in closed form from the raw moments of xi.
  double moment(int k, const JumpDistribution& law) const;
  bool operator==(const JumpTransform&) const = default;
};

/// Modulated coefficients of the Ito-Levy component and its finite-activity
/// Levy measure nu(dx) = jump_rate * jump_law(dx).
struct RegimeLevyParams {
  Eigen::VectorXd mu0;
  Eigen::VectorXd sigma0;
  std::vector<JumpTransform> gamma;
  double jump_rate = 0.0;
  JumpDistribution jump_law;

  int n_states() const { return static_cast<int>(mu0.size()); }
  void validate(int n_states) const;
  /// E[gamma_i(xi)^k], xi ~ jump_law.
  double gamma_moment(int i, int k) const { return gamma[static_cast<std::size_t>(i)].moment(k, jump_law); }
  /// int gamma_i^k dnu = jump_rate * E[gamma_i(xi)^k].
  double jump_moment_density(int i, int k) const { return jump_rate * gamma_moment(i, k); }
  /// All per-state coefficients coincide.
  bool state_independent() const;
  bool has_jumps() const { return jump_rate > 0.0; }
};

struct LevyJump {
  double time;
  double mark;     // raw draw x ~ jump_law
  double applied;  // gamma_{J(t-)}(x)
  int state;       // J(t-)
};

/// Uniform grid 0 = t_0 < ... < t_G = T.
struct TimeGrid {
  double horizon = 1.0;
  int steps = 1;

  double step() const { return horizon / steps; }
  double time(int g) const { return g == steps ? horizon : g * step(); }
  std::vector<double> times() const;
};

/// One realization of the modulated Ito-Levy component.
struct LevyPath {
  TimeGrid grid;
  std::uint64_t chain_id = 0;  // fingerprint of the driving chain path
  std::vector<double> values;      // Xbar at grid points
  std::vector<double> continuous;  // drift + diffusion part at grid points
  Eigen::MatrixXd continuous_by_state;  // N x (G+1): continuous increments accrued in each state
  std::vector<double> gamma_jump_integral;  // Gamma(t) at grid points
  std::vector<LevyJump> jumps;

  /// Continuous part at every chain epoch and jump epoch (sorted), so that
  /// integrands can be evaluated at exact left limits.
  std::vector<double> event_times;
  std::vector<double> event_continuous;
};

/// Gaussian path of a standard Brownian motion on the grid. Dyadic grids are
/// filled by midpoint refinement, so coarser dyadic levels of the same seed
/// see identical values at shared times.
std::vector<double> brownian_on_grid(const TimeGrid& grid, std::uint64_t seed);

/// Builds a grid of the given step over [0, horizon]; the step must divide
/// the horizon.
TimeGrid make_grid(double horizon, double step);

LevyPath simulate_levy(const RegimeLevyParams& params, const ChainPath& chain,
                       double grid_step, std::uint64_t seed);

/// Per-state occupation times at every grid point, N x (G+1).
Eigen::MatrixXd occupation_on_grid(const ChainPath& chain, int n_states, const TimeGrid& grid);

/// Power-jump processes X^(k), their compensators and the Teugels
/// martingales Xbar^(k), k = 1..K, on the grid.
struct PowerJumpFamily {
  int max_order = 1;
  std::vector<std::vector<double>> raw;           // [k-1][g]
  std::vector<std::vector<double>> compensator;   // [k-1][g]
  std::vector<std::vector<double>> martingale;    // [k-1][g]

  const std::vector<double>& teugels(int k) const { return martingale[static_cast<std::size_t>(k - 1)]; }
};

PowerJumpFamily power_jump_family(const LevyPath& path, const RegimeLevyParams& params,
                                  const ChainPath& chain, int max_order);

/// Compensator density of X^(k) in state i (k = 1 includes the drift).
double power_compensator_rate(const RegimeLevyParams& params, int i, int k);

struct MomentCheckEntry {
  std::string subject;  // "levy" or "impulse"
  int state;
  bool ok;
  std::string detail;
};

struct MomentReport {
  bool passed = true;
  std::vector<MomentCheckEntry> entries;
  std::string summary() const;
};

/// Analytic verdict on the exponential-moment condition for every state,
/// optionally also for the impulse laws.
MomentReport check_moment_condition(const RegimeLevyParams& params, double lambda_probe,
                                    double eps_probe,
                                    const std::vector<JumpDistribution>* impulse_laws = nullptr);

/// Whether the condition holds for some small lambda > 0.
MomentReport moment_condition_for_small_lambda(const RegimeLevyParams& params,
                                               const std::vector<JumpDistribution>* impulse_laws = nullptr);

}  // namespace imap
