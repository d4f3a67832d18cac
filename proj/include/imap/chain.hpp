#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

namespace imap {

/// Finite-state continuous-time Markov chain: generator and initial law.
struct ChainSpec {
  Eigen::MatrixXd intensities;   // N x N generator, rows sum to zero
  Eigen::VectorXd initial_dist;  // length N

  int n_states() const { return static_cast<int>(intensities.rows()); }
  double exit_rate(int i) const { return -intensities(i, i); }

  /// Throws ValidationError on negative off-diagonal rates, row sums away
  /// from zero, or a malformed initial distribution.
  void validate() const;

  /// True when some other state has a positive rate into j.
  bool enterable(int j) const;
};

/// One realization of the chain on [0, horizon].
struct ChainPath {
  double horizon = 0.0;
  std::vector<double> epochs;  // strictly increasing, in (0, horizon]
  std::vector<int> states;     // states[0] initial, states[n+1] after epochs[n]

  std::size_t n_epochs() const { return epochs.size(); }
  /// J(t), right-continuous.
  int state_at(double t) const;
  /// J(t-).
  int state_before(double t) const;
  /// Time spent in each state on [0, t].
  Eigen::VectorXd occupation(double t, int n_states) const;
};

/// Hash of the epochs and states, used to check that derived paths were
/// built on the same chain realization.
std::uint64_t fingerprint(const ChainPath& path);

ChainPath simulate_chain(const ChainSpec& spec, double horizon, std::uint64_t seed);

/// Markovian jump counts Phi_j, their compensators phi_j and the
/// compensated martingales, all in closed form from one chain path.
class CountingSet {
 public:
  CountingSet(const ChainPath& path, const ChainSpec& spec);

  int n_states() const { return n_states_; }
  /// Phi_j(t): number of epochs into state j up to t.
  double count(int j, double t) const;
  /// phi_j(t) = int_0^t lambda_j(s) ds.
  double compensator(int j, double t) const;
  double compensated(int j, double t) const { return count(j, t) - compensator(j, t); }
  /// lambda_j(t) = sum_{i != j} 1{J(t-) = e_i} lambda_ij.
  double intensity(int j, double t) const;
  const std::vector<double>& jump_times(int j) const { return jump_times_[static_cast<std::size_t>(j)]; }

 private:
  const ChainPath* path_;
  Eigen::MatrixXd rates_;
  int n_states_;
  std::vector<std::vector<double>> jump_times_;
  // occupation at each epoch boundary: row n = occupation on [0, epochs[n-1]]
  Eigen::MatrixXd occ_at_epoch_;
};

/// E Phi_i(1) from the forward Kolmogorov equation, fixed-step RK4 with
/// step 1e-3.
double expected_jumps_per_unit(const ChainSpec& spec, int i);

}  // namespace imap
