#include "imap/chain.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <sstream>

#include "imap/errors.hpp"
#include "imap/rng.hpp"

namespace imap {

void ChainSpec::validate() const {
  const auto n = intensities.rows();
  if (n < 1 || intensities.cols() != n)
    throw ValidationError("chain: intensity matrix must be square with N >= 1");
  if (initial_dist.size() != n)
    throw ValidationError("chain: initial_dist length must equal N");
  for (Eigen::Index i = 0; i < n; ++i) {
    double row = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) {
      const double r = intensities(i, j);
      if (!std::isfinite(r)) throw ValidationError("chain: non-finite intensity");
      if (i != j && r < 0.0) {
        std::ostringstream os;
        os << "chain: negative rate lambda(" << i + 1 << "," << j + 1 << ") = " << r;
        throw ValidationError(os.str());
      }
      row += r;
    }
    if (std::abs(row) > 1e-12) {
      std::ostringstream os;
      os << "chain: row " << i + 1 << " sums to " << row << ", expected 0";
      throw ValidationError(os.str());
    }
  }
  double total = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!(initial_dist(i) >= 0.0)) throw ValidationError("chain: negative initial probability");
    total += initial_dist(i);
  }
  if (std::abs(total - 1.0) > 1e-12) throw ValidationError("chain: initial_dist must sum to 1");
}

bool ChainSpec::enterable(int j) const {
  for (int i = 0; i < n_states(); ++i)
    if (i != j && intensities(i, j) > 0.0) return true;
  return false;
}

int ChainPath::state_at(double t) const {
  const auto it = std::upper_bound(epochs.begin(), epochs.end(), t);
  return states[static_cast<std::size_t>(it - epochs.begin())];
}

int ChainPath::state_before(double t) const {
  const auto it = std::lower_bound(epochs.begin(), epochs.end(), t);
  return states[static_cast<std::size_t>(it - epochs.begin())];
}

Eigen::VectorXd ChainPath::occupation(double t, int n_states) const {
  Eigen::VectorXd occ = Eigen::VectorXd::Zero(n_states);
  double last = 0.0;
  for (std::size_t n = 0; n < epochs.size() && epochs[n] <= t; ++n) {
    occ(states[n]) += epochs[n] - last;
    last = epochs[n];
  }
  occ(state_at(t)) += t - last;
  return occ;
}

std::uint64_t fingerprint(const ChainPath& path) {
  std::uint64_t h = mix64(static_cast<std::uint64_t>(path.states.front()) ^ 0x5bd1e995ULL);
  for (std::size_t n = 0; n < path.epochs.size(); ++n) {
    std::uint64_t bits;
    std::memcpy(&bits, &path.epochs[n], sizeof bits);
    h = mix64(h ^ bits ^ (static_cast<std::uint64_t>(path.states[n + 1]) << 56));
  }
  return h;
}

ChainPath simulate_chain(const ChainSpec& spec, double horizon, std::uint64_t seed) {
  spec.validate();
  if (!(horizon > 0.0)) throw ValidationError("chain: horizon must be > 0");
  Engine eng = make_engine(seed);
  ChainPath path;
  path.horizon = horizon;

  const int n = spec.n_states();
  int state = n - 1;
  double u = uniform_open(eng);
  for (int i = 0; i < n; ++i) {
    u -= spec.initial_dist(i);
    if (u < 0.0) {
      state = i;
      break;
    }
  }
  path.states.push_back(state);

  double t = 0.0;
  for (;;) {
    const double rate = spec.exit_rate(state);
    if (rate <= 0.0) break;
    t += exponential(eng, rate);
    if (t > horizon) break;
    double v = uniform_open(eng) * rate;
    int next = -1;
    for (int j = 0; j < n; ++j) {
      if (j == state) continue;
      v -= spec.intensities(state, j);
      next = j;
      if (v < 0.0) break;
    }
    // rounding can leave v marginally >= 0; fall back to last positive rate
    while (spec.intensities(state, next) <= 0.0) --next;
    path.epochs.push_back(t);
    path.states.push_back(next);
    state = next;
  }
  return path;
}

CountingSet::CountingSet(const ChainPath& path, const ChainSpec& spec)
    : path_(&path), rates_(spec.intensities), n_states_(spec.n_states()) {
  jump_times_.resize(static_cast<std::size_t>(n_states_));
  occ_at_epoch_ = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(path.epochs.size()) + 1, n_states_);
  double last = 0.0;
  for (std::size_t n = 0; n < path.epochs.size(); ++n) {
    const auto row = static_cast<Eigen::Index>(n);
    occ_at_epoch_.row(row + 1) = occ_at_epoch_.row(row);
    occ_at_epoch_(row + 1, path.states[n]) += path.epochs[n] - last;
    last = path.epochs[n];
    jump_times_[static_cast<std::size_t>(path.states[n + 1])].push_back(path.epochs[n]);
  }
}

double CountingSet::count(int j, double t) const {
  const auto& times = jump_times_[static_cast<std::size_t>(j)];
  return static_cast<double>(std::upper_bound(times.begin(), times.end(), t) - times.begin());
}

double CountingSet::compensator(int j, double t) const {
  const auto& ep = path_->epochs;
  const auto n = static_cast<std::size_t>(std::upper_bound(ep.begin(), ep.end(), t) - ep.begin());
  const double start = n == 0 ? 0.0 : ep[n - 1];
  double phi = 0.0;
  for (int i = 0; i < n_states_; ++i) {
    if (i == j) continue;
    double occ = occ_at_epoch_(static_cast<Eigen::Index>(n), i);
    if (path_->states[n] == i) occ += t - start;
    phi += occ * rates_(i, j);
  }
  return phi;
}

double CountingSet::intensity(int j, double t) const {
  const int i = path_->state_before(t);
  return i == j ? 0.0 : rates_(i, j);
}

double expected_jumps_per_unit(const ChainSpec& spec, int i) {
  spec.validate();
  const int n = spec.n_states();
  if (i < 0 || i >= n) throw ValidationError("chain: state index out of range");
  const Eigen::MatrixXd& q = spec.intensities;
  Eigen::VectorXd rate_into = q.col(i);
  rate_into(i) = 0.0;

  // augmented state (p, acc): p' = p Q, acc' = sum_{j != i} p_j lambda_ji
  auto deriv = [&](const Eigen::RowVectorXd& p, Eigen::RowVectorXd& dp, double& dacc) {
    dp = p * q;
    dacc = p.dot(rate_into.transpose());
  };

  constexpr int steps = 1000;
  constexpr double h = 1.0 / steps;
  Eigen::RowVectorXd p = spec.initial_dist.transpose();
  double acc = 0.0;
  Eigen::RowVectorXd k1, k2, k3, k4;
  double a1, a2, a3, a4;
  for (int s = 0; s < steps; ++s) {
    deriv(p, k1, a1);
    deriv(p + 0.5 * h * k1, k2, a2);
    deriv(p + 0.5 * h * k2, k3, a3);
    deriv(p + h * k3, k4, a4);
    p += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    acc += h / 6.0 * (a1 + 2.0 * a2 + 2.0 * a3 + a4);
  }
  return std::max(acc, 0.0);
}

}  // namespace imap
