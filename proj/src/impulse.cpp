#include "imap/impulse.hpp"

#include <cmath>
#include <sstream>

#include <Eigen/Eigenvalues>

#include "imap/errors.hpp"
#include "imap/rng.hpp"

namespace imap {

double JumpLawSet::moment(int i, int l) const {
  if (i < 0 || i >= n_states()) throw ValidationError("impulse: state index out of range");
  if (l > max_moment_order) {
    std::ostringstream os;
    os << "impulse: moment order " << l << " exceeds configured maximum " << max_moment_order;
    throw ValidationError(os.str());
  }
  return laws[static_cast<std::size_t>(i)].moment(l);
}

void JumpLawSet::validate(int n_states_expected) const {
  if (n_states() != n_states_expected)
    throw ValidationError("impulse: need one jump law per chain state");
  if (max_moment_order < 0) throw ValidationError("impulse: max_moment_order must be >= 0");
  const int half = max_moment_order / 2;
  for (int i = 0; i < n_states(); ++i) {
    const auto m = laws[static_cast<std::size_t>(i)].moments(2 * half);
    if (m[0] != 1.0) throw ValidationError("impulse: m(0) must be 1");
    for (int l = 2; l <= 2 * half; l += 2)
      if (m[static_cast<std::size_t>(l)] < 0.0)
        throw ValidationError("impulse: negative even moment");
    Eigen::MatrixXd hankel(half + 1, half + 1);
    for (int r = 0; r <= half; ++r)
      for (int c = 0; c <= half; ++c) hankel(r, c) = m[static_cast<std::size_t>(r + c)];
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(hankel, Eigen::EigenvaluesOnly);
    const double scale = hankel.diagonal().cwiseAbs().maxCoeff();
    if (eig.eigenvalues().minCoeff() < -1e-10 * scale) {
      std::ostringstream os;
      os << "impulse: moment sequence of state " << i + 1 << " is not positive semidefinite";
      throw ValidationError(os.str());
    }
  }
}

ImpulsePath simulate_impulse(const ChainPath& chain, const CountingSet& counts,
                             const JumpLawSet& laws, int max_order, const TimeGrid& grid,
                             std::uint64_t seed) {
  const int n_states = counts.n_states();
  if (laws.n_states() != n_states) throw ValidationError("impulse: need one jump law per state");
  if (max_order < 0) throw ValidationError("impulse: max order must be >= 0");
  if (max_order > laws.max_moment_order) {
    std::ostringstream os;
    os << "impulse: order " << max_order << " requested but moments only available up to "
       << laws.max_moment_order;
    throw ValidationError(os.str());
  }

  ImpulsePath path;
  path.grid = grid;
  path.chain_id = fingerprint(chain);
  path.max_order = max_order;
  path.jumps.resize(static_cast<std::size_t>(n_states));

  Engine eng = make_engine(seed);
  for (std::size_t n = 0; n < chain.epochs.size(); ++n) {
    const int dest = chain.states[n + 1];
    const double u = laws.laws[static_cast<std::size_t>(dest)].sample(eng);
    path.jumps[static_cast<std::size_t>(dest)].push_back({chain.epochs[n], u});
  }

  const auto n_grid = static_cast<std::size_t>(grid.steps) + 1;
  path.raw.assign(static_cast<std::size_t>(n_states),
                  std::vector<std::vector<double>>(static_cast<std::size_t>(max_order),
                                                   std::vector<double>(n_grid, 0.0)));
  path.compensated = path.raw;
  for (int i = 0; i < n_states; ++i) {
    const auto ii = static_cast<std::size_t>(i);
    const auto& jumps = path.jumps[ii];
    for (int l = 1; l <= max_order; ++l) {
      const auto li = static_cast<std::size_t>(l - 1);
      const double m = laws.moment(i, l);
      double sum = 0.0;
      std::size_t j = 0;
      for (std::size_t g = 0; g < n_grid; ++g) {
        const double tg = grid.time(static_cast<int>(g));
        while (j < jumps.size() && jumps[j].time <= tg) sum += std::pow(jumps[j++].value, l);
        path.raw[ii][li][g] = sum;
        path.compensated[ii][li][g] = sum - m * counts.compensator(i, tg);
      }
    }
  }
  return path;
}

FullProcessPath assemble_X(const LevyPath& levy, const ImpulsePath& impulse) {
  if (levy.chain_id != impulse.chain_id)
    throw ValidationError("assemble_X: Levy and impulse paths come from different chain paths");
  if (levy.grid.steps != impulse.grid.steps || levy.grid.horizon != impulse.grid.horizon)
    throw ValidationError("assemble_X: grids differ");
  FullProcessPath x;
  x.grid = levy.grid;
  x.values = levy.values;
  for (const auto& jumps : impulse.jumps) {
    double sum = 0.0;
    std::size_t j = 0;
    for (std::size_t g = 0; g < x.values.size(); ++g) {
      const double tg = x.grid.time(static_cast<int>(g));
      while (j < jumps.size() && jumps[j].time <= tg) sum += jumps[j++].value;
      x.values[g] += sum;
    }
  }
  return x;
}

}  // namespace imap
