#include "imap/ortho.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>
#include <sstream>

#include <Eigen/Eigenvalues>

#include "imap/errors.hpp"

namespace imap {

namespace {

std::string describe(const GramMatrix& g) {
  std::ostringstream os;
  os << (g.kind == GramKind::impulse ? "impulse" : "teugels") << " gram, state " << g.state + 1
     << ", order " << g.order() << ":\n"
     << g.entries;
  return os.str();
}

}  // namespace

void GramMatrix::validate() const {
  if (entries.rows() != entries.cols()) throw NumericError("gram matrix is not square");
  if (entries.rows() == 0) return;
  const double max_diag = entries.diagonal().cwiseAbs().maxCoeff();
  const double tol = 1e-10 * std::max(max_diag, std::numeric_limits<double>::min());
  if ((entries - entries.transpose()).cwiseAbs().maxCoeff() > tol)
    throw NumericError("gram matrix is not symmetric: " + describe(*this));
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(entries, Eigen::EigenvaluesOnly);
  if (eig.eigenvalues().minCoeff() < -tol) {
    std::ostringstream os;
    os << "gram matrix is not positive semidefinite (min eigenvalue "
       << eig.eigenvalues().minCoeff() << "): " << describe(*this);
    throw NumericError(os.str());
  }
}

std::optional<Eigen::RowVectorXd> BasisCoefficients::row_for(int raw_index) const {
  for (int r = 0; r < size(); ++r)
    if (kept_indices[static_cast<std::size_t>(r)] == raw_index) return coefficients.row(r);
  return std::nullopt;
}

GramMatrix impulse_gram(const JumpLawSet& laws, const ChainSpec& spec, int i, int order) {
  if (order < 1) throw ValidationError("impulse_gram: order must be >= 1");
  const double expected = expected_jumps_per_unit(spec, i);
  if (!(expected > 0.0)) {
    std::ostringstream os;
    os << "impulse_gram: state " << i + 1 << " is never entered (E Phi(1) = 0); no G-basis exists";
    throw ValidationError(os.str());
  }
  GramMatrix g;
  g.kind = GramKind::impulse;
  g.state = i;
  g.scale = expected;
  g.entries.resize(order, order);
  for (int l = 0; l < order; ++l)
    for (int h = 0; h < order; ++h) g.entries(l, h) = laws.moment(i, l + h) * expected;
  return g;
}

GramMatrix teugels_gram(const RegimeLevyParams& params, int i, int order) {
  if (order < 1) throw ValidationError("teugels_gram: order must be >= 1");
  if (i < 0 || i >= params.n_states()) throw ValidationError("teugels_gram: state out of range");
  GramMatrix g;
  g.kind = GramKind::teugels;
  g.state = i;
  g.scale = 1.0;
  g.entries.resize(order, order);
  for (int k = 0; k < order; ++k)
    for (int h = 0; h < order; ++h)
      g.entries(k, h) = params.jump_moment_density(i, k + h + 2);
  g.entries(0, 0) += params.sigma0(i) * params.sigma0(i);
  return g;
}

BasisCoefficients orthonormalize(const GramMatrix& gram, double pivot_tol) {
  gram.validate();
  const int d = gram.order();
  const Eigen::MatrixXd& g = gram.entries;

  std::vector<Eigen::VectorXd> basis;
  BasisCoefficients out;
  out.kind = gram.kind;
  out.state = gram.state;
  out.raw_dimension = d;
  for (int r = 0; r < d; ++r) {
    Eigen::VectorXd v = Eigen::VectorXd::Unit(d, r);
    for (int pass = 0; pass < 2; ++pass)
      for (const auto& q : basis) v -= q.dot(g * v) * q;
    const double norm2 = v.dot(g * v);
    if (!(g(r, r) > 0.0) || norm2 <= pivot_tol * g(r, r)) continue;
    basis.push_back(v / std::sqrt(norm2));
    out.kept_indices.push_back(r);
  }

  out.coefficients = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(basis.size()), d);
  for (std::size_t r = 0; r < basis.size(); ++r)
    out.coefficients.row(static_cast<Eigen::Index>(r)) = basis[r].transpose();

  if (!basis.empty()) {
    const Eigen::MatrixXd check = out.coefficients * g * out.coefficients.transpose();
    const double err = (check - Eigen::MatrixXd::Identity(check.rows(), check.cols())).cwiseAbs().maxCoeff();
    if (err > 1e-8) {
      std::ostringstream os;
      os << "orthonormalize: L G L^T deviates from identity by " << err << "; " << describe(gram);
      throw NumericError(os.str());
    }
  }
  return out;
}

std::vector<int> BasisSet::h_indices() const {
  std::set<int> all;
  for (const auto& t : teugels) all.insert(t.kept_indices.begin(), t.kept_indices.end());
  return {all.begin(), all.end()};
}

BasisSet build_basis(const RegimeLevyParams& params, const JumpLawSet& laws, const ChainSpec& spec,
                     int max_power_order, int max_impulse_order, double pivot_tol) {
  BasisSet set;
  const int n = spec.n_states();
  for (int i = 0; i < n; ++i) {
    set.teugels.push_back(orthonormalize(teugels_gram(params, i, max_power_order), pivot_tol));
    if (expected_jumps_per_unit(spec, i) > 0.0)
      set.impulse.emplace_back(orthonormalize(impulse_gram(laws, spec, i, max_impulse_order + 1), pivot_tol));
    else
      set.impulse.emplace_back(std::nullopt);
  }
  return set;
}

BasisPaths assemble_basis_paths(const BasisSet& basis, const RawMartingales& raw) {
  const int n = basis.n_states();
  if (static_cast<int>(raw.regime_teugels.size()) != n || static_cast<int>(raw.phi_bar.size()) != n ||
      static_cast<int>(raw.psi_bar.size()) != n)
    throw ValidationError("assemble_basis_paths: raw martingales do not match the number of states");
  const std::size_t n_times = raw.phi_bar.empty() ? 0 : raw.phi_bar[0].size();

  BasisPaths out;
  out.h_indices = basis.h_indices();
  for (int r : out.h_indices) {
    std::vector<double> path(n_times, 0.0);
    for (int i = 0; i < n; ++i) {
      const auto& coeffs = basis.teugels[static_cast<std::size_t>(i)];
      const auto row = coeffs.row_for(r);
      if (!row) continue;
      const auto& teugels = raw.regime_teugels[static_cast<std::size_t>(i)];
      if (static_cast<int>(teugels.size()) < coeffs.raw_dimension)
        throw ValidationError("assemble_basis_paths: missing Teugels orders");
      for (int k = 0; k <= r; ++k) {
        const double c = (*row)(k);
        if (c == 0.0) continue;
        const auto& src = teugels[static_cast<std::size_t>(k)];
        for (std::size_t t = 0; t < n_times; ++t) path[t] += c * src[t];
      }
    }
    out.h.push_back(std::move(path));
  }

  out.g_indices.resize(static_cast<std::size_t>(n));
  out.g.resize(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const auto& maybe = basis.impulse[static_cast<std::size_t>(i)];
    if (!maybe) continue;
    const auto& coeffs = *maybe;
    const auto& psi = raw.psi_bar[static_cast<std::size_t>(i)];
    if (static_cast<int>(psi.size()) + 1 < coeffs.raw_dimension)
      throw ValidationError("assemble_basis_paths: missing impulse orders");
    for (int e = 0; e < coeffs.size(); ++e) {
      const int r = coeffs.kept_indices[static_cast<std::size_t>(e)];
      std::vector<double> path(n_times, 0.0);
      for (int l = 0; l <= r; ++l) {
        const double c = coeffs.coefficients(e, l);
        if (c == 0.0) continue;
        const auto& src = l == 0 ? raw.phi_bar[static_cast<std::size_t>(i)]
                                 : psi[static_cast<std::size_t>(l - 1)];
        for (std::size_t t = 0; t < n_times; ++t) path[t] += c * src[t];
      }
      out.g_indices[static_cast<std::size_t>(i)].push_back(r);
      out.g[static_cast<std::size_t>(i)].push_back(std::move(path));
    }
  }
  return out;
}

std::vector<std::vector<std::vector<double>>> regime_teugels(const LevyPath& path,
                                                             const RegimeLevyParams& params,
                                                             const ChainPath& chain, int max_order) {
  const int n = params.n_states();
  const TimeGrid& grid = path.grid;
  const auto n_grid = static_cast<std::size_t>(grid.steps) + 1;
  const Eigen::MatrixXd occ = occupation_on_grid(chain, n, grid);
  std::vector<std::vector<std::vector<double>>> out(
      static_cast<std::size_t>(n),
      std::vector<std::vector<double>>(static_cast<std::size_t>(max_order), std::vector<double>(n_grid, 0.0)));
  for (int i = 0; i < n; ++i) {
    for (int k = 1; k <= max_order; ++k) {
      const double rate = power_compensator_rate(params, i, k);
      auto& dst = out[static_cast<std::size_t>(i)][static_cast<std::size_t>(k - 1)];
      double jumps = 0.0;
      std::size_t j = 0;
      for (std::size_t g = 0; g < n_grid; ++g) {
        const double tg = grid.time(static_cast<int>(g));
        for (; j < path.jumps.size() && path.jumps[j].time <= tg; ++j)
          if (path.jumps[j].state == i) jumps += std::pow(path.jumps[j].applied, k);
        const double cont = k == 1 ? path.continuous_by_state(i, static_cast<Eigen::Index>(g)) : 0.0;
        dst[g] = cont + jumps - occ(i, static_cast<Eigen::Index>(g)) * rate;
      }
    }
  }
  return out;
}

std::string format_coefficients(const BasisCoefficients& c) {
  std::ostringstream os;
  os << "# kind=" << (c.kind == GramKind::impulse ? "impulse" : "teugels") << " state=" << c.state + 1
     << " raw_dimension=" << c.raw_dimension << " kept=";
  for (std::size_t r = 0; r < c.kept_indices.size(); ++r) os << (r ? "," : "") << c.kept_indices[r];
  os << "\n# element raw_index coefficients[0.." << c.raw_dimension - 1 << "]\n";
  char buf[64];
  for (int r = 0; r < c.size(); ++r) {
    os << r << ' ' << c.kept_indices[static_cast<std::size_t>(r)];
    for (int k = 0; k < c.raw_dimension; ++k) {
      std::snprintf(buf, sizeof buf, " %.17g", c.coefficients(r, k));
      os << buf;
    }
    os << '\n';
  }
  return os.str();
}

}  // namespace imap
