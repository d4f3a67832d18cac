#pragma once

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "imap/chain.hpp"
#include "imap/impulse.hpp"
#include "imap/levy.hpp"

namespace imap {

enum class GramKind { impulse, teugels };

/// Scalar-product matrix of a raw martingale family in one state.
/// Impulse kind: raw index 0 is Phibar_i, index l >= 1 is Psibar_i^(l).
/// Teugels kind: raw index k is Xbar^(k+1).
struct GramMatrix {
  GramKind kind = GramKind::impulse;
  int state = 0;
  double scale = 1.0;  // E Phi_i(1) for the impulse kind, 1 otherwise
  Eigen::MatrixXd entries;

  int order() const { return static_cast<int>(entries.rows()); }
  /// Throws NumericError unless symmetric and PSD within 1e-10 * max diagonal.
  void validate() const;
};

/// Orthonormal elements as rows over the raw basis. Row r is supported on
/// raw indices <= kept_indices[r].
struct BasisCoefficients {
  GramKind kind = GramKind::impulse;
  int state = 0;
  int raw_dimension = 0;
  std::vector<int> kept_indices;
  Eigen::MatrixXd coefficients;  // kept x raw_dimension, lower triangular in raw order

  int size() const { return static_cast<int>(kept_indices.size()); }
  /// Row for raw index r, or nullopt when r was dropped.
  std::optional<Eigen::RowVectorXd> row_for(int raw_index) const;
};

/// <x^l, x^h>_1 = m_i(l+h) E Phi_i(1), l, h = 0..d-1. Refuses unreachable states.
GramMatrix impulse_gram(const JumpLawSet& laws, const ChainSpec& spec, int i, int order);

/// Per-unit-time predictable bracket density of (Xbar^(k+1), Xbar^(h+1)) in
/// state i: jump_rate E[gamma_i^(k+h+2)] + sigma_i^2 1{k = h = 0}.
GramMatrix teugels_gram(const RegimeLevyParams& params, int i, int order);

/// Modified Gram-Schmidt in raw-index order. A direction whose residual
/// squared norm is <= pivot_tol * G_rr is dropped, never reordered.
BasisCoefficients orthonormalize(const GramMatrix& gram, double pivot_tol = 1e-10);

/// Coefficients of every family in every state.
struct BasisSet {
  std::vector<BasisCoefficients> teugels;                // [state]
  std::vector<std::optional<BasisCoefficients>> impulse;  // [state]; empty if unreachable

  /// Raw Teugels indices kept in at least one state; H^(r+1) exists for each.
  std::vector<int> h_indices() const;
  int n_states() const { return static_cast<int>(teugels.size()); }
};

/// Builds all Gram matrices and orthonormalizes them.
BasisSet build_basis(const RegimeLevyParams& params, const JumpLawSet& laws, const ChainSpec& spec,
                     int max_power_order, int max_impulse_order, double pivot_tol);

/// Compensated raw martingales of one path on some time grid.
struct RawMartingales {
  // [state][k-1][t]: int 1{J(s-) = i} dXbar^(k)(s)
  std::vector<std::vector<std::vector<double>>> regime_teugels;
  std::vector<std::vector<double>> phi_bar;                // [state][t]
  std::vector<std::vector<std::vector<double>>> psi_bar;   // [state][l-1][t]
};

struct BasisPaths {
  std::vector<int> h_indices;                // raw index of each H element
  std::vector<std::vector<double>> h;        // [element][t]
  std::vector<std::vector<int>> g_indices;   // [state] raw index of each G element
  std::vector<std::vector<std::vector<double>>> g;  // [state][element][t]
};

/// Pointwise linear combinations of the raw martingales. H uses each
/// state's coefficients on the part of Xbar^(k) accrued in that state.
BasisPaths assemble_basis_paths(const BasisSet& basis, const RawMartingales& raw);

/// Splits the Teugels martingales by the regime occupied just before each
/// increment, on the Levy path grid.
std::vector<std::vector<std::vector<double>>> regime_teugels(const LevyPath& path,
                                                             const RegimeLevyParams& params,
                                                             const ChainPath& chain, int max_order);

/// Plain-text matrix report of one coefficient set.
std::string format_coefficients(const BasisCoefficients& c);

}  // namespace imap
