#pragma once

#include <cstdint>
#include <vector>

#include "imap/chain.hpp"
#include "imap/distributions.hpp"
#include "imap/levy.hpp"

namespace imap {

/// Law of the transition-triggered jump U^(i) for each destination state.
struct JumpLawSet {
  std::vector<JumpDistribution> laws;
  int max_moment_order = 8;

  int n_states() const { return static_cast<int>(laws.size()); }
  /// m_i(l) = E (U^(i))^l.
  double moment(int i, int l) const;
  /// Checks m_i(0) = 1, even moments >= 0 and that the Hankel matrix of
  /// each moment sequence is positive semidefinite up to max_moment_order.
  void validate(int n_states) const;
};

struct ImpulseJump {
  double time;
  double value;
};

/// Psi_i^(l) and Psibar_i^(l) on the grid plus the raw jump records.
struct ImpulsePath {
  TimeGrid grid;
  std::uint64_t chain_id = 0;
  int max_order = 0;
  std::vector<std::vector<ImpulseJump>> jumps;                // [i]
  std::vector<std::vector<std::vector<double>>> raw;          // [i][l-1][g]
  std::vector<std::vector<std::vector<double>>> compensated;  // [i][l-1][g]

  const std::vector<double>& psi(int i, int l) const {
    return raw[static_cast<std::size_t>(i)][static_cast<std::size_t>(l - 1)];
  }
  const std::vector<double>& psi_bar(int i, int l) const {
    return compensated[static_cast<std::size_t>(i)][static_cast<std::size_t>(l - 1)];
  }
};

/// One U draw per chain epoch, attributed to the destination state.
ImpulsePath simulate_impulse(const ChainPath& chain, const CountingSet& counts,
                             const JumpLawSet& laws, int max_order, const TimeGrid& grid,
                             std::uint64_t seed);

/// X = Xbar + sum_i Psi_i^(1) on the common grid.
struct FullProcessPath {
  TimeGrid grid;
  std::vector<double> values;
};

FullProcessPath assemble_X(const LevyPath& levy, const ImpulsePath& impulse);

}  // namespace imap
