#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "imap/config.hpp"
#include "imap/ortho.hpp"

namespace imap {

/// Identity of a block of simulated paths: path p uses path_seed(seed, first_path + p).
struct PathSet {
  std::uint64_t seed = 0;
  std::uint64_t first_path = 0;
  int n_paths = 0;

  bool overlaps(const PathSet& other) const;
  bool operator==(const PathSet&) const = default;
};

/// Exact jump record. Chain records carry the destination state and the
/// impulse draw U; Levy records carry J(t-), the raw mark and gamma(mark).
struct JumpRecord {
  enum class Kind { chain, levy };
  Kind kind = Kind::chain;
  double time = 0.0;
  int state = 0;
  double mark = 0.0;
  double value = 0.0;
};

/// Stored primitive columns. Everything else is derived on access.
struct PrimitiveColumn {
  enum class Kind { state, occupation, count, impulse_power, regime_power };
  Kind kind;
  int state = 0;  // 0-based; unused for Kind::state
  int order = 0;  // l for impulse_power, k for regime_power
};

/// Aligned paths of every process on the reporting grid plus jump records.
class PathBundle {
 public:
  PathBundle() = default;
  PathBundle(ScenarioConfig config, PathSet set, int n_stored);

  const ScenarioConfig& config() const { return config_; }
  const BasisSet& basis() const { return basis_; }
  const PathSet& path_set() const { return set_; }
  const std::vector<double>& times() const { return times_; }
  const std::vector<PrimitiveColumn>& columns() const { return columns_; }
  int n_paths() const { return n_stored_; }
  int n_times() const { return static_cast<int>(times_.size()); }
  int n_states() const { return config_.n_states(); }
  int impulse_orders() const { return impulse_orders_; }
  /// Highest power order with a stored column (1 without Levy jumps).
  int power_orders() const { return power_orders_; }
  bool has_chain() const { return n_states() > 1; }

  /// Column index, or -1 when the column is not stored.
  int find(PrimitiveColumn::Kind kind, int state = 0, int order = 0) const;
  double primitive(int column, int p, int t) const { return data_[offset(column, p, t)]; }
  double& primitive(int column, int p, int t) { return data_[offset(column, p, t)]; }

  int state(int p, int t) const;
  double occupation(int p, int t, int i) const;
  double count(int p, int t, int j) const;         // Phi_j
  double compensator(int p, int t, int j) const;   // phi_j
  double phi_bar(int p, int t, int j) const { return count(p, t, j) - compensator(p, t, j); }
  double psi(int p, int t, int i, int l) const;
  double psi_bar(int p, int t, int i, int l) const;
  double xbar(int p, int t) const;
  double x_full(int p, int t) const;
  /// X^(k) (k = 1 is Xbar itself).
  double power_jump(int p, int t, int k) const;
  /// int 1{J(s-) = i} dXbar^(k) on [0, t].
  double regime_teugels(int p, int t, int i, int k) const;
  /// Xbar^(k).
  double teugels(int p, int t, int k) const;
  /// H element e (raw index basis().h_indices()[e]).
  double h(int p, int t, int e) const;
  /// G_i element e of state i.
  double g(int p, int t, int i, int e) const;
  int n_h() const { return static_cast<int>(h_indices_.size()); }
  int n_g(int i) const;

  std::vector<JumpRecord> jumps(int p) const;
  void set_jumps(std::vector<std::vector<JumpRecord>> per_path);
  const std::vector<JumpRecord>& all_jumps() const { return jumps_; }
  const std::vector<std::size_t>& jump_offsets() const { return jump_offsets_; }

  /// Bitwise equality of all stored data.
  bool identical(const PathBundle& other) const;

 private:
  std::size_t offset(int column, int p, int t) const {
    return (static_cast<std::size_t>(column) * static_cast<std::size_t>(n_stored_) + static_cast<std::size_t>(p)) *
               times_.size() +
           static_cast<std::size_t>(t);
  }

  ScenarioConfig config_;
  BasisSet basis_;
  PathSet set_;
  int n_stored_ = 0;
  int impulse_orders_ = 0;
  int power_orders_ = 1;
  std::vector<double> times_;
  std::vector<PrimitiveColumn> columns_;
  std::vector<int> state_col_, occ_col_, count_col_;
  std::vector<std::vector<int>> impulse_col_, power_col_;  // [state][order-1]
  std::vector<int> h_indices_;
  Eigen::MatrixXd power_rate_;      // [state][k-1]
  Eigen::MatrixXd impulse_moment_;  // [state][l-1]
  std::vector<double> data_;
  std::vector<JumpRecord> jumps_;
  std::vector<std::size_t> jump_offsets_;
};

/// The estimation set occupies path indices [0, estimation_paths), the
/// evaluation set the next evaluation_paths indices.
PathSet estimation_set(const ScenarioConfig& c);
PathSet evaluation_set(const ScenarioConfig& c);

/// Simulates every path of `set` on `workers` threads. Path p goes to worker
/// p mod workers and writes only its own slots, so the result does not
/// depend on the worker count.
PathBundle run_scenario(const ScenarioConfig& config, const PathSet& set, int workers = 1);

/// One named column of the persisted layout, primitive or derived.
struct PersistedColumn {
  std::string process;
  int state = 0;  // 1-based, 0 when not state-specific
  int order = 0;
  int primitive = -1;  // stored column index, -1 for derived columns
};

std::vector<PersistedColumn> persisted_columns(const PathBundle& b);
double persisted_value(const PathBundle& b, const PersistedColumn& c, int p, int t);

/// Writes paths.csv, jumps.csv, paths.schema.json, coefficients.txt and
/// manifest.json into `directory` for the first `max_paths` paths.
void write_bundle(const PathBundle& b, const std::string& directory, int max_paths);

/// Reads a persisted bundle. Derived columns of every path whose id is a
/// multiple of 100 are recomputed and compared; a mismatch throws.
PathBundle read_bundle(const std::string& directory);

std::string library_version();

}  // namespace imap
