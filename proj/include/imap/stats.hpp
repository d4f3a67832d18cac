#pragma once

#include <functional>
#include <string>
#include <vector>

#include "imap/bundle.hpp"

namespace imap {

/// A scalar process read from a bundle, value(path, time index).
struct ProcessView {
  std::string name;
  std::function<double(int, int)> value;
};

/// Phibar_j, Psibar_i^(l) for l <= max_impulse_order and Xbar^(k) for
/// k <= max_power_order, in that order.
std::vector<ProcessView> compensated_processes(const PathBundle& b, int max_power_order, int max_impulse_order);

/// H and G elements, H first.
std::vector<ProcessView> basis_processes(const PathBundle& b);

struct MeanTest {
  std::string process;
  std::string kind;  // "mean", "increment|M>0" or "increment|M<0"
  double time = 0.0;
  double mean = 0.0;
  double stderr_ = 0.0;
  double z = 0.0;
  bool flagged = false;
};

struct MartingaleReport {
  double threshold = 4.0;
  int n_paths = 0;
  std::vector<MeanTest> tests;

  int flags() const;
  bool clear() const { return flags() == 0; }
  /// Columnar text: process,kind,time,mean,stderr,z,flag.
  std::string table() const;
};

/// z-test of the sample mean of every view at every probe time, plus the
/// sign-conditioned increment probe between consecutive probe times.
/// Refuses fewer than `min_paths` paths.
MartingaleReport martingale_test(const PathBundle& b, const std::vector<ProcessView>& views,
                                 const std::vector<int>& probe_times, double threshold = 4.0,
                                 int min_paths = 10000);

/// All reporting times except t = 0.
std::vector<int> default_probe_times(const PathBundle& b);

struct MomentEntry {
  std::string a, b;
  double value = 0.0;
  double stderr_ = 0.0;
  double target = 0.0;
  bool flagged = false;
};

struct OrthogonalityReport {
  double time = 0.0;
  int n_paths = 0;
  std::vector<std::string> names;
  std::vector<std::vector<double>> second_moments;
  std::vector<std::vector<double>> stderrs;
  std::vector<MomentEntry> entries;  // upper triangle including the diagonal

  int flags() const;
  bool clear() const { return flags() == 0; }
  std::string table() const;
};

/// Sample second-moment matrix of the basis values at t = 1 (or the horizon
/// when shorter). Off-diagonals are flagged beyond threshold * stderr;
/// diagonals beyond diag_tol of their target (1 for G, t for H).
OrthogonalityReport orthogonality_test(const PathBundle& b, double threshold = 4.0, double diag_tol = 0.05);

}  // namespace imap
