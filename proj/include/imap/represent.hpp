#pragma once

#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "imap/bundle.hpp"
#include "imap/stats.hpp"

namespace imap {

/// x^g y^p z^b with x = Xbar(T), y = Phibar_j(T), z = Psibar_i^(1)(T).
struct Monomial {
  double coeff = 1.0;
  int g = 0;
  int p = 0;
  int j = 0;
  int b = 0;
  int i = 0;
};

/// Terminal payoff from the catalog.
struct PayoffSpec {
  enum class Kind { terminal_linear, terminal_square, terminal_count, terminal_impulse, indicator, polynomial };
  Kind kind = Kind::terminal_linear;
  int state = 0;  // 0-based
  std::vector<Monomial> terms;

  static PayoffSpec linear() { return {Kind::terminal_linear, 0, {}}; }
  static PayoffSpec square() { return {Kind::terminal_square, 0, {}}; }
  static PayoffSpec count(int j) { return {Kind::terminal_count, j, {}}; }
  static PayoffSpec impulse(int i) { return {Kind::terminal_impulse, i, {}}; }
  static PayoffSpec indicator(int i) { return {Kind::indicator, i, {}}; }
  /// Degree of each term is capped at 4; an empty sum is the zero payoff.
  static PayoffSpec polynomial(std::vector<Monomial> terms) { return {Kind::polynomial, 0, std::move(terms)}; }

  /// Parses "linear", "square", "count:J", "impulse:I", "indicator:I" and
  /// "zero" (states 1-based).
  static PayoffSpec parse(const std::string& text);

  void validate(const PathBundle& b) const;
  double evaluate(const PathBundle& b, int p) const;
  std::string name() const;
};

struct RepresentOptions {
  /// Reporting-grid indices of the bucket edges, first 0, last the horizon.
  /// Empty means every reporting step is a bucket.
  std::vector<int> edges;
  /// Features are read this many buckets late. Only the look-ahead canary
  /// sets a nonzero value; replication always uses left endpoints.
  int feature_shift = 0;
  double drop_tol = 1e-10;
};

/// Integrands over the raw martingales, either against
/// [Xbar^(1..K), Phibar_1..N, Psibar_i^(1..L)] (Xbar form) or with the first
/// slot replaced by the compensated full process X (X form).
struct RepresentationEstimate {
  enum class Form { xbar, x };
  Form form = Form::xbar;
  std::string payoff;
  std::string config_hash;
  PathSet paths;
  int K = 1;
  int L = 0;
  int feature_shift = 0;
  std::vector<int> edges;
  std::vector<std::string> features;
  std::vector<std::string> integrators;
  /// Conditional-expectation coefficients on the features, one per edge
  /// except the last (where M = F).
  std::vector<Eigen::VectorXd> m_coefficients;
  /// Per bucket: feature x integrator coefficient matrix.
  std::vector<Eigen::MatrixXd> integrand_coefficients;
  /// Per bucket: robust covariance of the coefficients (flattened feature
  /// major) and the mean of the features they were fitted on. The reported
  /// integrand value is the path average of h = features . beta.
  std::vector<Eigen::MatrixXd> coefficient_cov;
  std::vector<Eigen::VectorXd> feature_mean;
  std::vector<std::vector<double>> integrand_mean;    // [bucket][integrator]
  std::vector<std::vector<double>> integrand_stderr;  // [bucket][integrator]
  std::vector<double> condition_numbers;              // per bucket
  std::vector<std::vector<std::string>> dropped;      // per bucket
  double residual = 0.0;  // in-sample relative L2 replication error
  double residual_stderr = 0.0;

  /// Columnar text: bucket,basis_element,integrand_estimate,stderr.
  std::string table() const;
};

RepresentationEstimate estimate_predictable_representation(const PathBundle& bundle, const PayoffSpec& payoff,
                                                           int K, int L, const RepresentOptions& opt = {});

/// Path values of one estimated integrand in one bucket, read from the
/// features at the bucket's left edge.
std::vector<double> integrand_path_values(const RepresentationEstimate& e, const PathBundle& bundle, int bucket,
                                          int slot);

/// Converts between the Xbar form and the X form: the X-slot integrand is
/// unchanged and every Psibar_i^(1) integrand moves by it.
RepresentationEstimate to_x_form(const RepresentationEstimate& e);
RepresentationEstimate to_xbar_form(const RepresentationEstimate& e);

struct ReplicationReport {
  std::string payoff;
  std::string config_hash;
  int n_paths = 0;
  double relative_error = 0.0;  // absolute when the payoff is identically zero
  double stderr_ = 0.0;
  double payoff_rms = 0.0;
  std::vector<double> replicated;  // per path
};

/// Out-of-sample replication. Refuses a bundle whose paths overlap the
/// estimation set or whose config differs.
ReplicationReport replicate(const RepresentationEstimate& e, const PathBundle& bundle, const PayoffSpec& payoff);

/// Relative L2 distance sqrt(E (F - G)^2 / E F^2) with a delta-method stderr.
std::pair<double, double> relative_l2_error(const std::vector<double>& f, const std::vector<double>& g);

struct PolyTarget {
  int g = 0;
  int p = 0;
  int b = 0;
  int i = 0;  // 0-based
  int j = 0;
};

struct PolyOracleLevel {
  double dt = 0.0;
  double max_error = 0.0;
  double rms_error = 0.0;
  double lhs_rms = 0.0;
  double relative_rms() const { return lhs_rms > 0.0 ? rms_error / lhs_rms : rms_error; }
  std::vector<std::pair<std::string, double>> term_rms;  // RMS of each reconstruction term
};

struct PolyOracleReport {
  PolyTarget target;
  std::vector<PolyOracleLevel> levels;
  /// RMS errors never increase from one level to the next, allowing `floor`
  /// of absolute slack for roundoff-level errors.
  bool nonincreasing(double floor) const;
  std::string table() const;  // dt,g,p,b,max_err,rms_err
};

/// Reconstructs Xbar^g Phibar_j^p Psibar_i^b at the horizon from stochastic
/// integrals against Xbar^(k), Phibar_j and Psibar_i^(r) plus Lebesgue terms,
/// on freshly simulated paths of `set` at each step in `dts` (shared
/// randomness across steps). Requires 1 <= g + p + b <= 3.
std::vector<PolyOracleReport> poly_representation_oracle(const ScenarioConfig& config, const PathSet& set,
                                                         const std::vector<PolyTarget>& targets,
                                                         const std::vector<double>& dts, int workers = 1);

/// Every (g, p, b) with 1 <= g + p + b <= 3 and every relevant (i, j).
std::vector<PolyTarget> all_poly_targets(int n_states);

struct ChaosReport {
  std::vector<std::string> regressors;
  Eigen::VectorXd coefficients;
  double r_squared = 0.0;
};

/// Projects a payoff on the chaos elements of order <= 2 built from the
/// basis family: 1, B_a(T) and the discrete iterated integrals
/// sum_t B_a(t) dB_b(t).
ChaosReport chaos_projection(const PathBundle& bundle, const std::function<double(int)>& payoff);

}  // namespace imap
