#pragma once

#include <string>
#include <type_traits>
#include <variant>
#include <vector>

#include "imap/rng.hpp"

namespace imap {

struct PointMass {
  double value = 0.0;
};

/// Mass `p_first` at `first`, the rest at `second`.
struct TwoPoint {
  double first = -1.0;
  double second = 1.0;
  double p_first = 0.5;
};

struct Gaussian {
  double mean = 0.0;
  double stddev = 1.0;
};

struct Uniform {
  double lower = 0.0;
  double upper = 1.0;
};

/// Kou-type law: with probability `p_up` an Exp(eta_up) jump upwards,
/// otherwise an Exp(eta_down) jump downwards.
struct DoubleExponential {
  double p_up = 0.5;
  double eta_up = 1.0;
  double eta_down = 1.0;
};

/// Jump-size law from the closed catalog. Every entry has all moments
/// available in closed form.
class JumpDistribution {
 public:
  using Law = std::variant<PointMass, TwoPoint, Gaussian, Uniform, DoubleExponential>;

  JumpDistribution() : law_(PointMass{}) {}
  JumpDistribution(Law law);  // NOLINT(google-explicit-constructor)
  template <class T>
    requires(!std::is_same_v<std::decay_t<T>, Law> && std::is_constructible_v<Law, T>)
  JumpDistribution(T law) : JumpDistribution(Law(std::move(law))) {}  // NOLINT(google-explicit-constructor)

  double sample(Engine& eng) const;

  /// Raw moment E[xi^k], k >= 0.
  double moment(int k) const;

  /// Raw moments 0..max_order.
  std::vector<double> moments(int max_order) const;

  bool bounded_support() const;
  /// Largest |x| in the support (bounded laws only).
  double support_radius() const;

  /// Whether E exp(lambda |xi|^degree) is finite.
  bool exponential_moment_finite(double lambda, int degree) const;

  std::string name() const;
  const Law& law() const { return law_; }

 private:
  Law law_;
};

}  // namespace imap
