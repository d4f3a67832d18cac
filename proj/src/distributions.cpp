#include "imap/distributions.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "imap/errors.hpp"

namespace imap {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

double factorial(int k) {
  double f = 1.0;
  for (int i = 2; i <= k; ++i) f *= i;
  return f;
}

}  // namespace

JumpDistribution::JumpDistribution(Law law) : law_(std::move(law)) {
  std::visit(overloaded{
                 [](const PointMass&) {},
                 [](const TwoPoint& d) {
                   if (!(d.p_first >= 0.0 && d.p_first <= 1.0))
                     throw ValidationError("two_point: p_first must lie in [0,1]");
                 },
                 [](const Gaussian& d) {
                   if (!(d.stddev >= 0.0))
                     throw ValidationError("gaussian: stddev must be >= 0");
                 },
                 [](const Uniform& d) {
                   if (!(d.upper > d.lower))
                     throw ValidationError("uniform: upper must exceed lower");
                 },
                 [](const DoubleExponential& d) {
                   if (!(d.p_up >= 0.0 && d.p_up <= 1.0))
                     throw ValidationError("double_exponential: p_up must lie in [0,1]");
                   if (!(d.eta_up > 0.0 && d.eta_down > 0.0))
                     throw ValidationError("double_exponential: rates must be > 0");
                 },
             },
             law_);
}

double JumpDistribution::sample(Engine& eng) const {
  return std::visit(
      overloaded{
          [](const PointMass& d) { return d.value; },
          [&](const TwoPoint& d) { return uniform_open(eng) < d.p_first ? d.first : d.second; },
          [&](const Gaussian& d) { return d.mean + d.stddev * standard_normal(eng); },
          [&](const Uniform& d) { return d.lower + (d.upper - d.lower) * uniform_open(eng); },
          [&](const DoubleExponential& d) {
            const bool up = uniform_open(eng) < d.p_up;
            return up ? exponential(eng, d.eta_up) : -exponential(eng, d.eta_down);
          },
      },
      law_);
}

double JumpDistribution::moment(int k) const {
  if (k < 0) throw ValidationError("moment order must be >= 0");
  if (k == 0) return 1.0;
  return std::visit(
      overloaded{
          [k](const PointMass& d) { return std::pow(d.value, k); },
          [k](const TwoPoint& d) {
            return d.p_first * std::pow(d.first, k) + (1.0 - d.p_first) * std::pow(d.second, k);
          },
          [k](const Gaussian& d) {
            // m_n = mu m_{n-1} + (n-1) s^2 m_{n-2}
            double prev2 = 1.0, prev1 = d.mean;
            const double var = d.stddev * d.stddev;
            for (int n = 2; n <= k; ++n) {
              const double next = d.mean * prev1 + (n - 1) * var * prev2;
              prev2 = prev1;
              prev1 = next;
            }
            return prev1;
          },
          [k](const Uniform& d) {
            return (std::pow(d.upper, k + 1) - std::pow(d.lower, k + 1)) /
                   ((k + 1) * (d.upper - d.lower));
          },
          [k](const DoubleExponential& d) {
            const double f = factorial(k);
            const double sign = (k % 2 == 0) ? 1.0 : -1.0;
            return d.p_up * f / std::pow(d.eta_up, k) +
                   (1.0 - d.p_up) * sign * f / std::pow(d.eta_down, k);
          },
      },
      law_);
}

std::vector<double> JumpDistribution::moments(int max_order) const {
  std::vector<double> m(static_cast<std::size_t>(max_order) + 1);
  for (int k = 0; k <= max_order; ++k) m[static_cast<std::size_t>(k)] = moment(k);
  return m;
}

bool JumpDistribution::bounded_support() const {
  return std::visit(overloaded{
                        [](const PointMass&) { return true; },
                        [](const TwoPoint&) { return true; },
                        [](const Gaussian& d) { return d.stddev == 0.0; },
                        [](const Uniform&) { return true; },
                        [](const DoubleExponential&) { return false; },
                    },
                    law_);
}

double JumpDistribution::support_radius() const {
  return std::visit(
      overloaded{
          [](const PointMass& d) { return std::abs(d.value); },
          [](const TwoPoint& d) { return std::max(std::abs(d.first), std::abs(d.second)); },
          [](const Gaussian& d) {
            return d.stddev == 0.0 ? std::abs(d.mean) : std::numeric_limits<double>::infinity();
          },
          [](const Uniform& d) { return std::max(std::abs(d.lower), std::abs(d.upper)); },
          [](const DoubleExponential&) { return std::numeric_limits<double>::infinity(); },
      },
      law_);
}

bool JumpDistribution::exponential_moment_finite(double lambda, int degree) const {
  if (lambda <= 0.0 || bounded_support()) return true;
  return std::visit(
      overloaded{
          [](const PointMass&) { return true; },
          [](const TwoPoint&) { return true; },
          [](const Uniform&) { return true; },
          [&](const Gaussian& d) {
            if (degree <= 1) return true;
            if (degree == 2) return lambda < 1.0 / (2.0 * d.stddev * d.stddev);
            return false;
          },
          [&](const DoubleExponential& d) {
            if (degree > 1) return false;
            const bool up_ok = d.p_up == 0.0 || lambda < d.eta_up;
            const bool down_ok = d.p_up == 1.0 || lambda < d.eta_down;
            return up_ok && down_ok;
          },
      },
      law_);
}

std::string JumpDistribution::name() const {
  std::ostringstream os;
  std::visit(overloaded{
                 [&](const PointMass& d) { os << "point_mass(" << d.value << ")"; },
                 [&](const TwoPoint& d) {
                   os << "two_point(" << d.first << "," << d.second << ";p=" << d.p_first << ")";
                 },
                 [&](const Gaussian& d) { os << "gaussian(" << d.mean << "," << d.stddev << ")"; },
                 [&](const Uniform& d) { os << "uniform(" << d.lower << "," << d.upper << ")"; },
                 [&](const DoubleExponential& d) {
                   os << "double_exponential(p=" << d.p_up << "," << d.eta_up << ","
                      << d.eta_down << ")";
                 },
             },
             law_);
  return os.str();
}

}  // namespace imap
