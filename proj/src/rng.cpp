#include "imap/rng.hpp"

#include <cmath>
#include <numbers>

namespace imap {

double standard_normal(Engine& eng) {
  const double u1 = uniform_open(eng);
  const double u2 = uniform_open(eng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

}  // namespace imap
