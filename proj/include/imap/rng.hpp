#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace imap {

/// Independent random streams drawn for every simulated path.
enum class Stream : std::uint64_t {
  chain = 1,
  levy_jumps = 2,
  brownian = 3,
  bridge = 4,
  impulse = 5,
};

/// SplitMix64 finalizer. Stateless, so seeds can be derived in any order.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Seed of path `path_index` under `master_seed`.
constexpr std::uint64_t path_seed(std::uint64_t master_seed,
                                  std::uint64_t path_index) noexcept {
  return mix64(mix64(master_seed) ^ mix64(path_index + 0x632be59bd9b4e019ULL));
}

/// Seed of one named stream below a path (or module) seed.
constexpr std::uint64_t stream_seed(std::uint64_t seed, Stream s) noexcept {
  return mix64(seed ^ mix64(static_cast<std::uint64_t>(s) * 0xd1b54a32d192ed03ULL));
}

using Engine = std::mt19937_64;

inline Engine make_engine(std::uint64_t seed) { return Engine(seed); }

/// Uniform on the open interval (0, 1); never returns 0 so log() is safe.
inline double uniform_open(Engine& eng) {
  constexpr double scale = 1.0 / 9007199254740992.0;  // 2^-53
  return (static_cast<double>(eng() >> 11) + 0.5) * scale;
}

/// Standard normal via Box-Muller without caching, so every call consumes
/// exactly two engine outputs and prefixes of a stream are reproducible.
double standard_normal(Engine& eng);

inline double exponential(Engine& eng, double rate) {
  return -std::log(uniform_open(eng)) / rate;
}

}  // namespace imap
