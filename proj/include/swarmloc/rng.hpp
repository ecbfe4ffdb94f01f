#pragma once

#include <cstdint>
#include <random>
#include <string_view>
#include <utility>
#include <vector>

namespace swarmloc {

// splitmix64 finalizer, used to spread seeds.
inline std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t hash_string(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

/// Derives an independent stream seed from a master seed and a list of
/// tags. Tags are hashed by value, so the result does not depend on the
/// order in which work items are scheduled.
template <typename... Tags>
std::uint64_t derive_seed(std::uint64_t master, const Tags&... tags) {
  std::uint64_t h = mix64(master);
  auto absorb = [&h](const auto& tag) {
    using T = std::decay_t<decltype(tag)>;
    if constexpr (std::is_integral_v<T>) {
      h = mix64(h ^ static_cast<std::uint64_t>(tag));
    } else {
      h = mix64(h ^ hash_string(std::string_view(tag)));
    }
  };
  (absorb(tags), ...);
  return h;
}

/// Thin wrapper around mt19937_64 with portable conversions (the standard
/// distributions are implementation-defined, which would break
/// byte-identical output across toolchains).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  // Uniform in [0, 1).
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n); n > 0.
  std::uint64_t below(std::uint64_t n) {
    const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
    std::uint64_t x;
    do {
      x = engine_();
    } while (x >= limit);
    return x % n;
  }

  bool bernoulli(double p) { return uniform() < p; }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::swap(v[i - 1], v[below(i)]);
    }
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace swarmloc
