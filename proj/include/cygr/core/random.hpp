#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>
#include <vector>

namespace cygr {

/// Counter-based deterministic stream. Every random draw in the system is
/// derived from (master seed, purpose tag, counter), so streams are
/// independent of evaluation order and resume exactly after checkpoint reload.
class Rng {
 public:
  Rng(uint64_t master_seed, std::string_view tag, uint64_t counter = 0) {
    uint64_t h = 0xcbf29ce484222325ull;  // FNV-1a over the tag
    for (char c : tag) {
      h ^= static_cast<unsigned char>(c);
      h *= 0x100000001b3ull;
    }
    state_ = mix(mix(master_seed) ^ mix(h) ^ mix(counter ^ 0x9e3779b97f4a7c15ull));
  }

  uint64_t next_u64() {
    state_ += 0x9e3779b97f4a7c15ull;
    return mix(state_);
  }

  /// uniform in [2^-53, 1)
  double uniform() {
    double u = static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    return u > 0 ? u : 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  double normal() {
    double u1 = uniform(), u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
  }

  int64_t uniform_int(int64_t n) { return static_cast<int64_t>(next_u64() % static_cast<uint64_t>(n)); }

  template <class T>
  void shuffle(std::vector<T>& v) {
    for (int64_t i = static_cast<int64_t>(v.size()) - 1; i > 0; --i)
      std::swap(v[i], v[uniform_int(i + 1)]);
  }

  std::vector<double> normals(int64_t n) {
    std::vector<double> out(n);
    for (double& x : out) x = normal();
    return out;
  }

 private:
  static uint64_t mix(uint64_t z) {
    z ^= z >> 30;
    z *= 0xbf58476d1ce4e5b9ull;
    z ^= z >> 27;
    z *= 0x94d049bb133111ebull;
    z ^= z >> 31;
    return z;
  }
  uint64_t state_;
};

}  // namespace cygr
