#pragma once
// Deterministic RNG with named substreams. The standard library's engines are
// portable but its distributions are not, so the distributions here are spelled
// out explicitly: identical seeds give identical draws on every platform.

#include <cstdint>
#include <string_view>
#include <vector>

namespace hg {

namespace detail {
inline uint64_t splitmix64(uint64_t& state) {
  state += 0x9e3779b97f4a7c15ull;
  uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

inline uint64_t hash_tag(std::string_view tag) {
  uint64_t h = 0xcbf29ce484222325ull;  // FNV-1a
  for (char c : tag) {
    h ^= static_cast<uint8_t>(c);
    h *= 0x100000001b3ull;
  }
  return h;
}
}  // namespace detail

class Rng {
 public:
  explicit Rng(uint64_t seed) : state_(seed) {
    // decorrelate trivially related seeds (0, 1, 2, ...)
    next_u64();
    next_u64();
  }

  uint64_t next_u64() { return detail::splitmix64(state_); }

  // [0, 1), 53-bit resolution
  double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  // uniform integer in [0, n), n >= 1; unbiased via rejection
  uint64_t below(uint64_t n) {
    const uint64_t threshold = (0 - n) % n;
    for (;;) {
      const uint64_t r = next_u64();
      if (r >= threshold) return r % n;
    }
  }

  // inclusive integer range
  int64_t uniform_int(int64_t lo, int64_t hi) {
    return lo + static_cast<int64_t>(below(static_cast<uint64_t>(hi - lo + 1)));
  }

  bool bernoulli(double p) { return uniform01() < p; }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (size_t i = v.size(); i > 1; --i) {
      const size_t j = static_cast<size_t>(below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

  // k distinct indices from [0, n), in draw order (partial Fisher-Yates)
  std::vector<uint32_t> sample_indices(uint32_t n, uint32_t k) {
    std::vector<uint32_t> pool(n);
    for (uint32_t i = 0; i < n; ++i) pool[i] = i;
    for (uint32_t i = 0; i < k; ++i) {
      const uint32_t j = i + static_cast<uint32_t>(below(n - i));
      std::swap(pool[i], pool[j]);
    }
    pool.resize(k);
    return pool;
  }

  // independent child stream; children with distinct tags never collide in practice
  Rng child(std::string_view tag) const {
    uint64_t s = state_ ^ detail::hash_tag(tag);
    return Rng(detail::splitmix64(s));
  }

  static uint64_t derive_seed(uint64_t base, std::string_view tag, uint64_t index = 0) {
    uint64_t s = base ^ detail::hash_tag(tag) ^ (index * 0x9e3779b97f4a7c15ull);
    return detail::splitmix64(s);
  }

 private:
  uint64_t state_;
};

}  // namespace hg
