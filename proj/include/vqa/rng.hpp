#pragma once

#include <cstdint>
#include <string_view>
#include <utility>

namespace vqa {

// splitmix64 step; used for seeding and for mixing keys into stream seeds.
inline uint64_t splitmix64(uint64_t& state) {
  uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline uint64_t fnv1a64(std::string_view s) {
  uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

// xoshiro256++ (Blackman & Vigna), seeded through splitmix64. Chosen because
// the algorithm is published and produces identical streams on every platform,
// which the augmentation and training pipelines rely on for reproducibility.
class Rng {
 public:
  explicit Rng(uint64_t seed) {
    uint64_t sm = seed;
    for (auto& w : s_) w = splitmix64(sm);
  }

  uint64_t next_u64() {
    const uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
    const uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

  // Uniform in [0, 1), 53-bit resolution.
  double uniform() { return double(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform in [0, n); multiply-shift bounding (deterministic, bias < 2^-64).
  uint64_t below(uint64_t n) {
    return uint64_t((static_cast<unsigned __int128>(next_u64()) * n) >> 64);
  }

  template <typename V>
  void shuffle(V& v) {
    for (size_t i = v.size(); i > 1; --i) {
      std::swap(v[i - 1], v[below(i)]);
    }
  }

 private:
  static uint64_t rotl(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }
  uint64_t s_[4];
};

// Independent per-key substreams, e.g. one stream per dataset row. Splitting
// by hash keeps results independent of processing order.
inline uint64_t stream_seed(uint64_t seed, std::string_view key) {
  uint64_t st = seed ^ fnv1a64(key);
  return splitmix64(st);
}

inline uint64_t stream_seed(uint64_t seed, uint64_t key) {
  uint64_t st = seed ^ (key * 0x9e3779b97f4a7c15ULL);
  return splitmix64(st);
}

}  // namespace vqa
