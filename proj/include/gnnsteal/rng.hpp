#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <string_view>
#include <vector>

namespace gnnsteal {

/// FNV-1a over a byte string; used to derive per-cell / per-epoch seeds as a
/// pure function of (base seed, tags). Stable across platforms.
inline std::uint64_t fnv1a(std::string_view s, std::uint64_t h = 0xcbf29ce484222325ull) {
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

inline std::uint64_t mix_seed(std::uint64_t base, std::string_view tag) {
  std::uint64_t h = fnv1a(tag);
  // splitmix-style final avalanche over base ^ tag-hash
  std::uint64_t z = base ^ h;
  z += 0x9e3779b97f4a7c15ull;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

inline std::uint64_t mix_seed(std::uint64_t base, std::string_view tag, std::uint64_t k) {
  return mix_seed(mix_seed(base, tag), std::to_string(k));
}

/// Seeded generator with hand-rolled distributions. std::* distributions are
/// implementation-defined; these are not, so identical seeds give identical
/// streams on every platform.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t u64() { return engine_(); }

  /// Uniform in [0, n). n must be > 0.
  std::size_t index(std::size_t n) { return static_cast<std::size_t>(u64() % n); }

  /// Uniform double in [0, 1).
  double uniform() { return static_cast<double>(u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  bool bernoulli(double p) { return uniform() < p; }

  /// Box-Muller; caches the spare draw.
  double normal(double mu = 0.0, double sigma = 1.0) {
    if (has_spare_) {
      has_spare_ = false;
      return mu + sigma * spare_;
    }
    double u1 = 0.0;
    while (u1 <= 1e-300) u1 = uniform();
    double u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double a = 2.0 * M_PI * u2;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return mu + sigma * r * std::cos(a);
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::swap(v[i - 1], v[index(i)]);
    }
  }

  /// k distinct indices from [0, n), uniform, without replacement.
  std::vector<int> sample_indices(int n, int k) {
    if (k >= n) {
      std::vector<int> all(n);
      std::iota(all.begin(), all.end(), 0);
      return all;
    }
    // partial Fisher-Yates on an index vector
    std::vector<int> pool(n);
    std::iota(pool.begin(), pool.end(), 0);
    for (int i = 0; i < k; ++i) {
      std::size_t j = i + index(pool.size() - i);
      std::swap(pool[i], pool[j]);
    }
    pool.resize(k);
    return pool;
  }

  /// k distinct indices, probability proportional to weights[i] (>=0),
  /// without replacement. Weights need not be normalized.
  std::vector<int> sample_weighted(const std::vector<double>& weights, int k) {
    int n = static_cast<int>(weights.size());
    if (k >= n) {
      std::vector<int> all(n);
      std::iota(all.begin(), all.end(), 0);
      return all;
    }
    std::vector<double> w = weights;
    std::vector<int> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::vector<int> out;
    out.reserve(k);
    double total = std::accumulate(w.begin(), w.end(), 0.0);
    int remaining = n;
    for (int draw = 0; draw < k && remaining > 0; ++draw) {
      if (total <= 0.0) {
        // all remaining weights zero: fall back to uniform over the rest
        std::size_t j = index(remaining);
        out.push_back(idx[j]);
        std::swap(idx[j], idx[remaining - 1]);
        std::swap(w[j], w[remaining - 1]);
        --remaining;
        continue;
      }
      double target = uniform() * total;
      double acc = 0.0;
      int pick = remaining - 1;
      for (int j = 0; j < remaining; ++j) {
        acc += w[j];
        if (target < acc) {
          pick = j;
          break;
        }
      }
      out.push_back(idx[pick]);
      total -= w[pick];
      std::swap(idx[pick], idx[remaining - 1]);
      std::swap(w[pick], w[remaining - 1]);
      --remaining;
    }
    return out;
  }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace gnnsteal
