// Flat-vector arithmetic, deterministic RNG streams and error types shared
// by every module in the library.
#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace foltr {

using Vec = std::vector<double>;

struct Error : std::runtime_error {
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

struct ConfigError : Error {
  explicit ConfigError(const std::string& what) : Error(what) {}
};

struct ParseError : Error {
  ParseError(const std::string& what, std::size_t line)
      : Error(what + " (line " + std::to_string(line) + ")"), line_number(line) {}
  std::size_t line_number;
};

// ---------------------------------------------------------------------------
// Vector helpers. All federated state lives in flat double vectors, so these
// few primitives carry most of the numerical load.

inline void check_same_size(const Vec& a, const Vec& b, const char* where) {
  if (a.size() != b.size()) {
    throw Error(std::string(where) + ": dimension mismatch (" +
                std::to_string(a.size()) + " vs " + std::to_string(b.size()) + ")");
  }
}

inline double dot(const Vec& a, const Vec& b) {
  check_same_size(a, b, "dot");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double l2_norm(const Vec& a) {
  double s = 0.0;
  for (double v : a) s += v * v;
  return std::sqrt(s);
}

inline double l2_distance(const Vec& a, const Vec& b) {
  check_same_size(a, b, "l2_distance");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return std::sqrt(s);
}

// y += alpha * x
inline void axpy(double alpha, const Vec& x, Vec& y) {
  check_same_size(x, y, "axpy");
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += alpha * x[i];
}

inline Vec scaled(const Vec& x, double alpha) {
  Vec r(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) r[i] = alpha * x[i];
  return r;
}

inline Vec vec_sub(const Vec& a, const Vec& b) {
  check_same_size(a, b, "vec_sub");
  Vec r(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) r[i] = a[i] - b[i];
  return r;
}

inline Vec vec_add(const Vec& a, const Vec& b) {
  check_same_size(a, b, "vec_add");
  Vec r(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) r[i] = a[i] + b[i];
  return r;
}

/// Pairwise (cascade) summation: the rounding error grows with log n instead
/// of n, which keeps aggregation results permutation-stable to ~1e-12.
inline double pairwise_sum(const double* data, std::size_t n) {
  if (n == 0) return 0.0;
  if (n <= 8) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += data[i];
    return s;
  }
  const std::size_t half = n / 2;
  return pairwise_sum(data, half) + pairwise_sum(data + half, n - half);
}

inline double pairwise_sum(const Vec& v) { return pairwise_sum(v.data(), v.size()); }

// ---------------------------------------------------------------------------
// Deterministic RNG.
//
// The engine is xoshiro256++ seeded through splitmix64. All distributions are
// implemented here rather than taken from <random> so that traces are
// bit-identical across standard libraries and hosts.

inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ull);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

/// Mixes a master seed with a stream identifier (tag plus up to three ids).
/// Every (client, round, repetition) pair gets its own stream, so thread
/// scheduling can never perturb results.
inline std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> parts) {
  std::uint64_t h = base;
  for (std::uint64_t p : parts) {
    std::uint64_t s = h ^ (p + 0x9e3779b97f4a7c15ull);
    h = splitmix64(s);
  }
  return h;
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed) {
    std::uint64_t sm = seed;
    for (auto& word : s_) word = splitmix64(sm);
  }

  std::uint64_t next_u64() {
    const std::uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

  /// Uniform double in [0, 1).
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  /// Uniform double in (0, 1); safe as a log() argument.
  double uniform_open() {
    const double u = uniform();
    return u > 0.0 ? u : 0x1.0p-53;
  }

  double uniform_range(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n). Multiply-shift; bias is below 2^-64.
  std::uint64_t uniform_int(std::uint64_t n) {
    return static_cast<std::uint64_t>(
        (static_cast<unsigned __int128>(next_u64()) * n) >> 64);
  }

  /// Standard normal via Box-Muller; the second variate of each pair is cached.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = uniform_open();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * 3.14159265358979323846 * u2;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
  }

  /// Gamma(shape, scale) via the Marsaglia-Tsang squeeze method. Shapes below
  /// one use the boost Gamma(shape+1) * U^(1/shape), which is the published
  /// extension of the same method.
  double gamma(double shape, double scale) {
    if (shape <= 0.0 || scale <= 0.0) throw Error("gamma: shape and scale must be positive");
    if (shape < 1.0) {
      const double u = uniform_open();
      return gamma(shape + 1.0, scale) * std::pow(u, 1.0 / shape);
    }
    const double d = shape - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
      double x, v;
      do {
        x = normal();
        v = 1.0 + c * x;
      } while (v <= 0.0);
      v = v * v * v;
      const double u = uniform_open();
      if (u < 1.0 - 0.0331 * x * x * x * x) return d * v * scale;
      if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v * scale;
    }
  }

  /// Fisher-Yates shuffle of [0, n) indices stored in `idx`.
  template <typename T>
  void shuffle(std::vector<T>& idx) {
    for (std::size_t i = idx.size(); i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(uniform_int(i));
      std::swap(idx[i - 1], idx[j]);
    }
  }

 private:
  static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

  std::uint64_t s_[4];
  double spare_ = 0.0;
  bool has_spare_ = false;
};

// Stream tags used with derive_seed; documented in the README so runs can be
// reproduced outside this codebase.
enum SeedTag : std::uint64_t {
  kSeedRepetition = 1,
  kSeedInit = 2,
  kSeedClientRound = 3,
  kSeedPartition = 4,
  kSeedAttack = 5,
  kSeedUnlearnRound = 6,
  kSeedDataShare = 7,
  kSeedSynthetic = 8,
  kSeedEval = 9,
};

}  // namespace foltr
