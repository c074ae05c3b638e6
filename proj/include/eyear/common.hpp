#pragma once

// Shared basics: error types, 2-D point, deterministic RNG, small utilities.

#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

namespace eyear {

inline constexpr double kPi = 3.14159265358979323846;

// ---------------------------------------------------------------------------
// Errors

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ShapeMismatch : Error {
  using Error::Error;
};
struct NotScalar : Error {
  using Error::Error;
};
struct ParseError : Error {
  using Error::Error;
};
struct ValidationError : Error {
  using Error::Error;
};
struct TooFewScenes : Error {
  using Error::Error;
};
struct TooFewPoints : Error {
  using Error::Error;
};
struct LengthMismatch : Error {
  using Error::Error;
};
struct EmptySequence : Error {
  using Error::Error;
};
struct NegativeDt : Error {
  using Error::Error;
};
struct NonMonotonicTime : Error {
  using Error::Error;
};
struct DivergedLoss : Error {
  using Error::Error;
};

// ---------------------------------------------------------------------------
// 2-D point

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  Vec2() = default;
  Vec2(double x_, double y_) : x(x_), y(y_) {}

  Vec2 operator+(const Vec2& o) const { return {x + o.x, y + o.y}; }
  Vec2 operator-(const Vec2& o) const { return {x - o.x, y - o.y}; }
  Vec2 operator*(double c) const { return {x * c, y * c}; }
  bool operator==(const Vec2& o) const { return x == o.x && y == o.y; }

  double norm() const { return std::sqrt(x * x + y * y); }
};

inline double distance(const Vec2& a, const Vec2& b) { return (a - b).norm(); }

// ---------------------------------------------------------------------------
// FNV-1a 64-bit hash; used for artifact hashes and derived seeds.

inline std::uint64_t fnv1a64(const void* data, std::size_t len,
                             std::uint64_t h = 0xcbf29ce484222325ull) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < len; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ull;
  }
  return h;
}

inline std::uint64_t fnv1a64(std::string_view s) {
  return fnv1a64(s.data(), s.size());
}

// ---------------------------------------------------------------------------
// Deterministic RNG. mt19937_64 supplies raw bits; uniform/normal conversions
// are done by hand so streams do not depend on the standard library's
// distribution implementations.

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  // Stream derived from a root seed plus a purpose tag and indices. Keeps
  // every stochastic choice reproducible without carrying engine state around.
  static Rng derive(std::uint64_t seed, std::string_view purpose,
                    std::uint64_t a = 0, std::uint64_t b = 0) {
    std::uint64_t h = fnv1a64(purpose);
    h = fnv1a64(&seed, sizeof(seed), h);
    h = fnv1a64(&a, sizeof(a), h);
    h = fnv1a64(&b, sizeof(b), h);
    return Rng(h);
  }

  std::uint64_t next_u64() { return gen_(); }

  // [0,1) with 53-bit resolution
  double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    // Box-Muller on hand-rolled uniforms
    double u1 = 0.0;
    do {
      u1 = uniform();
    } while (u1 <= 0.0);
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * kPi * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  // [0,n) without modulo bias
  std::uint64_t below(std::uint64_t n) {
    const std::uint64_t lim = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % n;
    std::uint64_t v;
    do {
      v = gen_();
    } while (v >= lim);
    return v % n;
  }

  template <class T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::swap(v[i - 1], v[below(i)]);
    }
  }

 private:
  std::mt19937_64 gen_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

// ---------------------------------------------------------------------------
// Parallelism cap: EYEAR_THREADS, else hardware concurrency.

inline unsigned thread_cap() {
  if (const char* env = std::getenv("EYEAR_THREADS")) {
    const long v = std::strtol(env, nullptr, 10);
    if (v >= 1) return static_cast<unsigned>(v);
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? hw : 1;
}

inline double clamp01(double v) { return v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v); }

}  // namespace eyear
