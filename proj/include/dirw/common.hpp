#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace dirw {

// ---------------------------------------------------------------------------
// Error types. The CLI maps these onto distinct exit codes.
// ---------------------------------------------------------------------------

struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

struct IoError : std::runtime_error {
  explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

struct MalformedHeaderError : IoError {
  explicit MalformedHeaderError(const std::string& msg) : IoError(msg) {}
};

struct TruncatedPayloadError : IoError {
  explicit TruncatedPayloadError(const std::string& msg) : IoError(msg) {}
};

struct DimensionMismatchError : IoError {
  explicit DimensionMismatchError(const std::string& msg) : IoError(msg) {}
};

struct EvalError : std::runtime_error {
  explicit EvalError(const std::string& msg) : std::runtime_error(msg) {}
};

struct DomainError : EvalError {
  explicit DomainError(const std::string& msg) : EvalError(msg) {}
};

struct LocationError : EvalError {
  explicit LocationError(const std::string& msg) : EvalError(msg) {}
};

struct MeshInitError : EvalError {
  explicit MeshInitError(const std::string& msg) : EvalError(msg) {}
};

// ---------------------------------------------------------------------------
// Fixed 3-slot vector used for both 2D and 3D world geometry; in 2D the last
// component stays zero. Containers carry the runtime dimension.
// ---------------------------------------------------------------------------

struct Vec3 {
  double x{0.0};
  double y{0.0};
  double z{0.0};

  double& operator[](int a) { return a == 0 ? x : (a == 1 ? y : z); }
  double operator[](int a) const { return a == 0 ? x : (a == 1 ? y : z); }

  Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
  Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
  Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
  Vec3& operator+=(const Vec3& o) {
    x += o.x;
    y += o.y;
    z += o.z;
    return *this;
  }
  Vec3& operator-=(const Vec3& o) {
    x -= o.x;
    y -= o.y;
    z -= o.z;
    return *this;
  }

  double dot(const Vec3& o) const { return x * o.x + y * o.y + z * o.z; }
  double norm2() const { return dot(*this); }
  double norm() const { return std::sqrt(norm2()); }

  bool finite() const {
    return std::isfinite(x) && std::isfinite(y) && std::isfinite(z);
  }
};

inline Vec3 operator*(double s, const Vec3& v) { return v * s; }

// World-space point in millimeters.
using WorldPoint = Vec3;

// ---------------------------------------------------------------------------
// Portable deterministic RNG. Distributions are hand-rolled so that runs are
// bit-reproducible across standard library implementations.
// ---------------------------------------------------------------------------

class Rng {
public:
  explicit Rng(std::uint64_t seed = 0) { reseed(seed); }

  void reseed(std::uint64_t seed) {
    // splitmix64 scramble of the seed into the xoshiro state
    state_ = seed;
    for (auto& s : xs_) s = splitmix();
    have_gauss_ = false;
  }

  std::uint64_t next_u64() {
    // xoshiro256**
    const std::uint64_t result = rotl(xs_[1] * 5, 7) * 9;
    const std::uint64_t t = xs_[1] << 17;
    xs_[2] ^= xs_[0];
    xs_[3] ^= xs_[1];
    xs_[1] ^= xs_[2];
    xs_[0] ^= xs_[3];
    xs_[2] ^= t;
    xs_[3] = rotl(xs_[3], 45);
    return result;
  }

  // uniform in [0, 1)
  double uniform() { return (next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // uniform integer in [0, n)
  std::size_t uniform_index(std::size_t n) {
    return static_cast<std::size_t>(uniform() * static_cast<double>(n)) % n;
  }

  // standard normal via Box-Muller, second value cached
  double normal() {
    if (have_gauss_) {
      have_gauss_ = false;
      return gauss_;
    }
    double u1 = 0.0;
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * 3.14159265358979323846 * u2;
    gauss_ = r * std::sin(a);
    have_gauss_ = true;
    return r * std::cos(a);
  }

  // derive an independent stream, e.g. per repetition or per inner run
  std::uint64_t derive(std::uint64_t salt) {
    std::uint64_t s = state_ ^ (0x9e3779b97f4a7c15ULL * (salt + 1));
    s ^= s >> 30;
    s *= 0xbf58476d1ce4e5b9ULL;
    s ^= s >> 27;
    s *= 0x94d049bb133111ebULL;
    return s ^ (s >> 31);
  }

private:
  static std::uint64_t rotl(std::uint64_t v, int k) {
    return (v << k) | (v >> (64 - k));
  }

  std::uint64_t splitmix() {
    state_ += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  std::uint64_t state_{0};
  std::array<std::uint64_t, 4> xs_{};
  bool have_gauss_{false};
  double gauss_{0.0};
};

}  // namespace dirw
