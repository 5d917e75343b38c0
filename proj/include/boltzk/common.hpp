#pragma once

#include <array>
#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

namespace boltzk {

using Real    = double;
using Complex = std::complex<Real>;

inline constexpr Real pi = std::numbers::pi_v<Real>;

struct Vec3 {
  Real x{0}, y{0}, z{0};

  Real&       operator[](int i) { return i == 0 ? x : (i == 1 ? y : z); }
  const Real& operator[](int i) const { return i == 0 ? x : (i == 1 ? y : z); }

  Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
  Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
  Vec3 operator*(Real s) const { return {x * s, y * s, z * s}; }
  Vec3 operator-() const { return {-x, -y, -z}; }

  Real dot(const Vec3& o) const { return x * o.x + y * o.y + z * o.z; }
  Vec3 cross(const Vec3& o) const {
    return {y * o.z - z * o.y, z * o.x - x * o.z, x * o.y - y * o.x};
  }
  Real squared_norm() const { return dot(*this); }
  Real norm() const { return std::sqrt(squared_norm()); }
};

inline Vec3 operator*(Real s, const Vec3& v) { return v * s; }

// <v> = sqrt(1+|v|^2)
inline Real bracket(const Vec3& v) { return std::sqrt(Real(1) + v.squared_norm()); }

// Configuration / input problems: CLI exits 2.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Runtime numerical failures (NaN states, solver breakdowns): CLI exits 3.
struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Acceptance / verification check failures: CLI exits 4.
struct CheckError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Deterministic order-fixed compensated sum. Parallel producers write into
// per-index slots; reductions go through this so results do not depend on
// thread count.
template <class T>
T kahan_sum(const std::vector<T>& xs) {
  T s{}, c{};
  for (const T& x : xs) {
    T y = x - c;
    T t = s + y;
    c   = (t - s) - y;
    s   = t;
  }
  return s;
}

inline std::uint64_t fnv1a64(const void* data, std::size_t n,
                             std::uint64_t h = 0xcbf29ce484222325ull) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ull;
  }
  return h;
}

inline std::uint64_t fnv1a64(const std::string& s) { return fnv1a64(s.data(), s.size()); }

inline std::string hex64(std::uint64_t h) {
  static const char* d = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[i] = d[h & 0xf];
    h >>= 4;
  }
  return out;
}

// R2 low-discrepancy sequence (plastic-constant lattice) on [0,1)^3.
inline std::array<Real, 3> r2_point(std::uint64_t i) {
  constexpr Real g  = 1.2207440846057596;  // root of x^3 = x + 1
  constexpr Real a1 = 1.0 / g;
  constexpr Real a2 = 1.0 / (g * g);
  constexpr Real a3 = 1.0 / (g * g * g);
  auto frac         = [](Real x) { return x - std::floor(x); };
  return {frac(Real(0.5) + a1 * Real(i + 1)), frac(Real(0.5) + a2 * Real(i + 1)),
          frac(Real(0.5) + a3 * Real(i + 1))};
}

}  // namespace boltzk
