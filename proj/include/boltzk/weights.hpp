#pragma once

#include "boltzk/kernel.hpp"
#include "boltzk/velocity_grid.hpp"

namespace boltzk {

/// Velocity weight w_{l,q}: polynomial factor <v>^{l*|gamma+2s|} for l > 0,
/// stretched-exponential factor exp(q <v> / 4) for q > 0, product when both
/// are active, identically one when l = q = 0.
struct WeightSpec {
  Real ell = 0;
  Real q   = 0;

  void validate() const {
    std::string err;
    if (!(ell >= 0)) err += "weight.ell: must be >= 0\n";
    if (!(q >= 0)) err += "weight.q: must be >= 0\n";
    if (!err.empty()) throw ConfigError(err);
  }

  bool trivial() const { return ell == 0 && q == 0; }

  std::string canonical() const {
    char buf[64];
    std::snprintf(buf, sizeof buf, "w(l=%.17g,q=%.17g)", ell, q);
    return buf;
  }
};

inline Real weight_eval(const WeightSpec& w, const KernelSpec& k, const Vec3& v) {
  w.validate();
  Real out = 1;
  if (w.ell > 0) out *= std::pow(bracket(v), w.ell * std::abs(k.gamma + 2 * k.s));
  if (w.q > 0) out *= std::exp(w.q * bracket(v) / 4);
  return out;
}

inline Field weight_field(const WeightSpec& w, const KernelSpec& k, const VelocityGrid& g) {
  w.validate();
  return g.sample([&](const Vec3& v) { return weight_eval(w, k, v); });
}

// <v>^{gamma/2 + s} factor that shows up on the right of the trilinear bounds
inline Field gamma_half_weight_field(const KernelSpec& k, const VelocityGrid& g) {
  const Real e = k.gamma / 2 + k.s;
  return g.sample([&](const Vec3& v) { return std::pow(bracket(v), e); });
}

}  // namespace boltzk
