#pragma once

#include <algorithm>

#include "boltzk/common.hpp"

namespace boltzk {

/// Non-cutoff collision kernel B(v-u, sigma) = |v-u|^gamma b(cos theta) with
/// the grazing singularity regularized below theta_min:
///   b(cos theta) = b0 * theta^{-1-2s} / sin theta   on [theta_min, pi/2],
///   b = 0 outside.
struct KernelSpec {
  Real gamma     = 1.0;
  Real s         = 0.5;
  Real b0        = 1.0;
  Real theta_min = 0.2;

  void validate() const {
    std::string err;
    if (!(s > 0 && s < 1))
      err += "kernel.s: must lie in (0,1), got " + std::to_string(s) + "\n";
    if (!(gamma > std::max(Real(-3), Real(-1.5) - 2 * s)))
      err += "kernel.gamma: must exceed max(-3, -3/2-2s) = " +
             std::to_string(std::max(Real(-3), Real(-1.5) - 2 * s)) + ", got " +
             std::to_string(gamma) + "\n";
    if (!(b0 > 0)) err += "kernel.b0: must be positive\n";
    if (!(theta_min > 0 && theta_min < pi / 2))
      err += "kernel.theta_min: must lie in (0, pi/2)\n";
    if (!err.empty()) throw ConfigError(err);
  }

  bool hard() const { return gamma + 2 * s >= 0; }

  // angular factor b(cos theta), theta the angle between (v-u)/|v-u| and sigma
  Real b_of_theta(Real theta) const {
    if (theta < theta_min || theta > pi / 2) return 0;
    return b0 * std::pow(theta, -1 - 2 * s) / std::sin(theta);
  }

  Real b_of_cos(Real c) const { return b_of_theta(std::acos(std::clamp(c, Real(-1), Real(1)))); }

  std::string canonical() const {
    char buf[128];
    std::snprintf(buf, sizeof buf, "kernel(g=%.17g,s=%.17g,b0=%.17g,tmin=%.17g)", gamma, s,
                  b0, theta_min);
    return buf;
  }
};

/// B(v-u, sigma); zero when the deviation angle leaves [theta_min, pi/2].
inline Real kernel_eval(const KernelSpec& k, const Vec3& rel, const Vec3& sigma) {
  const Real r = rel.norm();
  if (r == 0) return 0;  // excluded diagonal
  const Real c = std::clamp(rel.dot(sigma) / r, Real(-1), Real(1));
  const Real b = k.b_of_cos(c);
  if (b == 0) return 0;
  return std::pow(r, k.gamma) * b;
}

}  // namespace boltzk
