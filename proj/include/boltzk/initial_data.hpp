#pragma once

#include <array>
#include <random>

#include "boltzk/projection.hpp"
#include "boltzk/state.hpp"

namespace boltzk {

/// Separable initial data f_hat0(k, v) = amplitude * chi(|k|) * g(v):
/// a radial profile in k times a Gaussian-weighted polynomial in v.
struct InitialDataSpec {
  enum class KProfile { GAUSSIAN, POWER };

  KProfile profile   = KProfile::GAUSSIAN;
  Real     amplitude = 1e-2;
  Real     ksigma    = 1.0;   // gaussian: exp(-|k|^2 / (2 ksigma^2))
  Real     kexp      = 1.0;   // power bump: |k|^-kexp on 0 < |k| <= kcut
  Real     kcut      = 1e30;

  Real                c0 = 1;            // g = (c0 + cv.v + c2 |v|^2) sqrt(mu)
  std::array<Real, 3> cv{0.3, 0, 0};
  Real                c2 = 0.1;
  bool                micro_only    = false;  // project g off the conserved fields
  bool                random_phases = false;  // conjugate-symmetric random phases
  std::uint64_t       seed          = 1;

  void validate() const {
    if (!std::isfinite(amplitude) || amplitude < 0)
      throw ConfigError("amplitude must be finite and nonnegative");
    if (profile == KProfile::GAUSSIAN && !(ksigma > 0))
      throw ConfigError("ksigma must be positive");
    if (profile == KProfile::POWER && !(kexp >= 0))
      throw ConfigError("kexp must be nonnegative");
    if (!(kcut > 0)) throw ConfigError("kcut must be positive");
  }
};

inline Real k_profile(const InitialDataSpec& sp, Real k) {
  if (sp.profile == InitialDataSpec::KProfile::GAUSSIAN)
    return std::exp(-k * k / (2 * sp.ksigma * sp.ksigma));
  if (k == 0 || k > sp.kcut) return 0;  // the power bump vanishes at k = 0
  return std::pow(k, -sp.kexp);
}

inline Field velocity_profile(const InitialDataSpec& sp, const VelocityGrid& g) {
  Field out(g.size());
  for (int i = 0; i < g.size(); ++i) {
    const Vec3 v = g.node(i);
    out[i]       = (sp.c0 + sp.cv[0] * v.x + sp.cv[1] * v.y + sp.cv[2] * v.z +
              sp.c2 * v.squared_norm()) *
             std::sqrt(maxwellian(v));
  }
  if (sp.micro_only) {
    const MacroProjector proj(g);
    out = proj.micro(out);
  }
  return out;
}

/// Build the initial state. On a lattice the conjugate symmetry
/// f_hat(-k) = conj f_hat(k) holds exactly: phases are drawn once per
/// conjugate pair (in ascending index order, so the draw sequence is
/// reproducible) and the k = 0 mode stays real.
inline SpectralState make_initial_state(const InitialDataSpec& sp, const KGrid& kg,
                                        const VelocityGrid& vg) {
  sp.validate();
  SpectralState s(kg, vg);
  const Field   g = velocity_profile(sp, vg);

  if (!kg.is_lattice()) {
    for (int i = 0; i < kg.size(); ++i) {
      const Real chi = sp.amplitude * k_profile(sp, kg.knorm(i));
      for (int v = 0; v < vg.size(); ++v) s.modes[i][v] = chi * g[v];
    }
    return s;
  }

  std::mt19937_64                      rng(sp.seed);
  std::uniform_real_distribution<Real> uang(0, 2 * pi);
  for (int i = 0; i < kg.size(); ++i) {
    const int j = kg.neg_index(i);
    if (j < i) continue;  // filled together with its conjugate partner
    const Real chi = sp.amplitude * k_profile(sp, kg.knorm(i));
    Real       th  = 0;
    if (sp.random_phases && j != i) th = uang(rng);
    const Complex c = std::polar(chi, th);
    for (int v = 0; v < vg.size(); ++v) {
      s.modes[i][v] = c * g[v];
      if (j != i) s.modes[j][v] = std::conj(c) * g[v];
    }
  }
  return s;
}

}  // namespace boltzk
