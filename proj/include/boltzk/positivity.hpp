#pragma once

#include "boltzk/state.hpp"

namespace boltzk {

struct PositivityReport {
  Real min_value = 0;  // min over samples of F = mu + sqrt(mu) f
  Vec3 argmin_x{};
  int  argmin_v = -1;
  int  xsamples = 0;
};

/// Reconstruct F = mu + sqrt(mu) f at a low-discrepancy set of positions in
/// the spatial period (2 pi / dk)^3 -- every velocity node at every sampled
/// x -- and report the minimum with its location. Physical solutions stay
/// nonnegative; an interpolation or integration defect shows up here as a
/// negative excursion far beyond rounding.
inline PositivityReport reconstruct_positivity(const SpectralState& s, int xsamples) {
  const KGrid& kg = *s.kgrid;
  if (!kg.is_lattice())
    throw ConfigError("positivity reconstruction requires a lattice k grid");
  if (xsamples < 1) throw ConfigError("xsamples must be at least 1");

  const VelocityGrid& vg     = *s.vgrid;
  const int           nk     = kg.size();
  const int           nv     = vg.size();
  const Real          period = 2 * pi / kg.spacing();
  const Real          dk3    = std::pow(kg.spacing(), 3);
  const Field         mu     = maxwellian_field(vg);
  const Field         sq     = sqrt_mu_field(vg);

  PositivityReport rep;
  rep.xsamples  = xsamples;
  rep.min_value = std::numeric_limits<Real>::infinity();

  std::vector<Complex> ph(nk);
  for (int m = 0; m < xsamples; ++m) {
    const auto u = r2_point(std::uint64_t(m));
    const Vec3 x{u[0] * period, u[1] * period, u[2] * period};
    for (int i = 0; i < nk; ++i)
      ph[i] = dk3 * std::polar(Real(1), kg.node(i).dot(x));
    for (int v = 0; v < nv; ++v) {
      Real f = 0;
      for (int i = 0; i < nk; ++i) {
        const Complex& c = s.modes[i][v];
        f += ph[i].real() * c.real() - ph[i].imag() * c.imag();
      }
      const Real F = mu[v] + sq[v] * f;
      if (F < rep.min_value) {
        rep.min_value = F;
        rep.argmin_x  = x;
        rep.argmin_v  = v;
      }
    }
  }
  return rep;
}

}  // namespace boltzk
