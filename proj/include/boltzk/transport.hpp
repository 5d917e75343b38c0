#pragma once

#include "boltzk/projection.hpp"
#include "boltzk/velocity_grid.hpp"

namespace boltzk {

/// The (real) transport symbol v . k per velocity node.
inline Field transport_phase(const VelocityGrid& g, const Vec3& k) {
  Field p(g.size());
  for (int i = 0; i < g.size(); ++i) p[i] = g.node(i).dot(k);
  return p;
}

/// i (v . k) f, the Fourier transport term. Pointwise multiplication by an
/// imaginary diagonal symbol, hence skew-adjoint in L2_v.
inline ComplexField transport_apply(const VelocityGrid& g, const Vec3& k,
                                    const ComplexField& f) {
  const Field  p = transport_phase(g, k);
  ComplexField out(g.size());
  for (int i = 0; i < g.size(); ++i)
    out[i] = Complex(-p[i] * f[i].imag(), p[i] * f[i].real());
  return out;
}

/// Exact transport flow e^{-i (v.k) t} f0: the oracle for transport-only runs.
inline ComplexField transport_exact(const VelocityGrid& g, const Vec3& k,
                                    const ComplexField& f0, Real t) {
  const Field  p = transport_phase(g, k);
  ComplexField out(g.size());
  for (int i = 0; i < g.size(); ++i) out[i] = std::polar(Real(1), -p[i] * t) * f0[i];
  return out;
}

/// The Fourier multiplier symbol |k| / sqrt(1 + |k|^2).
inline Real multiplier(const Vec3& k) {
  const Real kk = k.squared_norm();
  return std::sqrt(kk / (1 + kk));
}

inline Complex multiplier_apply(const Vec3& k, const Complex& x) {
  return multiplier(k) * x;
}

inline MacroCoeffs multiplier_apply(const Vec3& k, const MacroCoeffs& c) {
  const Real  m = multiplier(k);
  MacroCoeffs out;
  out.a = m * c.a;
  for (int j = 0; j < 3; ++j) out.b[j] = m * c.b[j];
  out.c = m * c.c;
  return out;
}

}  // namespace boltzk
