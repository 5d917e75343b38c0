#pragma once

#include <Eigen/LU>
#include <vector>

#include "boltzk/operator_matrix.hpp"
#include "boltzk/state.hpp"
#include "boltzk/transport.hpp"

namespace boltzk {

/// Least-squares slope of log y against t over the window [t_lo, t_hi].
inline Real fit_log_slope(const std::vector<Real>& t, const std::vector<Real>& y,
                          Real t_lo, Real t_hi) {
  Real sx = 0, sy = 0, sxx = 0, sxy = 0;
  int  n = 0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (t[i] < t_lo || t[i] > t_hi || !(y[i] > 0)) continue;
    const Real ly = std::log(y[i]);
    sx += t[i];
    sy += ly;
    sxx += t[i] * t[i];
    sxy += t[i] * ly;
    ++n;
  }
  if (n < 2) throw NumericalError("log-slope fit needs at least two positive samples");
  const Real var = n * sxx - sx * sx;
  if (var <= 0) throw NumericalError("log-slope fit window is degenerate");
  return (n * sxy - sx * sy) / var;
}

struct EnvelopePoint {
  Real              knorm = 0;
  std::vector<Real> times;   // sample times, 0 .. t_end
  std::vector<Real> norms;   // ||e^{-t (i v.k + L)} f0||_{L2_v}
  Real              lambda = 0;  // fitted early-time decay rate (positive = decay)
};

struct EnvelopeData {
  std::vector<EnvelopePoint> points;  // one per radius
};

/// Propagate f0 through the linear mode flow e^{-t (i v.k + L)} at every
/// radius of a radial k grid (k = |k| e3 by the isotropy convention baked
/// into the grid) and fit the exponential rate of the norm over
/// [fit_skip * t_end, t_end]. Crank-Nicolson with one LU per radius and
/// substeps resolving the transport phase plus the physical collision rates;
/// the stiff tail of the form-route generator is damped by the A-stable
/// solve, not resolved, so the rates are meaningful for Gaussian-decaying
/// data (which is what the perturbative theory is about anyway).
inline EnvelopeData radial_decay_envelope(const KGrid& kg, const VelocityGrid& vg,
                                          const OperatorMatrix& L, const ComplexField& f0,
                                          Real t_end, int nsamples,
                                          Real fit_skip = 0.1) {
  if (kg.is_lattice()) throw ConfigError("decay envelope requires a radial k grid");
  if (!(t_end > 0)) throw ConfigError("t_end must be positive");
  if (nsamples < 3) throw ConfigError("need at least 3 norm samples");
  if (!(fit_skip >= 0 && fit_skip < 1)) throw ConfigError("fit_skip must lie in [0, 1)");
  if (f0.size() != vg.size())
    throw ConfigError("initial data does not match the velocity grid");

  const int    n = vg.size();
  EnvelopeData out;
  out.points.resize(kg.size());

  for (int m = 0; m < kg.size(); ++m) {
    EnvelopePoint& pt = out.points[m];
    pt.knorm          = kg.knorm(m);

    const Field p         = transport_phase(vg, kg.node(m));
    const Real  sample_dt = t_end / (nsamples - 1);
    const Real  rate      = 5 + p.cwiseAbs().maxCoeff();
    const int   sub       = std::max(1, int(std::ceil(sample_dt * rate / Real(0.5))));
    const Real  dt        = sample_dt / sub;

    Eigen::MatrixXcd M = (dt / 2) * L.dense.cast<Complex>();
    for (int i = 0; i < n; ++i) M(i, i) += Complex(1, dt / 2 * p[i]);
    const Eigen::PartialPivLU<Eigen::MatrixXcd> lu(M);

    auto half_rhs = [&](const ComplexField& f) {
      ComplexField r(n);
      for (int i = 0; i < n; ++i)
        r[i] = Complex(p[i] * f[i].imag(), -p[i] * f[i].real());
      r.real() -= L.dense * f.real();
      r.imag() -= L.dense * f.imag();
      return ComplexField(f + (dt / 2) * r);
    };

    ComplexField f = f0;
    pt.times.push_back(0);
    pt.norms.push_back(vg.norm(f));
    for (int sa = 1; sa < nsamples; ++sa) {
      for (int st = 0; st < sub; ++st) f = lu.solve(half_rhs(f));
      if (!f.allFinite())
        throw NumericalError("envelope propagation left the finite range at |k| = " +
                             std::to_string(pt.knorm));
      pt.times.push_back(sa * sample_dt);
      pt.norms.push_back(vg.norm(f));
    }
    pt.lambda = -fit_log_slope(pt.times, pt.norms, fit_skip * t_end, t_end);
  }
  return out;
}


}  // namespace boltzk
