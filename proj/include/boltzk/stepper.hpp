#pragma once

#include <Eigen/LU>
#include <cmath>
#include <vector>

#include "boltzk/convolution.hpp"
#include "boltzk/operator_matrix.hpp"
#include "boltzk/projection.hpp"
#include "boltzk/state.hpp"
#include "boltzk/transport.hpp"

namespace boltzk {

/// Time stepping controls. The grids, kernel and initial data live in the
/// run description; this is the part the integrator needs.
struct SimConfig {
  enum class Integrator { RK4, CN };

  Integrator integrator      = Integrator::RK4;
  Real       dt              = 0.01;
  Real       t_end           = 1.0;
  int        snapshot_stride = 1;
  bool       collision_on    = true;   // apply the linearized operator
  bool       nonlinear       = false;  // apply the gamma-hat convolution
  Real       rk4_safety      = 2.5;    // require dt * rho_hat <= safety

  void validate() const {
    if (!(dt > 0)) throw ConfigError("dt must be positive");
    if (!(t_end >= 0)) throw ConfigError("t_end must be nonnegative");
    if (snapshot_stride < 1) throw ConfigError("snapshot_stride must be at least 1");
    if (!(rk4_safety > 0)) throw ConfigError("rk4_safety must be positive");
    const Real steps = t_end / dt;
    if (std::abs(steps - std::round(steps)) > 1e-9 * std::max(Real(1), steps))
      throw ConfigError("t_end must be an integer multiple of dt");
  }
  int steps() const { return int(std::llround(t_end / dt)); }
};

/// Per-mode observables sampled along a run.
struct ModeObservables {
  MacroCoeffs      macro;
  Eigen::Matrix3cd theta;
  Eigen::Vector3cd lambda;
  Real             norm = 0;  // ||f_hat(k)||_{L2_v}
};

struct Snapshot {
  Real                         t = 0;
  SpectralState                state;
  std::vector<ModeObservables> obs;
};

/// Snapshots with strictly increasing timestamps starting at 0.
struct Trajectory {
  std::vector<Snapshot> snaps;

  void push(Snapshot s) {
    if (snaps.empty()) {
      if (s.t != 0) throw ConfigError("trajectory must start at t = 0");
    } else if (!(s.t > snaps.back().t)) {
      throw ConfigError("trajectory timestamps must be strictly increasing");
    }
    snaps.push_back(std::move(s));
  }
  const Snapshot& back() const { return snaps.back(); }
  std::size_t     size() const { return snaps.size(); }
};

/// Mode-decoupled integrator for
///   d/dt f_hat(k) = -(i v.k + L) f_hat(k) + Gamma_hat(k),
/// RK4 explicit or Crank-Nicolson on the stiff linear part. CN treats the
/// nonlinear term with a two-step Adams-Bashforth extrapolation (one
/// convolution per step); the first step reuses the initial value, which
/// keeps the scheme second order globally. Modes are advanced serially in
/// index order, so with the nonlinear term off the trajectory of each mode
/// is bitwise independent of the others.
class Stepper {
 public:
  Stepper(const SimConfig& cfg, const KGrid& kg, const VelocityGrid& vg,
          const OperatorMatrix* L, const GammaLattice* conv = nullptr)
      : cfg_(cfg), kg_(&kg), vg_(&vg), L_(cfg.collision_on ? L : nullptr), conv_(conv) {
    cfg.validate();
    if (cfg_.collision_on && !L)
      throw ConfigError("collision_on needs an assembled operator");
    if (cfg_.nonlinear && !conv)
      throw ConfigError("nonlinear stepping needs a gamma-hat convolution");
    if (L_ && L_->dense.rows() != vg.size())
      throw ConfigError("operator size does not match the velocity grid");

    phase_.reserve(kg.size());
    for (int i = 0; i < kg.size(); ++i) phase_.push_back(transport_phase(vg, kg.node(i)));

    if (cfg_.integrator == SimConfig::Integrator::RK4) {
      rho_ = estimate_rho();
      if (cfg_.dt * rho_ > cfg_.rk4_safety)
        throw ConfigError("dt " + std::to_string(cfg_.dt) +
                          " exceeds the RK4 stability budget: spectral radius " +
                          std::to_string(rho_) + " allows dt <= " +
                          std::to_string(cfg_.rk4_safety / rho_));
    } else {
      factor_cn();
    }
  }

  Real spectral_radius() const { return rho_; }

  /// -(i v.k + L) f for mode index m.
  ComplexField linear_rhs(int m, const ComplexField& f) const {
    const Field& p = phase_[m];
    ComplexField out(f.size());
    for (int i = 0; i < f.size(); ++i)
      out[i] = Complex(p[i] * f[i].imag(), -p[i] * f[i].real());
    if (L_) {
      out.real() -= L_->dense * f.real();
      out.imag() -= L_->dense * f.imag();
    }
    return out;
  }

  void step(SpectralState& s) {
    if (cfg_.integrator == SimConfig::Integrator::RK4)
      step_rk4(s);
    else
      step_cn(s);
    s.t += cfg_.dt;
    const int bad = s.first_bad_mode();
    if (bad >= 0)
      throw NumericalError("non-finite state in mode " + std::to_string(bad) +
                           " at t = " + std::to_string(s.t) + "; aborting the run");
  }

  /// Advance to t_end, recording snapshots every snapshot_stride steps plus
  /// the initial and final states.
  Trajectory run(SpectralState& s) {
    const MacroProjector proj(*vg_);
    const MomentSet      ms(*vg_);
    have_gprev_ = false;

    Trajectory traj;
    traj.push(observe(s, proj, ms));
    const int n = cfg_.steps();
    for (int k = 1; k <= n; ++k) {
      step(s);
      if (k % cfg_.snapshot_stride == 0 || k == n) traj.push(observe(s, proj, ms));
    }
    return traj;
  }

 private:
  Snapshot observe(const SpectralState& s, const MacroProjector& proj,
                   const MomentSet& ms) const {
    Snapshot out;
    out.t     = s.t;
    out.state = s;
    out.obs.resize(s.nk());
    for (int m = 0; m < s.nk(); ++m) {
      ModeObservables& o = out.obs[m];
      o.macro            = proj.coefficients(s.modes[m]);
      o.theta            = ms.theta(s.modes[m]);
      o.lambda           = ms.lambda(s.modes[m]);
      o.norm             = vg_->norm(s.modes[m]);
    }
    return out;
  }

  std::vector<ComplexField> gamma(const std::vector<ComplexField>& modes) const {
    return conv_->fast(modes);
  }

  // one linear-combination helper: out = a + c * b
  static std::vector<ComplexField> axpy(const std::vector<ComplexField>& a, Real c,
                                        const std::vector<ComplexField>& b) {
    std::vector<ComplexField> out(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] + c * b[i];
    return out;
  }

  std::vector<ComplexField> deriv(const std::vector<ComplexField>& modes) const {
    std::vector<ComplexField> out(modes.size());
    if (cfg_.nonlinear) out = gamma(modes);
    for (std::size_t m = 0; m < modes.size(); ++m) {
      ComplexField lin = linear_rhs(int(m), modes[m]);
      if (cfg_.nonlinear)
        out[m] += lin;
      else
        out[m] = std::move(lin);
    }
    return out;
  }

  void step_rk4(SpectralState& s) {
    const Real dt = cfg_.dt;
    const auto k1 = deriv(s.modes);
    const auto k2 = deriv(axpy(s.modes, dt / 2, k1));
    const auto k3 = deriv(axpy(s.modes, dt / 2, k2));
    const auto k4 = deriv(axpy(s.modes, dt, k3));
    for (std::size_t m = 0; m < s.modes.size(); ++m)
      s.modes[m] += (dt / 6) * (k1[m] + 2.0 * k2[m] + 2.0 * k3[m] + k4[m]);
  }

  void step_cn(SpectralState& s) {
    const Real dt = cfg_.dt;
    std::vector<ComplexField> g;
    if (cfg_.nonlinear) {
      g = gamma(s.modes);
      if (!have_gprev_) {
        gprev_      = g;
        have_gprev_ = true;
      }
    }
    for (std::size_t m = 0; m < s.modes.size(); ++m) {
      ComplexField rhs = s.modes[m] + (dt / 2) * linear_rhs(int(m), s.modes[m]);
      if (cfg_.nonlinear) rhs += dt * (Real(1.5) * g[m] - Real(0.5) * gprev_[m]);
      s.modes[m] = lu_[m].solve(rhs);
    }
    if (cfg_.nonlinear) gprev_ = std::move(g);
  }

  // power iteration on the stiffest mode (largest |k|): the step budget for
  // the explicit integrator
  Real estimate_rho() const {
    int imax = 0;
    for (int i = 1; i < kg_->size(); ++i)
      if (kg_->knorm(i) > kg_->knorm(imax)) imax = i;
    const Field& p = phase_[imax];
    const int    n = vg_->size();

    ComplexField z(n);
    for (int i = 0; i < n; ++i) z[i] = Complex(std::cos(Real(0.7) * i), std::sin(Real(1.3) * i));
    Real rho = 0;
    for (int it = 0; it < 50; ++it) {
      z /= z.norm();
      ComplexField w(n);
      for (int i = 0; i < n; ++i) w[i] = Complex(-p[i] * z[i].imag(), p[i] * z[i].real());
      if (L_) {
        w.real() += L_->dense * z.real();
        w.imag() += L_->dense * z.imag();
      }
      rho = w.norm();
      z   = std::move(w);
    }
    return rho;
  }

  void factor_cn() {
    const int n = vg_->size();
    lu_.reserve(kg_->size());
    Eigen::MatrixXcd M(n, n);
    for (int m = 0; m < kg_->size(); ++m) {
      if (L_)
        M = (cfg_.dt / 2) * L_->dense.cast<Complex>();
      else
        M.setZero();
      for (int i = 0; i < n; ++i) {
        M(i, i) += Real(1);
        M(i, i) += Complex(0, cfg_.dt / 2 * phase_[m][i]);
      }
      lu_.emplace_back(M);
    }
  }

  SimConfig           cfg_;
  const KGrid*        kg_;
  const VelocityGrid* vg_;
  const OperatorMatrix* L_;
  const GammaLattice*   conv_;

  std::vector<Field> phase_;
  Real               rho_ = 0;

  std::vector<Eigen::PartialPivLU<Eigen::MatrixXcd>> lu_;
  std::vector<ComplexField>                          gprev_;
  bool                                               have_gprev_ = false;
};

}  // namespace boltzk
