#pragma once

#include <cstdio>

#include "boltzk/kernel.hpp"
#include "boltzk/sphere.hpp"
#include "boltzk/velocity_grid.hpp"

namespace boltzk {

namespace detail {

/// One post-collision stencil: 3-point quadratic Lagrange weights per axis,
/// centered on the node nearest to the target displacement. Displacements are
/// in cell units relative to the source node v.
struct QStencil {
  int  cen[3];
  Real w[3][3];

  void build(const Vec3& d, Real h) {
    for (int a = 0; a < 3; ++a) {
      const Real t  = d[a] / h;
      const Real c  = std::floor(t + Real(0.5));
      const Real xi = t - c;
      cen[a]        = int(c);
      w[a][0]       = Real(0.5) * xi * (xi - 1);
      w[a][1]       = 1 - xi * xi;
      w[a][2]       = Real(0.5) * xi * (xi + 1);
    }
  }
};

}  // namespace detail

/// Direct quadrature of the bilinear collision integral
///   Q(G,F)(v) = sum_u sum_sigma w_u w_sigma B(v-u,sigma) [G(u')F(v') - G(u)F(v)]
/// with the diagonal u = v excluded.
///
/// The integrand is evaluated in ratio form: with gG = G/mu, gF = F/mu the
/// gain is B mu(u) mu(v) gG(u') gF(v'), using mu(u')mu(v') = mu(u)mu(v)
/// exactly, so the Gaussian factors never pass through interpolation. The
/// ratios are interpolated by per-axis quadratic Lagrange stencils (zero
/// extension) centered on the nearest node; these reproduce 1, v and |v|^2
/// exactly, which makes the five collision invariants of the quadrature
/// vanish identically away from the box boundary -- in particular
/// Q(mu,mu) = 0 to rounding.
///
/// The gather form annihilates invariants as an *operator* but its *moments*
/// (mass, momentum, energy of the output) still carry the interpolation
/// error. With `conserve` set (the default) the output is corrected by the
/// Maxwell-weighted combination of {1, v, |v|^2} that zeroes those five
/// moments exactly -- a rank-5 projection, standard for conservative
/// discrete-velocity schemes. The correction is of the size of the moment
/// defect it removes and vanishes at equilibrium.
///
/// Reference path: per-offset geometry, straightforward gather loops, no
/// precomputed tables; used as the oracle against the table-driven code.
/// Cost grows like N^6 * sphere nodes; above `warn_budget` tuples a warning
/// is printed (the computation still runs).
template <class FieldT>
FieldT q_collision_direct(const VelocityGrid& g, const KernelSpec& ks, int sphere_order,
                          const FieldT& G, const FieldT& F,
                          bool conserve = true, double warn_budget = 5e8) {
  ks.validate();
  const int  n   = g.spec().n_axis;
  const int  N   = g.size();
  const auto cap = SphereQuadrature::cap_template(sphere_order, 0, std::cos(ks.theta_min));
  const double tuples = double(N) * N * double(cap.size());
  if (tuples > warn_budget)
    std::fprintf(stderr,
                 "[boltzk] q_collision_direct: %.3g tuples exceeds the configured "
                 "budget %.3g; expect a long run\n",
                 tuples, warn_budget);

  // the angular factor depends only on the polar node, so hoist it
  std::vector<Real> bfac(cap.size());
  for (std::size_t s = 0; s < cap.size(); ++s) {
    const Real theta = std::acos(std::clamp(cap[s].z, Real(-1), Real(1)));
    bfac[s]          = ks.b0 * std::pow(theta, -1 - 2 * ks.s) / std::sin(theta);
  }

  const Real h  = g.spec().spacing();
  const Real h3 = g.weight();

  std::vector<Real> mu(N);
  FieldT            rG(N), rF(N);
  for (int i = 0; i < N; ++i) {
    mu[i] = maxwellian(g.node(i));
    rG[i] = G[i] / mu[i];
    rF[i] = F[i] / mu[i];
  }

  // zero-extended gather of a ratio field over one stencil
  const auto gather = [&](const FieldT& f, int ix, int iy, int iz,
                          const detail::QStencil& st) {
    typename FieldT::Scalar acc{};
    for (int tx = 0; tx < 3; ++tx) {
      const int jx = ix + st.cen[0] - 1 + tx;
      if (jx < 0 || jx >= n) continue;
      for (int ty = 0; ty < 3; ++ty) {
        const int jy = iy + st.cen[1] - 1 + ty;
        if (jy < 0 || jy >= n) continue;
        const Real wxy = st.w[0][tx] * st.w[1][ty];
        for (int tz = 0; tz < 3; ++tz) {
          const int jz = iz + st.cen[2] - 1 + tz;
          if (jz < 0 || jz >= n) continue;
          acc += wxy * st.w[2][tz] * f[(jx * n + jy) * n + jz];
        }
      }
    }
    return acc;
  };

  FieldT out(N);
  out.setZero();

  detail::QStencil sv, su;
  for (int ox = -(n - 1); ox <= n - 1; ++ox)
    for (int oy = -(n - 1); oy <= n - 1; ++oy)
      for (int oz = -(n - 1); oz <= n - 1; ++oz) {
        if (ox == 0 && oy == 0 && oz == 0) continue;
        const Vec3 w{h * ox, h * oy, h * oz};
        const Real r    = w.norm();
        const Vec3 axis = w * (1 / r);
        Vec3       t1, t2;
        aligned_frame(axis, t1, t2);
        const Real bmag = std::pow(r, ks.gamma);
        const int  uoff = (ox * n + oy) * n + oz;
        const int  xlo = std::max(0, ox), xhi = n + std::min(0, ox);
        const int  ylo = std::max(0, oy), yhi = n + std::min(0, oy);
        const int  zlo = std::max(0, oz), zhi = n + std::min(0, oz);
        for (std::size_t s = 0; s < cap.size(); ++s) {
          const auto& c     = cap[s];
          const Vec3  sigma = c.z * axis + c.rho * (c.cphi * t1 + c.sphi * t2);
          const Real  W     = h3 * c.w * bmag * bfac[s];
          sv.build(Real(0.5) * r * (sigma - axis), h);   // v' - v
          su.build(Real(-0.5) * r * (sigma + axis), h);  // u' - v
#pragma omp parallel for schedule(static)
          for (int ix = xlo; ix < xhi; ++ix)
            for (int iy = ylo; iy < yhi; ++iy)
              for (int iz = zlo; iz < zhi; ++iz) {
                const int i = (ix * n + iy) * n + iz;
                const int j = i - uoff;
                out[i] += (W * mu[j]) *
                          (gather(rG, ix, iy, iz, su) * gather(rF, ix, iy, iz, sv) -
                           rG[j] * rF[i]);
              }
        }
      }

  for (int i = 0; i < N; ++i) out[i] *= mu[i];

  if (conserve) {
    using Scalar = typename FieldT::Scalar;
    Eigen::Matrix<Real, 5, 5> gram = Eigen::Matrix<Real, 5, 5>::Zero();
    Eigen::Vector<Scalar, 5>  mom  = Eigen::Vector<Scalar, 5>::Zero();
    for (int i = 0; i < N; ++i) {
      const Vec3 v    = g.node(i);
      const Real a[5] = {1, v.x, v.y, v.z, v.squared_norm()};
      for (int k = 0; k < 5; ++k) {
        mom[k] += a[k] * out[i];
        for (int l = 0; l < 5; ++l) gram(k, l) += (mu[i] * a[k]) * a[l];
      }
    }
    const Eigen::Vector<Scalar, 5> lam =
        gram.template cast<Scalar>().ldlt().solve(mom);
    for (int i = 0; i < N; ++i) {
      const Vec3 v = g.node(i);
      out[i] -= mu[i] * (lam[0] + lam[1] * v.x + lam[2] * v.y + lam[3] * v.z +
                         lam[4] * v.squared_norm());
    }
  }
  return out;
}

/// Gamma(f,g)(v) = mu(v)^{-1/2} Q(sqrt(mu) f, sqrt(mu) g)(v), the nonlinear
/// collision form after conjugation by sqrt(mu). Same ratio-form direct path
/// as q_collision_direct, with ratios rf = f/sqrt(mu), rg = g/sqrt(mu):
///   Gamma(f,g)(v_i) = sqrt(mu_i) sum W mu_j [rf(u') rg(v') - rf_j rg_i].
/// `conserve` applies the same rank-5 moment correction in the conjugated
/// variables, so (Gamma, sqrt(mu) {1, v, |v|^2}) vanishes exactly.
template <class FieldT>
FieldT gamma_direct(const VelocityGrid& g, const KernelSpec& ks, int sphere_order,
                    const FieldT& f, const FieldT& fg,
                    bool conserve = true, double warn_budget = 5e8) {
  ks.validate();
  const int  n   = g.spec().n_axis;
  const int  N   = g.size();
  const auto cap = SphereQuadrature::cap_template(sphere_order, 0, std::cos(ks.theta_min));
  const double tuples = double(N) * N * double(cap.size());
  if (tuples > warn_budget)
    std::fprintf(stderr,
                 "[boltzk] gamma_direct: %.3g tuples exceeds the configured budget "
                 "%.3g; expect a long run\n",
                 tuples, warn_budget);

  std::vector<Real> bfac(cap.size());
  for (std::size_t s = 0; s < cap.size(); ++s) {
    const Real theta = std::acos(std::clamp(cap[s].z, Real(-1), Real(1)));
    bfac[s]          = ks.b0 * std::pow(theta, -1 - 2 * ks.s) / std::sin(theta);
  }

  const Real h  = g.spec().spacing();
  const Real h3 = g.weight();

  std::vector<Real> mu(N), sq(N);
  FieldT            rf(N), rg(N);
  for (int i = 0; i < N; ++i) {
    mu[i] = maxwellian(g.node(i));
    sq[i] = std::sqrt(mu[i]);
    rf[i] = f[i] / sq[i];
    rg[i] = fg[i] / sq[i];
  }

  const auto gather = [&](const FieldT& fld, int ix, int iy, int iz,
                          const detail::QStencil& st) {
    typename FieldT::Scalar acc{};
    for (int tx = 0; tx < 3; ++tx) {
      const int jx = ix + st.cen[0] - 1 + tx;
      if (jx < 0 || jx >= n) continue;
      for (int ty = 0; ty < 3; ++ty) {
        const int jy = iy + st.cen[1] - 1 + ty;
        if (jy < 0 || jy >= n) continue;
        const Real wxy = st.w[0][tx] * st.w[1][ty];
        for (int tz = 0; tz < 3; ++tz) {
          const int jz = iz + st.cen[2] - 1 + tz;
          if (jz < 0 || jz >= n) continue;
          acc += wxy * st.w[2][tz] * fld[(jx * n + jy) * n + jz];
        }
      }
    }
    return acc;
  };

  FieldT out(N);
  out.setZero();

  detail::QStencil sv, su;
  for (int ox = -(n - 1); ox <= n - 1; ++ox)
    for (int oy = -(n - 1); oy <= n - 1; ++oy)
      for (int oz = -(n - 1); oz <= n - 1; ++oz) {
        if (ox == 0 && oy == 0 && oz == 0) continue;
        const Vec3 w{h * ox, h * oy, h * oz};
        const Real r    = w.norm();
        const Vec3 axis = w * (1 / r);
        Vec3       t1, t2;
        aligned_frame(axis, t1, t2);
        const Real bmag = std::pow(r, ks.gamma);
        const int  uoff = (ox * n + oy) * n + oz;
        const int  xlo = std::max(0, ox), xhi = n + std::min(0, ox);
        const int  ylo = std::max(0, oy), yhi = n + std::min(0, oy);
        const int  zlo = std::max(0, oz), zhi = n + std::min(0, oz);
        for (std::size_t s = 0; s < cap.size(); ++s) {
          const auto& c     = cap[s];
          const Vec3  sigma = c.z * axis + c.rho * (c.cphi * t1 + c.sphi * t2);
          const Real  W     = h3 * c.w * bmag * bfac[s];
          sv.build(Real(0.5) * r * (sigma - axis), h);
          su.build(Real(-0.5) * r * (sigma + axis), h);
#pragma omp parallel for schedule(static)
          for (int ix = xlo; ix < xhi; ++ix)
            for (int iy = ylo; iy < yhi; ++iy)
              for (int iz = zlo; iz < zhi; ++iz) {
                const int i = (ix * n + iy) * n + iz;
                const int j = i - uoff;
                out[i] += (W * mu[j]) *
                          (gather(rf, ix, iy, iz, su) * gather(rg, ix, iy, iz, sv) -
                           rf[j] * rg[i]);
              }
        }
      }

  for (int i = 0; i < N; ++i) out[i] *= sq[i];

  if (conserve) {
    using Scalar = typename FieldT::Scalar;
    Eigen::Matrix<Real, 5, 5> gram = Eigen::Matrix<Real, 5, 5>::Zero();
    Eigen::Vector<Scalar, 5>  mom  = Eigen::Vector<Scalar, 5>::Zero();
    for (int i = 0; i < N; ++i) {
      const Vec3 v    = g.node(i);
      const Real a[5] = {1, v.x, v.y, v.z, v.squared_norm()};
      for (int k = 0; k < 5; ++k) {
        mom[k] += (sq[i] * a[k]) * out[i];
        for (int l = 0; l < 5; ++l) gram(k, l) += (mu[i] * a[k]) * a[l];
      }
    }
    const Eigen::Vector<Scalar, 5> lam =
        gram.template cast<Scalar>().ldlt().solve(mom);
    for (int i = 0; i < N; ++i) {
      const Vec3 v = g.node(i);
      out[i] -= sq[i] * (lam[0] + lam[1] * v.x + lam[2] * v.y + lam[3] * v.z +
                         lam[4] * v.squared_norm());
    }
  }
  return out;
}

}  // namespace boltzk
