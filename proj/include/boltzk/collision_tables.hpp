#pragma once

#include <cstdint>
#include <vector>

#include "boltzk/kernel.hpp"
#include "boltzk/sphere.hpp"
#include "boltzk/velocity_grid.hpp"

namespace boltzk {

/// Precomputed per-offset collision quadrature data.
///
/// On the uniform grid the pair (v, u) enters the collision integrals only
/// through the lattice offset w = v - u and the scattering direction, so the
/// kernel value, the angular weight and the stencils of both post-collision
/// points are computed once per (offset, sigma) and shared by every
/// admissible v. The sigma rule is the (n x 2n) Gauss-Legendre-in-cos x
/// uniform-azimuth product mapped onto the kernel support
/// cos(theta) in [0, cos(theta_min)], in a deterministic frame aligned with
/// the offset direction.
///
/// Two stencil families are kept per row:
///  - base_v/fr_v: the raw trilinear stencil of v' (tensor-product weights),
///    used where plain interpolation is the defined quantity (the
///    dissipation-norm Gram matrix).
///  - cen_v/qv and cen_u/qu: 3-point-per-axis quadratic Lagrange stencils
///    centered on the node nearest to each post-collision point. These
///    reproduce 1, position and position^2 exactly per axis, so stencil
///    moments of 1, p and |p|^2 are exact; combined with ratio-form
///    evaluation of the collision integrands this annihilates all five
///    collision invariants identically away from the box boundary. The
///    centering keeps the per-axis offset xi in [-1/2, 1/2], where the
///    quadratic weights are smallest in magnitude.
struct CollisionTables {
  struct SigmaRow {
    Real         W;            // h^3 (u-node weight) * w_sigma * B(w, sigma)
    std::int16_t base_v[3];    // floor displacement of v' in cell units
    Real         fr_v[3];      // trilinear fractional parts in [0,1)
    std::int16_t cen_v[3];     // nearest-node displacement of v'
    std::int16_t cen_u[3];     // nearest-node displacement of u'
    Real         qv[3][3];     // per-axis quadratic weights for v' (taps -1,0,+1)
    Real         qu[3][3];     // per-axis quadratic weights for u'
  };

  GridSpec   grid;
  KernelSpec kernel;
  int        sphere_order = 6;

  int                   n    = 0;  // nodes per axis
  int                   noff = 0;  // offsets per axis, 2n-1
  int                   nsig = 0;  // sigma nodes per offset
  std::vector<SigmaRow> rows;      // [offset_index * nsig + s]
  std::vector<Real>     loss_kernel;  // per offset: sum_sigma w_sigma * B
  std::vector<Vec3>     d_up;         // per row: displacement u' - v
  std::vector<Vec3>     d_vp;         // per row: displacement v' - v

  int offset_index(int ox, int oy, int oz) const {
    return ((ox + n - 1) * noff + (oy + n - 1)) * noff + (oz + n - 1);
  }

  std::size_t bytes() const {
    return rows.size() * (sizeof(SigmaRow) + 2 * sizeof(Vec3)) +
           loss_kernel.size() * sizeof(Real);
  }

  std::string canonical() const {
    return grid.canonical() + "+" + kernel.canonical() + "+" +
           SphereSpec{sphere_order}.canonical();
  }
};

namespace detail {

/// Quadratic Lagrange weights on the 3-node axis stencil {-1, 0, +1} (in cell
/// units, relative to the centering node) for a target at offset xi.
inline void quadratic_axis_weights(Real xi, Real w[3]) {
  w[0] = Real(0.5) * xi * (xi - 1);
  w[1] = 1 - xi * xi;
  w[2] = Real(0.5) * xi * (xi + 1);
}

}  // namespace detail

inline CollisionTables build_collision_tables(const GridSpec& gs, const KernelSpec& ks,
                                              int sphere_order) {
  gs.validate();
  ks.validate();
  if (sphere_order < 1) throw ConfigError("sphere.order: must be >= 1");

  CollisionTables t;
  t.grid         = gs;
  t.kernel       = ks;
  t.sphere_order = sphere_order;
  t.n            = gs.n_axis;
  t.noff         = 2 * gs.n_axis - 1;

  const auto cap = SphereQuadrature::cap_template(sphere_order, 0, std::cos(ks.theta_min));
  t.nsig         = int(cap.size());

  const Real h     = gs.spacing();
  const long ntot  = long(t.noff) * t.noff * t.noff;
  t.rows.resize(std::size_t(ntot) * t.nsig);
  t.d_up.resize(t.rows.size());
  t.d_vp.resize(t.rows.size());
  t.loss_kernel.assign(ntot, 0);

  for (int ox = -(t.n - 1); ox <= t.n - 1; ++ox)
    for (int oy = -(t.n - 1); oy <= t.n - 1; ++oy)
      for (int oz = -(t.n - 1); oz <= t.n - 1; ++oz) {
        const int  oi = t.offset_index(ox, oy, oz);
        const Vec3 w{h * ox, h * oy, h * oz};
        const Real r = w.norm();
        if (r == 0) {  // excluded diagonal u = v
          for (int s = 0; s < t.nsig; ++s) t.rows[std::size_t(oi) * t.nsig + s].W = 0;
          continue;
        }
        const Vec3 axis = w * (1 / r);
        Vec3       t1, t2;
        aligned_frame(axis, t1, t2);
        const Real bmag = std::pow(r, ks.gamma);
        Real       lsum = 0;
        for (int s = 0; s < t.nsig; ++s) {
          const auto& c     = cap[s];
          const Vec3  sigma = c.z * axis + c.rho * (c.cphi * t1 + c.sphi * t2);
          const Real  theta = std::acos(std::clamp(c.z, Real(-1), Real(1)));
          const Real  B     = bmag * ks.b0 * std::pow(theta, -1 - 2 * ks.s) / std::sin(theta);
          auto&       row   = t.rows[std::size_t(oi) * t.nsig + s];
          row.W             = h * h * h * c.w * B;
          lsum += c.w * B;

          const Vec3 dvp = Real(0.5) * r * (sigma - axis);  // v' - v
          const Vec3 dup = Real(-0.5) * r * (sigma + axis); // u' - v
          t.d_vp[std::size_t(oi) * t.nsig + s] = dvp;
          t.d_up[std::size_t(oi) * t.nsig + s] = dup;
          for (int a = 0; a < 3; ++a) {
            const Real tv = dvp[a] / h;
            const Real tu = dup[a] / h;
            const Real fv = std::floor(tv);
            row.base_v[a] = std::int16_t(fv);
            row.fr_v[a]   = tv - fv;

            const Real cv = std::floor(tv + Real(0.5));
            const Real cu = std::floor(tu + Real(0.5));
            row.cen_v[a]  = std::int16_t(cv);
            row.cen_u[a]  = std::int16_t(cu);
            detail::quadratic_axis_weights(tv - cv, row.qv[a]);
            detail::quadratic_axis_weights(tu - cu, row.qu[a]);
          }
        }
        t.loss_kernel[oi] = lsum;
      }
  return t;
}

}  // namespace boltzk
