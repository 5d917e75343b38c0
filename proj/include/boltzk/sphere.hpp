#pragma once

#include <vector>

#include "boltzk/common.hpp"

namespace boltzk {

/// Gauss-Legendre rule on [a,b] by Newton iteration on P_n. Nodes ascending.
inline void gauss_legendre(int n, Real a, Real b, std::vector<Real>& x,
                           std::vector<Real>& w) {
  x.assign(n, 0);
  w.assign(n, 0);
  const Real xm = Real(0.5) * (b + a), xl = Real(0.5) * (b - a);
  const int m = (n + 1) / 2;
  for (int i = 0; i < m; ++i) {
    Real z = std::cos(pi * (i + Real(0.75)) / (n + Real(0.5)));
    Real pp = 0;
    for (int it = 0; it < 100; ++it) {
      Real p1 = 1, p2 = 0;
      for (int j = 0; j < n; ++j) {
        Real p3 = p2;
        p2      = p1;
        p1      = ((2 * j + 1) * z * p2 - j * p3) / (j + 1);
      }
      pp      = n * (z * p1 - p2) / (z * z - 1);
      Real z1 = z;
      z       = z1 - p1 / pp;
      if (std::abs(z - z1) < 1e-15) break;
    }
    x[i]         = xm - xl * z;
    x[n - 1 - i] = xm + xl * z;
    w[i]         = 2 * xl / ((1 - z * z) * pp * pp);
    w[n - 1 - i] = w[i];
  }
}

struct SphereSpec {
  int order = 6;  // n: n polar x 2n azimuthal nodes

  void validate() const {
    if (order < 1) throw ConfigError("sphere.order: must be >= 1");
  }
  int node_count() const { return 2 * order * order; }
  std::string canonical() const { return "sphere(n=" + std::to_string(order) + ")"; }
};

/// Product quadrature on S^2: Gauss-Legendre in cos(theta) x uniform azimuth.
/// Full-sphere rule; weights sum to 4 pi. The collision assembly uses the
/// cap_template variant below instead, mapped into a frame aligned with the
/// relative velocity, so that the kernel support [theta_min, pi/2] is
/// integrated without sampling its indicator discontinuity.
class SphereQuadrature {
 public:
  explicit SphereQuadrature(SphereSpec spec) : spec_(spec) {
    spec.validate();
    std::vector<Real> z, wz;
    gauss_legendre(spec.order, -1, 1, z, wz);
    build(z, wz);
  }

  const SphereSpec& spec() const { return spec_; }
  int size() const { return int(nodes_.size()); }
  const Vec3& node(int i) const { return nodes_[i]; }
  Real weight(int i) const { return weights_[i]; }

  Real weight_sum() const {
    Real s = 0;
    for (Real w : weights_) s += w;
    return s;
  }

  /// Polar-interval template: z-nodes on [z0,z1] with the same (n x 2n)
  /// structure, as (cos theta, azimuth, weight) triples. The caller supplies
  /// the frame. dsigma = dz dphi, so weights already carry the measure.
  struct CapNode {
    Real z;    // cos(angle from frame axis)
    Real rho;  // sin of that angle
    Real cphi, sphi;
    Real w;
  };

  static std::vector<CapNode> cap_template(int n, Real z0, Real z1) {
    std::vector<Real> z, wz;
    gauss_legendre(n, z0, z1, z, wz);
    std::vector<CapNode> out;
    out.reserve(2 * n * n);
    const int naz = 2 * n;
    for (int i = 0; i < n; ++i) {
      const Real rho = std::sqrt(std::max(Real(0), 1 - z[i] * z[i]));
      for (int j = 0; j < naz; ++j) {
        const Real phi = 2 * pi * (j + Real(0.5)) / naz;
        out.push_back({z[i], rho, std::cos(phi), std::sin(phi), wz[i] * 2 * pi / naz});
      }
    }
    return out;
  }

 private:
  void build(const std::vector<Real>& z, const std::vector<Real>& wz) {
    const int naz = 2 * spec_.order;
    for (std::size_t i = 0; i < z.size(); ++i) {
      const Real rho = std::sqrt(std::max(Real(0), 1 - z[i] * z[i]));
      for (int j = 0; j < naz; ++j) {
        const Real phi = 2 * pi * (j + Real(0.5)) / naz;
        nodes_.push_back({rho * std::cos(phi), rho * std::sin(phi), z[i]});
        weights_.push_back(wz[i] * 2 * pi / naz);
      }
    }
  }

  SphereSpec        spec_;
  std::vector<Vec3> nodes_;
  std::vector<Real> weights_;
};

/// Deterministic orthonormal frame (t1, t2, axis) for a unit axis.
inline void aligned_frame(const Vec3& axis, Vec3& t1, Vec3& t2) {
  Vec3 e = std::abs(axis.x) <= std::abs(axis.y)
               ? (std::abs(axis.x) <= std::abs(axis.z) ? Vec3{1, 0, 0} : Vec3{0, 0, 1})
               : (std::abs(axis.y) <= std::abs(axis.z) ? Vec3{0, 1, 0} : Vec3{0, 0, 1});
  t1 = e.cross(axis);
  t1 = t1 * (1 / t1.norm());
  t2 = axis.cross(t1);
}

}  // namespace boltzk
