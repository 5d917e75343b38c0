#pragma once

#include <Eigen/Dense>

#include "boltzk/common.hpp"

namespace boltzk {

using Field        = Eigen::VectorXd;
using ComplexField = Eigen::VectorXcd;

struct GridSpec {
  Real extent = 6.0;  // V: box is [-V, V]^3
  int  n_axis = 12;   // N_v nodes per axis, even

  void validate() const {
    if (!(extent > 0))
      throw ConfigError("grid.extent: must be positive, got " + std::to_string(extent));
    if (n_axis < 2 || n_axis % 2 != 0)
      throw ConfigError("grid.points_per_axis: must be even and >= 2, got " +
                        std::to_string(n_axis));
  }

  Real spacing() const { return 2 * extent / n_axis; }
  int  node_count() const { return n_axis * n_axis * n_axis; }

  std::string canonical() const {
    char buf[64];
    std::snprintf(buf, sizeof buf, "grid(V=%.17g,N=%d)", extent, n_axis);
    return buf;
  }
};

/// Uniform midpoint-rule product grid on [-V,V]^3. Node set is symmetric
/// under v -> -v exactly; quadrature weight is h^3 for every node.
class VelocityGrid {
 public:
  explicit VelocityGrid(GridSpec spec) : spec_(spec) {
    spec_.validate();
    h_ = spec_.spacing();
    // Mirror-construct the axis so v -> -v maps nodes to nodes bitwise and
    // odd moments cancel in exact pairs.
    axis_.resize(spec_.n_axis);
    for (int i = 0; i < spec_.n_axis / 2; ++i) {
      const Real a                    = -spec_.extent + (i + Real(0.5)) * h_;
      axis_[i]                        = a;
      axis_[spec_.n_axis - 1 - i]     = -a;
    }
  }

  const GridSpec& spec() const { return spec_; }
  int             n_axis() const { return spec_.n_axis; }
  int             size() const { return spec_.node_count(); }
  Real            spacing() const { return h_; }
  Real            extent() const { return spec_.extent; }
  Real            weight() const { return h_ * h_ * h_; }  // same for all nodes
  Real            axis(int i) const { return axis_[i]; }

  int flat(int ix, int iy, int iz) const {
    return (ix * spec_.n_axis + iy) * spec_.n_axis + iz;
  }
  std::array<int, 3> unflat(int m) const {
    const int n = spec_.n_axis;
    return {m / (n * n), (m / n) % n, m % n};
  }
  Vec3 node(int m) const {
    auto [ix, iy, iz] = unflat(m);
    return {axis_[ix], axis_[iy], axis_[iz]};
  }

  // index of -v; exact because midpoint nodes come in +- pairs
  int negation_index(int m) const {
    const int n       = spec_.n_axis;
    auto [ix, iy, iz] = unflat(m);
    return flat(n - 1 - ix, n - 1 - iy, n - 1 - iz);
  }

  // (f, g)_{L^2_v} with the midpoint rule
  Real inner(const Field& f, const Field& g) const { return weight() * f.dot(g); }
  Complex inner(const ComplexField& f, const ComplexField& g) const {
    return weight() * f.dot(g);  // conjugates f
  }
  Real norm(const Field& f) const { return std::sqrt(weight()) * f.norm(); }
  Real norm(const ComplexField& f) const { return std::sqrt(weight()) * f.norm(); }

  template <class F>
  Field sample(F&& fn) const {
    Field out(size());
    for (int m = 0; m < size(); ++m) out[m] = fn(node(m));
    return out;
  }

  /// Trilinear interpolation cell for an off-grid point; zero extension
  /// outside [-V,V]^3. base axis index i satisfies axis[i] <= p < axis[i+1];
  /// taps falling outside the node range contribute nothing.
  struct Cell {
    std::array<int, 3>  base;  // lower node index per axis (may be -1 .. n-1)
    std::array<Real, 3> frac;  // in [0,1)
  };

  Cell locate(const Vec3& p) const {
    Cell c;
    for (int a = 0; a < 3; ++a) {
      Real t    = (p[a] - axis_[0]) / h_;
      Real fl   = std::floor(t);
      c.base[a] = static_cast<int>(fl);
      c.frac[a] = t - fl;
    }
    return c;
  }

  bool tap_in_range(int axis_index) const { return axis_index >= 0 && axis_index < spec_.n_axis; }

  /// Interpolate a nodal field at p with zero extension. Works for real and
  /// complex fields.
  template <class FieldT>
  typename FieldT::Scalar interpolate(const FieldT& f, const Vec3& p) const {
    const Cell c = locate(p);
    typename FieldT::Scalar acc{};
    for (int dx = 0; dx < 2; ++dx) {
      const int ix = c.base[0] + dx;
      if (!tap_in_range(ix)) continue;
      const Real wx = dx ? c.frac[0] : 1 - c.frac[0];
      for (int dy = 0; dy < 2; ++dy) {
        const int iy = c.base[1] + dy;
        if (!tap_in_range(iy)) continue;
        const Real wy = dy ? c.frac[1] : 1 - c.frac[1];
        for (int dz = 0; dz < 2; ++dz) {
          const int iz = c.base[2] + dz;
          if (!tap_in_range(iz)) continue;
          const Real wz = dz ? c.frac[2] : 1 - c.frac[2];
          acc += (wx * wy * wz) * f[flat(ix, iy, iz)];
        }
      }
    }
    return acc;
  }

 private:
  GridSpec          spec_;
  Real              h_;
  std::vector<Real> axis_;
};

inline Real maxwellian(const Vec3& v) {
  constexpr Real c = 0.0634936359342409697857633;  // (2 pi)^{-3/2}
  return c * std::exp(-Real(0.5) * v.squared_norm());
}

inline Field maxwellian_field(const VelocityGrid& g) {
  return g.sample([](const Vec3& v) { return maxwellian(v); });
}

inline Field sqrt_mu_field(const VelocityGrid& g) {
  return g.sample([](const Vec3& v) { return std::sqrt(maxwellian(v)); });
}

}  // namespace boltzk
