#pragma once

#include <array>
#include <vector>

#include "boltzk/common.hpp"

namespace boltzk {

/// Wavevector sets for the spectral runs, in two shapes:
///  - lattice-3d: the cubic lattice {-m..m}^3 * dk with m = floor(kmax/dk),
///    one integration weight dk^3 per node; contains k = 0 and is closed
///    under k -> -k. Nonlinear convolution runs live here.
///  - radial-1d: a list of radii |k| with 3-D radial weights 4 pi |k|^2 d|k|
///    (trapezoid spacing), for isotropic linearized studies where modes are
///    taken along k = |k| e3.
class KGrid {
 public:
  enum class Mode { RADIAL_1D, LATTICE_3D };

  static KGrid lattice(Real kmax, Real dk) {
    if (!(dk > 0) || !(kmax >= 0))
      throw ConfigError("k lattice: need dk > 0 and kmax >= 0");
    KGrid g;
    g.mode_ = Mode::LATTICE_3D;
    g.dk_   = dk;
    g.m_    = int(std::floor(kmax / dk + 1e-12));
    const int side = 2 * g.m_ + 1;
    g.coords_.reserve(std::size_t(side) * side * side);
    for (int ix = -g.m_; ix <= g.m_; ++ix)
      for (int iy = -g.m_; iy <= g.m_; ++iy)
        for (int iz = -g.m_; iz <= g.m_; ++iz)
          g.coords_.push_back({ix, iy, iz});
    return g;
  }

  static KGrid radial(std::vector<Real> radii) {
    if (radii.empty()) throw ConfigError("radial k grid: empty radius list");
    for (std::size_t i = 0; i < radii.size(); ++i) {
      if (!(radii[i] >= 0)) throw ConfigError("radial k grid: negative radius");
      if (i > 0 && !(radii[i] > radii[i - 1]))
        throw ConfigError("radial k grid: radii must be strictly increasing");
    }
    KGrid g;
    g.mode_  = Mode::RADIAL_1D;
    g.radii_ = std::move(radii);
    const std::size_t n = g.radii_.size();
    g.rweights_.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      // trapezoid cell around radius i (one-sided at the ends)
      const Real lo = i == 0 ? g.radii_[0] : 0.5 * (g.radii_[i - 1] + g.radii_[i]);
      const Real hi =
          i + 1 == n ? g.radii_[n - 1] : 0.5 * (g.radii_[i] + g.radii_[i + 1]);
      g.rweights_[i] = 4 * pi * g.radii_[i] * g.radii_[i] * (hi - lo);
    }
    return g;
  }

  Mode mode() const { return mode_; }
  bool is_lattice() const { return mode_ == Mode::LATTICE_3D; }
  int  size() const {
    return is_lattice() ? int(coords_.size()) : int(radii_.size());
  }
  Real spacing() const { return dk_; }
  int  modes_per_side() const { return m_; }

  Vec3 node(int i) const {
    if (is_lattice()) {
      const auto& c = coords_[std::size_t(i)];
      return {dk_ * c[0], dk_ * c[1], dk_ * c[2]};
    }
    return {0, 0, radii_[std::size_t(i)]};  // isotropy convention k = |k| e3
  }
  Real knorm(int i) const {
    return is_lattice() ? node(i).norm() : radii_[std::size_t(i)];
  }
  Real weight(int i) const {
    return is_lattice() ? dk_ * dk_ * dk_ : rweights_[std::size_t(i)];
  }

  const std::array<int, 3>& coords(int i) const {
    lattice_only();
    return coords_[std::size_t(i)];
  }

  /// Flat index of integer coordinates, or -1 when outside the lattice.
  int index_of(int ix, int iy, int iz) const {
    lattice_only();
    if (std::max({std::abs(ix), std::abs(iy), std::abs(iz)}) > m_) return -1;
    const int side = 2 * m_ + 1;
    return ((ix + m_) * side + (iy + m_)) * side + (iz + m_);
  }
  int neg_index(int i) const {
    const auto& c = coords(i);
    return index_of(-c[0], -c[1], -c[2]);
  }
  int zero_index() const { return index_of(0, 0, 0); }

 private:
  KGrid() = default;

  void lattice_only() const {
    if (!is_lattice())
      throw ConfigError("k grid: lattice indexing requested on a radial grid");
  }

  Mode mode_ = Mode::RADIAL_1D;
  // lattice
  Real                              dk_ = 0;
  int                               m_  = 0;
  std::vector<std::array<int, 3>>   coords_;
  // radial
  std::vector<Real> radii_, rweights_;
};

}  // namespace boltzk
