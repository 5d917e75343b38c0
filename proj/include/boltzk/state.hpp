#pragma once

#include "boltzk/kgrid.hpp"
#include "boltzk/velocity_grid.hpp"

namespace boltzk {

/// The spectral unknown f-hat: one complex velocity field per wavevector,
/// plus the clock. In lattice mode the physical field is real, so states
/// must satisfy f(-k) = conj f(k); this is enforced at initialization and
/// monitored along runs.
struct SpectralState {
  const KGrid*        kgrid = nullptr;
  const VelocityGrid* vgrid = nullptr;
  Real                t     = 0;

  std::vector<ComplexField> modes;  // indexed by k-node

  SpectralState() = default;
  SpectralState(const KGrid& kg, const VelocityGrid& vg) : kgrid(&kg), vgrid(&vg) {
    modes.assign(std::size_t(kg.size()), ComplexField::Zero(vg.size()));
  }

  int nk() const { return int(modes.size()); }

  /// sqrt( sum_k w_k ||f(k)||^2_{L2_v} )
  Real norm() const {
    Real s = 0;
    for (int i = 0; i < nk(); ++i) {
      const Real m = vgrid->norm(modes[std::size_t(i)]);
      s += kgrid->weight(i) * m * m;
    }
    return std::sqrt(s);
  }

  /// Largest ||f(-k) - conj f(k)||_{L2_v} over mode pairs (0 on radial grids).
  Real conj_symmetry_defect() const {
    if (!kgrid->is_lattice()) return 0;
    Real worst = 0;
    for (int i = 0; i < nk(); ++i) {
      const int j = kgrid->neg_index(i);
      const ComplexField d =
          modes[std::size_t(i)] - modes[std::size_t(j)].conjugate();
      worst = std::max(worst, vgrid->norm(d));
    }
    return worst;
  }

  /// Replace each pair by its symmetric part; the k = 0 mode becomes real.
  void enforce_conj_symmetry() {
    if (!kgrid->is_lattice()) return;
    for (int i = 0; i < nk(); ++i) {
      const int j = kgrid->neg_index(i);
      if (j < i) continue;
      if (j == i) {
        modes[std::size_t(i)].imag().setZero();
        continue;
      }
      const ComplexField a =
          0.5 * (modes[std::size_t(i)] + modes[std::size_t(j)].conjugate());
      modes[std::size_t(i)] = a;
      modes[std::size_t(j)] = a.conjugate();
    }
  }

  /// Index of the first mode containing a NaN/Inf, or -1 when clean.
  int first_bad_mode() const {
    for (int i = 0; i < nk(); ++i)
      if (!modes[std::size_t(i)].allFinite()) return i;
    return -1;
  }
};

}  // namespace boltzk
