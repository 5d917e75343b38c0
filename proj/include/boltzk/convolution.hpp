#pragma once

#include <vector>

#include "boltzk/collision_engine.hpp"
#include "boltzk/state.hpp"

namespace boltzk {

/// The nonlinear term on a lattice of Fourier modes:
///   Gamma_hat(k) = sum_l Gamma(f_hat(k - l), f_hat(l)) dk^3,
/// truncated to the lattice (modes falling outside contribute nothing; there
/// is no aliasing wrap).
///
/// Two routes are provided. `direct` enumerates mode pairs and calls the
/// batched engine once per pair; it is the transparent reference and carries
/// a pair budget so an accidental large request fails fast with a cost
/// estimate instead of hanging. `fast` evaluates f on a padded collocation
/// grid in x -- L >= 3m+1 points per axis, so products of modes up to |m|
/// cannot alias back onto the kept lattice -- applies Gamma pointwise in a
/// single batched engine call over all L^3 points, and transforms back. On
/// conjugate-symmetric states the two routes agree to rounding.
class GammaLattice {
 public:
  GammaLattice(const KGrid& kg, const VelocityGrid& vg, const CollisionTables& tab)
      : kg_(&kg), vg_(&vg), eng_(tab, vg) {
    if (!kg.is_lattice())
      throw ConfigError("gamma-hat convolution requires a lattice k grid");
    m_ = kg.modes_per_side();
    L_ = 3 * m_ + 1;
  }

  const GammaBatchEngine& engine() const { return eng_; }
  int                     padded_points_per_axis() const { return L_; }

  /// Truncated pair sum. Zero modes are skipped exactly; if the number of
  /// surviving ordered pairs exceeds `pair_budget`, throws ConfigError with
  /// the estimated cost.
  std::vector<ComplexField> direct(const std::vector<ComplexField>& modes,
                                   double pair_budget = 5000) const {
    const int                 nk = kg_->size();
    std::vector<ComplexField> out(nk, ComplexField::Zero(vg_->size()));
    std::vector<int>          nz;
    for (int i = 0; i < nk; ++i)
      if (modes[i].squaredNorm() > 0) nz.push_back(i);
    const double npairs = double(nz.size()) * double(nz.size());
    if (npairs > pair_budget)
      throw ConfigError("gamma-hat direct sum over " + std::to_string(nz.size()) +
                        " nonzero modes needs up to " +
                        std::to_string(std::int64_t(npairs)) +
                        " pair evaluations, over the budget of " +
                        std::to_string(std::int64_t(pair_budget)) +
                        "; raise the budget or use the collocation route");
    const Real   dk3 = std::pow(kg_->spacing(), 3);
    ComplexField tmp;
    for (int a : nz)
      for (int b : nz) {
        const auto ca = kg_->coords(a);
        const auto cb = kg_->coords(b);
        const int  io = kg_->index_of(ca[0] + cb[0], ca[1] + cb[1], ca[2] + cb[2]);
        if (io < 0) continue;
        eng_.apply_complex(modes[a], modes[b], tmp);
        out[io] += dk3 * tmp;
      }
    return out;
  }

  std::vector<ComplexField> direct(const SpectralState& s, double pair_budget = 5000) const {
    return direct(s.modes, pair_budget);
  }

  /// Collocation route: one wide engine application per call. The x fields
  /// are real for conjugate-symmetric input (the imaginary part is dropped),
  /// which is what lets a single real batch carry the whole grid.
  std::vector<ComplexField> fast(const std::vector<ComplexField>& modes) const {
    const int nk = kg_->size();
    const int nv = vg_->size();
    const int P  = L_ * L_ * L_;
    const Real dk3 = std::pow(kg_->spacing(), 3);

    // forward phases e^{2 pi i (c . j) / L} per (mode, x point), scaled by dk^3
    Eigen::MatrixXcd W(nk, P);
    for (int i = 0; i < nk; ++i) {
      const auto c = kg_->coords(i);
      for (int jx = 0, col = 0; jx < L_; ++jx)
        for (int jy = 0; jy < L_; ++jy)
          for (int jz = 0; jz < L_; ++jz, ++col) {
            const Real th = 2 * pi * (Real(c[0] * jx + c[1] * jy + c[2] * jz) / L_);
            W(i, col)     = dk3 * std::polar(Real(1), th);
          }
    }

    RowBatch F(nv, P);
    for (int v = 0; v < nv; ++v) {
      double* r = F.row(v);
      for (int i = 0; i < nk; ++i) {
        const Complex fv = modes[i][v];
        for (int col = 0; col < P; ++col) {
          const Complex& w = W(i, col);
          r[col] += w.real() * fv.real() - w.imag() * fv.imag();
        }
      }
    }

    RowBatch O(nv, P);
    eng_.apply(F, F, O);

    // Gamma_hat(k) = (1 / (dk^3 L^3)) sum_j e^{-i k.x_j} Gamma(x_j); the
    // conj(W) row carries one surplus dk^3 which the scale divides back out.
    std::vector<ComplexField> out(nk, ComplexField(nv));
    const Real                scale = Real(1) / (dk3 * dk3 * P);
    for (int i = 0; i < nk; ++i) {
      for (int v = 0; v < nv; ++v) {
        const double* r   = O.row(v);
        Complex       acc = 0;
        for (int col = 0; col < P; ++col) acc += std::conj(W(i, col)) * r[col];
        out[i][v] = scale * acc;
      }
    }
    return out;
  }

  std::vector<ComplexField> fast(const SpectralState& s) const { return fast(s.modes); }

 private:
  const KGrid*        kg_;
  const VelocityGrid* vg_;
  GammaBatchEngine    eng_;
  int                 m_ = 0, L_ = 0;
};

}  // namespace boltzk
