#pragma once

#include <Eigen/Dense>

#include "boltzk/collision_tables.hpp"

namespace boltzk {

/// Row-major [node][column] batch of real fields, padded for vectorization.
struct RowBatch {
  int                 nodes = 0, width = 0, stride = 0;
  std::vector<double> data;

  RowBatch() = default;
  RowBatch(int n, int w) { resize(n, w); }
  void resize(int n, int w) {
    nodes  = n;
    width  = w;
    stride = (w + 3) & ~3;
    data.assign(std::size_t(n) * stride, 0.0);
  }
  double*       row(int i) { return data.data() + std::size_t(i) * stride; }
  const double* row(int i) const { return data.data() + std::size_t(i) * stride; }
  void          set_zero() { std::fill(data.begin(), data.end(), 0.0); }

  void set_column(int c, const Field& f) {
    for (int i = 0; i < nodes; ++i) row(i)[c] = f[i];
  }
  Field column(int c) const {
    Field f(nodes);
    for (int i = 0; i < nodes; ++i) f[i] = row(i)[c];
    return f;
  }
};

/// Batched evaluator for Gamma(f,g) = gain - loss over many field pairs at
/// once (columns of the batch). Internally the columns are converted to
/// ratios f/sqrt(mu), the tables' quadratic stencils are applied to those,
/// and the result is scaled back by sqrt(mu):
///   Gamma(f,g)_i = sqrt(mu_i) sum_{off,sigma} W mu_j [rf(u') rg(v') - rf_j rg_i],
/// the same ratio form as the direct reference path, followed by the rank-5
/// moment correction that zeroes (Gamma, sqrt(mu) {1, v, |v|^2}) exactly
/// (matching the conserving direct path). The gain loops run over
/// precomputed offset tables with fixed stencils, so the inner column loop is
/// a contiguous fused multiply-add; this is the layout the nonlinear lattice
/// runs live on.
class GammaBatchEngine {
 public:
  GammaBatchEngine(const CollisionTables& t, const VelocityGrid& g)
      : t_(&t), g_(&g), mu_(maxwellian_field(g)), sqmu_(sqrt_mu_field(g)) {
    build_loss();
    Eigen::Matrix<Real, 5, 5> gram = Eigen::Matrix<Real, 5, 5>::Zero();
    for (int i = 0; i < g.size(); ++i) {
      const Vec3 v    = g.node(i);
      const Real a[5] = {1, v.x, v.y, v.z, v.squared_norm()};
      for (int k = 0; k < 5; ++k)
        for (int l = 0; l < 5; ++l) gram(k, l) += (mu_[i] * a[k]) * a[l];
    }
    gram_.compute(gram);
  }

  const CollisionTables& tables() const { return *t_; }

  /// out += Gamma(fcols, gcols) column-by-column; fcols and gcols must share
  /// the batch geometry. Deterministic for a fixed thread count and, because
  /// each output row is owned by the i-loop, for any thread count as well.
  void apply(const RowBatch& f, const RowBatch& g, RowBatch& out) const {
    RowBatch rf = f, rg = g;
    to_ratio(rf);
    to_ratio(rg);
    RowBatch acc(f.nodes, f.width);
    gain(rf, rg, acc);
    loss(rf, rg, acc);
    for (int i = 0; i < acc.nodes; ++i) {
      const double s = sqmu_[i];
      double*      a = acc.row(i);
      for (int b = 0; b < acc.stride; ++b) a[b] *= s;
    }
    conserve(acc);
    for (int i = 0; i < out.nodes; ++i) {
      const double* a = acc.row(i);
      double*       o = out.row(i);
      for (int b = 0; b < out.stride; ++b) o[b] += a[b];
    }
  }

  /// out = Gamma(f,g) for a complex pair, routed through four real columns.
  void apply_complex(const ComplexField& f, const ComplexField& g, ComplexField& out) const {
    const int n = g_->size();
    RowBatch  F(n, 4), G(n, 4), O(n, 4);
    for (int i = 0; i < n; ++i) {
      double* fr = F.row(i);
      double* gr = G.row(i);
      fr[0] = f[i].real(); gr[0] = g[i].real();
      fr[1] = f[i].imag(); gr[1] = g[i].imag();
      fr[2] = f[i].real(); gr[2] = g[i].imag();
      fr[3] = f[i].imag(); gr[3] = g[i].real();
    }
    apply(F, G, O);
    out.resize(n);
    for (int i = 0; i < n; ++i) {
      const double* o = O.row(i);
      out[i] = Complex(o[0] - o[1], o[2] + o[3]);
    }
  }

 private:
  // zero the five collision moments of each column exactly: subtract the
  // sqrt(mu)-weighted span of {1, v, |v|^2} fitted through the shared Gram
  void conserve(RowBatch& bt) const {
    const int W = bt.stride;
    Eigen::Matrix<double, 5, Eigen::Dynamic> mom(5, W);
    mom.setZero();
    for (int i = 0; i < bt.nodes; ++i) {
      const Vec3    v    = g_->node(i);
      const double  s    = sqmu_[i];
      const double  a[5] = {s, s * v.x, s * v.y, s * v.z, s * v.squared_norm()};
      const double* r    = bt.row(i);
      for (int k = 0; k < 5; ++k) {
        const double ak = a[k];
        for (int b = 0; b < W; ++b) mom(k, b) += ak * r[b];
      }
    }
    mom = gram_.solve(mom);
    for (int i = 0; i < bt.nodes; ++i) {
      const Vec3   v    = g_->node(i);
      const double s    = sqmu_[i];
      const double a[5] = {s, s * v.x, s * v.y, s * v.z, s * v.squared_norm()};
      double*      r    = bt.row(i);
      for (int k = 0; k < 5; ++k) {
        const double ak = a[k];
        for (int b = 0; b < W; ++b) r[b] -= ak * mom(k, b);
      }
    }
  }

  // divide every row by sqrt(mu_i); padding columns stay zero
  void to_ratio(RowBatch& b) const {
    for (int i = 0; i < b.nodes; ++i) {
      const double inv = 1.0 / sqmu_[i];
      double*      r   = b.row(i);
      for (int c = 0; c < b.stride; ++c) r[c] *= inv;
    }
  }

  void build_loss() {
    const int n = g_->size();
    loss_.resize(n, n);
    const Real h3 = g_->weight();
    for (int i = 0; i < n; ++i) {
      const auto ci = g_->unflat(i);
      for (int j = 0; j < n; ++j) {
        const auto cj = g_->unflat(j);
        const int  oi = t_->offset_index(ci[0] - cj[0], ci[1] - cj[1], ci[2] - cj[2]);
        loss_(i, j)   = h3 * t_->loss_kernel[oi] * mu_[j];
      }
    }
  }

  // acc -= sum_j loss(i,j) rf_j * rg_i, batched as a matrix product
  void loss(const RowBatch& rf, const RowBatch& rg, RowBatch& acc) const {
    const int n = g_->size();
    using RM = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    Eigen::Map<const RM> F(rf.data.data(), n, rf.stride);
    Eigen::Map<const RM> G(rg.data.data(), n, rg.stride);
    Eigen::Map<RM>       O(acc.data.data(), n, acc.stride);
    RM conv = loss_ * F;
    O.array() -= conv.array() * G.array();
  }

  void gain(const RowBatch& rf, const RowBatch& rg, RowBatch& acc) const {
    const int n  = t_->n;
    const int ns = t_->nsig;
    const int W  = rf.stride;

    // Threads own disjoint ix-slabs of the output, so any thread count gives
    // the same bitwise result: each row accumulates in offset -> sigma order.
#pragma omp parallel
    {
      std::vector<double> fa(W), fb(W);
#pragma omp for schedule(static)
      for (int sx = 0; sx < n; ++sx) {
        for (int ox = -(n - 1); ox <= n - 1; ++ox)
          for (int oy = -(n - 1); oy <= n - 1; ++oy)
            for (int oz = -(n - 1); oz <= n - 1; ++oz) {
              if (ox == 0 && oy == 0 && oz == 0) continue;
              const int xlo = std::max(0, ox), xhi = n + std::min(0, ox);
              if (sx < xlo || sx >= xhi) continue;
              const int oi   = t_->offset_index(ox, oy, oz);
              const int uoff = (ox * n + oy) * n + oz;
              const int ylo = std::max(0, oy), yhi = n + std::min(0, oy);
              const int zlo = std::max(0, oz), zhi = n + std::min(0, oz);

              for (int s = 0; s < ns; ++s) {
                const auto& row = t_->rows[std::size_t(oi) * ns + s];
                if (row.W == 0) continue;

                // 27-tap quadratic stencils (axis offsets + weights) for u', v'
                int  au[27][3], av[27][3];
                Real wu[27], wv[27];
                int  offu[27], offv[27];
                int  tap = 0;
                for (int tx = 0; tx < 3; ++tx)
                  for (int ty = 0; ty < 3; ++ty)
                    for (int tz = 0; tz < 3; ++tz, ++tap) {
                      au[tap][0] = row.cen_u[0] - 1 + tx;
                      au[tap][1] = row.cen_u[1] - 1 + ty;
                      au[tap][2] = row.cen_u[2] - 1 + tz;
                      av[tap][0] = row.cen_v[0] - 1 + tx;
                      av[tap][1] = row.cen_v[1] - 1 + ty;
                      av[tap][2] = row.cen_v[2] - 1 + tz;
                      wu[tap] = row.qu[0][tx] * row.qu[1][ty] * row.qu[2][tz];
                      wv[tap] = row.qv[0][tx] * row.qv[1][ty] * row.qv[2][tz];
                      offu[tap] = (au[tap][0] * n + au[tap][1]) * n + au[tap][2];
                      offv[tap] = (av[tap][0] * n + av[tap][1]) * n + av[tap][2];
                    }

                const int ix = sx;
                for (int iy = ylo; iy < yhi; ++iy)
                  for (int iz = zlo; iz < zhi; ++iz) {
                    const int i  = (ix * n + iy) * n + iz;
                    const int ui = i - uoff;
                    const double scale = row.W * mu_[ui];

                    std::fill(fa.begin(), fa.end(), 0.0);
                    std::fill(fb.begin(), fb.end(), 0.0);
                    for (int t = 0; t < 27; ++t) {
                      const int tx = ix + au[t][0], ty = iy + au[t][1],
                                tz = iz + au[t][2];
                      if (unsigned(tx) < unsigned(n) && unsigned(ty) < unsigned(n) &&
                          unsigned(tz) < unsigned(n)) {
                        const double  wt = wu[t];
                        const double* fr = rf.row(i + offu[t]);
                        for (int b = 0; b < W; ++b) fa[b] += wt * fr[b];
                      }
                    }
                    for (int t = 0; t < 27; ++t) {
                      const int tx = ix + av[t][0], ty = iy + av[t][1],
                                tz = iz + av[t][2];
                      if (unsigned(tx) < unsigned(n) && unsigned(ty) < unsigned(n) &&
                          unsigned(tz) < unsigned(n)) {
                        const double  wt = wv[t];
                        const double* gr = rg.row(i + offv[t]);
                        for (int b = 0; b < W; ++b) fb[b] += wt * gr[b];
                      }
                    }
                    double* o = acc.row(i);
                    for (int b = 0; b < W; ++b) o[b] += scale * fa[b] * fb[b];
                  }
              }
            }
      }
    }
  }

  const CollisionTables* t_;
  const VelocityGrid*    g_;
  Field                  mu_, sqmu_;
  Eigen::MatrixXd        loss_;
  Eigen::LDLT<Eigen::Matrix<Real, 5, 5>> gram_;
};

}  // namespace boltzk
