#pragma once

#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include "boltzk/operator_matrix.hpp"
#include "boltzk/projection.hpp"

namespace boltzk {

/// Largest |eigenvalue| of a symmetric matrix by power iteration with a
/// fixed deterministic start (exactness is not needed; this sizes penalty
/// grids and time steps).
inline Real sym_operator_norm(const Eigen::MatrixXd& A, int iters = 80) {
  const int       n = int(A.rows());
  Eigen::VectorXd x(n);
  std::uint64_t   s = 0x9e3779b97f4a7c15ull;
  for (int i = 0; i < n; ++i) {
    s ^= s << 13;
    s ^= s >> 7;
    s ^= s << 17;
    x[i] = Real(s % 8191) / 8191 - Real(0.5);
  }
  x.normalize();
  Real lam = 0;
  for (int it = 0; it < iters; ++it) {
    Eigen::VectorXd y = A * x;
    lam               = y.norm();
    if (lam == 0) return 0;
    x = y / lam;
  }
  return lam;
}

/// Spectral lower bound of (S g, g) / (G g, g) over the orthogonal
/// complement of the five-dimensional conserved span, plus the quadratic
/// form residuals on that span itself.
struct CoercivityReport {
  Real              delta0          = 0;  // smallest micro generalized eigenvalue
  Real              kernel_residual = 0;  // max (S phi, phi)/(h^3 |phi|^2) on the span
  std::vector<Real> micro_spectrum;       // lowest few pencil eigenvalues
};

inline CoercivityReport coercivity_spectrum(const OperatorMatrix& S_L,
                                            const OperatorMatrix& G_D,
                                            const VelocityGrid&   grid,
                                            int                   spectrum_count = 8) {
  const int N = S_L.size();
  if (G_D.size() != N || grid.size() != N)
    throw ConfigError("coercivity: mismatched matrix and grid sizes");

  // PSD gate on the dissipation Gram (LDLT inertia check; a full spectral
  // check at this size would dwarf the pencil solve itself)
  const Real gd_norm = sym_operator_norm(G_D.dense);
  {
    Eigen::LDLT<Eigen::MatrixXd> ldlt(G_D.dense);
    if (ldlt.info() != Eigen::Success ||
        ldlt.vectorD().minCoeff() < -Real(1e-8) * gd_norm)
      throw NumericalError("coercivity: dissipation Gram is not PSD within tolerance");
  }

  const MacroProjector   proj(grid);
  const Eigen::MatrixXd& phi = proj.basis();

  CoercivityReport rep;
  for (int b = 0; b < 5; ++b) {
    const Field p   = phi.col(b);
    const Real  val = p.dot(S_L.dense * p) / (grid.weight() * p.squaredNorm());
    rep.kernel_residual = std::max(rep.kernel_residual, std::abs(val));
  }

  // orthonormal complement of the conserved span (uniform weights make the
  // plain QR the weighted one)
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(phi);
  Eigen::MatrixXd Qfull = qr.householderQ() * Eigen::MatrixXd::Identity(N, N);
  Eigen::MatrixXd Qp    = Qfull.rightCols(N - 5);

  Eigen::MatrixXd Ar = Qp.transpose() * S_L.dense * Qp;
  Eigen::MatrixXd Br = Qp.transpose() * G_D.dense * Qp;
  Ar                 = 0.5 * (Ar + Ar.transpose()).eval();
  Br                 = 0.5 * (Br + Br.transpose()).eval();

  Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> ges(Ar, Br);
  if (ges.info() != Eigen::Success) {
    // a hair of ridge on the right side and one retry
    Br.diagonal().array() += 1e-12 * gd_norm;
    ges.compute(Ar, Br);
    if (ges.info() != Eigen::Success)
      throw NumericalError("coercivity: generalized eigen solve failed");
  }
  rep.delta0 = ges.eigenvalues()[0];
  for (int i = 0; i < std::min<int>(spectrum_count, N - 5); ++i)
    rep.micro_spectrum.push_back(ges.eigenvalues()[i]);
  return rep;
}

/// Two-constant floor fit: the largest delta with
///     (S g, g) >= delta (G g, g) - C (diag_penalty g, g)   for all g,
/// scanned over a geometric C grid. delta(C) is the smallest eigenvalue of
/// the pencil (S + C penalty, G); it is nondecreasing in C, so the fit
/// reports the plateau value and the smallest C that reaches 90% of it.
struct FloorFit {
  Real delta = 0, C = 0, plateau = 0;
  std::vector<std::pair<Real, Real>> curve;  // (C, delta(C))
};

inline FloorFit fit_form_floor(const Eigen::MatrixXd& S, const Eigen::MatrixXd& G,
                               const Eigen::VectorXd& penalty_diag) {
  const int  N     = int(S.rows());
  const Real rho   = sym_operator_norm(S);
  const Real pmax  = penalty_diag.maxCoeff();
  if (pmax <= 0) throw ConfigError("floor fit: penalty must have positive entries");
  const Real base = rho / pmax;

  FloorFit fit;
  for (Real factor : {0.5, 1.0, 2.0, 5.0, 10.0, 20.0, 50.0}) {
    const Real      C = factor * base;
    Eigen::MatrixXd A = S;
    A.diagonal() += C * penalty_diag;
    Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> ges(A, G);
    if (ges.info() != Eigen::Success)
      throw NumericalError("floor fit: generalized eigen solve failed");
    fit.curve.emplace_back(C, ges.eigenvalues()[0]);
  }
  fit.plateau = fit.curve.back().second;
  fit.delta   = fit.plateau;
  fit.C       = fit.curve.back().first;
  for (const auto& [C, d] : fit.curve)
    if (d >= Real(0.9) * fit.plateau) {
      fit.C     = C;
      fit.delta = d;
      break;
    }
  (void)N;
  return fit;
}

/// Weighted coercivity: (L g, w^2 g) >= delta_q ||w g||_D^2 - C ||g||^2 on
/// the ball. The left side uses the symmetrized product of the form matrix
/// with diag(w^2).
inline FloorFit weighted_coercivity(const OperatorMatrix& S_L,
                                    const OperatorMatrix& G_D_w,
                                    const OperatorMatrix& ball_mass,
                                    const Field&          w) {
  const int N = S_L.size();
  if (G_D_w.size() != N || ball_mass.size() != N || w.size() != N)
    throw ConfigError("weighted coercivity: mismatched sizes");
  const Eigen::VectorXd w2  = w.array().square();
  Eigen::MatrixXd       Sw  = w2.asDiagonal() * S_L.dense;
  Sw                        = 0.5 * (Sw + Sw.transpose()).eval();
  return fit_form_floor(Sw, G_D_w.dense, ball_mass.diag);
}

/// Floor fit for the first split form against the full dissipation norm,
/// with the plain squared mass as the penalty term.
inline FloorFit l1_coercivity(const OperatorMatrix& S_L1, const OperatorMatrix& G_D,
                              const VelocityGrid& grid) {
  const Eigen::VectorXd mass =
      Eigen::VectorXd::Constant(S_L1.size(), grid.weight());
  return fit_form_floor(S_L1.dense, G_D.dense, mass);
}

/// Smallness constant of the second split: the operator norm of the form
/// conjugated by the near-flat Maxwellian power weight,
///     |(L2 f, f)| <= C || mu^{0.001} f ||^2 .
inline Real l2_smallness_constant(const OperatorMatrix& S_L2, const VelocityGrid& grid) {
  const int       N = S_L2.size();
  Eigen::VectorXd d(N);
  for (int i = 0; i < N; ++i)
    d[i] = std::pow(maxwellian(grid.node(i)), Real(0.001)) * std::sqrt(grid.weight());
  const Eigen::MatrixXd M =
      d.cwiseInverse().asDiagonal() * S_L2.dense * d.cwiseInverse().asDiagonal();
  return sym_operator_norm(M);
}

}  // namespace boltzk
