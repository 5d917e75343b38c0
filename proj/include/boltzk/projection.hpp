#pragma once

#include <Eigen/Dense>

#include "boltzk/velocity_grid.hpp"

namespace boltzk {

template <class Scalar>
struct MacroCoeffsT {
  Scalar a{};
  std::array<Scalar, 3> b{};
  Scalar c{};

  Real abs2() const {
    auto sq = [](Scalar z) { return std::norm(Complex(z)); };
    return sq(a) + sq(b[0]) + sq(b[1]) + sq(b[2]) + sq(c);
  }
  Real abs() const { return std::sqrt(abs2()); }
};

using MacroCoeffs  = MacroCoeffsT<Complex>;
using MacroCoeffsR = MacroCoeffsT<Real>;

/// Projector onto span{sqrt(mu), v_j sqrt(mu), (|v|^2-3) sqrt(mu)} in the
/// discrete L^2_v inner product, via the 5x5 Gram system. The basis is not
/// exactly orthonormal on a finite grid, so coefficients come from a solve,
/// which makes P idempotent to machine precision by construction.
class MacroProjector {
 public:
  explicit MacroProjector(const VelocityGrid& g) : grid_(&g) {
    const int n = g.size();
    basis_.resize(n, 5);
    for (int m = 0; m < n; ++m) {
      const Vec3 v  = g.node(m);
      const Real sq = std::sqrt(maxwellian(v));
      basis_(m, 0)  = sq;
      basis_(m, 1)  = v.x * sq;
      basis_(m, 2)  = v.y * sq;
      basis_(m, 3)  = v.z * sq;
      basis_(m, 4)  = (v.squared_norm() - 3) * sq;
    }
    gram_ = g.weight() * (basis_.transpose() * basis_);

    Eigen::SelfAdjointEigenSolver<Eigen::Matrix<Real, 5, 5>> es(gram_);
    const Real lmin = es.eigenvalues().minCoeff();
    const Real lmax = es.eigenvalues().maxCoeff();
    cond_           = (lmin > 0) ? lmax / lmin : std::numeric_limits<Real>::infinity();
    if (!(lmin > 0) || cond_ > 1e12)
      throw ConfigError("macro projector: degenerate Gram matrix (grid too coarse), "
                        "condition number " + std::to_string(cond_));
    solver_.compute(gram_);
  }

  const VelocityGrid& grid() const { return *grid_; }
  Real condition_number() const { return cond_; }
  const Eigen::MatrixXd& basis() const { return basis_; }

  MacroCoeffsR coefficients(const Field& f) const {
    Eigen::Vector<Real, 5> mom = grid_->weight() * (basis_.transpose() * f);
    Eigen::Vector<Real, 5> cf  = solver_.solve(mom);
    MacroCoeffsR out;
    out.a = cf[0];
    out.b = {cf[1], cf[2], cf[3]};
    out.c = cf[4];
    return out;
  }
  MacroCoeffs coefficients(const ComplexField& f) const {
    const MacroCoeffsR re = coefficients(Field(f.real()));
    const MacroCoeffsR im = coefficients(Field(f.imag()));
    MacroCoeffs        out;
    out.a = {re.a, im.a};
    for (int j = 0; j < 3; ++j) out.b[j] = {re.b[j], im.b[j]};
    out.c = {re.c, im.c};
    return out;
  }

  Field project(const Field& f) const {
    const auto             cf = coefficients(f);
    Eigen::Vector<Real, 5> c;
    c << cf.a, cf.b[0], cf.b[1], cf.b[2], cf.c;
    return basis_ * c;
  }
  ComplexField project(const ComplexField& f) const {
    ComplexField out(f.size());
    out.real() = project(Field(f.real()));
    out.imag() = project(Field(f.imag()));
    return out;
  }

  Field        micro(const Field& f) const { return f - project(f); }  // (I - P) f
  ComplexField micro(const ComplexField& f) const { return f - project(f); }

 private:
  const VelocityGrid* grid_;
  Eigen::MatrixXd     basis_;
  Eigen::Matrix<Real, 5, 5> gram_;
  Eigen::LDLT<Eigen::Matrix<Real, 5, 5>> solver_;
  Real cond_ = 0;
};

/// Second- and third-order moment functionals of the macro system:
///   Theta_{jm}(f) = ((v_j v_m - delta_{jm}) mu^{1/2}, f)
///   Lambda_j(f)   = (1/10) ((|v|^2 - 5) v_j mu^{1/2}, f)
/// The subtraction is the Kronecker delta (not a flat constant): that is the
/// convention under which the off-diagonal momentum-flux equations close and
/// the equilibrium moments vanish identically.
class MomentSet {
 public:
  explicit MomentSet(const VelocityGrid& g) : grid_(&g) {
    const int n = g.size();
    theta_.resize(n, 9);
    lambda_.resize(n, 3);
    for (int m = 0; m < n; ++m) {
      const Vec3 v  = g.node(m);
      const Real sq = std::sqrt(maxwellian(v));
      for (int j = 0; j < 3; ++j) {
        for (int l = 0; l < 3; ++l)
          theta_(m, 3 * j + l) = (v[j] * v[l] - (j == l ? 1 : 0)) * sq;
        lambda_(m, j) = Real(0.1) * (v.squared_norm() - 5) * v[j] * sq;
      }
    }
  }

  Eigen::Matrix3d theta(const Field& f) const {
    Eigen::Vector<Real, 9> t = grid_->weight() * (theta_.transpose() * f);
    Eigen::Matrix3d        out;
    for (int j = 0; j < 3; ++j)
      for (int l = 0; l < 3; ++l) out(j, l) = t[3 * j + l];
    return out;
  }
  Eigen::Matrix3cd theta(const ComplexField& f) const {
    Eigen::Matrix3cd out;
    out.real() = theta(Field(f.real()));
    out.imag() = theta(Field(f.imag()));
    return out;
  }

  Eigen::Vector3d lambda(const Field& f) const {
    return grid_->weight() * (lambda_.transpose() * f);
  }
  Eigen::Vector3cd lambda(const ComplexField& f) const {
    Eigen::Vector3cd out;
    out.real() = lambda(Field(f.real()));
    out.imag() = lambda(Field(f.imag()));
    return out;
  }

 private:
  const VelocityGrid* grid_;
  Eigen::MatrixXd     theta_;
  Eigen::MatrixXd     lambda_;
};

}  // namespace boltzk
