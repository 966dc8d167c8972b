#pragma once

// Dense matrix kernels shared by every higher layer. All functions are pure,
// templated on the Eigen expression type, and evaluate into plain dynamic
// matrices of the same scalar.

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

#include "safectl/errors.hpp"

namespace safectl {

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using Matrix = MatrixX<double>;
using Vector = VectorX<double>;

/// Convergence controls for iterative kernels.
struct Tolerance {
  double abs = 1e-10;
  double rel = 1e-9;
  int max_iters = 10'000;

  void validate() const {
    if (!(abs >= 0.0) || !(rel >= 0.0) || abs + rel <= 0.0 || max_iters < 1) {
      throw Error(ErrorKind::InvalidTolerance,
                  "need abs, rel >= 0 with abs + rel > 0 and max_iters >= 1");
    }
  }

  double threshold(double scale) const { return abs + rel * scale; }
};

enum class Definiteness { PositiveDefinite, PositiveSemiDefinite, Indefinite };

namespace detail {

template <typename Derived>
void require_square(const Eigen::MatrixBase<Derived>& m, const char* what) {
  if (m.rows() != m.cols()) {
    throw Error(ErrorKind::NonSquare,
                std::string(what) + ": got " + std::to_string(m.rows()) + "x" +
                    std::to_string(m.cols()));
  }
}

template <typename Derived>
void require_finite(const Eigen::MatrixBase<Derived>& m, const char* what) {
  if (!m.allFinite()) {
    throw Error(ErrorKind::NumericalFailure,
                std::string(what) + ": non-finite entries");
  }
}

}  // namespace detail

/// (M + Mᵀ) / 2
template <typename Derived>
MatrixX<typename Derived::Scalar> symmetrize(const Eigen::MatrixBase<Derived>& m) {
  detail::require_square(m, "symmetrize");
  return (m + m.transpose()) / typename Derived::Scalar(2);
}

/// Largest eigenvalue modulus.
template <typename Derived>
typename Derived::RealScalar spectral_radius(const Eigen::MatrixBase<Derived>& m) {
  using Scalar = typename Derived::Scalar;
  detail::require_square(m, "spectral_radius");
  detail::require_finite(m, "spectral_radius");
  if (m.rows() == 0) return 0;
  if (m.rows() == 1) return std::abs(m(0, 0));
  Eigen::EigenSolver<MatrixX<Scalar>> solver(m.eval(), /*computeEigenvectors=*/false);
  if (solver.info() != Eigen::Success) {
    throw Error(ErrorKind::NumericalFailure, "spectral_radius: eigenvalue iteration failed");
  }
  return solver.eigenvalues().cwiseAbs().maxCoeff();
}

/// Largest singular value σ_max(M).
template <typename Derived>
typename Derived::RealScalar operator_norm(const Eigen::MatrixBase<Derived>& m) {
  using Scalar = typename Derived::Scalar;
  detail::require_finite(m, "operator_norm");
  if (m.size() == 0) return 0;
  if (m.rows() == 1 || m.cols() == 1) return m.norm();
  Eigen::JacobiSVD<MatrixX<Scalar>> svd(m.eval());
  const auto s = svd.singularValues()(0);
  if (!std::isfinite(s)) {
    throw Error(ErrorKind::NumericalFailure, "operator_norm: SVD breakdown");
  }
  return s;
}

/// Spectrum of a symmetric matrix, ascending. The input is symmetrized first.
template <typename Derived>
VectorX<typename Derived::Scalar> symmetric_eigenvalues(const Eigen::MatrixBase<Derived>& m) {
  using Scalar = typename Derived::Scalar;
  detail::require_square(m, "symmetric_eigenvalues");
  detail::require_finite(m, "symmetric_eigenvalues");
  if (m.rows() == 1) return VectorX<Scalar>::Constant(1, m(0, 0));
  Eigen::SelfAdjointEigenSolver<MatrixX<Scalar>> solver(symmetrize(m), Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success) {
    throw Error(ErrorKind::NumericalFailure, "symmetric_eigenvalues: solver failed");
  }
  return solver.eigenvalues();
}

template <typename Derived>
typename Derived::Scalar lambda_max(const Eigen::MatrixBase<Derived>& m) {
  return symmetric_eigenvalues(m).maxCoeff();
}

template <typename Derived>
typename Derived::Scalar lambda_min(const Eigen::MatrixBase<Derived>& m) {
  return symmetric_eigenvalues(m).minCoeff();
}

/// Operator norm of a symmetric matrix (max |λ|).
template <typename Derived>
typename Derived::Scalar symmetric_norm(const Eigen::MatrixBase<Derived>& m) {
  if (m.size() == 0) return 0;
  return symmetric_eigenvalues(m).cwiseAbs().maxCoeff();
}

/// Classifies a symmetric matrix by its smallest eigenvalue against ±tol.
/// Throws AsymmetricInput when ‖M − Mᵀ‖ > tol·‖M‖.
template <typename Derived>
Definiteness definiteness(const Eigen::MatrixBase<Derived>& m,
                          typename Derived::Scalar tol = 1e-10) {
  detail::require_square(m, "definiteness");
  const auto skew = (m - m.transpose()).norm();
  if (skew > tol * m.norm()) {
    throw Error(ErrorKind::AsymmetricInput,
                "definiteness: ‖M − Mᵀ‖ = " + std::to_string(skew));
  }
  const auto lo = lambda_min(m);
  if (lo > tol) return Definiteness::PositiveDefinite;
  if (lo >= -tol) return Definiteness::PositiveSemiDefinite;
  return Definiteness::Indefinite;
}

/// Symmetric square root and inverse square root of a PSD matrix, with
/// eigenvalues floored at `floor` before taking roots.
template <typename Scalar>
struct SymmetricRoots {
  MatrixX<Scalar> sqrt;
  MatrixX<Scalar> inv_sqrt;
  Scalar min_eigenvalue;
  Scalar max_eigenvalue;
};

template <typename Derived>
SymmetricRoots<typename Derived::Scalar> symmetric_roots(const Eigen::MatrixBase<Derived>& m,
                                                         typename Derived::Scalar floor = 1e-12) {
  using Scalar = typename Derived::Scalar;
  detail::require_square(m, "symmetric_roots");
  detail::require_finite(m, "symmetric_roots");
  Eigen::SelfAdjointEigenSolver<MatrixX<Scalar>> solver(symmetrize(m));
  if (solver.info() != Eigen::Success) {
    throw Error(ErrorKind::NumericalFailure, "symmetric_roots: solver failed");
  }
  const VectorX<Scalar> lam = solver.eigenvalues().cwiseMax(floor);
  const MatrixX<Scalar>& v = solver.eigenvectors();
  SymmetricRoots<Scalar> out;
  out.sqrt = symmetrize(v * lam.cwiseSqrt().asDiagonal() * v.transpose());
  out.inv_sqrt = symmetrize(v * lam.cwiseSqrt().cwiseInverse().asDiagonal() * v.transpose());
  out.min_eigenvalue = solver.eigenvalues().minCoeff();
  out.max_eigenvalue = solver.eigenvalues().maxCoeff();
  return out;
}

/// Solves FᵀXF − X + V = 0 for stable F by Smith doubling:
///   X ← X + FₖᵀXFₖ,  Fₖ ← Fₖ².
/// The result is symmetrized and polished by residual correction until
/// ‖FᵀXF − X + V‖ ≤ tol.rel·max(1, ‖V‖).
template <typename DerivedF, typename DerivedV>
MatrixX<typename DerivedF::Scalar> solve_discrete_lyapunov(const Eigen::MatrixBase<DerivedF>& f,
                                                           const Eigen::MatrixBase<DerivedV>& v,
                                                           const Tolerance& tol = {}) {
  using Scalar = typename DerivedF::Scalar;
  using Mat = MatrixX<Scalar>;
  tol.validate();
  detail::require_square(f, "solve_discrete_lyapunov(F)");
  detail::require_square(v, "solve_discrete_lyapunov(V)");
  if (f.rows() != v.rows()) {
    throw Error(ErrorKind::DimensionMismatch, "solve_discrete_lyapunov: F and V sizes differ");
  }
  const Scalar rho = spectral_radius(f);
  if (rho >= 1) {
    throw Error(ErrorKind::UnstableF,
                "solve_discrete_lyapunov: spectral radius " + std::to_string(rho) + " >= 1");
  }

  const Mat F = f;
  auto doubling = [&](const Mat& rhs) {
    Mat x = symmetrize(rhs);
    Mat fk = F;
    for (int k = 0; k < tol.max_iters; ++k) {
      const Mat inc = fk.transpose() * x * fk;
      x = symmetrize(x + inc);
      const Scalar inc_norm = inc.norm();
      if (inc_norm <= std::numeric_limits<Scalar>::epsilon() * x.norm() || inc_norm == 0) {
        return x;
      }
      fk = fk * fk;
      if (!fk.allFinite() || !x.allFinite()) break;
    }
    throw Error(ErrorKind::NumericalFailure, "solve_discrete_lyapunov: doubling did not converge");
  };

  const Mat V = v;
  Mat x = doubling(V);
  const Scalar target = tol.rel * std::max<Scalar>(1, operator_norm(V));
  for (int polish = 0; polish < 4; ++polish) {
    const Mat residual = symmetrize(F.transpose() * x * F - x + V);
    if (operator_norm(residual) <= target) return x;
    x = symmetrize(x + doubling(residual));
  }
  const Scalar final_residual = operator_norm(symmetrize(F.transpose() * x * F - x + V));
  if (final_residual > target) {
    throw Error(ErrorKind::NumericalFailure,
                "solve_discrete_lyapunov: residual " + std::to_string(final_residual));
  }
  return x;
}

/// exp(M) by scaling and squaring with a Padé approximant.
template <typename Derived>
MatrixX<typename Derived::Scalar> matrix_exponential(const Eigen::MatrixBase<Derived>& m) {
  using Scalar = typename Derived::Scalar;
  detail::require_square(m, "matrix_exponential");
  if (!m.allFinite()) {
    throw Error(ErrorKind::Overflow, "matrix_exponential: non-finite input");
  }
  MatrixX<Scalar> out = m.eval().exp();
  if (!out.allFinite()) {
    throw Error(ErrorKind::Overflow, "matrix_exponential: result not representable");
  }
  return out;
}

}  // namespace safectl
