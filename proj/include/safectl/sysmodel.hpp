#pragma once

#include <complex>
#include <limits>
#include <vector>

#include "safectl/numkernel.hpp"

namespace safectl {

/// Discrete-time plant
///   x_{t+1} = A x_t + B u_t + D w_t
///   z_t     = C x_t + E u_t
/// with EᵀC = 0, Q = CᵀC ⪰ 0 and R = EᵀE ⪰ 0. Immutable once built.
class LtiSystem {
 public:
  /// Validates dimensions, finiteness and the cross-weighting condition
  /// ‖EᵀC‖ ≤ 1e-10·(1 + ‖E‖‖C‖).
  LtiSystem(Matrix A, Matrix B, Matrix D, Matrix C, Matrix E);

  const Matrix& A() const { return a_; }
  const Matrix& B() const { return b_; }
  const Matrix& D() const { return d_; }
  const Matrix& C() const { return c_; }
  const Matrix& E() const { return e_; }
  const Matrix& Q() const { return q_; }
  const Matrix& R() const { return r_; }

  Eigen::Index states() const { return a_.rows(); }
  Eigen::Index inputs() const { return b_.cols(); }
  Eigen::Index disturbances() const { return d_.cols(); }
  Eigen::Index outputs() const { return c_.rows(); }

 private:
  Matrix a_, b_, d_, c_, e_, q_, r_;
};

/// State-feedback law u = −K x.
struct Gain {
  Matrix K;
};

struct Trajectory {
  std::vector<Vector> x;  // x_0 .. x_T
  std::vector<Vector> u;  // u_0 .. u_{T-1}
  std::vector<Vector> w;
  std::vector<Vector> z;

  std::size_t horizon() const { return u.size(); }
};

struct Discretized {
  Matrix A;
  Matrix B;
  Matrix D;
};

/// Zero-order-hold sampling of (Ac, Bc, Dc) at period dt via the exponential
/// of the augmented block matrix [[Ac, Bc, Dc], [0, 0, 0], [0, 0, 0]]·dt.
Discretized zoh_discretize(const Matrix& Ac, const Matrix& Bc, const Matrix& Dc, double dt);

struct ClosedLoop {
  Matrix A;  // A − BK
  Matrix C;  // C − EK
};

ClosedLoop closed_loop(const LtiSystem& sys, const Gain& gain);

/// Output map with C_clᵀC_cl = Q + KᵀRK, used when the cost weights differ
/// from the plant's own (C, E). Returned as the n×n symmetric square root.
Matrix weighted_output_map(const Matrix& Q, const Matrix& R, const Gain& gain);

struct HinfOptions {
  int grid_points = 2048;
  double refine_tol = 1e-8;
};

/// Evaluates G(e^{iω}) = C (e^{iω}I − A)⁻¹ D.
class FrequencyResponse {
 public:
  using ComplexMatrix = MatrixX<std::complex<double>>;

  FrequencyResponse(const Matrix& A, const Matrix& C, const Matrix& D);

  ComplexMatrix at(double omega) const;
  double gain_at(double omega) const;

  /// Bound on |dσ_max/dω| from the modal form; +∞ when unavailable.
  double lipschitz() const { return lipschitz_; }

 private:
  bool modal_ = false;
  double lipschitz_ = std::numeric_limits<double>::infinity();
  Matrix a_, c_, d_;
  ComplexMatrix cv_, vd_;
  VectorX<std::complex<double>> poles_;
};

/// sup_ω σ_max(C (e^{iω}I − A)⁻¹ D): maximum over a uniform grid on [0, π],
/// then golden-section refinement around the grid peak. Grid points that a
/// Lipschitz bound proves to be below the running maximum are skipped. The value is a lower
/// bound on the true norm, tight to the refinement bracket.
double hinf_norm(const Matrix& A_cl, const Matrix& C_cl, const Matrix& D,
                 const HinfOptions& options = {});

struct ValidityReport {
  bool valid = false;
  double spectral_radius = 0.0;
  double hinf = std::numeric_limits<double>::infinity();  // +inf when unstable
};

/// Membership in the valid set: ρ(A−BK) < 1 and ‖T_zw‖∞ < γ for the plant's
/// own output z = Cx + Eu.
ValidityReport is_valid_controller(const LtiSystem& sys, const Gain& gain, double gamma,
                                   const HinfOptions& options = {});

/// Same test with the output weighted by (Q, R) instead of the plant's (C, E).
ValidityReport is_valid_controller(const LtiSystem& sys, const Gain& gain, const Matrix& Q,
                                   const Matrix& R, double gamma,
                                   const HinfOptions& options = {});

/// One transition under u = −Kx. Throws StateOverflow when ‖x_{t+1}‖ > 1e12.
struct Transition {
  Vector u;
  Vector z;
  Vector x_next;
};

Transition advance(const LtiSystem& sys, const Gain& gain, const Vector& x, const Vector& w);

/// Feeds the given disturbance sequence through u_t = −K_t x_t from x0.
Trajectory simulate(const LtiSystem& sys, const std::vector<Gain>& gains,
                    const std::vector<Vector>& disturbances, const Vector& x0);

inline constexpr double kStateOverflow = 1e12;

}  // namespace safectl
