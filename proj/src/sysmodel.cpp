#include "safectl/sysmodel.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>

namespace safectl {

namespace {

std::string dims(const Matrix& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

void require_finite(const Matrix& m, const char* name) {
  if (!m.allFinite()) {
    throw Error(ErrorKind::NumericalFailure, std::string(name) + " has non-finite entries");
  }
}

constexpr double kPi = 3.14159265358979323846;

}  // namespace

LtiSystem::LtiSystem(Matrix A, Matrix B, Matrix D, Matrix C, Matrix E)
    : a_(std::move(A)), b_(std::move(B)), d_(std::move(D)), c_(std::move(C)), e_(std::move(E)) {
  const auto n = a_.rows();
  if (n == 0 || a_.cols() != n) {
    throw Error(ErrorKind::DimensionMismatch, "A must be square and non-empty, got " + dims(a_));
  }
  if (b_.rows() != n || d_.rows() != n || c_.cols() != n) {
    throw Error(ErrorKind::DimensionMismatch, "A " + dims(a_) + ", B " + dims(b_) + ", D " +
                                                  dims(d_) + ", C " + dims(c_));
  }
  if (e_.rows() != c_.rows() || e_.cols() != b_.cols()) {
    throw Error(ErrorKind::DimensionMismatch,
                "E must be " + std::to_string(c_.rows()) + "x" + std::to_string(b_.cols()) +
                    ", got " + dims(e_));
  }
  for (const auto* m : {&a_, &b_, &d_, &c_, &e_}) require_finite(*m, "plant matrix");

  const double cross = operator_norm(Matrix(e_.transpose() * c_));
  const double scale = 1.0 + operator_norm(e_) * operator_norm(c_);
  if (cross > 1e-10 * scale) {
    throw Error(ErrorKind::AssumptionViolation,
                "‖EᵀC‖ = " + std::to_string(cross) + " exceeds 1e-10·(1 + ‖E‖‖C‖)");
  }
  q_ = c_.transpose() * c_;
  r_ = e_.transpose() * e_;
}

Discretized zoh_discretize(const Matrix& Ac, const Matrix& Bc, const Matrix& Dc, double dt) {
  if (!(dt > 0.0)) throw Error(ErrorKind::NonPositiveDt, "dt = " + std::to_string(dt));
  const auto n = Ac.rows();
  if (Ac.cols() != n || Bc.rows() != n || Dc.rows() != n) {
    throw Error(ErrorKind::DimensionMismatch,
                "Ac " + dims(Ac) + ", Bc " + dims(Bc) + ", Dc " + dims(Dc));
  }
  const auto m = Bc.cols();
  const auto p = Dc.cols();
  const auto size = n + m + p;
  Matrix aug = Matrix::Zero(size, size);
  aug.topLeftCorner(n, n) = Ac;
  aug.block(0, n, n, m) = Bc;
  aug.block(0, n + m, n, p) = Dc;
  const Matrix phi = matrix_exponential(Matrix(aug * dt));
  return {phi.topLeftCorner(n, n), phi.block(0, n, n, m), phi.block(0, n + m, n, p)};
}

ClosedLoop closed_loop(const LtiSystem& sys, const Gain& gain) {
  if (gain.K.rows() != sys.inputs() || gain.K.cols() != sys.states()) {
    throw Error(ErrorKind::DimensionMismatch,
                "gain must be " + std::to_string(sys.inputs()) + "x" +
                    std::to_string(sys.states()) + ", got " + dims(gain.K));
  }
  return {sys.A() - sys.B() * gain.K, sys.C() - sys.E() * gain.K};
}

Matrix weighted_output_map(const Matrix& Q, const Matrix& R, const Gain& gain) {
  if (Q.rows() != gain.K.cols() || R.rows() != gain.K.rows()) {
    throw Error(ErrorKind::DimensionMismatch, "weights do not match gain " + dims(gain.K));
  }
  const Matrix weight = symmetrize(Q + gain.K.transpose() * R * gain.K);
  return symmetric_roots(weight, 0.0).sqrt;
}

// --- frequency response ----------------------------------------------------

FrequencyResponse::FrequencyResponse(const Matrix& A, const Matrix& C, const Matrix& D)
    : a_(A), c_(C), d_(D) {
  if (A.rows() != A.cols() || C.cols() != A.rows() || D.rows() != A.rows()) {
    throw Error(ErrorKind::DimensionMismatch,
                "frequency response: A " + dims(A) + ", C " + dims(C) + ", D " + dims(D));
  }
  // Modal form makes each frequency O(q·n·p). Fall back to a dense solve when
  // the eigenvector basis is badly conditioned.
  Eigen::EigenSolver<Matrix> eig(A);
  if (eig.info() != Eigen::Success) return;
  const ComplexMatrix v = eig.eigenvectors();
  Eigen::JacobiSVD<ComplexMatrix> svd(v);
  const auto& s = svd.singularValues();
  if (s.size() == 0 || s(s.size() - 1) <= 0.0 || s(0) / s(s.size() - 1) > 1e6) return;
  Eigen::PartialPivLU<ComplexMatrix> lu(v);
  poles_ = eig.eigenvalues();
  cv_ = C.cast<std::complex<double>>() * v;
  vd_ = lu.solve(D.cast<std::complex<double>>());
  modal_ = true;
  // G'(ω) = −iζ CV diag((ζ − λ)⁻²) V⁻¹D and |ζ − λ| ≥ 1 − |λ| on the circle.
  const double radius = poles_.size() ? poles_.cwiseAbs().maxCoeff() : 0.0;
  if (radius < 1.0 && cv_.size() > 0 && vd_.size() > 0) {
    lipschitz_ = operator_norm(cv_) * operator_norm(vd_) / ((1.0 - radius) * (1.0 - radius));
  }
}

FrequencyResponse::ComplexMatrix FrequencyResponse::at(double omega) const {
  const std::complex<double> zeta = std::polar(1.0, omega);
  if (modal_) {
    const VectorX<std::complex<double>> resolvent =
        (VectorX<std::complex<double>>::Constant(poles_.size(), zeta) - poles_).cwiseInverse();
    return cv_ * resolvent.asDiagonal() * vd_;
  }
  ComplexMatrix shifted = -a_.cast<std::complex<double>>();
  shifted.diagonal().array() += zeta;
  return c_.cast<std::complex<double>>() *
         Eigen::PartialPivLU<ComplexMatrix>(shifted).solve(d_.cast<std::complex<double>>());
}

namespace {

// Gram matrix of the smaller side: its top eigenvalue is σ_max².
FrequencyResponse::ComplexMatrix gram(const FrequencyResponse::ComplexMatrix& g) {
  return g.rows() < g.cols() ? FrequencyResponse::ComplexMatrix(g * g.adjoint())
                             : FrequencyResponse::ComplexMatrix(g.adjoint() * g);
}

double top_singular_value(const FrequencyResponse::ComplexMatrix& g) {
  if (g.size() == 0) return 0.0;
  if (g.rows() == 1 || g.cols() == 1) return g.norm();
  Eigen::SelfAdjointEigenSolver<FrequencyResponse::ComplexMatrix> solver(gram(g),
                                                                         Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success) {
    return Eigen::JacobiSVD<FrequencyResponse::ComplexMatrix>(g).singularValues()(0);
  }
  return std::sqrt(std::max(0.0, solver.eigenvalues().maxCoeff()));
}

}  // namespace

double FrequencyResponse::gain_at(double omega) const { return top_singular_value(at(omega)); }

double hinf_norm(const Matrix& A_cl, const Matrix& C_cl, const Matrix& D,
                 const HinfOptions& options) {
  if (options.grid_points < 2 || !(options.refine_tol > 0.0)) {
    throw Error(ErrorKind::InvalidConfig, "hinf_norm: need >= 2 grid points and refine_tol > 0");
  }
  const double rho = spectral_radius(A_cl);
  if (rho >= 1.0) {
    throw Error(ErrorKind::UnstableClosedLoop,
                "hinf_norm: spectral radius " + std::to_string(rho) + " >= 1");
  }
  if (C_cl.size() == 0 || D.size() == 0) return 0.0;

  const FrequencyResponse response(A_cl, C_cl, D);
  const int n = options.grid_points;
  const double step = kPi / (n - 1);

  std::vector<double> value(n, -1.0);
  double best = 0.0;
  int best_k = 0;
  auto eval = [&](int k) {
    if (value[k] < 0.0) {
      value[k] = response.gain_at(k * step);
      if (value[k] > best) {
        best = value[k];
        best_k = k;
      }
    }
    return value[k];
  };

  const double lipschitz = response.lipschitz();
  if (!std::isfinite(lipschitz)) {
    for (int k = 0; k < n; ++k) eval(k);
  } else {
    // Branch and bound over index intervals: a grid point strictly inside
    // [a, b] is at most (σ_a + σ_b + L·(b − a)·step)/2, so intervals whose
    // bound cannot beat the best value need no further evaluations.
    constexpr int kCoarse = 32;
    std::vector<std::pair<int, int>> pending;
    for (int a = 0; a < n - 1; a += kCoarse) pending.emplace_back(a, std::min(a + kCoarse, n - 1));
    for (const auto& [a, b] : pending) {
      eval(a);
      eval(b);
    }
    while (!pending.empty()) {
      const auto [a, b] = pending.back();
      pending.pop_back();
      if (b - a <= 1) continue;
      if (0.5 * (value[a] + value[b] + lipschitz * (b - a) * step) <= best) continue;
      const int mid = (a + b) / 2;
      eval(mid);
      pending.emplace_back(a, mid);
      pending.emplace_back(mid, b);
    }
  }

  // Golden-section search for the local maximum bracketing the grid peak.
  double lo = std::max(0.0, (best_k - 1) * step);
  double hi = std::min(kPi, (best_k + 1) * step);
  constexpr double kInvPhi = 0.61803398874989484820;
  double x1 = hi - kInvPhi * (hi - lo);
  double x2 = lo + kInvPhi * (hi - lo);
  double f1 = response.gain_at(x1);
  double f2 = response.gain_at(x2);
  best = std::max({best, f1, f2});
  while (hi - lo > options.refine_tol) {
    if (f1 < f2) {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + kInvPhi * (hi - lo);
      f2 = response.gain_at(x2);
      best = std::max(best, f2);
    } else {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - kInvPhi * (hi - lo);
      f1 = response.gain_at(x1);
      best = std::max(best, f1);
    }
  }
  return best;
}

namespace {

ValidityReport validity(const Matrix& a_cl, const Matrix& c_cl, const Matrix& d, double gamma,
                        const HinfOptions& options) {
  if (!(gamma > 0.0)) throw Error(ErrorKind::NonPositiveParameter, "gamma must be > 0");
  ValidityReport report;
  report.spectral_radius = spectral_radius(a_cl);
  if (report.spectral_radius >= 1.0) return report;
  report.hinf = hinf_norm(a_cl, c_cl, d, options);
  report.valid = report.hinf < gamma;
  return report;
}

}  // namespace

ValidityReport is_valid_controller(const LtiSystem& sys, const Gain& gain, double gamma,
                                   const HinfOptions& options) {
  const ClosedLoop loop = closed_loop(sys, gain);
  return validity(loop.A, loop.C, sys.D(), gamma, options);
}

ValidityReport is_valid_controller(const LtiSystem& sys, const Gain& gain, const Matrix& Q,
                                   const Matrix& R, double gamma, const HinfOptions& options) {
  const ClosedLoop loop = closed_loop(sys, gain);
  return validity(loop.A, weighted_output_map(Q, R, gain), sys.D(), gamma, options);
}

// --- simulation ------------------------------------------------------------

Transition advance(const LtiSystem& sys, const Gain& gain, const Vector& x, const Vector& w) {
  if (x.size() != sys.states() || w.size() != sys.disturbances()) {
    throw Error(ErrorKind::DimensionMismatch, "advance: state or disturbance length mismatch");
  }
  if (gain.K.rows() != sys.inputs() || gain.K.cols() != sys.states()) {
    throw Error(ErrorKind::DimensionMismatch, "advance: gain is " + dims(gain.K));
  }
  Transition out;
  out.u = -(gain.K * x);
  out.z = sys.C() * x + sys.E() * out.u;
  // Input and disturbance are summed first so that a disturbance cancelling
  // the input leaves exactly A x.
  const Vector forcing = sys.B() * out.u + sys.D() * w;
  out.x_next = sys.A() * x + forcing;
  const double size = out.x_next.norm();
  if (!(size <= kStateOverflow)) {
    throw Error(ErrorKind::StateOverflow, "‖x‖ = " + std::to_string(size));
  }
  return out;
}

Trajectory simulate(const LtiSystem& sys, const std::vector<Gain>& gains,
                    const std::vector<Vector>& disturbances, const Vector& x0) {
  if (gains.size() != disturbances.size()) {
    throw Error(ErrorKind::DimensionMismatch, "simulate: gains and disturbances differ in length");
  }
  if (x0.size() != sys.states()) {
    throw Error(ErrorKind::DimensionMismatch, "simulate: x0 length mismatch");
  }
  Trajectory traj;
  traj.x.reserve(gains.size() + 1);
  traj.x.push_back(x0);
  for (std::size_t t = 0; t < gains.size(); ++t) {
    Transition step = advance(sys, gains[t], traj.x.back(), disturbances[t]);
    traj.u.push_back(std::move(step.u));
    traj.w.push_back(disturbances[t]);
    traj.z.push_back(std::move(step.z));
    traj.x.push_back(std::move(step.x_next));
  }
  return traj;
}

}  // namespace safectl
