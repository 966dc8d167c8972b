#include "safectl/adversary.hpp"

#include <cmath>
#include <random>
#include <string>

namespace safectl {

namespace {

enum Stream : std::uint32_t { kDisturbance = 1, kCostQ = 2, kCostR = 3 };

// Counter-based seeding: each (seed, t, stream) triple gets an independent
// engine, so draws never depend on call order.
std::mt19937_64 engine(std::uint64_t seed, long t, Stream stream) {
  const auto ut = static_cast<std::uint64_t>(t);
  std::seed_seq seq{std::uint32_t(seed), std::uint32_t(seed >> 32), std::uint32_t(ut),
                    std::uint32_t(ut >> 32), std::uint32_t(stream)};
  return std::mt19937_64(seq);
}

Matrix perturb(const Matrix& base, double delta, std::mt19937_64& rng) {
  const auto n = base.rows();
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Matrix g(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index i = 0; i < n; ++i) g(i, j) = normal(rng);
  }
  g = symmetrize(g);
  const double size = unit(rng) * delta * operator_norm(base);
  const double gnorm = operator_norm(g);
  if (gnorm == 0.0 || size == 0.0) return base;
  return symmetrize(Matrix(base + g * (size / gnorm)));
}

bool admissible(const Matrix& M, double mu, double sigma) {
  return lambda_min(M) >= mu && M.trace() <= sigma;
}

void check_base(const Matrix& M, double mu, double sigma, const char* name) {
  if (M.rows() != M.cols()) throw Error(ErrorKind::NonSquare, std::string(name) + " base");
  const double tol = 1e-9;
  if ((M - M.transpose()).norm() > tol * std::max(1.0, M.norm()) ||
      lambda_min(M) < mu * (1.0 - tol) || M.trace() > sigma * (1.0 + tol) ||
      double(M.rows()) * mu > sigma) {
    throw Error(ErrorKind::InadmissibleBase,
                std::string(name) + " base outside μI ⪯ M, Tr M ≤ σ (μ = " + std::to_string(mu) +
                    ", σ = " + std::to_string(sigma) + ")");
  }
}

}  // namespace

void AttackConfig::validate() const {
  if (!(w_max >= 0.0) || !std::isfinite(w_max)) {
    throw Error(ErrorKind::InvalidConfig, "w_max must be finite and >= 0");
  }
  if (kind == AttackKind::DenialOfService && !(dos_start > 1 && dos_start <= dos_end)) {
    throw Error(ErrorKind::InvalidConfig, "DoS window needs 1 < t_a <= t'_a, got [" +
                                              std::to_string(dos_start) + ", " +
                                              std::to_string(dos_end) + "]");
  }
}

Vector bounded_disturbance(const AttackConfig& cfg, long t, Eigen::Index p) {
  Vector w = Vector::Zero(p);
  if (cfg.w_max == 0.0 || p == 0) return w;
  auto rng = engine(cfg.seed, t, kDisturbance);
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  double size = 0.0;
  while (size == 0.0) {
    for (Eigen::Index i = 0; i < p; ++i) w(i) = normal(rng);
    size = w.norm();
  }
  return w * (unit(rng) * cfg.w_max / size);
}

Vector dos_disturbance(const AttackConfig& cfg, long t, const Matrix& B, const Vector& u_t) {
  if (cfg.kind != AttackKind::DenialOfService) {
    throw Error(ErrorKind::InvalidConfig, "dos_disturbance needs a DoS attack config");
  }
  if (B.cols() != u_t.size()) {
    throw Error(ErrorKind::DimensionMismatch, "dos_disturbance: B and u_t do not conform");
  }
  if (cfg.in_window(t)) {
    // Same expression as the plant update so that B u_t + D w_t is exactly 0.
    const Vector bu = B * u_t;
    return -bu;
  }
  return bounded_disturbance(cfg, t, B.rows());
}

void require_identity_disturbance(const Matrix& D) {
  if (D.rows() != D.cols() ||
      (D - Matrix::Identity(D.rows(), D.cols())).cwiseAbs().maxCoeff() > 1e-12) {
    throw Error(ErrorKind::DosRequiresIdentityD, "denial of service needs D = I");
  }
}

DisturbanceGenerator make_disturbance_generator(const AttackConfig& cfg, const LtiSystem& sys) {
  cfg.validate();
  if (cfg.kind == AttackKind::DenialOfService) {
    require_identity_disturbance(sys.D());
    return [cfg, B = sys.B()](long t, const Vector& u) { return dos_disturbance(cfg, t, B, u); };
  }
  return [cfg, p = sys.disturbances()](long t, const Vector&) {
    return bounded_disturbance(cfg, t, p);
  };
}

Matrix clip_to_envelope(const Matrix& M, double mu, double sigma) {
  if (admissible(M, mu, sigma)) return M;
  Eigen::SelfAdjointEigenSolver<Matrix> solver(symmetrize(M));
  if (solver.info() != Eigen::Success) {
    throw Error(ErrorKind::NumericalFailure, "clip_to_envelope: eigensolver failed");
  }
  // Small margins keep the reconstructed matrix inside the envelope despite
  // rounding in V Λ Vᵀ.
  const double floor = mu * (1.0 + 1e-12) + 1e-15;
  const double cap = sigma * (1.0 - 1e-12);
  Vector lam = solver.eigenvalues().cwiseMax(floor);
  double excess = lam.sum() - cap;
  // Eigenvalues are ascending: lower the largest ones first, never below the floor.
  for (Eigen::Index i = lam.size() - 1; i >= 0 && excess > 0.0; --i) {
    const double room = lam(i) - floor;
    const double cut = std::min(room, excess);
    lam(i) -= cut;
    excess -= cut;
  }
  const Matrix& v = solver.eigenvectors();
  Matrix out = symmetrize(Matrix(v * lam.asDiagonal() * v.transpose()));
  if (!admissible(out, mu * (1.0 - 1e-12), sigma)) {
    throw Error(ErrorKind::NumericalFailure, "clip_to_envelope: envelope is too thin");
  }
  return out;
}

std::pair<Matrix, Matrix> perturbed_costs(const CostPerturbConfig& cfg, const Matrix& Q_base,
                                          const Matrix& R_base, long t) {
  if (!(cfg.delta >= 0.0)) throw Error(ErrorKind::InvalidConfig, "delta must be >= 0");
  check_base(Q_base, cfg.mu, cfg.sigma, "Q");
  check_base(R_base, cfg.mu, cfg.sigma, "R");
  if (cfg.delta == 0.0) return {Q_base, R_base};
  auto rq = engine(cfg.seed, t, kCostQ);
  auto rr = engine(cfg.seed, t, kCostR);
  return {clip_to_envelope(perturb(Q_base, cfg.delta, rq), cfg.mu, cfg.sigma),
          clip_to_envelope(perturb(R_base, cfg.delta, rr), cfg.mu, cfg.sigma)};
}

}  // namespace safectl
