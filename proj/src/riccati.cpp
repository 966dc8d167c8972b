#include "safectl/riccati.hpp"

#include <cmath>
#include <string>

namespace safectl {

namespace {

void check_weights(const LtiSystem& sys, const Gain& gain, const Matrix& Q, const Matrix& R) {
  const auto n = sys.states();
  const auto m = sys.inputs();
  if (gain.K.rows() != m || gain.K.cols() != n) {
    throw Error(ErrorKind::DimensionMismatch, "gain must be " + std::to_string(m) + "x" +
                                                  std::to_string(n));
  }
  if (Q.rows() != n || Q.cols() != n || R.rows() != m || R.cols() != m) {
    throw Error(ErrorKind::DimensionMismatch, "cost weights do not match the plant");
  }
}

Matrix gram_correction(const Matrix& P, const Matrix& D, double gamma) {
  const Matrix pd = P * D;
  Matrix inner = -(D.transpose() * pd);
  inner.diagonal().array() += gamma * gamma;
  Eigen::LLT<Matrix> llt(symmetrize(inner));
  if (llt.info() != Eigen::Success) {
    throw Error(ErrorKind::GammaInfeasible, "γ²I − DᵀPD is not positive definite");
  }
  return pd * llt.solve(Matrix(pd.transpose()));
}

}  // namespace

Matrix ptilde(const Matrix& P, const Matrix& D, double gamma) {
  if (!(gamma > 0.0)) throw Error(ErrorKind::NonPositiveParameter, "gamma must be > 0");
  if (P.rows() != P.cols() || D.rows() != P.rows()) {
    throw Error(ErrorKind::DimensionMismatch, "ptilde: P and D do not conform");
  }
  if (D.cols() == 0) return P;
  if (feasibility_margin(P, D, gamma) <= 0.0) {
    throw Error(ErrorKind::GammaInfeasible, "γ²I − DᵀPD is not positive definite");
  }
  return symmetrize(P + gram_correction(P, D, gamma));
}

double feasibility_margin(const Matrix& P, const Matrix& D, double gamma) {
  if (D.cols() == 0) return gamma * gamma;
  Matrix inner = -(D.transpose() * P * D);
  inner.diagonal().array() += gamma * gamma;
  return lambda_min(inner);
}

double policy_riccati_residual(const LtiSystem& sys, const Gain& gain, const Matrix& Qbar,
                               const Matrix& Rbar, double gamma, const Matrix& P) {
  check_weights(sys, gain, Qbar, Rbar);
  const Matrix F = sys.A() - sys.B() * gain.K;
  const Matrix defect = F.transpose() * ptilde(P, sys.D(), gamma) * F + Qbar +
                        gain.K.transpose() * Rbar * gain.K - P;
  return symmetric_norm(symmetrize(defect));
}

RiccatiSolution solve_policy_riccati(const LtiSystem& sys, const Gain& gain, const Matrix& Qbar,
                                     const Matrix& Rbar, double gamma,
                                     const RiccatiOptions& options) {
  if (!(gamma > 0.0)) throw Error(ErrorKind::NonPositiveParameter, "gamma must be > 0");
  check_weights(sys, gain, Qbar, Rbar);
  const Matrix F = sys.A() - sys.B() * gain.K;
  const double rho = spectral_radius(F);
  if (rho >= 1.0) {
    throw Error(ErrorKind::UnstableGain, "ρ(A − BK) = " + std::to_string(rho));
  }
  const Matrix W = symmetrize(Qbar + gain.K.transpose() * Rbar * gain.K);
  const Matrix& D = sys.D();

  RiccatiSolution out;
  out.gamma = gamma;
  Matrix P = solve_discrete_lyapunov(F, W, options.lyapunov);

  bool converged = false;
  for (int j = 1; j <= options.max_iters; ++j) {
    const double margin = feasibility_margin(P, D, gamma);
    if (margin < options.margin_floor) {
      throw Error(ErrorKind::GammaInfeasible,
                  "margin " + std::to_string(margin) + " at iteration " + std::to_string(j));
    }
    Matrix next = F.transpose() * P * F + W;
    if (D.cols() > 0) next += F.transpose() * gram_correction(P, D, gamma) * F;
    next = symmetrize(next);
    const double size = next.norm();
    if (!std::isfinite(size) || size > options.blowup) {
      throw Error(ErrorKind::GammaInfeasible,
                  "iterates diverge (‖P‖ = " + std::to_string(size) + ")");
    }
    const double change = (next - P).norm();
    P = std::move(next);
    out.iterations = j;
    if (change <= options.rel_change * std::max(1.0, size)) {
      converged = true;
      break;
    }
  }
  if (!converged) {
    throw Error(ErrorKind::NonConvergence,
                "policy Riccati iteration exceeded " + std::to_string(options.max_iters));
  }
  out.feasibility_margin = feasibility_margin(P, D, gamma);
  if (out.feasibility_margin < options.margin_floor) {
    throw Error(ErrorKind::GammaInfeasible, "final margin " +
                                                std::to_string(out.feasibility_margin));
  }
  out.residual = policy_riccati_residual(sys, gain, Qbar, Rbar, gamma, P);
  out.P = std::move(P);
  return out;
}

Gain policy_improvement(const LtiSystem& sys, const RiccatiSolution& solution,
                        const Matrix& Rbar) {
  if (Rbar.rows() != sys.inputs() || Rbar.cols() != sys.inputs() ||
      solution.P.rows() != sys.states()) {
    throw Error(ErrorKind::DimensionMismatch, "policy_improvement: sizes do not conform");
  }
  const Matrix pt = ptilde(solution.P, sys.D(), solution.gamma);
  const Matrix bp = sys.B().transpose() * pt;
  const Matrix inner = symmetrize(Rbar + bp * sys.B());
  Eigen::LLT<Matrix> llt(inner);
  if (inner.size() > 0 &&
      (llt.info() != Eigen::Success ||
       lambda_min(inner) <= 1e-14 * std::max(1.0, symmetric_norm(inner)))) {
    throw Error(ErrorKind::SingularInnerMatrix, "R + BᵀP̃B is not positive definite");
  }
  return {llt.solve(Matrix(bp * sys.A()))};
}

StationaryResult solve_stationary(const LtiSystem& sys, const Matrix& Q, const Matrix& R,
                                  double gamma, const Gain& K_init,
                                  const StationaryOptions& options) {
  check_weights(sys, K_init, Q, R);
  if (options.verify_hinf) {
    const ValidityReport report = is_valid_controller(sys, K_init, Q, R, gamma, options.hinf);
    if (!report.valid) {
      throw Error(ErrorKind::InfeasibleInit,
                  "initial gain not valid: ρ = " + std::to_string(report.spectral_radius) +
                      ", hinf = " + std::to_string(report.hinf) + ", γ = " + std::to_string(gamma));
    }
  }
  RiccatiSolution current;
  try {
    current = solve_policy_riccati(sys, K_init, Q, R, gamma, options.riccati);
  } catch (const Error& e) {
    throw Error(ErrorKind::InfeasibleInit, std::string("initial gain: ") + e.what());
  }

  for (int j = 1; j <= options.max_iters; ++j) {
    Gain next_gain = policy_improvement(sys, current, R);
    RiccatiSolution next = solve_policy_riccati(sys, next_gain, Q, R, gamma, options.riccati);
    const double change = (next.P - current.P).norm();
    const double scale = std::max(1.0, current.P.norm());
    current = std::move(next);
    if (change <= options.rel_change * scale) {
      return {std::move(next_gain), std::move(current), j};
    }
  }
  throw Error(ErrorKind::NonConvergence,
              "stationary policy iteration exceeded " + std::to_string(options.max_iters));
}

double h2_cost_bound(const Matrix& P, const Matrix& D) {
  if (P.rows() != P.cols() || D.rows() != P.rows()) {
    throw Error(ErrorKind::DimensionMismatch, "h2_cost_bound: P and D do not conform");
  }
  return (D.transpose() * P * D).trace();
}

double h2_cost_bound(const RiccatiSolution& solution, const Matrix& D) {
  return h2_cost_bound(solution.P, D);
}

Lemma1Result lemma1_check(const LtiSystem& sys, const Gain& gain, double gamma,
                          const RiccatiOptions& options) {
  Lemma1Result out;
  try {
    const double rho = spectral_radius(Matrix(sys.A() - sys.B() * gain.K));
    if (rho >= 1.0) {
      out.diagnostic = "closed loop unstable (ρ = " + std::to_string(rho) + ")";
      return out;
    }
    const RiccatiSolution sol = solve_policy_riccati(sys, gain, sys.Q(), sys.R(), gamma, options);
    if (sol.feasibility_margin > 0.0) {
      out.verdict = Lemma1Verdict::ValidByRiccati;
      out.diagnostic = "feasible, margin " + std::to_string(sol.feasibility_margin);
    } else {
      out.diagnostic = "non-positive margin";
    }
  } catch (const Error& e) {
    out.diagnostic = e.what();
  }
  return out;
}

S2daCertificate s2da_certificate(const LtiSystem& sys, const Gain& gain,
                                 const RiccatiSolution& solution, double mu) {
  if (!(mu > 0.0)) throw Error(ErrorKind::NonPositiveParameter, "mu must be > 0");
  if (solution.P.rows() != sys.states()) {
    throw Error(ErrorKind::DimensionMismatch, "certificate: P does not match the plant");
  }
  const Matrix F = closed_loop(sys, gain).A;
  const auto roots = symmetric_roots(solution.P, 1e-12);

  S2daCertificate cert;
  cert.gamma = solution.gamma;
  cert.kappa = std::sqrt(roots.max_eigenvalue / mu);
  cert.epsilon = 1.0 / (2.0 * cert.kappa * cert.kappa);
  cert.H = roots.inv_sqrt;
  cert.H_inv = roots.sqrt;
  cert.L = cert.H_inv * F * cert.H;
  cert.beta = operator_norm(cert.H);
  cert.alpha = 1.0 / operator_norm(cert.H_inv);
  cert.gain_norm = operator_norm(gain.K);
  cert.L_norm = operator_norm(cert.L);
  cert.condition = cert.beta / cert.alpha;
  cert.reconstruction = operator_norm(Matrix(cert.H * cert.L * cert.H_inv - F));

  auto fail = [](const std::string& why) { throw Error(ErrorKind::CertificateFailure, why); };
  if (!(cert.epsilon > 0.0 && cert.epsilon <= 1.0)) {
    fail("ε = " + std::to_string(cert.epsilon) + " outside (0, 1]");
  }
  if (cert.gain_norm > cert.kappa * (1.0 + 1e-8)) {
    fail("‖K‖ = " + std::to_string(cert.gain_norm) + " > κ̄ = " + std::to_string(cert.kappa));
  }
  if (cert.L_norm > 1.0 - cert.epsilon + 1e-10) {
    fail("‖L‖ = " + std::to_string(cert.L_norm) + " > 1 − ε = " +
         std::to_string(1.0 - cert.epsilon));
  }
  if (cert.condition > cert.kappa * (1.0 + 1e-8)) {
    fail("‖H‖‖H⁻¹‖ = " + std::to_string(cert.condition) + " > κ̄");
  }
  if (cert.reconstruction > 1e-8 * std::max(1.0, operator_norm(F))) {
    fail("HLH⁻¹ misses A − BK by " + std::to_string(cert.reconstruction));
  }
  return cert;
}

double sequential_factor(const S2daCertificate& previous, const S2daCertificate& next) {
  return operator_norm(Matrix(next.H_inv * previous.H));
}

Gain stabilizing_gain(const LtiSystem& sys) {
  const auto n = sys.states();
  const auto m = sys.inputs();
  const double rho_open = spectral_radius(sys.A());
  Gain gain{Matrix::Zero(m, n)};
  if (rho_open < 1.0) return gain;
  if (m == 0) throw Error(ErrorKind::UnstabilizableModel, "no inputs and ρ(A) >= 1");

  // Unit-weight LQR on (A/α, B/α): K = 0 is stabilizing for α > ρ(A). Each
  // solution satisfies ρ(A − BK) < α, so α can be lowered towards it.
  Matrix C = Matrix::Zero(n + m, n);
  C.topRows(n).setIdentity();
  Matrix E = Matrix::Zero(n + m, m);
  E.bottomRows(m).setIdentity();
  const Matrix Q = Matrix::Identity(n, n);
  const Matrix R = Matrix::Identity(m, m);
  StationaryOptions options;
  options.verify_hinf = false;

  double alpha = 1.05 * rho_open;
  for (int round = 0; round < 200; ++round) {
    const LtiSystem scaled(sys.A() / alpha, sys.B() / alpha, Matrix::Zero(n, 1), C, E);
    try {
      gain = solve_stationary(scaled, Q, R, 1e9, gain, options).gain;
    } catch (const Error& e) {
      throw Error(ErrorKind::UnstabilizableModel, std::string("discounted LQR failed: ") + e.what());
    }
    const double rho = spectral_radius(Matrix(sys.A() - sys.B() * gain.K));
    if (rho < 1.0) {
      // The annealed gain can sit right at the stability boundary. Policy
      // iteration on the undiscounted problem moves it to the LQR gain.
      try {
        const LtiSystem plain(sys.A(), sys.B(), Matrix::Zero(n, 1), C, E);
        return solve_stationary(plain, Q, R, 1e9, gain, options).gain;
      } catch (const Error&) {
        return gain;
      }
    }
    const double next = rho * (1.0 + 1e-3);
    if (next >= alpha * (1.0 - 1e-9)) break;
    alpha = next;
  }
  throw Error(ErrorKind::UnstabilizableModel, "no stabilizing gain found");
}

bool is_stabilizable(const LtiSystem& sys) {
  try {
    const Gain start = stabilizing_gain(sys);
    StationaryOptions options;
    options.verify_hinf = false;
    solve_stationary(sys, Matrix::Identity(sys.states(), sys.states()),
                     Matrix::Identity(sys.inputs(), sys.inputs()), 1e9, start, options);
    return true;
  } catch (const Error&) {
    return false;
  }
}

StationaryResult initial_gain(const LtiSystem& sys, const Matrix& Q, const Matrix& R,
                              double gamma, const StationaryOptions& options) {
  const Gain start = stabilizing_gain(sys);
  try {
    return solve_stationary(sys, Q, R, gamma, start, options);
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::InfeasibleInit) throw;
  }
  // Continuation in γ: each stationary gain seeds the next, smaller level.
  StationaryOptions quiet = options;
  quiet.verify_hinf = false;
  constexpr int kStages = 40;
  const double top = std::max(1e9, gamma);
  Gain gain = start;
  for (int k = 0; k < kStages; ++k) {
    const double level = gamma * std::pow(top / gamma, double(kStages - k) / kStages);
    gain = solve_stationary(sys, Q, R, level, gain, quiet).gain;
  }
  return solve_stationary(sys, Q, R, gamma, gain, options);
}

}  // namespace safectl
