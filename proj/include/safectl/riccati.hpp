#pragma once

#include <string>

#include "safectl/numkernel.hpp"
#include "safectl/sysmodel.hpp"

namespace safectl {

/// Solution P of the γ-modified policy Riccati equation
///   (A−BK)ᵀ P̃ (A−BK) + Q + KᵀRK = P,
///   P̃ = P + PD(γ²I − DᵀPD)⁻¹DᵀP.
struct RiccatiSolution {
  Matrix P;
  double gamma = 0.0;
  double feasibility_margin = 0.0;  // λ_min(γ²I − DᵀPD)
  double residual = 0.0;            // ‖defect of the equation at P‖
  int iterations = 0;
};

struct RiccatiOptions {
  double rel_change = 1e-10;   // stop when ‖P_{j+1} − P_j‖ ≤ rel_change·max(1, ‖P_j‖)
  int max_iters = 10'000;
  double margin_floor = 1e-12; // below this the γ constraint is treated as lost
  double blowup = 1e12;        // iterate norm that signals divergence
  Tolerance lyapunov{};
};

/// P + PD(γ²I − DᵀPD)⁻¹DᵀP. Throws GammaInfeasible unless γ²I − DᵀPD ≻ 0.
Matrix ptilde(const Matrix& P, const Matrix& D, double gamma);

/// λ_min(γ²I − DᵀPD); +γ² when D has no columns.
double feasibility_margin(const Matrix& P, const Matrix& D, double gamma);

/// Defect ‖(A−BK)ᵀP̃(A−BK) + Q + KᵀRK − P‖ of a candidate P.
double policy_riccati_residual(const LtiSystem& sys, const Gain& gain, const Matrix& Qbar,
                               const Matrix& Rbar, double gamma, const Matrix& P);

/// Minimal solution of the policy Riccati equation for a fixed gain, by
/// fixed-point iteration started from the Lyapunov solution
///   (A−BK)ᵀ P̄ (A−BK) − P̄ = −(Q + KᵀRK).
/// The iterates increase monotonically and stay bounded exactly when the gain
/// attenuates at level γ; otherwise GammaInfeasible is raised.
RiccatiSolution solve_policy_riccati(const LtiSystem& sys, const Gain& gain, const Matrix& Qbar,
                                     const Matrix& Rbar, double gamma,
                                     const RiccatiOptions& options = {});

/// K' = (R + BᵀP̃B)⁻¹BᵀP̃A.
Gain policy_improvement(const LtiSystem& sys, const RiccatiSolution& solution, const Matrix& Rbar);

struct StationaryOptions {
  RiccatiOptions riccati{};
  double rel_change = 1e-10;
  int max_iters = 500;
  bool verify_hinf = true;  // frequency-domain check of the initial gain
  HinfOptions hinf{};
};

struct StationaryResult {
  Gain gain;
  RiccatiSolution solution;
  int iterations = 0;
};

/// Optimal static gain K* = (R + BᵀP̃*B)⁻¹BᵀP̃*A for fixed weights, by
/// alternating policy evaluation and improvement from a valid K_init.
StationaryResult solve_stationary(const LtiSystem& sys, const Matrix& Q, const Matrix& R,
                                  double gamma, const Gain& K_init,
                                  const StationaryOptions& options = {});

/// Tr(P D Dᵀ).
double h2_cost_bound(const RiccatiSolution& solution, const Matrix& D);
double h2_cost_bound(const Matrix& P, const Matrix& D);

enum class Lemma1Verdict { ValidByRiccati, Invalid };

struct Lemma1Result {
  Lemma1Verdict verdict = Lemma1Verdict::Invalid;
  std::string diagnostic;
};

/// Bounded-real test by Riccati feasibility: stable closed loop and a
/// feasible policy Riccati solution with γ²I − DᵀPD ≻ 0.
Lemma1Result lemma1_check(const LtiSystem& sys, const Gain& gain, double gamma,
                          const RiccatiOptions& options = {});

/// Strong-stability certificate A − BK = H L H⁻¹ built from a policy Riccati
/// solution: H = P^{-1/2}, L = P^{1/2}(A−BK)P^{-1/2}, κ̄ = √(λ_max(P)/μ),
/// ε = 1/(2κ̄²).
struct S2daCertificate {
  double kappa = 0.0;    // κ̄
  double epsilon = 0.0;  // 1/(2κ̄²)
  double gamma = 0.0;
  Matrix H;
  Matrix L;
  double alpha = 0.0;    // 1/‖H⁻¹‖
  double beta = 0.0;     // ‖H‖
  // measured quantities behind the checks
  double gain_norm = 0.0;
  double L_norm = 0.0;
  double condition = 0.0;       // ‖H‖‖H⁻¹‖
  double reconstruction = 0.0;  // ‖HLH⁻¹ − (A−BK)‖
  Matrix H_inv;
};

/// Throws CertificateFailure when any invariant fails:
/// ‖K‖ ≤ κ̄, ‖L‖ ≤ 1−ε, ‖H‖‖H⁻¹‖ ≤ κ̄(1+1e-8), HLH⁻¹ = A−BK to 1e-8.
S2daCertificate s2da_certificate(const LtiSystem& sys, const Gain& gain,
                                 const RiccatiSolution& solution, double mu);

/// ‖H_{t+1}⁻¹ H_t‖, the sequential strong-stability factor.
double sequential_factor(const S2daCertificate& previous, const S2daCertificate& next);

/// A gain with ρ(A − BK) < 1, found by annealing the discount of an LQR
/// problem with unit weights. Throws UnstabilizableModel on failure.
Gain stabilizing_gain(const LtiSystem& sys);

/// Stabilizability by solving the stationary problem at γ = 1e9.
bool is_stabilizable(const LtiSystem& sys);

/// Stationary optimum for (Q, R, γ) starting from a stabilizing gain and
/// continuing in γ from 1e9 down to the target when needed.
StationaryResult initial_gain(const LtiSystem& sys, const Matrix& Q, const Matrix& R,
                              double gamma, const StationaryOptions& options = {});

}  // namespace safectl
