#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "safectl/riccati.hpp"

namespace safectl {

/// Burn-in and regret constants derived from the cost envelope μI ⪯ Q, R,
/// Tr ≤ σ and the ceiling P ⪯ νI.
struct BoundConstants {
  double mu = 0.0;
  double nu = 0.0;
  double sigma = 0.0;
  double b_norm = 0.0;
  double kappa = 0.0;    // √(ν/μ)
  double epsilon = 0.0;  // 1/(2κ²)
  double t_star_raw = 0.0;
  long t_star = 0;       // ⌈t_star_raw⌉
  double p_star = 0.0;
  double m = 1.0;
};

/// κ = √(ν/μ), ε = 1/(2κ²),
///   t* = 8σκ⁴‖B‖/(εμ) · (1 + κ²‖B‖(1+κ²)/ε),
///   p* = 2σ/‖B‖ + 4κ²σ(1+κ²)/ε.
BoundConstants bound_constants(double mu, double nu, double sigma, double b_norm, double m = 1.0);

/// Q̄' = ((t−1)/t)Q̄ + Q_t/t and likewise for R̄.
std::pair<Matrix, Matrix> running_average_update(const Matrix& Qbar, const Matrix& Rbar,
                                                 const Matrix& Q, const Matrix& R, long t);

/// Tr(DDᵀ)·(log T + 2mp*/(t*+1) − log t*). Throws HorizonBelowBurnIn for T < t*.
double regret_bound(const BoundConstants& constants, const Matrix& D, long T);
double regret_bound(const BoundConstants& constants, double trace_ddt, long T);

/// Throws CostBoundViolation unless Q, R are symmetric with μI ⪯ Q, R and
/// Tr Q, Tr R ≤ σ, all to relative tolerance `tol`.
void check_admissible(const Matrix& Q, const Matrix& R, double mu, double sigma, double tol = 1e-9);

struct OnlineConfig {
  double gamma = 0.0;
  double mu = 0.0;
  double sigma = 0.0;
  double m = 1.0;
  bool estimate_m = false;   // replace m by the refinement-based estimate once available
  bool verify = false;       // frequency-domain validity check of every K_t
  bool certify = false;      // issue a strong-stability certificate every step
  int refine_max_iters = 1000;
  RiccatiOptions riccati{};
  HinfOptions hinf{};
};

struct HistoryEntry {
  long t = 0;
  double pdiff = 0.0;            // ‖P_t − P_{t−1}‖, 0 at t = 1
  double J = 0.0;                // Tr(P_t DDᵀ)
  double spectral_radius = 0.0;  // ρ(A − BK_t)
  double hinf = -1.0;            // weighted ‖T_zw‖∞ of K_t; −1 when not computed
  bool valid = true;
};

/// Recomputation of the constants after ν grew.
struct ConstantsEvent {
  long t = 0;
  BoundConstants constants;
};

/// Record of the one-time burn-in refinement.
struct Refinement {
  long t = 0;
  int iterations = 0;
  std::vector<double> diffs;      // ‖P_d − P_{d−1}‖ of the refinement loop
  double tail_sum = 0.0;          // Σ of the remaining differences to the fixed point
  double quadratic_rate = 0.0;    // max d_{j+1}/d_j² along the full chain
  std::optional<double> m_estimate;
};

/// Online controller state after consuming the cost pairs up to t.
/// K is the gain K_t that produced P_t; K_next is K_{t+1}.
struct OnlineState {
  long t = 0;
  Matrix Qbar;
  Matrix Rbar;
  Gain K;
  Gain K_next;
  RiccatiSolution P;
  bool refined = false;
  BoundConstants constants;
  std::optional<S2daCertificate> certificate;
  long certificate_failures = 0;
  std::string certificate_error;  // first failure message
  // ‖H_{t+1}⁻¹H_t‖ between consecutive certificates, and how often it exceeded 1 + ε
  double sequential_max = 0.0;
  long sequential_exceedances = 0;
  std::optional<Refinement> refinement;
  std::vector<HistoryEntry> history;
  std::vector<ConstantsEvent> constant_events;
};

/// State at t = 1 from (Q_1, R_1) and a valid K_1. Throws InfeasibleInit
/// naming the failed condition.
OnlineState init(const LtiSystem& sys, const Matrix& Q1, const Matrix& R1, const Gain& K1,
                 const OnlineConfig& config);

/// Consumes (Q_t, R_t) for t = state.t + 1: averages the costs, evaluates
/// K_t, runs the burn-in refinement once at the first t ≥ t*, and
/// improves the gain to K_{t+1}.
OnlineState step(const LtiSystem& sys, OnlineState state, const Matrix& Q, const Matrix& R,
                 const OnlineConfig& config);

/// Tr(P* DDᵀ) for the stationary optimum of the current averages, warm
/// started from `hint` when it is feasible and from K_t otherwise.
StationaryResult counterfactual(const LtiSystem& sys, const OnlineState& state,
                                const OnlineConfig& config, const Gain* hint = nullptr);

struct TraceRow {
  long t = 0;
  double J = 0.0;
  double J_star = 0.0;
  double regret = 0.0;
  double regret_norm = 0.0;
  std::optional<double> bound;
  double pdiff = 0.0;
  double specrad = 0.0;
  double hinf = -1.0;
  double nu = 0.0;
};

/// Per-step costs J_1..J_T and the emitted rows.
struct RegretTrace {
  std::vector<double> J;
  std::vector<TraceRow> rows;
};

struct RegretValue {
  double direct = 0.0;      // J_T − J*_T
  double telescoped = 0.0;  // Σ_{t≤T}(J_t − J_{t−1}) − J*_T with J_0 = 0
};

/// Regret at T from a trace that holds J_1..J_T and an emitted row at T.
/// Throws InsufficientTrace otherwise.
RegretValue regret(const RegretTrace& trace, long T);

}  // namespace safectl
