#include "safectl/online.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace safectl {

namespace {

constexpr double kMinM = 1e-12;

void require_positive(double value, const char* name) {
  if (!(value > 0.0) || !std::isfinite(value)) {
    throw Error(ErrorKind::NonPositiveParameter, std::string(name) + " must be finite and > 0");
  }
}

double m_from_tail(double tail_sum, const BoundConstants& c) {
  return std::max(tail_sum * double(c.t_star + 1) / c.p_star, kMinM);
}

void check_cost_matrix(const Matrix& M, double mu, double sigma, double tol, const char* name) {
  const double scale = std::max(1.0, M.norm());
  if ((M - M.transpose()).norm() > tol * scale) {
    throw Error(ErrorKind::CostBoundViolation, std::string(name) + " is not symmetric");
  }
  const double lo = lambda_min(M);
  if (lo < mu * (1.0 - tol)) {
    throw Error(ErrorKind::CostBoundViolation,
                std::string(name) + ": λ_min = " + std::to_string(lo) + " < μ = " +
                    std::to_string(mu));
  }
  const double tr = M.trace();
  if (tr > sigma * (1.0 + tol)) {
    throw Error(ErrorKind::CostBoundViolation, std::string(name) + ": trace " +
                                                   std::to_string(tr) + " > σ = " +
                                                   std::to_string(sigma));
  }
}

HistoryEntry evaluate(const LtiSystem& sys, const OnlineState& state, double pdiff,
                      const OnlineConfig& config) {
  HistoryEntry entry;
  entry.t = state.t;
  entry.pdiff = pdiff;
  entry.J = h2_cost_bound(state.P, sys.D());
  if (config.verify) {
    const ValidityReport report =
        is_valid_controller(sys, state.K, state.Qbar, state.Rbar, config.gamma, config.hinf);
    entry.spectral_radius = report.spectral_radius;
    entry.hinf = report.hinf;
    entry.valid = report.valid;
  } else {
    entry.spectral_radius = spectral_radius(closed_loop(sys, state.K).A);
    entry.valid = entry.spectral_radius < 1.0;
  }
  return entry;
}

void certify(const LtiSystem& sys, OnlineState& state, const OnlineConfig& config) {
  if (!config.certify) return;
  try {
    S2daCertificate next = s2da_certificate(sys, state.K, state.P, config.mu);
    if (state.certificate) {
      const double factor = sequential_factor(*state.certificate, next);
      state.sequential_max = std::max(state.sequential_max, factor);
      if (factor > 1.0 + next.epsilon) ++state.sequential_exceedances;
    }
    state.certificate = std::move(next);
  } catch (const Error& e) {
    state.certificate.reset();
    if (state.certificate_failures++ == 0) {
      state.certificate_error = "t = " + std::to_string(state.t) + ": " + e.what();
    }
  }
}

// ν only ever grows; every growth re-derives the constants and is logged.
void track_nu(OnlineState& state, const OnlineConfig& config) {
  const double top = lambda_max(state.P.P);
  if (top <= state.constants.nu) return;
  BoundConstants next =
      bound_constants(config.mu, top, config.sigma, state.constants.b_norm, config.m);
  if (config.estimate_m && state.refinement && state.refinement->m_estimate) {
    next.m = m_from_tail(state.refinement->tail_sum, next);
    state.refinement->m_estimate = next.m;
  }
  state.constants = next;
  state.constant_events.push_back({state.t, next});
}

void refine(const LtiSystem& sys, OnlineState& state, const OnlineConfig& config) {
  const BoundConstants& c = state.constants;
  Refinement record;
  record.t = state.t;
  const double threshold = c.p_star / double(c.t_star);

  RiccatiSolution current = state.P;
  Gain gain = state.K;
  for (int d = 1; d <= config.refine_max_iters; ++d) {
    gain = policy_improvement(sys, current, state.Rbar);
    RiccatiSolution next =
        solve_policy_riccati(sys, gain, state.Qbar, state.Rbar, config.gamma, config.riccati);
    const double diff = symmetric_norm(Matrix(next.P - current.P));
    current = std::move(next);
    record.diffs.push_back(diff);
    record.iterations = d;
    if (diff <= threshold) break;
  }
  state.P = current;
  state.K = gain;

  // Continue the chain on a copy to measure how far the refined pair still
  // is from the fixed point, and how fast the differences contract.
  std::vector<double> chain = record.diffs;
  RiccatiSolution tail = current;
  for (int j = 0; j < 100; ++j) {
    const Gain g = policy_improvement(sys, tail, state.Rbar);
    RiccatiSolution next =
        solve_policy_riccati(sys, g, state.Qbar, state.Rbar, config.gamma, config.riccati);
    const double diff = symmetric_norm(Matrix(next.P - tail.P));
    tail = std::move(next);
    chain.push_back(diff);
    record.tail_sum += diff;
    if (diff <= 1e-13 * std::max(1.0, symmetric_norm(tail.P))) break;
  }
  for (std::size_t j = 0; j + 1 < chain.size(); ++j) {
    if (chain[j] > 1e-150 && chain[j + 1] > 0.0) {
      record.quadratic_rate = std::max(record.quadratic_rate, chain[j + 1] / (chain[j] * chain[j]));
    }
  }
  record.m_estimate = m_from_tail(record.tail_sum, c);
  if (config.estimate_m) state.constants.m = *record.m_estimate;
  state.refinement = std::move(record);
  state.refined = true;
}

}  // namespace

BoundConstants bound_constants(double mu, double nu, double sigma, double b_norm, double m) {
  require_positive(mu, "mu");
  require_positive(nu, "nu");
  require_positive(sigma, "sigma");
  require_positive(b_norm, "‖B‖");
  require_positive(m, "m");
  BoundConstants c;
  c.mu = mu;
  c.nu = nu;
  c.sigma = sigma;
  c.b_norm = b_norm;
  c.m = m;
  const double k2 = nu / mu;
  c.kappa = std::sqrt(k2);
  c.epsilon = 1.0 / (2.0 * k2);
  c.t_star_raw = 8.0 * sigma * k2 * k2 * b_norm / (c.epsilon * mu) *
                 (1.0 + k2 * b_norm * (1.0 + k2) / c.epsilon);
  if (!std::isfinite(c.t_star_raw) || c.t_star_raw > 9e18) {
    throw Error(ErrorKind::Overflow, "t* = " + std::to_string(c.t_star_raw));
  }
  // Guard against the ceiling landing one above an exact integer.
  const double rounded = std::round(c.t_star_raw);
  c.t_star = std::abs(c.t_star_raw - rounded) <= 1e-9 * std::max(1.0, rounded)
                 ? long(rounded)
                 : long(std::ceil(c.t_star_raw));
  c.p_star = 2.0 * sigma / b_norm + 4.0 * k2 * sigma * (1.0 + k2) / c.epsilon;
  return c;
}

std::pair<Matrix, Matrix> running_average_update(const Matrix& Qbar, const Matrix& Rbar,
                                                 const Matrix& Q, const Matrix& R, long t) {
  if (t < 1) throw Error(ErrorKind::InvalidConfig, "running average needs t >= 1");
  if (Q.rows() != Q.cols() || R.rows() != R.cols()) {
    throw Error(ErrorKind::DimensionMismatch, "cost matrices must be square");
  }
  if (t == 1) return {Q, R};
  if (Qbar.rows() != Q.rows() || Qbar.cols() != Q.cols() || Rbar.rows() != R.rows() ||
      Rbar.cols() != R.cols()) {
    throw Error(ErrorKind::DimensionMismatch, "running averages and costs differ in size");
  }
  const double keep = double(t - 1) / double(t);
  const double fresh = 1.0 / double(t);
  return {keep * Qbar + fresh * Q, keep * Rbar + fresh * R};
}

double regret_bound(const BoundConstants& c, const Matrix& D, long T) {
  return regret_bound(c, D.squaredNorm(), T);  // Tr(DDᵀ) = ‖D‖_F²
}

double regret_bound(const BoundConstants& c, double trace_ddt, long T) {
  if (T < c.t_star) {
    throw Error(ErrorKind::HorizonBelowBurnIn,
                "T = " + std::to_string(T) + " < t* = " + std::to_string(c.t_star));
  }
  return trace_ddt * (std::log(double(T)) + 2.0 * c.m * c.p_star / double(c.t_star + 1) -
                  std::log(double(c.t_star)));
}

void check_admissible(const Matrix& Q, const Matrix& R, double mu, double sigma, double tol) {
  check_cost_matrix(Q, mu, sigma, tol, "Q");
  check_cost_matrix(R, mu, sigma, tol, "R");
}

OnlineState init(const LtiSystem& sys, const Matrix& Q1, const Matrix& R1, const Gain& K1,
                 const OnlineConfig& config) {
  require_positive(config.gamma, "gamma");
  if (Q1.rows() != sys.states() || Q1.cols() != sys.states() || R1.rows() != sys.inputs() ||
      R1.cols() != sys.inputs()) {
    throw Error(ErrorKind::DimensionMismatch, "initial costs do not match the plant");
  }
  check_admissible(Q1, R1, config.mu, config.sigma);

  const double rho = spectral_radius(closed_loop(sys, K1).A);
  if (rho >= 1.0) {
    throw Error(ErrorKind::InfeasibleInit,
                "K_1 is not stabilizing: spectral radius " + std::to_string(rho));
  }
  const ValidityReport report = is_valid_controller(sys, K1, Q1, R1, config.gamma, config.hinf);
  if (!report.valid) {
    throw Error(ErrorKind::InfeasibleInit, "K_1 does not attenuate: H∞ norm " +
                                               std::to_string(report.hinf) + " >= γ = " +
                                               std::to_string(config.gamma));
  }

  OnlineState state;
  state.t = 1;
  state.Qbar = Q1;
  state.Rbar = R1;
  state.K = K1;
  try {
    state.P = solve_policy_riccati(sys, K1, Q1, R1, config.gamma, config.riccati);
  } catch (const Error& e) {
    throw Error(ErrorKind::InfeasibleInit, std::string("Riccati feasibility failed: ") + e.what());
  }
  state.constants = bound_constants(config.mu, lambda_max(state.P.P), config.sigma,
                                    operator_norm(sys.B()), config.m);
  state.constant_events.push_back({1, state.constants});
  state.K_next = policy_improvement(sys, state.P, state.Rbar);

  HistoryEntry entry = evaluate(sys, state, 0.0, config);
  entry.hinf = config.verify ? entry.hinf : report.hinf;
  state.history.push_back(entry);
  certify(sys, state, config);
  return state;
}

OnlineState step(const LtiSystem& sys, OnlineState state, const Matrix& Q, const Matrix& R,
                 const OnlineConfig& config) {
  if (state.t < 1) throw Error(ErrorKind::InvalidConfig, "step before init");
  check_admissible(Q, R, config.mu, config.sigma);
  const long t = state.t + 1;
  std::tie(state.Qbar, state.Rbar) = running_average_update(state.Qbar, state.Rbar, Q, R, t);

  const Matrix previous = state.P.P;
  state.t = t;
  state.K = std::move(state.K_next);
  state.P = solve_policy_riccati(sys, state.K, state.Qbar, state.Rbar, config.gamma,
                                 config.riccati);
  track_nu(state, config);
  if (!state.refined && t >= state.constants.t_star) {
    refine(sys, state, config);
    track_nu(state, config);
  }

  state.K_next = policy_improvement(sys, state.P, state.Rbar);
  state.history.push_back(evaluate(sys, state, symmetric_norm(Matrix(state.P.P - previous)),
                                   config));
  certify(sys, state, config);
  return state;
}

StationaryResult counterfactual(const LtiSystem& sys, const OnlineState& state,
                                const OnlineConfig& config, const Gain* hint) {
  StationaryOptions options;
  options.verify_hinf = false;
  options.riccati = config.riccati;
  if (hint) {
    try {
      return solve_stationary(sys, state.Qbar, state.Rbar, config.gamma, *hint, options);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::InfeasibleInit) throw;
    }
  }
  return solve_stationary(sys, state.Qbar, state.Rbar, config.gamma, state.K, options);
}

RegretValue regret(const RegretTrace& trace, long T) {
  if (T < 1 || long(trace.J.size()) < T) {
    throw Error(ErrorKind::InsufficientTrace, "trace holds " + std::to_string(trace.J.size()) +
                                                  " costs, need " + std::to_string(T));
  }
  const auto row = std::find_if(trace.rows.begin(), trace.rows.end(),
                                [T](const TraceRow& r) { return r.t == T; });
  if (row == trace.rows.end()) {
    throw Error(ErrorKind::InsufficientTrace, "no emitted row at t = " + std::to_string(T));
  }
  RegretValue out;
  out.direct = trace.J[T - 1] - row->J_star;
  double sum = 0.0;
  double prev = 0.0;
  for (long t = 0; t < T; ++t) {
    sum += trace.J[t] - prev;
    prev = trace.J[t];
  }
  out.telescoped = sum - row->J_star;
  return out;
}

}  // namespace safectl
