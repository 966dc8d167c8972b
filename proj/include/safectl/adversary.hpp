#pragma once

#include <cstdint>
#include <functional>
#include <utility>

#include "safectl/sysmodel.hpp"

namespace safectl {

enum class AttackKind { Arbitrary, DenialOfService };

struct AttackConfig {
  AttackKind kind = AttackKind::Arbitrary;
  double w_max = 1.0;
  long dos_start = 0;  // t_a
  long dos_end = 0;    // t'_a
  std::uint64_t seed = 0;

  /// w_max ≥ 0; for DoS also 1 < t_a ≤ t'_a.
  void validate() const;
  bool in_window(long t) const {
    return kind == AttackKind::DenialOfService && t >= dos_start && t <= dos_end;
  }
};

struct CostPerturbConfig {
  double delta = 0.1;  // perturbation size relative to ‖base‖
  double mu = 0.0;
  double sigma = 0.0;
  std::uint64_t seed = 0;
};

/// Uniform direction, radius uniform on [0, w_max]. A pure function of
/// (seed, t): repeated calls return the same vector.
Vector bounded_disturbance(const AttackConfig& cfg, long t, Eigen::Index p);

/// −B u_t inside the attack window, bounded_disturbance outside it.
Vector dos_disturbance(const AttackConfig& cfg, long t, const Matrix& B, const Vector& u_t);

/// Throws DosRequiresIdentityD unless D = I to 1e-12. Cancelling Bu_t through
/// Dw_t is only exact then.
void require_identity_disturbance(const Matrix& D);

/// w_t as a function of (t, u_t). Scripted or worst-case sequences plug in here.
using DisturbanceGenerator = std::function<Vector(long t, const Vector& u_t)>;

/// Default generator for a plant: bounded sampling or DoS per `cfg`.
DisturbanceGenerator make_disturbance_generator(const AttackConfig& cfg, const LtiSystem& sys);

/// Q_t = Q_base + Δ_Q, R_t = R_base + Δ_R with symmetric Δ of norm at most
/// delta·‖base‖, then clipped onto μI ⪯ M, Tr M ≤ σ. Deterministic in (seed, t).
/// Throws InadmissibleBase when the bases violate the envelope.
std::pair<Matrix, Matrix> perturbed_costs(const CostPerturbConfig& cfg, const Matrix& Q_base,
                                          const Matrix& R_base, long t);

/// Eigenvalue clipping of a symmetric matrix onto {μI ⪯ M, Tr M ≤ σ}.
Matrix clip_to_envelope(const Matrix& M, double mu, double sigma);

}  // namespace safectl
