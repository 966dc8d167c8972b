#include <doctest.h>

#include <random>

#include "oracles.hpp"
#include "safectl/adversary.hpp"

using namespace safectl;

namespace {

template <typename F>
ErrorKind kind_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected an Error");
  return ErrorKind::IoError;
}

}  // namespace

TEST_SUITE("adversary") {

TEST_CASE("bounded disturbance") {
  AttackConfig cfg;
  cfg.w_max = 0.0;
  CHECK(bounded_disturbance(cfg, 3, 4).norm() == 0.0);

  cfg.w_max = 1.0;
  cfg.seed = 99;
  const Vector a = bounded_disturbance(cfg, 17, 3);
  CHECK((a - bounded_disturbance(cfg, 17, 3)).norm() == 0.0);
  CHECK((a - bounded_disturbance(cfg, 18, 3)).norm() > 0.0);
  cfg.seed = 100;
  CHECK((a - bounded_disturbance(cfg, 17, 3)).norm() > 0.0);

  cfg.w_max = 2.0;
  double total = 0.0, top = 0.0;
  const int draws = 100000;
  for (int t = 1; t <= draws; ++t) {
    const double n = bounded_disturbance(cfg, t, 8).norm();
    total += n;
    top = std::max(top, n);
  }
  CHECK(top <= cfg.w_max);
  CHECK(total / draws >= 0.45 * cfg.w_max);
  CHECK(total / draws <= 0.55 * cfg.w_max);
}

TEST_CASE("denial of service") {
  AttackConfig cfg;
  cfg.kind = AttackKind::DenialOfService;
  cfg.dos_start = 5;
  cfg.dos_end = 9;
  cfg.w_max = 0.0;
  const Matrix B{{1.0, 2.0}, {3.0, 4.0}, {5.0, 6.0}};
  const Vector e1 = Vector::Unit(2, 0);
  CHECK((dos_disturbance(cfg, 7, B, e1) + B.col(0)).norm() == 0.0);
  CHECK(dos_disturbance(cfg, 4, B, e1).norm() == 0.0);
  CHECK(dos_disturbance(cfg, 10, B, e1).norm() == 0.0);
  CHECK(kind_of([&] { dos_disturbance(cfg, 7, B, Vector::Ones(3)); }) == ErrorKind::DimensionMismatch);

  CHECK(kind_of([] { require_identity_disturbance(2.0 * Matrix::Identity(3, 3)); }) ==
        ErrorKind::DosRequiresIdentityD);
  CHECK(kind_of([] { require_identity_disturbance(Matrix::Identity(3, 2)); }) ==
        ErrorKind::DosRequiresIdentityD);
  require_identity_disturbance(Matrix::Identity(3, 3));

  AttackConfig bad = cfg;
  bad.dos_start = 1;
  CHECK(kind_of([&] { bad.validate(); }) == ErrorKind::InvalidConfig);
  bad.dos_start = 6;
  bad.dos_end = 5;
  CHECK(kind_of([&] { bad.validate(); }) == ErrorKind::InvalidConfig);
}

TEST_CASE("attack trajectory cancels the control") {
  std::mt19937_64 rng(3);
  const Eigen::Index n = 4, m = 2;
  Matrix C = Matrix::Zero(n + m, n), E = Matrix::Zero(n + m, m);
  C.topRows(n).setIdentity();
  E.bottomRows(m).setIdentity();
  const LtiSystem sys(oracle::random_matrix(rng, n, n, 0.4), oracle::random_matrix(rng, n, m),
                      Matrix::Identity(n, n), C, E);
  const Gain K{oracle::random_matrix(rng, m, n, 0.3)};

  AttackConfig cfg;
  cfg.kind = AttackKind::DenialOfService;
  cfg.dos_start = 10;
  cfg.dos_end = 30;
  cfg.seed = 8;
  const auto generator = make_disturbance_generator(cfg, sys);
  Vector x = Vector::Ones(n);
  for (long t = 1; t <= 40; ++t) {
    const Vector u = -K.K * x;
    const auto next = advance(sys, K, x, generator(t, u));
    if (cfg.in_window(t)) CHECK((next.x_next - sys.A() * x).norm() <= 1e-12);
    x = next.x_next;
  }

  const LtiSystem skew(sys.A(), sys.B(), 2.0 * Matrix::Identity(n, n), C, E);
  CHECK(kind_of([&] { make_disturbance_generator(cfg, skew); }) == ErrorKind::DosRequiresIdentityD);
}

TEST_CASE("cost perturbation") {
  const Matrix base = 2.0 * Matrix::Identity(2, 2);
  CostPerturbConfig cfg{0.0, 1.0, 10.0, 4};
  const auto same = perturbed_costs(cfg, base, base, 12);
  CHECK((same.first - base).norm() == 0.0);
  CHECK((same.second - base).norm() == 0.0);

  cfg.delta = 0.1;
  for (std::uint64_t seed = 0; seed < 10000; ++seed) {
    cfg.seed = seed;
    const auto [Q, R] = perturbed_costs(cfg, base, base, long(seed % 97) + 1);
    for (const Matrix* M : {&Q, &R}) {
      CHECK(operator_norm(Matrix(*M - base)) <= 0.2 + 1e-12);
      CHECK(symmetric_eigenvalues(*M).minCoeff() >= 1.0);
      CHECK(M->trace() <= 10.0);
      CHECK((*M - M->transpose()).norm() == 0.0);
    }
  }
  const auto a = perturbed_costs(cfg, base, base, 5);
  const auto b = perturbed_costs(cfg, base, base, 5);
  CHECK((a.first - b.first).norm() == 0.0);
  CHECK((a.second - b.second).norm() == 0.0);

  // Base on the trace cap.
  CostPerturbConfig edge{0.5, 0.5, 4.0, 0};
  for (long t = 1; t <= 2000; ++t) {
    const auto [Q, R] = perturbed_costs(edge, base, base, t);
    CHECK(Q.trace() <= 4.0);
    CHECK(R.trace() <= 4.0);
    CHECK(symmetric_eigenvalues(Q).minCoeff() >= 0.5);
  }

  CHECK(kind_of([&] { perturbed_costs({0.1, 3.0, 10.0, 0}, base, base, 1); }) ==
        ErrorKind::InadmissibleBase);
  CHECK(kind_of([&] { perturbed_costs({0.1, 1.0, 3.0, 0}, base, base, 1); }) ==
        ErrorKind::InadmissibleBase);
}

TEST_CASE("envelope clipping") {
  const Matrix M{{5.0, 0.0}, {0.0, 0.1}};
  const Matrix clipped = clip_to_envelope(M, 0.5, 4.0);
  const Vector lam = symmetric_eigenvalues(clipped);
  CHECK(lam.minCoeff() >= 0.5);
  CHECK(clipped.trace() <= 4.0);
  CHECK((clip_to_envelope(Matrix::Identity(2, 2), 0.5, 4.0) - Matrix::Identity(2, 2)).norm() == 0.0);
}

}
