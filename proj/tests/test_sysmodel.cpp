#include <doctest.h>

#include <random>

#include "oracles.hpp"
#include "safectl/sysmodel.hpp"

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

// a = 0.5, b = 1, d = 1, z = (x, u) unless c, e are given.
LtiSystem scalar_plant(double c = 1.0, double e = 0.0) {
  if (e == 0.0) return LtiSystem(Matrix{{0.5}}, Matrix{{1.0}}, Matrix{{1.0}}, Matrix{{c}}, Matrix{{0.0}});
  return LtiSystem(Matrix{{0.5}}, Matrix{{1.0}}, Matrix{{1.0}}, Matrix{{c}, {0.0}},
                   Matrix{{0.0}, {e}});
}

}  // namespace

TEST_SUITE("sysmodel") {

TEST_CASE("plant validation") {
  const LtiSystem s = scalar_plant(1.0, 1.0);
  CHECK(s.Q()(0, 0) == 1.0);
  CHECK(s.R()(0, 0) == 1.0);
  CHECK(s.outputs() == 2);
  CHECK(kind_of([] {
          LtiSystem(Matrix{{0.5}}, Matrix{{1.0}}, Matrix{{1.0}}, Matrix{{1.0}}, Matrix{{1.0}});
        }) == ErrorKind::AssumptionViolation);
  CHECK(kind_of([] {
          LtiSystem(Matrix::Zero(2, 2), Matrix{{1.0}}, Matrix::Identity(2, 2), Matrix::Identity(2, 2),
                    Matrix::Zero(2, 1));
        }) == ErrorKind::DimensionMismatch);
  CHECK(kind_of([] {
          LtiSystem(Matrix{{NAN}}, Matrix{{1.0}}, Matrix{{1.0}}, Matrix{{1.0}}, Matrix{{0.0}});
        }) == ErrorKind::NumericalFailure);
}

TEST_CASE("zero-order hold") {
  const auto d = zoh_discretize(Matrix::Zero(2, 2), Matrix::Identity(2, 2), Matrix::Zero(2, 0), 0.1);
  CHECK((d.A - Matrix::Identity(2, 2)).norm() <= 1e-15);
  CHECK((d.B - 0.1 * Matrix::Identity(2, 2)).norm() <= 1e-15);

  const auto s = zoh_discretize(Matrix{{-1.0}}, Matrix{{1.0}}, Matrix{{1.0}}, 1.0);
  CHECK(s.A(0, 0) == doctest::Approx(std::exp(-1.0)).epsilon(1e-14));
  CHECK(s.B(0, 0) == doctest::Approx(1.0 - std::exp(-1.0)).epsilon(1e-14));
  CHECK(s.D(0, 0) == doctest::Approx(1.0 - std::exp(-1.0)).epsilon(1e-14));

  const Matrix Ac{{-0.4, 1.3}, {-0.7, 0.2}};
  const Matrix Bc{{0.5, -1.0}, {2.0, 0.3}};
  const auto zoh = zoh_discretize(Ac, Bc, Matrix::Zero(2, 0), 0.7);
  const auto ref = oracle::simpson_zoh(Ac, Bc, 0.7);
  CHECK((zoh.A - ref.A).cwiseAbs().maxCoeff() <= 1e-12);
  CHECK((zoh.B - ref.B).cwiseAbs().maxCoeff() <= 1e-6);

  CHECK(kind_of([] { zoh_discretize(Matrix{{1.0}}, Matrix{{1.0}}, Matrix{{1.0}}, 0.0); }) ==
        ErrorKind::NonPositiveDt);
}

TEST_CASE("closed loop") {
  const LtiSystem s = scalar_plant();
  const auto zero = closed_loop(s, {Matrix{{0.0}}});
  CHECK(zero.A(0, 0) == 0.5);
  CHECK(zero.C(0, 0) == 1.0);
  CHECK(closed_loop(s, {Matrix{{0.5}}}).A(0, 0) == 0.0);
  CHECK(kind_of([&] { closed_loop(s, {Matrix::Zero(2, 1)}); }) == ErrorKind::DimensionMismatch);

  std::mt19937_64 rng(2);
  const Matrix A = oracle::random_matrix(rng, 3, 3), B = oracle::random_matrix(rng, 3, 2);
  Matrix C = Matrix::Zero(5, 3), E = Matrix::Zero(5, 2);
  C.topRows(3) = oracle::random_matrix(rng, 3, 3);
  E.bottomRows(2) = oracle::random_matrix(rng, 2, 2);
  const LtiSystem sys(A, B, Matrix::Identity(3, 3), C, E);
  const Gain K{oracle::random_matrix(rng, 2, 3)};
  const auto loop = closed_loop(sys, K);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      double acc = A(i, j);
      for (int k = 0; k < 2; ++k) acc -= B(i, k) * K.K(k, j);
      CHECK(loop.A(i, j) == doctest::Approx(acc).epsilon(1e-14));
    }
}

TEST_CASE("H-infinity norm") {
  const Matrix one{{1.0}};
  CHECK(hinf_norm(Matrix{{0.0}}, one, one) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(hinf_norm(Matrix{{0.5}}, one, one) == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(kind_of([&] { hinf_norm(Matrix{{1.0}}, one, one); }) == ErrorKind::UnstableClosedLoop);

  // Resonant pair near the unit circle: the peak lies between grid points.
  const double r = 0.97, th = 1.234;
  const Matrix A{{r * std::cos(th), -r * std::sin(th)}, {r * std::sin(th), r * std::cos(th)}};
  const Matrix C{{1.0, 0.3}, {0.0, 1.0}, {0.2, 0.0}};
  const Matrix D{{1.0, 0.0}, {0.5, 1.0}};
  const double ref = oracle::grid_hinf(A, C, D);
  CHECK(std::abs(hinf_norm(A, C, D) - ref) <= 1e-6 * ref);
}

TEST_CASE("controller validity") {
  const LtiSystem s = scalar_plant();
  const auto ok = is_valid_controller(s, {Matrix{{0.5}}}, 3.0);
  CHECK(ok.valid);
  CHECK(ok.spectral_radius == doctest::Approx(0.0));
  CHECK(ok.hinf == doctest::Approx(1.0).epsilon(1e-12));
  const auto unstable = is_valid_controller(s, {Matrix{{-1.0}}}, 3.0);
  CHECK_FALSE(unstable.valid);
  CHECK(unstable.spectral_radius == doctest::Approx(1.5));
  CHECK(std::isinf(unstable.hinf));
  CHECK_FALSE(is_valid_controller(s, {Matrix{{0.5}}}, 0.5).valid);
}

TEST_CASE("simulation") {
  const LtiSystem s = scalar_plant();
  const std::vector<Gain> gains(2, Gain{Matrix{{0.5}}});
  const auto zero = simulate(s, gains, {Vector::Zero(1), Vector::Zero(1)}, Vector::Zero(1));
  for (const auto& x : zero.x) CHECK(x.norm() == 0.0);
  for (const auto& z : zero.z) CHECK(z.norm() == 0.0);

  const auto hand = simulate(s, gains, {Vector::Ones(1), Vector::Zero(1)}, Vector::Ones(1));
  CHECK(hand.x[1](0) == 1.0);
  CHECK(hand.x[2](0) == 0.0);
  CHECK(hand.horizon() == 2);

  const LtiSystem wild(Matrix{{10.0}}, Matrix{{1.0}}, Matrix{{1.0}}, Matrix{{1.0}}, Matrix{{0.0}});
  const std::vector<Gain> none(20, Gain{Matrix{{0.0}}});
  const std::vector<Vector> w(20, Vector::Zero(1));
  CHECK(kind_of([&] { simulate(wild, none, w, Vector::Ones(1)); }) == ErrorKind::StateOverflow);
}

TEST_CASE("simulation is deterministic") {
  std::mt19937_64 rng(21);
  const Matrix A = oracle::random_matrix(rng, 8, 8, 0.3), B = oracle::random_matrix(rng, 8, 4);
  Matrix C = Matrix::Zero(12, 8), E = Matrix::Zero(12, 4);
  C.topRows(8).setIdentity();
  E.bottomRows(4).setIdentity();
  const LtiSystem sys(A, B, Matrix::Identity(8, 8), C, E);
  std::vector<Gain> gains(200, Gain{oracle::random_matrix(rng, 4, 8, 0.05)});
  std::vector<Vector> w;
  for (int t = 0; t < 200; ++t) w.push_back(oracle::random_matrix(rng, 8, 1));
  const auto a = simulate(sys, gains, w, Vector::Ones(8));
  const auto b = simulate(sys, gains, w, Vector::Ones(8));
  for (std::size_t t = 0; t < a.x.size(); ++t) CHECK((a.x[t].array() == b.x[t].array()).all());
}

}
