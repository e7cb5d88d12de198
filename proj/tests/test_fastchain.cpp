#include <doctest.h>

#include "switchdiff/fastchain.hpp"
#include "testmodels.hpp"

using namespace switchdiff;

TEST_CASE("stationary measure closed forms") {
  Eigen::VectorXd x = Eigen::VectorXd::Zero(1);
  SUBCASE("2-state c=(2,1) gives (1/3, 2/3)") {
    Model m = testmodels::two_state(0, 0, 2, 1);
    Eigen::VectorXd nu = invariant_measure(m, x);
    CHECK(nu[0] == doctest::Approx(1.0 / 3).epsilon(1e-13));
    CHECK(nu[1] == doctest::Approx(2.0 / 3).epsilon(1e-13));
  }
  SUBCASE("3-state complete graph c=(1,2,3) gives (6,3,2)/11") {
    Model m = testmodels::three_state_complete();
    Eigen::VectorXd nu = invariant_measure(m, x);
    CHECK(std::abs(nu[0] - 6.0 / 11) < 1e-12);
    CHECK(std::abs(nu[1] - 3.0 / 11) < 1e-12);
    CHECK(std::abs(nu[2] - 2.0 / 11) < 1e-12);
  }
}

TEST_CASE("stationary vector annihilates the generator") {
  StreamRng rng(2024, 1);
  for (int trial = 0; trial < 20; ++trial) {
    Model m = testmodels::random_affine(rng, 5);
    Eigen::VectorXd x(m.dim());
    for (int i = 0; i < m.dim(); ++i) x[i] = rng.uniform(-2, 2);
    Eigen::VectorXd nu = invariant_measure(m, x);
    RateMatrix Q = generator(m, x);
    CHECK((Q.q.transpose() * nu).lpNorm<Eigen::Infinity>() < 1e-12);
    CHECK(nu.minCoeff() > 0);
    CHECK(nu.sum() == doctest::Approx(1.0).epsilon(1e-13));
  }
}

TEST_CASE("jump geometry matches c*r with the majorant zeta") {
  Model m = testmodels::two_state(0, 0, 2, 1);
  Eigen::VectorXd x = Eigen::VectorXd::Zero(1);
  JumpGeometry g = jump_geometry(m, x);
  REQUIRE(g.rho.size() == 2);
  CHECK(g.rho[0] == doctest::Approx(2.0));  // c_1 * r_12
  CHECK(g.rho[1] == doctest::Approx(1.0));  // c_2 * r_21
  CHECK(g.zeta == doctest::Approx(3.0));    // max c + 1 at x
  for (double rho : g.rho) CHECK(rho <= g.zeta);
}

TEST_CASE("reducible rate matrix raises with its components") {
  RateMatrix rm;
  rm.q = (Eigen::MatrixXd(2, 2) << -1, 1, 0, 0).finished();
  CHECK_THROWS_AS(stationary(rm), ReducibleError);
  try {
    stationary(rm);
  } catch (const ReducibleError& e) {
    CHECK(e.components.size() >= 2);
  }
}

TEST_CASE("irreducibility constant of the 2-cycle is one") {
  Model m = testmodels::two_state(0, 0, 1, 1);
  CHECK(irreducibility_alpha(m, Eigen::VectorXd::Zero(1)) ==
        doctest::Approx(1.0));
}

TEST_CASE("controlled generator places rates on the channels") {
  Model m = testmodels::two_state(0, 0, 1, 1);
  JumpGeometry g = jump_geometry(m, Eigen::VectorXd::Zero(1));
  std::vector<double> q = {0.3, 0.9};
  RateMatrix Q = controlled_generator(g, 2, q);
  CHECK(Q.q(0, 1) == doctest::Approx(0.3));
  CHECK(Q.q(1, 0) == doctest::Approx(0.9));
  CHECK(Q.q(0, 0) == doctest::Approx(-0.3));
  CHECK(Q.q.rowwise().sum().norm() < 1e-15);
  Eigen::VectorXd pi = stationary(Q);
  CHECK(pi[0] == doctest::Approx(0.9 / 1.2));
}
