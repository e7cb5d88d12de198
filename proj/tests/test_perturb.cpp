#include <doctest.h>

#include <cmath>

#include "switchdiff/perturb.hpp"
#include "switchdiff/ratefn.hpp"
#include "testmodels.hpp"

using namespace switchdiff;

namespace {

PerturbOptions options_for(const Model& m) {
  ProbeSpec probe;
  probe.lo = Eigen::VectorXd::Constant(m.dim(), -5);
  probe.hi = Eigen::VectorXd::Constant(m.dim(), 5);
  PerturbOptions po;
  po.bounds = validate_model(m, probe).bounds;
  return po;
}

// Constant-slope member of the rate-function domain for the degenerate
// instance: pi forced by beta, q from the stationarity constraint.
std::pair<Path, ControlTables> constant_slope_triple(double beta, double q12,
                                                     double T, int K) {
  Path xi;
  ControlTables tab;
  double pi1 = (beta + 1) / 2;
  for (int k = 0; k <= K; ++k) {
    double t = T * k / K;
    xi.t.push_back(t);
    xi.x.push_back(Eigen::VectorXd::Constant(1, beta * t));
    if (k < K) {
      tab.t.push_back(t);
      tab.pi.push_back(Eigen::Vector2d(pi1, 1 - pi1));
      tab.q.push_back({q12, pi1 * q12 / (1 - pi1)});
      tab.u.push_back(Eigen::MatrixXd::Zero(2, 1));
    }
  }
  tab.t.push_back(T);
  return {xi, tab};
}

}  // namespace

TEST_CASE("zero-cost triple satisfies both constraints to machine precision") {
  Model m = testmodels::two_state(1, 1, 2, 1);
  auto [xi, tab] = zero_cost_triple(m, Eigen::VectorXd::Zero(1), 1.0, 100);
  auto mem = verify_membership(m, xi, tab);
  CHECK(mem.dynamics_residual == 0.0);
  CHECK(mem.stationarity_residual < 1e-14);
  CHECK(xi.x.back()[0] == doctest::Approx(-1.0 / 3).epsilon(1e-6));
}

TEST_CASE("perturbation of the zero-cost triple stays within gamma") {
  Model m = testmodels::two_state(1, 1, 2, 1);
  auto [xi, tab] = zero_cost_triple(m, Eigen::VectorXd::Zero(1), 1.0, 100);
  auto pr = perturb_triple(m, xi, tab, 0.1, options_for(m));
  CHECK(pr.delta_star > 0);
  CHECK(pr.m2 > 0);
  CHECK(pr.m2 <= pr.m3);
  CHECK(pr.path_deviation < 0.1);
  CHECK(pr.cost_star <= pr.cost_input + 0.1);
  for (const auto& slice : pr.phi_star)
    for (double phi : slice) {
      CHECK(phi >= pr.m2 - 1e-12);
      CHECK(phi <= pr.m3 + 1e-12);
    }
  auto mem = verify_membership(m, pr.xi_star, pr.star);
  CHECK(mem.dynamics_residual < 1e-8);
  CHECK(mem.stationarity_residual < 1e-10);
}

TEST_CASE("perturbation of a genuinely tilted triple") {
  Model m = testmodels::degenerate2();
  double tstar = 1.0 / std::sqrt(3.0);
  auto [xi, tab] = constant_slope_triple(0.5, tstar, 1.0, 100);
  auto mem_in = verify_membership(m, xi, tab);
  REQUIRE(mem_in.dynamics_residual < 1e-12);
  REQUIRE(mem_in.stationarity_residual < 1e-12);
  auto pr = perturb_triple(m, xi, tab, 0.1, options_for(m));
  CHECK(pr.delta_star > 0);
  // mixing toward nu = (1/2, 1/2) drags the slope below 1/2
  double slope_star = (pr.xi_star.x.back()[0] - pr.xi_star.x.front()[0]);
  CHECK(slope_star < 0.5);
  CHECK(slope_star > 0.5 - 0.1);
  CHECK(pr.path_deviation < 0.1);
  CHECK(pr.cost_star <= pr.cost_input + 0.1);
  auto mem = verify_membership(m, pr.xi_star, pr.star);
  CHECK(mem.dynamics_residual < 1e-10);
  CHECK(mem.stationarity_residual < 1e-12);
}

TEST_CASE("forced delta zero reproduces the input triple") {
  Model m = testmodels::degenerate2();
  auto [xi, tab] = constant_slope_triple(0.25, 0.8, 1.0, 50);
  PerturbOptions po = options_for(m);
  po.force_delta_zero = true;
  auto pr = perturb_triple(m, xi, tab, 0.1, po);
  CHECK(pr.delta_star == 0.0);
  CHECK(pr.path_deviation < 1e-12);
  CHECK(pr.cost_star == doctest::Approx(pr.cost_input).epsilon(1e-12));
}

TEST_CASE("membership gate rejects an inconsistent triple") {
  Model m = testmodels::degenerate2();
  auto [xi, tab] = constant_slope_triple(0.5, 1.0 / std::sqrt(3.0), 1.0, 50);
  tab.pi[10] = Eigen::Vector2d(0.5, 0.5);  // breaks both constraints
  CHECK_THROWS(perturb_triple(m, xi, tab, 0.1, options_for(m)));
}

TEST_CASE("uniqueness check certifies the closed-loop solution") {
  Model m = testmodels::two_state(1, 1, 2, 1);
  auto [xi, tab] = zero_cost_triple(m, Eigen::VectorXd::Zero(1), 1.0, 100);
  auto pr = perturb_triple(m, xi, tab, 0.1, options_for(m));
  auto rep = uniqueness_check(m, pr, Eigen::VectorXd::Zero(1));
  CHECK(rep.passed);
  CHECK(rep.integrator_disagreement < 1e-6);
  CHECK(rep.ic_terminal_gap <= rep.ic_sensitivity_bound);
}

TEST_CASE("stationary map at the path reproduces the slice distribution") {
  Model m = testmodels::degenerate2();
  auto [xi, tab] = constant_slope_triple(0.5, 1.0 / std::sqrt(3.0), 1.0, 50);
  auto pr = perturb_triple(m, xi, tab, 0.1, options_for(m));
  for (int k : {0, 25, 49}) {
    Eigen::VectorXd varrho = stationary_map_rho(m, pr, k, pr.xi_star.x[k]);
    CHECK((varrho - pr.star.pi[k]).lpNorm<Eigen::Infinity>() < 1e-10);
  }
}
