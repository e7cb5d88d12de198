#include <doctest.h>

#include <cmath>
#include <limits>

#include "switchdiff/experiments.hpp"
#include "switchdiff/perturb.hpp"
#include "testmodels.hpp"

using namespace switchdiff;

TEST_CASE("event geometry") {
  EventSpec ball = EventSpec::ball(Eigen::VectorXd::Zero(2), 1.0);
  CHECK(ball.contains(Eigen::Vector2d(0.5, 0.5)));
  CHECK_FALSE(ball.contains(Eigen::Vector2d(1.5, 0)));
  CHECK(ball.violation(Eigen::Vector2d(2, 0)) == doctest::Approx(1.0));
  CHECK(ball.project(Eigen::Vector2d(2, 0))[0] == doctest::Approx(1.0));

  EventSpec half = EventSpec::halfspace(Eigen::Vector2d(2, 0), 1.0);
  CHECK(half.contains(Eigen::Vector2d(0.5, 9)));
  CHECK_FALSE(half.contains(Eigen::Vector2d(0.4, 9)));
  CHECK(half.violation(Eigen::Vector2d(0, 0)) == doctest::Approx(0.5));
  Eigen::VectorXd proj = half.project(Eigen::Vector2d(0, 3));
  CHECK(proj[0] == doctest::Approx(0.5));
  CHECK(proj[1] == doctest::Approx(3.0));

  CHECK_THROWS(EventSpec::ball(Eigen::VectorXd::Zero(2), -1.0).validate(2));
  CHECK_THROWS(EventSpec::halfspace(Eigen::Vector2d(0, 0), 1.0).validate(2));
}

TEST_CASE("whole-space event has probability one") {
  Model m = testmodels::gaussian1();
  EventSpec ev = EventSpec::ball(Eigen::VectorXd::Zero(1),
                                 std::numeric_limits<double>::infinity());
  auto row = mc_rare_event(m, 0.1, Eigen::VectorXd::Zero(1), 0, 1.0, 0.1, ev,
                           200, 3);
  CHECK(row.p_hat == 1.0);
  CHECK(row.neg_eps_log_p == 0.0);
  CHECK_FALSE(row.censored);
}

TEST_CASE("deterministic model hits its own endpoint at every eps") {
  Model m = testmodels::deterministic1(0.4);
  EventSpec ev = EventSpec::ball(Eigen::VectorXd::Constant(1, 0.4), 0.05);
  auto sweep = eps_sweep(m, Eigen::VectorXd::Zero(1), 0, 1.0, 0.05, ev,
                         {0.2, 0.1}, {100, 100}, 5);
  for (const auto& r : sweep.rows) CHECK(r.p_hat == 1.0);
}

TEST_CASE("censoring is honest: no logarithms of zero") {
  Model m = testmodels::gaussian1();
  EventSpec ev = EventSpec::halfspace(Eigen::VectorXd::Ones(1), 50.0);
  auto row = mc_rare_event(m, 0.05, Eigen::VectorXd::Zero(1), 0, 1.0, 0.1, ev,
                           100, 7);
  CHECK(row.censored);
  CHECK(row.p_hat == 0.0);
  CHECK(std::isfinite(row.neg_eps_log_p));
}

TEST_CASE("sweep slope recovers a moderate-deviation Gaussian target") {
  // event {x >= 0.25}: I = 0.03125, probabilities stay resolvable
  Model m = testmodels::gaussian1();
  EventSpec ev = EventSpec::halfspace(Eigen::VectorXd::Ones(1), 0.25);
  auto sweep = eps_sweep(m, Eigen::VectorXd::Zero(1), 0, 1.0, 0.05, ev,
                         {0.04, 0.02, 0.01}, {40000, 40000, 40000}, 11);
  REQUIRE(sweep.slope_valid);
  CHECK(sweep.cells_used == 3);
  CHECK(sweep.slope == doctest::Approx(0.03125).epsilon(0.30));
}

TEST_CASE("sweep argument validation") {
  Model m = testmodels::gaussian1();
  EventSpec ev = EventSpec::halfspace(Eigen::VectorXd::Ones(1), 1.0);
  CHECK_THROWS(eps_sweep(m, Eigen::VectorXd::Zero(1), 0, 1.0, 0.1, ev,
                         {0.1, 0.2}, {100, 100}, 1));
  CHECK_THROWS(mc_rare_event(m, 0.1, Eigen::VectorXd::Zero(1), 0, 1.0, 0.1, ev,
                             50, 1));
}

TEST_CASE("transcription: event containing the averaged endpoint costs nothing") {
  Model m = testmodels::two_state(1, 1, 2, 1);  // averaged endpoint -1/3
  EventSpec ev = EventSpec::ball(Eigen::VectorXd::Constant(1, -1.0 / 3), 0.2);
  TranscriptionOptions opts;
  opts.k_nodes = 4;
  opts.multistarts = 2;
  opts.refine_check = false;
  auto res = minimize_rate(m, Eigen::VectorXd::Zero(1), 1.0, ev, opts);
  CHECK(res.optimizer_ok);
  CHECK(res.I_star <= 1e-5);
}

TEST_CASE("transcription: Gaussian geodesic is the straight line") {
  Model m = testmodels::gaussian1();
  EventSpec ev = EventSpec::halfspace(Eigen::VectorXd::Ones(1), 1.0);
  TranscriptionOptions opts;
  opts.k_nodes = 4;
  opts.refine_check = false;
  auto res = minimize_rate(m, Eigen::VectorXd::Zero(1), 1.0, ev, opts);
  CHECK(res.optimizer_ok);
  CHECK(res.I_star == doctest::Approx(0.5).epsilon(5e-4));
}

TEST_CASE("feedback controls mirror the perturbed tables") {
  Model m = testmodels::two_state(1, 1, 2, 1);
  auto [xi, tab] = zero_cost_triple(m, Eigen::VectorXd::Zero(1), 1.0, 50);
  ProbeSpec probe;
  probe.lo = Eigen::VectorXd::Constant(1, -5);
  probe.hi = Eigen::VectorXd::Constant(1, 5);
  PerturbOptions po;
  po.bounds = validate_model(m, probe).bounds;
  auto pr = perturb_triple(m, xi, tab, 0.1, po);
  auto fc = feedback_from_perturbation(pr);
  CHECK(fc.t == pr.star.t);
  CHECK(fc.phi == pr.phi_star);
  CHECK(fc.cost_len == pr.rho_star);
  CHECK(fc.phi_max >= 1.0);
  for (const auto& slice : pr.phi_star)
    for (double v : slice) CHECK(v <= fc.phi_max);
}

TEST_CASE("tilted runs concentrate and report costs") {
  // a genuinely tilted triple: the perturbation of the zero-cost triple is
  // the identity (phi = 1) and would record exactly zero cost
  Model m = testmodels::degenerate2();
  double pi1 = 0.75, tstar = 1.0 / std::sqrt(3.0);
  Path xi;
  ControlTables tab;
  const int K = 50;
  for (int k = 0; k <= K; ++k) {
    double t = double(k) / K;
    xi.t.push_back(t);
    xi.x.push_back(Eigen::VectorXd::Constant(1, 0.5 * t));
    if (k < K) {
      tab.t.push_back(t);
      tab.pi.push_back(Eigen::Vector2d(pi1, 1 - pi1));
      tab.q.push_back({tstar, pi1 * tstar / (1 - pi1)});
      tab.u.push_back(Eigen::MatrixXd::Zero(2, 1));
    }
  }
  tab.t.push_back(1.0);
  ProbeSpec probe;
  probe.lo = Eigen::VectorXd::Constant(1, -5);
  probe.hi = Eigen::VectorXd::Constant(1, 5);
  PerturbOptions po;
  po.bounds = validate_model(m, probe).bounds;
  auto pr = perturb_triple(m, xi, tab, 0.1, po);
  auto rows = tilted_convergence(m, pr, 0, 0.02, {0.1, 0.02}, 50, 13);
  REQUIRE(rows.size() == 2);
  CHECK(rows[1].mean_sup_dev < rows[0].mean_sup_dev);
  CHECK(rows[0].det_cost == doctest::Approx(pr.cost_star));
  CHECK(rows[0].cost_stderr > 0);
}
