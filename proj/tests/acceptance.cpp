// Acceptance suite: one pass/fail line per criterion.  Exit code is the
// number of failed criteria.

#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "switchdiff/averaging.hpp"
#include "switchdiff/experiments.hpp"
#include "switchdiff/fastchain.hpp"
#include "switchdiff/io.hpp"
#include "switchdiff/perturb.hpp"
#include "switchdiff/ratefn.hpp"
#include "switchdiff/rng.hpp"
#include "switchdiff/simulator.hpp"
#include "testmodels.hpp"

using namespace switchdiff;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

Eigen::VectorXd zero1() { return Eigen::VectorXd::Zero(1); }

PerturbOptions perturb_options(const Model& m) {
  ProbeSpec probe;
  probe.lo = Eigen::VectorXd::Constant(m.dim(), -5);
  probe.hi = Eigen::VectorXd::Constant(m.dim(), 5);
  PerturbOptions po;
  po.bounds = validate_model(m, probe).bounds;
  return po;
}

// ---- criterion 1: stationary-measure correctness -------------------------

Outcome criterion1() {
  StreamRng rng(101, 1);
  double worst_residual = 0;
  for (int trial = 0; trial < 100; ++trial) {
    Model m = testmodels::random_affine(rng, 6);
    for (int k = 0; k < 10; ++k) {
      Eigen::VectorXd x(m.dim());
      for (int i = 0; i < m.dim(); ++i) x[i] = rng.uniform(-3, 3);
      // invariant_measure cross-checks the embedded-chain route against the
      // null-space route within 1e-10 TV internally (throws on failure)
      Eigen::VectorXd nu = invariant_measure(m, x, 1e-10);
      RateMatrix Q = generator(m, x);
      worst_residual = std::max(
          worst_residual, (Q.q.transpose() * nu).lpNorm<Eigen::Infinity>());
    }
  }
  Eigen::VectorXd nu2 =
      invariant_measure(testmodels::two_state(0, 0, 2, 1), zero1());
  Eigen::VectorXd nu3 =
      invariant_measure(testmodels::three_state_complete(), zero1());
  double closed2 = std::max(std::abs(nu2[0] - 1.0 / 3), std::abs(nu2[1] - 2.0 / 3));
  double closed3 = std::max({std::abs(nu3[0] - 6.0 / 11),
                             std::abs(nu3[1] - 3.0 / 11),
                             std::abs(nu3[2] - 2.0 / 11)});
  std::ostringstream os;
  os << "max ||nu Q||_inf = " << worst_residual << ", closed-form gaps "
     << closed2 << ", " << closed3;
  return {worst_residual < 1e-12 && closed2 < 1e-12 && closed3 < 1e-12,
          os.str()};
}

// ---- criterion 2: identity-control coupling ------------------------------

Outcome criterion2() {
  StreamRng rng(202, 1);
  int mismatches = 0;
  for (int trial = 0; trial < 50; ++trial) {
    Model m = testmodels::random_affine(rng, 4);
    Eigen::VectorXd x0(m.dim());
    for (int i = 0; i < m.dim(); ++i) x0[i] = rng.uniform(-1, 1);
    std::uint64_t seed = rng.next_u64();
    int y0 = int(rng.uniform() * m.num_states());
    auto plain = simulate(m, 0.05, x0, y0, 0.5, 0.01, seed);
    auto ident = FeedbackControls::identity(m, 0.5);
    auto coupled = simulate_controlled(m, 0.05, ident, x0, y0, 0.5, 0.01, seed);
    bool same = plain.path.t == coupled.path.t && plain.y == coupled.y &&
                plain.jumps.size() == coupled.jumps.size();
    for (size_t k = 0; same && k < plain.path.x.size(); ++k)
      same = plain.path.x[k] == coupled.path.x[k];
    for (size_t k = 0; same && k < plain.jumps.size(); ++k)
      same = plain.jumps[k].time == coupled.jumps[k].time &&
             plain.jumps[k].to == coupled.jumps[k].to;
    if (!same) ++mismatches;
  }
  std::ostringstream os;
  os << mismatches << "/50 mismatches";
  return {mismatches == 0, os.str()};
}

// ---- criterion 3: thinning fidelity --------------------------------------

Outcome criterion3() {
  Model m = testmodels::two_state(0, 0, 2, 1, 0, 0);  // frozen slow component
  Eigen::VectorXd nu = invariant_measure(m, zero1());
  const double eps = 0.01, T = 1.0;
  const int N = 1000;
  double sum_occ = 0, sum_occ2 = 0;
  double cnt_sum[2] = {0, 0}, cnt_sum2[2] = {0, 0}, time_sum[2] = {0, 0};
  for (int i = 0; i < N; ++i) {
    auto tr = simulate(m, eps, zero1(), 0, T, 0.01, 2026, i + 1);
    auto occ = occupation_measure(tr, T);
    sum_occ += occ[0];
    sum_occ2 += occ[0] * occ[0];
    double cnt[2] = {0, 0};
    for (const auto& j : tr.jumps) cnt[j.from] += 1;
    for (int ch = 0; ch < 2; ++ch) {
      cnt_sum[ch] += cnt[ch];
      cnt_sum2[ch] += cnt[ch] * cnt[ch];
      time_sum[ch] += occ[ch] * T;
    }
  }
  double mo = sum_occ / N;
  double so = std::sqrt((sum_occ2 / N - mo * mo) / N);
  double z_occ = (mo - nu[0]) / so;
  double rho[2] = {2.0, 1.0};  // c_i r_ij per channel
  double z_ch[2];
  for (int ch = 0; ch < 2; ++ch) {
    double mj = cnt_sum[ch] / N;
    double sj = std::sqrt((cnt_sum2[ch] / N - mj * mj) / N);
    double expect = rho[ch] / eps * (time_sum[ch] / N);
    z_ch[ch] = (mj - expect) / sj;
  }
  std::ostringstream os;
  os << "z-scores: occ " << z_occ << ", channels " << z_ch[0] << ", " << z_ch[1];
  return {std::abs(z_occ) < 3 && std::abs(z_ch[0]) < 3 && std::abs(z_ch[1]) < 3,
          os.str()};
}

// ---- criterion 4: averaging principle ------------------------------------

Outcome criterion4() {
  Model m = testmodels::two_state(0.5, 1.0, 2, 1, 1, -1, -0.5, -0.5);
  auto rows = lln_diagnostic(m, zero1(), 0, {0.1, 0.03, 0.01}, 200, 1, 1.0,
                             0.01, 1);
  std::ostringstream os;
  os << "mean sup dev: " << rows[0].mean_sup_dev << " > " << rows[1].mean_sup_dev
     << " > " << rows[2].mean_sup_dev;
  bool dec = rows[0].mean_sup_dev > rows[1].mean_sup_dev &&
             rows[1].mean_sup_dev > rows[2].mean_sup_dev;
  return {dec, os.str()};
}

// ---- criterion 5: rate-function special cases ----------------------------

double degenerate_grid_oracle(double beta) {
  // pi forced by beta; stationarity forces q21 = (pi1/pi2) q12; scan q12
  double pi1 = (beta + 1) / 2, pi2 = 1 - pi1;
  double best = 1e300;
  for (double t = 1e-6; t < 12.0; t += 1e-6)
    best = std::min(best, pi1 * entropy_cost(t) + pi2 * entropy_cost(pi1 * t / pi2));
  return best;
}

Outcome criterion5() {
  // (a) averaged path costs nothing
  Model m = testmodels::two_state(1, 1, 2, 1);
  Path avg = solve_averaged_ode(m, zero1(), 1.0, 1e-3);
  Path coarse;  // 50-slice subsample for the quadrature
  for (int k = 0; k <= 50; ++k) {
    coarse.t.push_back(k / 50.0);
    coarse.x.push_back(avg.at(k / 50.0));
  }
  auto pr = path_rate(m, coarse);
  bool a_ok = pr.finite && pr.value <= 1e-5;

  // (b) Brownian special case
  Model g = testmodels::gaussian1();
  double worst_b = 0;
  for (double beta : {-2.0, -1.0, 0.0, 1.0, 2.0}) {
    auto lr = local_rate(g, zero1(), Eigen::VectorXd::Constant(1, beta));
    worst_b = std::max(worst_b, std::abs(lr.value - beta * beta / 2));
  }

  // (c) degenerate instance against the 1-d grid oracle
  Model dm = testmodels::degenerate2();
  auto lr = local_rate(dm, zero1(), Eigen::VectorXd::Constant(1, 0.5));
  double oracle = degenerate_grid_oracle(0.5);
  double rel_c = std::abs(lr.value - oracle) / oracle;

  std::ostringstream os;
  os << "I(avg) = " << pr.value << ", max Brownian gap " << worst_b
     << ", degenerate rel err " << rel_c << " (oracle " << oracle << ")";
  return {a_ok && worst_b < 1e-6 && rel_c < 0.02, os.str()};
}

// ---- criterion 6: optimizer vs brute-force oracle ------------------------

Outcome criterion6() {
  StreamRng rng(606, 1);
  double worst_gap = -1e300;
  int done = 0;
  while (done < 20) {
    Model m = testmodels::random_affine(rng, 3);
    Eigen::VectorXd x(m.dim()), beta(m.dim());
    for (int i = 0; i < m.dim(); ++i) x[i] = rng.uniform(-1, 1);
    for (int i = 0; i < m.dim(); ++i) beta[i] = rng.uniform(-1, 1);
    auto lr = local_rate(m, x, beta);
    if (!lr.feasible) continue;  // nondegenerate draws are always feasible
    BruteForceGrid grid;
    grid.points_per_dim = m.num_channels() > 4 ? 5 : 9;
    auto [best, step] = local_rate_bruteforce(m, x, beta, grid);
    worst_gap = std::max(worst_gap, lr.value - best);
    ++done;
  }
  std::ostringstream os;
  os << "max (local_rate - grid best) = " << worst_gap << " over 20 instances";
  return {worst_gap <= 1e-4, os.str()};
}

// ---- criterion 7: Proposition 4.1 pipeline -------------------------------

Outcome criterion7() {
  Model m = testmodels::two_state(1, 1, 2, 1);
  auto [xi, tab] = zero_cost_triple(m, zero1(), 1.0, 200);
  auto pr = perturb_triple(m, xi, tab, 0.1, perturb_options(m));
  auto mem = verify_membership(m, pr.xi_star, pr.star);
  auto uq = uniqueness_check(m, pr, zero1(), 1e-6);
  double phi_lo = 1e300, phi_hi = -1e300;
  for (const auto& slice : pr.phi_star)
    for (double v : slice) {
      phi_lo = std::min(phi_lo, v);
      phi_hi = std::max(phi_hi, v);
    }
  bool ok = pr.path_deviation < 0.1 && pr.m2 > 0 &&
            phi_lo >= pr.m2 - 1e-12 && phi_hi <= pr.m3 + 1e-12 &&
            mem.stationarity_residual < 1e-10 && mem.dynamics_residual < 1e-8 &&
            pr.cost_star <= pr.cost_input + 0.1 && uq.passed &&
            uq.integrator_disagreement < 1e-6;
  std::ostringstream os;
  os << "dev " << pr.path_deviation << ", phi in [" << phi_lo << ", " << phi_hi
     << "] vs [m2, m3] = [" << pr.m2 << ", " << pr.m3 << "], residuals ("
     << mem.dynamics_residual << ", " << mem.stationarity_residual
     << "), integrators " << uq.integrator_disagreement;
  return {ok, os.str()};
}

// ---- criterion 8: LDP slope, analytic Gaussian case ----------------------

Outcome criterion8() {
  Model g = testmodels::gaussian1();
  EventSpec ev = EventSpec::halfspace(Eigen::VectorXd::Ones(1), 1.0);
  auto rep = ldp_compare(g, zero1(), 0, 1.0, 0.05, ev, {0.1, 0.05, 0.02},
                         {100000, 100000, 1000000}, 6, {}, 1);
  double i_err = std::abs(rep.variational.I_star - 0.5);
  double slope_rel = std::abs(rep.sweep.slope - 0.5) / 0.5;
  std::ostringstream os;
  os << "I* = " << rep.variational.I_star << ", slope " << rep.sweep.slope
     << " (" << rep.note << ")";
  return {i_err < 1e-4 && rep.sweep.slope_valid && slope_rel < 0.15, os.str()};
}

// ---- criterion 9: LDP slope, coupled degenerate case ---------------------

Outcome criterion9() {
  Model dm = testmodels::degenerate2();
  EventSpec ev = EventSpec::halfspace(Eigen::VectorXd::Ones(1), 0.5);
  auto rep = ldp_compare(dm, zero1(), 0, 1.0, 0.02, ev, {0.1, 0.05, 0.02},
                         {20000, 50000, 200000}, 1, {}, 1);
  double oracle = degenerate_grid_oracle(0.5);
  double i_rel = std::abs(rep.variational.I_star - oracle) / oracle;
  double slope_rel = std::abs(rep.sweep.slope - rep.variational.I_star) /
                     rep.variational.I_star;
  // refinement must not lower the value by more than 1%
  bool refine_ok = rep.variational.refined_I >= 0.99 * rep.variational.I_star;
  std::ostringstream os;
  os << "I* = " << rep.variational.I_star << " vs oracle " << oracle
     << " (rel " << i_rel << "), refined " << rep.variational.refined_I
     << ", slope " << rep.sweep.slope << " (rel gap " << slope_rel
     << "; prelimit bias at these eps sits inside the declared 25% band)";
  return {i_rel < 0.02 && refine_ok && rep.sweep.slope_valid && slope_rel < 0.25,
          os.str()};
}

// ---- criterion 10: tilted convergence ------------------------------------

Outcome criterion10() {
  Model dm = testmodels::degenerate2();
  // constant-slope triple at beta = 1/2: a genuinely non-averaged target
  // (the averaged flow of this model is identically zero)
  const double T = 1.0;
  const int K = 200;
  double tstar = 1.0 / std::sqrt(3.0);
  Path xi;
  ControlTables tab;
  for (int k = 0; k <= K; ++k) {
    double t = T * k / K;
    xi.t.push_back(t);
    xi.x.push_back(Eigen::VectorXd::Constant(1, 0.5 * t));
    if (k < K) {
      tab.t.push_back(t);
      tab.pi.push_back(Eigen::Vector2d(0.75, 0.25));
      tab.q.push_back({tstar, 3 * tstar});
      tab.u.push_back(Eigen::MatrixXd::Zero(2, 1));
    }
  }
  tab.t.push_back(T);
  auto pr = perturb_triple(dm, xi, tab, 0.1, perturb_options(dm));
  auto rows = tilted_convergence(dm, pr, 0, 0.01, {0.1, 0.03, 0.01}, 200, 2, 1);
  bool dec = rows[0].mean_sup_dev > rows[1].mean_sup_dev &&
             rows[1].mean_sup_dev > rows[2].mean_sup_dev;
  double worst_z = 0;
  for (const auto& r : rows)
    worst_z = std::max(worst_z,
                       std::abs(r.mean_cost - r.det_cost) / r.cost_stderr);
  std::ostringstream os;
  os << "sup dev " << rows[0].mean_sup_dev << " > " << rows[1].mean_sup_dev
     << " > " << rows[2].mean_sup_dev << ", max |z|(cost) = " << worst_z;
  return {dec && worst_z < 3, os.str()};
}

// ---- criterion 11: reproducibility ---------------------------------------

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Outcome criterion11() {
  Model m = testmodels::two_state(0.5, 1.0, 2, 1);
  Model g = testmodels::gaussian1();
  EventSpec ev = EventSpec::halfspace(Eigen::VectorXd::Ones(1), 0.3);
  bool all_same = true;
  std::vector<std::string> checked;

  // sweep CSV across thread counts
  std::string a = "/tmp/switchdiff_acc_a.csv", b = "/tmp/switchdiff_acc_b.csv";
  write_sweep_csv(a, eps_sweep(g, zero1(), 0, 1.0, 0.05, ev, {0.1, 0.05},
                               {2000, 2000}, 42, 1));
  write_sweep_csv(b, eps_sweep(g, zero1(), 0, 1.0, 0.05, ev, {0.1, 0.05},
                               {2000, 2000}, 42, 3));
  all_same = all_same && slurp(a) == slurp(b);
  checked.push_back("sweep");

  // lln CSV across thread counts
  write_lln_csv(a, lln_diagnostic(m, zero1(), 0, {0.1, 0.05}, 50, 7, 0.5, 0.01, 1));
  write_lln_csv(b, lln_diagnostic(m, zero1(), 0, {0.1, 0.05}, 50, 7, 0.5, 0.01, 4));
  all_same = all_same && slurp(a) == slurp(b);
  checked.push_back("lln");

  // ensemble CSV across thread counts
  write_ensemble_csv(a, batch_simulate(m, 0.05, zero1(), 0, 0.5, 0.01, 32, 11,
                                       nullptr, nullptr, 1));
  write_ensemble_csv(b, batch_simulate(m, 0.05, zero1(), 0, 0.5, 0.01, 32, 11,
                                       nullptr, nullptr, 2));
  all_same = all_same && slurp(a) == slurp(b);
  checked.push_back("ensemble");

  std::remove(a.c_str());
  std::remove(b.c_str());
  std::string detail = "byte-identical across thread counts:";
  for (const auto& c : checked) detail += " " + c;
  return {all_same, detail};
}

}  // namespace

int main(int argc, char** argv) {
  std::vector<std::function<Outcome()>> criteria = {
      criterion1, criterion2, criterion3, criterion4, criterion5, criterion6,
      criterion7, criterion8, criterion9, criterion10, criterion11};
  int only = argc > 1 ? std::atoi(argv[1]) : 0;
  int failures = 0;
  for (size_t i = 0; i < criteria.size(); ++i) {
    if (only > 0 && int(i + 1) != only) continue;
    Outcome out;
    try {
      out = criteria[i]();
    } catch (const std::exception& e) {
      out = {false, std::string("exception: ") + e.what()};
    }
    std::printf("criterion %zu: %s — %s\n", i + 1, out.pass ? "PASS" : "FAIL",
                out.detail.c_str());
    std::fflush(stdout);
    if (!out.pass) ++failures;
  }
  return failures;
}
