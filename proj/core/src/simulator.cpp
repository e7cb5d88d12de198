#include "switchdiff/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <mutex>
#include <stdexcept>

#include "switchdiff/fastchain.hpp"
#include "switchdiff/parallel.hpp"
#include "switchdiff/ratefn.hpp"
#include "switchdiff/rng.hpp"

namespace switchdiff {

int FeedbackControls::slice(double s) const {
  if (t.size() < 2) return 0;
  auto it = std::upper_bound(t.begin(), t.end(), s);
  long k = (it - t.begin()) - 1;
  return int(std::clamp(k, 0L, long(t.size()) - 2));
}

FeedbackControls FeedbackControls::identity(const Model& model, double T) {
  FeedbackControls c;
  c.t = {0.0, T};
  c.u = {Eigen::MatrixXd::Zero(model.num_states(), model.brownian_dim())};
  c.phi = {std::vector<double>(model.num_channels(), 1.0)};
  c.phi_max = 1.0;
  return c;
}

namespace {

Trajectory simulate_core(const Model& model, double eps,
                         const FeedbackControls* ctrl, const Eigen::VectorXd& x0,
                         int y0, double T, double h, std::uint64_t seed,
                         std::uint64_t stream) {
  if (eps <= 0) throw std::invalid_argument("eps must be positive");
  if (h <= 0 || T <= 0) throw std::invalid_argument("T and h must be positive");
  if (y0 < 0 || y0 >= model.num_states())
    throw std::invalid_argument("y0 outside the fast state space");

  const int d = model.dim();
  const int m = model.brownian_dim();
  const double sqrt_eps = std::sqrt(eps);
  const double phi_max = ctrl ? ctrl->phi_max : 1.0;

  // zeta from the model's global intensity bound; for the affine family this
  // is sup c = max_y (c0 + |c1|).
  double cbar = 0;
  if (model.coeff().family == "affine-switching") {
    for (int y = 0; y < model.num_states(); ++y)
      cbar = std::max(cbar,
                      model.coeff().c0[y] + std::abs(model.coeff().c1[y]));
  } else {
    // custom families: probe at x0 only; callers supply a validated model.
    for (int y = 0; y < model.num_states(); ++y)
      cbar = std::max(cbar, model.jump_intensity(x0, y));
  }
  const double zeta = cbar + 1.0;

  StreamRng rng(seed, stream);
  Trajectory traj;
  traj.y0 = y0;
  traj.seed = seed;
  traj.stream = stream;
  if (ctrl) traj.cost = CostRecord{};

  const long K = long(std::ceil(T / h - 1e-12));
  traj.path.t.reserve(K + 1);
  traj.path.x.reserve(K + 1);
  traj.y.reserve(K + 1);

  Eigen::VectorXd x = x0;
  int y = y0;
  double t = 0.0;
  long kgrid = 0;
  traj.path.t.push_back(0.0);
  traj.path.x.push_back(x);
  traj.y.push_back(y);

  Eigen::VectorXd dW(m);
  const double inf = std::numeric_limits<double>::infinity();

  while (t < T) {
    const auto& out = model.out_channels(y);
    const int n_out = int(out.size());
    double cand_rate = n_out > 0 ? zeta * phi_max * double(n_out) / eps : 0.0;
    double t_cand = cand_rate > 0 ? t + rng.exponential(cand_rate) : inf;
    double target = std::min(t_cand, T);

    while (t < target) {
      double t_next_grid = std::min(double(kgrid + 1) * h, T);
      double tn = std::min({target, t + h, t_next_grid});
      double dt = tn - t;
      int slice = ctrl ? ctrl->slice(t) : 0;

      Eigen::VectorXd drift = model.drift(x, y);
      Eigen::MatrixXd a = model.diffusion(x, y);
      if (ctrl) {
        Eigen::VectorXd u = ctrl->u[slice].row(y).transpose();
        drift += a * u;
        traj.cost->drift_cost += 0.5 * u.squaredNorm() * dt;
        for (int k : out) {
          double phi = ctrl->phi[slice][k];
          double len;
          if (!ctrl->cost_len.empty()) {
            len = ctrl->cost_len[slice][k];
          } else {
            auto [i, j] = model.transitions()[k];
            len = model.jump_intensity(x, i) * model.transition_prob(x, i, j);
          }
          traj.cost->jump_cost += len * entropy_cost(phi) * dt;
        }
      }
      for (int k = 0; k < m; ++k) dW[k] = rng.normal();
      x += drift * dt + sqrt_eps * std::sqrt(dt) * (a * dW);
      if (!x.allFinite()) throw std::runtime_error("non-finite slow state during simulation");
      t = tn;
      if (t == t_next_grid) {
        traj.path.t.push_back(t);
        traj.path.x.push_back(x);
        traj.y.push_back(y);
        ++kgrid;
      }
    }

    if (t_cand <= T) {
      // Candidate event: uniform channel among those leaving y, then a mark
      // on [0, zeta]; accept iff the mark falls in the (thinned) acceptance
      // interval evaluated at the Euler state.
      int pick = std::min(n_out - 1, int(rng.uniform() * n_out));
      int chan = out[pick];
      double z = rng.uniform(0.0, zeta);
      auto [i, j] = model.transitions()[chan];
      double rho = model.jump_intensity(x, i) * model.transition_prob(x, i, j);
      double phi = ctrl ? ctrl->phi[ctrl->slice(t)][chan] : 1.0;
      if (phi > phi_max * (1.0 + 1e-12)) {
        throw std::runtime_error("thinning control exceeds declared phi_max at t=" +
                                 std::to_string(t));
      }
      if (z * phi_max <= phi * rho) {
        traj.jumps.push_back({t, i, j});
        y = j;
      }
    }
  }
  return traj;
}

}  // namespace

Trajectory simulate(const Model& model, double eps, const Eigen::VectorXd& x0,
                    int y0, double T, double h, std::uint64_t seed,
                    std::uint64_t stream) {
  return simulate_core(model, eps, nullptr, x0, y0, T, h, seed, stream);
}

Trajectory simulate_controlled(const Model& model, double eps,
                               const FeedbackControls& controls,
                               const Eigen::VectorXd& x0, int y0, double T,
                               double h, std::uint64_t seed, std::uint64_t stream) {
  return simulate_core(model, eps, &controls, x0, y0, T, h, seed, stream);
}

Eigen::VectorXd occupation_measure(const Trajectory& traj, double t) {
  double T = traj.path.horizon();
  if (t < 0 || t > T * (1 + 1e-12))
    throw std::invalid_argument("occupation time outside [0, T]");
  int L = 0;
  for (int s : traj.y) L = std::max(L, s + 1);
  for (const auto& j : traj.jumps) L = std::max({L, j.from + 1, j.to + 1});
  Eigen::VectorXd frac = Eigen::VectorXd::Zero(L);
  double prev = 0.0;
  int y = traj.y0;
  for (const auto& j : traj.jumps) {
    if (j.time >= t) break;
    frac[y] += j.time - prev;
    prev = j.time;
    y = j.to;
  }
  frac[y] += t - prev;
  if (t > 0) frac /= t; else frac[y] = 1.0;
  return frac;
}

std::vector<TrajectorySummary> batch_simulate(
    const Model& model, double eps, const Eigen::VectorXd& x0, int y0, double T,
    double h, int N, std::uint64_t seed, const FeedbackControls* controls,
    const Path* reference, int threads) {
  if (N < 1) throw std::invalid_argument("N must be >= 1");
  std::vector<TrajectorySummary> out(N);
  std::exception_ptr first_error;
  std::mutex err_mutex;
  parallel_for(N, threads, [&](int i) {
    try {
      Trajectory tr = controls
          ? simulate_controlled(model, eps, *controls, x0, y0, T, h, seed, i + 1)
          : simulate(model, eps, x0, y0, T, h, seed, i + 1);
      TrajectorySummary s;
      s.index = i;
      s.terminal = tr.path.x.back();
      s.n_jumps = int(tr.jumps.size());
      if (tr.cost) {
        s.cost_psi = tr.cost->drift_cost;
        s.cost_phi = tr.cost->jump_cost;
      }
      if (reference) {
        double dev = 0;
        for (size_t k = 0; k < tr.path.t.size(); ++k)
          dev = std::max(dev, (tr.path.x[k] - reference->at(tr.path.t[k])).norm());
        s.sup_dev = dev;
      }
      out[i] = std::move(s);
    } catch (...) {
      std::lock_guard<std::mutex> lk(err_mutex);
      if (!first_error) {
        try {
          std::throw_with_nested(std::runtime_error("trajectory " + std::to_string(i) +
                                                    " failed"));
        } catch (...) {
          first_error = std::current_exception();
        }
      }
    }
  });
  if (first_error) std::rethrow_exception(first_error);
  return out;
}

}  // namespace switchdiff
