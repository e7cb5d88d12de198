#include "switchdiff/ratefn.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "switchdiff/optim.hpp"
#include "switchdiff/parallel.hpp"
#include "switchdiff/rng.hpp"

namespace switchdiff {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kBigPenalty = 1e30;

struct SliceData {
  JumpGeometry geometry;
  std::vector<Eigen::VectorXd> b;  // per state
  std::vector<Eigen::MatrixXd> a;  // per state
  int L;
  int d;
};

SliceData slice_data(const Model& model, const Eigen::VectorXd& x) {
  SliceData s;
  s.geometry = jump_geometry(model, x);
  s.L = model.num_states();
  s.d = model.dim();
  s.b.reserve(s.L);
  s.a.reserve(s.L);
  for (int y = 0; y < s.L; ++y) {
    s.b.push_back(model.drift(x, y));
    s.a.push_back(model.diffusion(x, y));
  }
  return s;
}

Eigen::VectorXd stationary_of(const SliceData& s, const std::vector<double>& q) {
  RateMatrix Q = controlled_generator(s.geometry, s.L, q);
  Eigen::VectorXd pi = stationary(Q);
  for (int i = 0; i < pi.size(); ++i) pi[i] = std::max(pi[i], 0.0);
  pi /= pi.sum();
  return pi;
}

}  // namespace

InnerQuadraticResult inner_quadratic(const Model& model, const Eigen::VectorXd& x,
                                     const Eigen::VectorXd& pi,
                                     const Eigen::VectorXd& beta,
                                     double rank_tol_rel, double feas_tol) {
  const int L = model.num_states();
  const int d = model.dim();
  Eigen::MatrixXd G = Eigen::MatrixXd::Zero(d, d);
  Eigen::VectorXd r = beta;
  std::vector<Eigen::MatrixXd> a(L);
  for (int i = 0; i < L; ++i) {
    a[i] = model.diffusion(x, i);
    G += pi[i] * a[i] * a[i].transpose();
    r -= pi[i] * model.drift(x, i);
  }

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(G);
  double lmax = es.eigenvalues().cwiseAbs().maxCoeff();
  double tol = rank_tol_rel * std::max(lmax, 1e-300);
  Eigen::VectorXd inv_ev = es.eigenvalues();
  for (int k = 0; k < d; ++k) inv_ev[k] = es.eigenvalues()[k] > tol ? 1.0 / es.eigenvalues()[k] : 0.0;
  Eigen::MatrixXd Gpinv =
      es.eigenvectors() * inv_ev.asDiagonal() * es.eigenvectors().transpose();

  InnerQuadraticResult res;
  Eigen::VectorXd lambda = Gpinv * r;
  res.range_residual = (r - G * lambda).norm();
  res.feasible = res.range_residual <= feas_tol * (1.0 + r.norm());
  res.value = 0.5 * r.dot(lambda);
  res.u.reserve(L);
  for (int i = 0; i < L; ++i) res.u.push_back(a[i].transpose() * lambda);
  return res;
}

double jump_cost(const JumpGeometry& geometry, const Eigen::VectorXd& pi,
                 std::span<const double> q) {
  double cost = 0;
  for (size_t k = 0; k < q.size(); ++k) {
    double rho = geometry.rho[k];
    int i = geometry.transitions[k].first;
    if (rho <= 0) continue;
    cost += pi[i] * rho * entropy_cost(q[k] / rho);
  }
  return cost;
}

namespace {

// Regularized objective used during the continuation: jump cost plus the
// quadratic cost with Gram matrix G + tau I (always invertible).
double regularized_objective(const Model& model, const SliceData& s,
                             const Eigen::VectorXd& beta,
                             const Eigen::VectorXd& theta, double tau) {
  std::vector<double> q(theta.size());
  for (int k = 0; k < theta.size(); ++k) {
    if (std::abs(theta[k]) > 40) return kBigPenalty;
    q[k] = s.geometry.rho[k] * std::exp(theta[k]);
  }
  Eigen::VectorXd pi;
  try {
    pi = stationary_of(s, q);
  } catch (const ReducibleError&) {
    return kBigPenalty;
  }
  Eigen::MatrixXd G = Eigen::MatrixXd::Zero(s.d, s.d);
  Eigen::VectorXd r = beta;
  for (int i = 0; i < s.L; ++i) {
    G += pi[i] * s.a[i] * s.a[i].transpose();
    r -= pi[i] * s.b[i];
  }
  G.diagonal().array() += tau;
  Eigen::VectorXd lambda = G.ldlt().solve(r);
  return jump_cost(s.geometry, pi, q) + 0.5 * r.dot(lambda);
}

struct StrictEval {
  double value = kInf;
  bool feasible = false;
  ControlTriple triple;
};

StrictEval strict_evaluate(const Model& model, const Eigen::VectorXd& x,
                           const SliceData& s, const Eigen::VectorXd& beta,
                           const Eigen::VectorXd& theta,
                           const LocalRateOptions& opts) {
  StrictEval out;
  std::vector<double> q(theta.size());
  for (int k = 0; k < theta.size(); ++k)
    q[k] = s.geometry.rho[k] * std::exp(theta[k]);
  Eigen::VectorXd pi;
  try {
    pi = stationary_of(s, q);
  } catch (const ReducibleError&) {
    return out;
  }
  auto inner = inner_quadratic(model, x, pi, beta, opts.rank_tol_rel, opts.feas_tol);
  if (!inner.feasible) return out;
  out.feasible = true;
  out.value = inner.value + jump_cost(s.geometry, pi, q);
  out.triple = ControlTriple{pi, q, inner.u};
  return out;
}

}  // namespace

LocalRateResult local_rate(const Model& model, const Eigen::VectorXd& x,
                           const Eigen::VectorXd& beta,
                           const LocalRateOptions& opts) {
  LocalRateResult res;
  SliceData s = slice_data(model, x);
  const int nch = int(s.geometry.transitions.size());

  if (nch == 0) {
    // Frozen fast component: the inner problem is the whole problem.
    Eigen::VectorXd pi = Eigen::VectorXd::Ones(s.L) / double(s.L);
    auto inner = inner_quadratic(model, x, pi, beta, opts.rank_tol_rel, opts.feas_tol);
    res.feasible = inner.feasible;
    res.value = inner.feasible ? inner.value : kInf;
    if (inner.feasible) res.argmin = ControlTriple{pi, {}, inner.u};
    return res;
  }

  StreamRng rng(opts.seed, 1);
  std::vector<Eigen::VectorXd> starts;
  starts.push_back(Eigen::VectorXd::Zero(nch));  // identity control anchor
  for (int sidx = 1; sidx < std::max(1, opts.multistarts); ++sidx) {
    Eigen::VectorXd th(nch);
    for (int k = 0; k < nch; ++k)
      th[k] = rng.uniform(-opts.theta_range, opts.theta_range);
    starts.push_back(th);
  }

  StrictEval best;
  Eigen::VectorXd best_theta;
  for (const auto& start : starts) {
    ++res.restarts;
    Eigen::VectorXd theta = start;
    MinimizeResult mr;
    for (double tau : opts.reg_schedule) {
      auto f = [&](const Eigen::VectorXd& th) {
        return regularized_objective(model, s, beta, th, tau);
      };
      MinimizeOptions mo;
      mo.max_iter = opts.max_iter;
      mo.fd_step = opts.fd_step;
      mr = minimize_bfgs(f, theta, mo);
      theta = mr.x;
      res.iterations += mr.iterations;
    }
    auto ev = strict_evaluate(model, x, s, beta, theta, opts);
    if (ev.feasible && ev.value < best.value) {
      best = ev;
      best_theta = theta;
      res.grad_norm = mr.grad_norm;
      res.converged = mr.converged;
    }
  }

  if (!best.feasible) {
    res.feasible = false;
    res.value = kInf;
    return res;
  }
  res.feasible = true;
  res.value = best.value;
  res.argmin = best.triple;
  return res;
}

PathRateResult path_rate(const Model& model, const Path& path,
                         const LocalRateOptions& opts, int threads) {
  PathRateResult out;
  const int K = int(path.t.size()) - 1;
  if (K < 1) throw std::invalid_argument("path needs at least one interval");
  out.slices.resize(K);
  parallel_for(K, threads, [&](int k) {
    double dt = path.t[k + 1] - path.t[k];
    Eigen::VectorXd mid = 0.5 * (path.x[k] + path.x[k + 1]);
    Eigen::VectorXd slope = (path.x[k + 1] - path.x[k]) / dt;
    SliceRecord rec;
    rec.t_mid = 0.5 * (path.t[k] + path.t[k + 1]);
    rec.slope = slope;
    rec.local = local_rate(model, mid, slope, opts);
    out.slices[k] = std::move(rec);
  });
  double acc = 0;
  for (int k = 0; k < K; ++k) {
    double dt = path.t[k + 1] - path.t[k];
    if (!out.slices[k].local.feasible) {
      out.finite = false;
      if (out.infeasible_slice < 0) out.infeasible_slice = k;
    } else {
      acc += out.slices[k].local.value * dt;
    }
    out.slices[k].cumulative = acc;
  }
  out.value = out.finite ? acc : kInf;
  return out;
}

std::pair<double, double> local_rate_bruteforce(const Model& model,
                                                const Eigen::VectorXd& x,
                                                const Eigen::VectorXd& beta,
                                                const BruteForceGrid& grid) {
  SliceData s = slice_data(model, x);
  const int nch = int(s.geometry.transitions.size());
  LocalRateOptions opts;
  const int n = std::max(2, grid.points_per_dim);
  const double step = (grid.theta_hi - grid.theta_lo) / double(n - 1);

  if (nch == 0) {
    auto ev = strict_evaluate(model, x, s, beta, Eigen::VectorXd(), opts);
    return {ev.feasible ? ev.value : kInf, 0.0};
  }

  double best = kInf;
  std::vector<int> idx(nch, 0);
  Eigen::VectorXd theta(nch);
  while (true) {
    for (int k = 0; k < nch; ++k) theta[k] = grid.theta_lo + idx[k] * step;
    auto ev = strict_evaluate(model, x, s, beta, theta, opts);
    if (ev.feasible) best = std::min(best, ev.value);
    int k = 0;
    while (k < nch && ++idx[k] == n) {
      idx[k] = 0;
      ++k;
    }
    if (k == nch) break;
  }
  return {best, step};
}

CapRateResult cap_rate_control(const JumpGeometry& geometry,
                               const Eigen::VectorXd& pi,
                               std::span<const double> q) {
  const size_t nch = q.size();
  const double zeta = geometry.zeta;
  double v = 1.0;
  for (size_t k = 0; k < nch; ++k) v += pi[geometry.transitions[k].first] * q[k];

  // Cost of the alpha-scaled control, including the part of the mark space
  // outside the acceptance interval where the scaled control is alpha/v.
  auto cost_at = [&](double alpha) {
    double c = 0;
    for (size_t k = 0; k < nch; ++k) {
      double rho = geometry.rho[k];
      double gap = zeta - rho;
      double pii = pi[geometry.transitions[k].first];
      double rbar = q[k] / v;
      c += pii * (entropy_cost(alpha * rbar / rho) * rho +
                  entropy_cost(alpha / v) * gap);
    }
    return c;
  };

  // First-order condition for the scaling factor, in closed form.
  double num = 0, den = 0;
  for (size_t k = 0; k < nch; ++k) {
    double rho = geometry.rho[k];
    double gap = zeta - rho;
    double pii = pi[geometry.transitions[k].first];
    double rbar = q[k] / v;
    num += pii * (rbar * std::log(rbar / rho) + (gap / v) * std::log(1.0 / v));
    den += pii * (rbar + gap / v);
  }
  double alpha = std::exp(-num / den);

  double input_cost = 0;  // cost of the input control (1 off the intervals)
  for (size_t k = 0; k < nch; ++k) {
    double rho = geometry.rho[k];
    input_cost += pi[geometry.transitions[k].first] * rho * entropy_cost(q[k] / rho);
  }

  CapRateResult res;
  double c_alpha = cost_at(alpha);
  if (c_alpha <= input_cost) {
    res.alpha = alpha;
    res.cost = c_alpha;
    res.q.resize(nch);
    for (size_t k = 0; k < nch; ++k) res.q[k] = alpha * q[k] / v;
  } else {
    // alpha = v reproduces the input exactly.
    res.alpha = v;
    res.cost = input_cost;
    res.q.assign(q.begin(), q.end());
  }
  return res;
}

}  // namespace switchdiff
