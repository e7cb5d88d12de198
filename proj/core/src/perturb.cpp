#include "switchdiff/perturb.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

#include "switchdiff/ratefn.hpp"

namespace switchdiff {

namespace {

// One RK4 step of x' = f(x) over [0, dt].
template <class F>
Eigen::VectorXd rk4_step(const F& f, const Eigen::VectorXd& x, double dt) {
  Eigen::VectorXd k1 = f(x);
  Eigen::VectorXd k2 = f(x + 0.5 * dt * k1);
  Eigen::VectorXd k3 = f(x + 0.5 * dt * k2);
  Eigen::VectorXd k4 = f(x + dt * k3);
  return x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

Eigen::VectorXd tabulated_rhs(const Model& model, const Eigen::VectorXd& pi,
                              const Eigen::MatrixXd& u, const Eigen::VectorXd& x) {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(model.dim());
  for (int i = 0; i < model.num_states(); ++i) {
    out += pi[i] * (model.drift(x, i) + model.diffusion(x, i) * u.row(i).transpose());
  }
  return out;
}

RateMatrix rates_to_generator(const Model& model, const std::vector<double>& q) {
  JumpGeometry g;
  g.transitions = model.transitions();
  g.rho.assign(q.size(), 0.0);
  return controlled_generator(g, model.num_states(), q);
}

}  // namespace

std::pair<Path, ControlTables> zero_cost_triple(const Model& model,
                                                const Eigen::VectorXd& x0,
                                                double T, int num_slices) {
  const int L = model.num_states();
  const int m = model.brownian_dim();
  Path xi;
  ControlTables tab;
  Eigen::VectorXd x = x0;
  xi.t.push_back(0.0);
  xi.x.push_back(x);
  for (int k = 0; k < num_slices; ++k) {
    double t0 = T * double(k) / num_slices;
    double t1 = T * double(k + 1) / num_slices;
    Eigen::VectorXd nu = invariant_measure(model, x);
    JumpGeometry g = jump_geometry(model, x);
    tab.t.push_back(t0);
    tab.pi.push_back(nu);
    tab.q.push_back(g.rho);
    tab.u.push_back(Eigen::MatrixXd::Zero(L, m));
    Eigen::MatrixXd u0 = Eigen::MatrixXd::Zero(L, m);
    x = rk4_step([&](const Eigen::VectorXd& z) { return tabulated_rhs(model, nu, u0, z); },
                 x, t1 - t0);
    xi.t.push_back(t1);
    xi.x.push_back(x);
  }
  tab.t.push_back(T);
  return {xi, tab};
}

MembershipReport verify_membership(const Model& model, const Path& xi,
                                   const ControlTables& tables) {
  MembershipReport rep;
  const int K = tables.num_slices();
  if (int(xi.t.size()) != K + 1)
    throw std::invalid_argument("path and tables must share the grid");
  Eigen::VectorXd x = xi.x.front();
  for (int k = 0; k < K; ++k) {
    double dt = tables.t[k + 1] - tables.t[k];
    x = rk4_step([&](const Eigen::VectorXd& z) {
      return tabulated_rhs(model, tables.pi[k], tables.u[k], z);
    }, x, dt);
    rep.dynamics_residual = std::max(rep.dynamics_residual, (x - xi.x[k + 1]).norm());

    RateMatrix Q = rates_to_generator(model, tables.q[k]);
    Eigen::VectorXd resid = Q.q.transpose() * tables.pi[k];
    rep.stationarity_residual =
        std::max(rep.stationarity_residual, resid.lpNorm<Eigen::Infinity>());
  }
  return rep;
}

namespace {

struct Construction {
  Path xi_star;
  ControlTables star;
  std::vector<std::vector<double>> phi_star;
  std::vector<std::vector<double>> rho_star;
  double cost_star = 0;
  double path_dev = 0;
  double phi_min = 0, phi_max = 0;
};

Construction construct(const Model& model, const Path& xi, const ControlTables& in,
                       const std::vector<Eigen::VectorXd>& nu_tab,
                       const std::vector<std::vector<double>>& rho_tab,
                       double delta) {
  const int K = in.num_slices();
  const int L = model.num_states();
  const int nch = model.num_channels();
  Construction c;
  c.star.t = in.t;
  c.xi_star.t = xi.t;
  c.xi_star.x.push_back(xi.x.front());
  c.phi_min = 1e300;
  c.phi_max = -1e300;

  Eigen::VectorXd x = xi.x.front();
  std::vector<std::vector<double>> beta_delta(K);
  for (int k = 0; k < K; ++k) {
    Eigen::VectorXd pis = (1.0 - delta) * in.pi[k] + delta * nu_tab[k];
    Eigen::MatrixXd us = in.u[k];
    for (int i = 0; i < L; ++i) {
      if (pis[i] > 0) us.row(i) *= in.pi[k][i] / pis[i];
    }
    // Perturbed thinning at the input path, then the implied channel rates.
    beta_delta[k].resize(nch);
    for (int ch = 0; ch < nch; ++ch) {
      int i = model.transitions()[ch].first;
      double rho = rho_tab[k][ch];
      double phi_in = in.q[k][ch] / rho;
      double phi_d = pis[i] > 0
          ? (1.0 - delta) * (in.pi[k][i] / pis[i]) * phi_in + delta * nu_tab[k][i] / pis[i]
          : phi_in;
      beta_delta[k][ch] = phi_d * rho;
    }
    c.star.pi.push_back(pis);
    c.star.u.push_back(us);
    double dt = in.t[k + 1] - in.t[k];
    x = rk4_step([&](const Eigen::VectorXd& z) {
      return tabulated_rhs(model, pis, us, z);
    }, x, dt);
    c.xi_star.x.push_back(x);
    c.path_dev = std::max(c.path_dev, (x - xi.x[k + 1]).norm());
  }

  // Re-express the thinning as constant on the acceptance intervals of the
  // perturbed path, preserving the channel rates.
  for (int k = 0; k < K; ++k) {
    JumpGeometry gs = jump_geometry(model, c.xi_star.x[k]);
    c.rho_star.push_back(gs.rho);
    std::vector<double> phi(nch), q(nch);
    double slice_cost = 0;
    double dt = in.t[k + 1] - in.t[k];
    for (int ch = 0; ch < nch; ++ch) {
      q[ch] = beta_delta[k][ch];
      phi[ch] = q[ch] / gs.rho[ch];
      c.phi_min = std::min(c.phi_min, phi[ch]);
      c.phi_max = std::max(c.phi_max, phi[ch]);
      int i = model.transitions()[ch].first;
      slice_cost += c.star.pi[k][i] * gs.rho[ch] * entropy_cost(phi[ch]);
    }
    for (int i = 0; i < L; ++i)
      slice_cost += 0.5 * c.star.pi[k][i] * c.star.u[k].row(i).squaredNorm();
    c.cost_star += slice_cost * dt;
    c.phi_star.push_back(std::move(phi));
    c.star.q.push_back(std::move(q));
  }
  return c;
}

}  // namespace

PerturbResult perturb_triple(const Model& model, const Path& xi,
                             const ControlTables& input, double gamma,
                             const PerturbOptions& opts) {
  if (!(gamma > 0 && gamma < 1))
    throw std::invalid_argument("gamma must lie in (0,1)");
  auto member = verify_membership(model, xi, input);
  if (member.dynamics_residual > opts.membership_tolerance ||
      member.stationarity_residual > opts.membership_tolerance) {
    std::ostringstream os;
    os << "input triple fails membership: dynamics residual "
       << member.dynamics_residual << ", stationarity residual "
       << member.stationarity_residual;
    throw std::runtime_error(os.str());
  }

  const int K = input.num_slices();
  const int L = model.num_states();
  const int nch = model.num_channels();
  const double T = input.t.back() - input.t.front();

  std::vector<Eigen::VectorXd> nu_tab(K);
  std::vector<std::vector<double>> rho_tab(K);
  double nu_floor = 1e300;
  double M0 = 0;
  double cost_input = 0;
  double m0 = 0;
  double rho_min = 1e300;
  for (int k = 0; k < K; ++k) {
    nu_tab[k] = invariant_measure(model, xi.x[k]);
    nu_floor = std::min(nu_floor, nu_tab[k].minCoeff());
    JumpGeometry g = jump_geometry(model, xi.x[k]);
    rho_tab[k] = g.rho;
    double dt = input.t[k + 1] - input.t[k];
    double slice_cost = 0;
    for (int ch = 0; ch < nch; ++ch) {
      int i = model.transitions()[ch].first;
      rho_min = std::min(rho_min, g.rho[ch]);
      slice_cost += input.pi[k][i] * g.rho[ch] *
                    entropy_cost(input.q[k][ch] / g.rho[ch]);
      m0 = std::max(m0, input.pi[k][i] * input.q[k][ch] / g.rho[ch]);
    }
    for (int i = 0; i < L; ++i) {
      slice_cost += 0.5 * input.pi[k][i] * input.u[k].row(i).squaredNorm();
      M0 = std::max(M0, model.drift(xi.x[k], i).norm() +
                            model.diffusion(xi.x[k], i).norm());
    }
    cost_input += slice_cost * dt;
  }

  const ModelBounds& b = opts.bounds;
  double zeta = b.zeta > 0 ? b.zeta : 2.0;
  double r_floor = std::min(b.r_floor > 0 ? b.r_floor : rho_min, rho_min);
  double d_lip = std::max(b.d_lip, 1e-12);
  double kappa2 = std::max(b.kappa2, 1e-12);

  double M = cost_input + 1.0;
  double aM = T + std::sqrt(2.0 * T * M);
  double Kc = 2.0 * M0 * aM * std::exp(d_lip * aM);
  double m1 = m0 + 1.0;
  double K1 = Kc * kappa2 *
              (T * L + (1.0 / r_floor) * (L * zeta * T * (1.0 + std::exp(1.0)) +
                                          std::exp(1.0) * M));

  double delta = std::min({gamma / Kc, gamma / (4.0 * K1),
                           gamma * nu_floor / (8.0 * M)});
  if (opts.force_delta_zero) delta = 0.0;

  PerturbResult out;
  for (int attempt = 0;; ++attempt) {
    Construction c = construct(model, xi, input, nu_tab, rho_tab, delta);
    double m2, m3;
    if (delta > 0) {
      m2 = std::min(delta * nu_floor * r_floor / zeta, 1.0);
      m3 = std::max(m1 * zeta / (delta * r_floor * nu_floor), 1.0);
    } else {
      m2 = c.phi_min;
      m3 = c.phi_max;
    }
    bool ok = c.path_dev < gamma && c.cost_star <= cost_input + gamma &&
              c.phi_min >= m2 - 1e-12 && c.phi_max <= m3 + 1e-12;
    if (ok || opts.force_delta_zero) {
      out.xi_star = std::move(c.xi_star);
      out.star = std::move(c.star);
      out.phi_star = std::move(c.phi_star);
      out.rho_star = std::move(c.rho_star);
      out.delta_star = delta;
      out.m2 = m2;
      out.m3 = m3;
      out.K = Kc;
      out.K1 = K1;
      out.M = M;
      out.M0 = M0;
      out.nu_floor = nu_floor;
      out.r_floor = r_floor;
      out.m0 = m0;
      out.m1 = m1;
      out.cost_input = cost_input;
      out.cost_star = c.cost_star;
      out.path_deviation = c.path_dev;
      return out;
    }
    if (attempt >= opts.max_halvings)
      throw std::runtime_error("no feasible delta found for the perturbation");
    delta *= 0.5;
    if (!(delta > 0)) throw std::runtime_error("delta underflow in perturbation");
  }
}

Eigen::VectorXd stationary_map_rho(const Model& model, const PerturbResult& pr,
                                   int slice, const Eigen::VectorXd& x) {
  const int nch = model.num_channels();
  JumpGeometry gx = jump_geometry(model, x);
  std::vector<double> rates(nch);
  for (int ch = 0; ch < nch; ++ch) {
    double rho_x = gx.rho[ch];
    double rho_s = pr.rho_star[slice][ch];
    // The slice thinning value applies on the acceptance interval of the
    // perturbed path; outside it the thinning is one.
    rates[ch] = pr.phi_star[slice][ch] * std::min(rho_x, rho_s) +
                std::max(rho_x - rho_s, 0.0);
  }
  RateMatrix Q = rates_to_generator(model, rates);
  return stationary(Q);
}

UniquenessReport uniqueness_check(const Model& model, const PerturbResult& pr,
                                  const Eigen::VectorXd& x0, double tolerance) {
  UniquenessReport rep;
  const int K = pr.star.num_slices();
  const double T = pr.star.t.back() - pr.star.t.front();

  auto closed_loop_rhs = [&](int slice, const Eigen::VectorXd& x) {
    Eigen::VectorXd rho_x = stationary_map_rho(model, pr, slice, x);
    Eigen::VectorXd out = Eigen::VectorXd::Zero(model.dim());
    for (int i = 0; i < model.num_states(); ++i) {
      out += rho_x[i] * (model.drift(x, i) +
                         model.diffusion(x, i) * pr.star.u[slice].row(i).transpose());
    }
    return out;
  };

  auto solve = [&](const Eigen::VectorXd& start, bool euler, int substeps) {
    Eigen::VectorXd x = start;
    double dev = 0;
    for (int k = 0; k < K; ++k) {
      double dt = (pr.star.t[k + 1] - pr.star.t[k]) / substeps;
      for (int s = 0; s < substeps; ++s) {
        if (euler) {
          x += dt * closed_loop_rhs(k, x);
        } else {
          x = rk4_step([&](const Eigen::VectorXd& z) { return closed_loop_rhs(k, z); },
                       x, dt);
        }
      }
      dev = std::max(dev, (x - pr.xi_star.x[k + 1]).norm());
    }
    return std::make_pair(x, dev);
  };

  auto [x_rk4, dev_rk4] = solve(x0, false, 1);
  int euler_sub = std::max(1, int(std::ceil(4e5 / double(K))));
  auto [x_euler, dev_euler] = solve(x0, true, euler_sub);
  rep.integrator_disagreement = std::max(dev_rk4, dev_euler);

  // Moved initial condition: terminal gap against a Gronwall-type bound with
  // a sampled Lipschitz constant of the closed-loop right side.
  double ic_shift = 1e-3;
  Eigen::VectorXd x0p = x0;
  x0p[0] += ic_shift;
  auto [x_pert, dev_pert] = solve(x0p, false, 1);
  (void)dev_pert;
  double lambda = 0;
  for (int k = 0; k < K; k += std::max(1, K / 16)) {
    Eigen::VectorXd xs = pr.xi_star.x[k];
    Eigen::VectorXd f0 = closed_loop_rhs(k, xs);
    for (int j = 0; j < model.dim(); ++j) {
      Eigen::VectorXd xp = xs;
      xp[j] += 1e-5;
      lambda = std::max(lambda, (closed_loop_rhs(k, xp) - f0).norm() / 1e-5);
    }
  }
  rep.ic_terminal_gap = (x_pert - x_rk4).norm();
  rep.ic_sensitivity_bound = 1.5 * ic_shift * std::exp(lambda * T);
  rep.passed = rep.integrator_disagreement <= tolerance &&
               rep.ic_terminal_gap <= rep.ic_sensitivity_bound;
  return rep;
}

}  // namespace switchdiff
