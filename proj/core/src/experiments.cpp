#include "switchdiff/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <mutex>
#include <sstream>
#include <stdexcept>

#include "switchdiff/averaging.hpp"
#include "switchdiff/optim.hpp"
#include "switchdiff/parallel.hpp"
#include "switchdiff/rng.hpp"

namespace switchdiff {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

EventSpec EventSpec::ball(Eigen::VectorXd center, double radius) {
  EventSpec e;
  e.kind = Kind::TerminalBall;
  e.center = std::move(center);
  e.radius = radius;
  return e;
}

EventSpec EventSpec::halfspace(Eigen::VectorXd normal, double threshold) {
  EventSpec e;
  e.kind = Kind::TerminalHalfspace;
  e.normal = std::move(normal);
  e.threshold = threshold;
  return e;
}

void EventSpec::validate(int dim) const {
  if (kind == Kind::TerminalBall) {
    if (!(radius > 0)) throw std::invalid_argument("event radius must be positive");
    if (int(center.size()) != dim)
      throw std::invalid_argument("event center dimension mismatch");
  } else {
    if (int(normal.size()) != dim)
      throw std::invalid_argument("event normal dimension mismatch");
    if (normal.norm() == 0) throw std::invalid_argument("event normal must be nonzero");
  }
}

bool EventSpec::contains(const Eigen::VectorXd& x) const {
  if (kind == Kind::TerminalBall) {
    if (std::isinf(radius)) return true;
    return (x - center).norm() <= radius;
  }
  return normal.dot(x) >= threshold;
}

double EventSpec::violation(const Eigen::VectorXd& x) const {
  if (kind == Kind::TerminalBall) {
    if (std::isinf(radius)) return 0.0;
    return std::max(0.0, (x - center).norm() - radius);
  }
  return std::max(0.0, (threshold - normal.dot(x)) / normal.norm());
}

Eigen::VectorXd EventSpec::project(const Eigen::VectorXd& x) const {
  if (contains(x)) return x;
  if (kind == Kind::TerminalBall) {
    Eigen::VectorXd dir = x - center;
    return center + dir * (radius / dir.norm());
  }
  Eigen::VectorXd n = normal / normal.norm();
  return x + (threshold / normal.norm() - n.dot(x)) * n;
}

RareEventRow mc_rare_event(const Model& model, double eps,
                           const Eigen::VectorXd& x0, int y0, double T, double h,
                           const EventSpec& event, int N, std::uint64_t seed,
                           int threads) {
  if (N < 100) throw std::invalid_argument("mc_rare_event requires N >= 100");
  event.validate(model.dim());
  auto summaries = batch_simulate(model, eps, x0, y0, T, h, N, seed, nullptr,
                                  nullptr, threads);
  long hits = 0;
  for (const auto& s : summaries)
    if (event.contains(s.terminal)) ++hits;
  RareEventRow row;
  row.eps = eps;
  row.n = N;
  row.p_hat = double(hits) / N;
  row.stderr_ = std::sqrt(row.p_hat * (1.0 - row.p_hat) / N);
  row.censored = hits == 0;
  row.neg_eps_log_p = row.censored ? 0.0 : -eps * std::log(row.p_hat);
  return row;
}

SweepResult eps_sweep(const Model& model, const Eigen::VectorXd& x0, int y0,
                      double T, double h, const EventSpec& event,
                      const std::vector<double>& eps_list,
                      const std::vector<int>& N_list, std::uint64_t seed,
                      int threads) {
  if (eps_list.empty() || eps_list.size() != N_list.size())
    throw std::invalid_argument("eps_list and N_list must be nonempty and equal length");
  for (size_t i = 1; i < eps_list.size(); ++i)
    if (!(eps_list[i] < eps_list[i - 1]))
      throw std::invalid_argument("eps_list must be strictly decreasing");

  SweepResult out;
  for (size_t i = 0; i < eps_list.size(); ++i) {
    std::uint64_t cell_seed = seed + 1000003ull * (i + 1);
    out.rows.push_back(mc_rare_event(model, eps_list[i], x0, y0, T, h, event,
                                     N_list[i], cell_seed, threads));
  }
  // Fit -log p_hat ~ intercept + slope / eps on the non-censored cells;
  // a single usable cell pins the line through the origin.
  std::vector<double> xs, ys;
  for (const auto& r : out.rows) {
    if (r.censored) continue;
    xs.push_back(1.0 / r.eps);
    ys.push_back(-std::log(r.p_hat));
  }
  out.cells_used = int(xs.size());
  if (xs.size() >= 2) {
    double mx = 0, my = 0;
    for (size_t i = 0; i < xs.size(); ++i) {
      mx += xs[i];
      my += ys[i];
    }
    mx /= xs.size();
    my /= ys.size();
    double sxx = 0, sxy = 0;
    for (size_t i = 0; i < xs.size(); ++i) {
      sxx += (xs[i] - mx) * (xs[i] - mx);
      sxy += (xs[i] - mx) * (ys[i] - my);
    }
    out.slope = sxy / sxx;
    out.slope_valid = true;
  } else if (xs.size() == 1) {
    out.slope = ys[0] / xs[0];
    out.slope_valid = true;
  }
  return out;
}

namespace {

struct TranscriptionProblem {
  const Model* model;
  Eigen::VectorXd x0;
  double T;
  const EventSpec* event;
  const TranscriptionOptions* opts;
  int k;  // interior nodes; variables are nodes 1..k+1 (terminal included)
  std::atomic<long>* evals;
  int slice_threads = 1;

  int dim() const { return (k + 1) * model->dim(); }

  Path to_path(const Eigen::VectorXd& z) const {
    const int d = model->dim();
    Path p;
    p.t.resize(k + 2);
    p.x.resize(k + 2);
    p.t[0] = 0;
    p.x[0] = x0;
    for (int i = 1; i <= k + 1; ++i) {
      p.t[i] = T * double(i) / (k + 1);
      p.x[i] = z.segment((i - 1) * d, d);
    }
    return p;
  }

  // Per-slice midpoint costs, parallel across slices; infinity marks an
  // unattainable velocity.
  std::vector<double> slice_costs(const Path& p) const {
    std::vector<double> cost(k + 1);
    // channel-free models have closed-form slice costs; threads cost more
    // than they save there
    int workers = model->num_channels() > 0 ? slice_threads : 1;
    parallel_for(k + 1, workers, [&](int s) {
      double dt = p.t[s + 1] - p.t[s];
      Eigen::VectorXd mid = 0.5 * (p.x[s] + p.x[s + 1]);
      Eigen::VectorXd slope = (p.x[s + 1] - p.x[s]) / dt;
      LocalRateResult lr = local_rate(*model, mid, slope, opts->local);
      cost[s] = lr.feasible ? lr.value * dt : kInf;
    });
    return cost;
  }

  double objective(const Eigen::VectorXd& z, double penalty) const {
    evals->fetch_add(1, std::memory_order_relaxed);
    Path p = to_path(z);
    double total = 0;
    int infeasible = 0;
    for (double c : slice_costs(p)) {
      if (std::isinf(c)) ++infeasible;
      else total += c;
    }
    if (infeasible > 0) return 1e9 + 1e3 * infeasible;
    double v = event->violation(p.x[k + 1]);
    return total + penalty * v * v;
  }

  double rate_only(const Eigen::VectorXd& z) const {
    double total = 0;
    for (double c : slice_costs(to_path(z))) {
      if (std::isinf(c)) return kInf;
      total += c;
    }
    return total;
  }
};

Eigen::VectorXd flatten_line(const TranscriptionProblem& prob,
                             const Eigen::VectorXd& target) {
  const int d = prob.model->dim();
  Eigen::VectorXd z(prob.dim());
  for (int i = 1; i <= prob.k + 1; ++i) {
    double s = double(i) / (prob.k + 1);
    z.segment((i - 1) * d, d) = (1.0 - s) * prob.x0 + s * target;
  }
  return z;
}

Eigen::VectorXd flatten_path(const TranscriptionProblem& prob, const Path& p,
                             const Eigen::VectorXd& terminal) {
  const int d = prob.model->dim();
  Eigen::VectorXd z(prob.dim());
  for (int i = 1; i <= prob.k; ++i) {
    double t = prob.T * double(i) / (prob.k + 1);
    z.segment((i - 1) * d, d) = p.at(t);
  }
  z.segment(prob.k * d, d) = terminal;
  return z;
}

std::pair<Eigen::VectorXd, double> solve_one_start(
    const TranscriptionProblem& prob, const Eigen::VectorXd& start) {
  const auto& o = *prob.opts;
  NelderMeadOptions nm;
  nm.max_evals = o.nm_max_evals;
  nm.init_step = 0.05;
  auto coarse = nelder_mead(
      [&](const Eigen::VectorXd& z) { return prob.objective(z, o.penalty); },
      start, nm);
  MinimizeOptions mo;
  mo.max_iter = o.polish_iters;
  mo.fd_step = 1e-5;
  auto fine = minimize_bfgs(
      [&](const Eigen::VectorXd& z) { return prob.objective(z, 10.0 * o.penalty); },
      coarse.x, mo);
  if (fine.value <= prob.objective(coarse.x, 10.0 * o.penalty))
    return {fine.x, fine.value};
  return {coarse.x, prob.objective(coarse.x, 10.0 * o.penalty)};
}

TranscriptionResult solve_transcription(const Model& model,
                                        const Eigen::VectorXd& x0, double T,
                                        const EventSpec& event,
                                        const TranscriptionOptions& opts,
                                        int k_nodes, const Path* warm,
                                        int threads,
                                        std::atomic<long>& evals) {
  TranscriptionProblem prob{&model, x0, T, &event, &opts, k_nodes, &evals};

  std::vector<Eigen::VectorXd> starts;
  if (warm) {
    starts.push_back(flatten_path(prob, *warm, warm->x.back()));
  } else {
    starts.push_back(flatten_line(prob, event.project(x0)));
    try {
      Path avg = solve_averaged_ode(model, x0, T, T / 200.0);
      starts.push_back(flatten_path(prob, avg, event.project(avg.x.back())));
    } catch (const std::exception&) {
      // blown-up averaged flow: skip this start
    }
  }
  StreamRng rng(opts.seed, 17);
  double scale = std::max(1.0, x0.norm());
  while (int(starts.size()) < opts.multistarts) {
    Eigen::VectorXd z = starts[0];
    for (int i = 0; i < z.size(); ++i)
      z[i] += opts.jitter * scale * rng.normal();
    starts.push_back(std::move(z));
  }

  // Two-level parallelism: across starts, and across slices within each
  // start's objective evaluations.
  prob.slice_threads = std::max(1, threads / int(starts.size()));
  std::vector<std::pair<Eigen::VectorXd, double>> results(starts.size());
  parallel_for(int(starts.size()), threads, [&](int i) {
    results[i] = solve_one_start(prob, starts[i]);
  });
  prob.slice_threads = 1;

  int best = 0;
  for (size_t i = 1; i < results.size(); ++i)
    if (results[i].second < results[best].second) best = int(i);

  TranscriptionResult out;
  Eigen::VectorXd zbest = results[best].first;
  // Snap the terminal node onto the event so the reported value carries no
  // penalty residue.
  const int d = model.dim();
  Eigen::VectorXd term = zbest.segment(k_nodes * d, d);
  zbest.segment(k_nodes * d, d) = event.project(term);
  out.path = prob.to_path(zbest);
  out.I_star = prob.rate_only(zbest);
  if (!std::isfinite(out.I_star)) {
    // projection broke feasibility; fall back to the penalized optimum
    zbest = results[best].first;
    out.path = prob.to_path(zbest);
    out.I_star = prob.rate_only(zbest);
  }
  out.terminal_violation = event.violation(out.path.x.back());
  out.optimizer_ok = std::isfinite(out.I_star) &&
                     out.terminal_violation <= 1e-4 * std::max(1.0, scale);
  return out;
}

}  // namespace

TranscriptionResult minimize_rate(const Model& model, const Eigen::VectorXd& x0,
                                  double T, const EventSpec& event,
                                  const TranscriptionOptions& opts, int threads) {
  event.validate(model.dim());
  std::atomic<long> evals{0};
  TranscriptionResult res = solve_transcription(model, x0, T, event, opts,
                                                opts.k_nodes, nullptr, threads,
                                                evals);
  if (opts.refine_check) {
    TranscriptionOptions ro = opts;
    ro.multistarts = 1;
    ro.nm_max_evals = opts.nm_max_evals / 2;
    ro.polish_iters = std::min(opts.polish_iters, 25);
    TranscriptionResult fine = solve_transcription(
        model, x0, T, event, ro, 2 * opts.k_nodes + 1, &res.path, threads, evals);
    res.refined_I = fine.I_star;
    if (fine.optimizer_ok && fine.I_star < res.I_star) {
      // keep the coarse-grid certificate but report the sharper value
      res.refined_I = fine.I_star;
    }
  } else {
    res.refined_I = res.I_star;
  }
  res.evaluations = int(evals.load());
  return res;
}

CompareReport ldp_compare(const Model& model, const Eigen::VectorXd& x0, int y0,
                          double T, double h, const EventSpec& event,
                          const std::vector<double>& eps_list,
                          const std::vector<int>& N_list, std::uint64_t seed,
                          const TranscriptionOptions& opts, int threads) {
  CompareReport rep;
  rep.variational = minimize_rate(model, x0, T, event, opts, threads);
  rep.sweep = eps_sweep(model, x0, y0, T, h, event, eps_list, N_list, seed,
                        threads);
  double denom = std::max(std::abs(rep.variational.I_star), 1e-12);
  rep.relative_gap = rep.sweep.slope_valid
      ? std::abs(rep.sweep.slope - rep.variational.I_star) / denom
      : kInf;
  std::ostringstream note;
  note << "slope fit uses " << rep.sweep.cells_used << "/" << rep.sweep.rows.size()
       << " cells";
  int censored = 0;
  for (const auto& r : rep.sweep.rows) censored += r.censored ? 1 : 0;
  if (censored > 0)
    note << "; " << censored << " censored (zero hits; statistical tolerance "
         << "limited by the affordable sample sizes)";
  rep.note = note.str();
  return rep;
}

FeedbackControls feedback_from_perturbation(const PerturbResult& pr) {
  FeedbackControls c;
  c.t = pr.star.t;
  c.u = pr.star.u;
  c.phi = pr.phi_star;
  c.cost_len = pr.rho_star;
  c.phi_max = 1.0;
  for (const auto& slice : pr.phi_star)
    for (double v : slice) c.phi_max = std::max(c.phi_max, v);
  return c;
}

std::vector<TiltRow> tilted_convergence(const Model& model,
                                        const PerturbResult& pr, int y0,
                                        double h,
                                        const std::vector<double>& eps_list,
                                        int N, std::uint64_t seed, int threads) {
  FeedbackControls controls = feedback_from_perturbation(pr);
  const Eigen::VectorXd x0 = pr.xi_star.x.front();
  const double T = pr.star.t.back() - pr.star.t.front();
  std::vector<TiltRow> out;
  for (size_t i = 0; i < eps_list.size(); ++i) {
    std::uint64_t cell_seed = seed + 1000003ull * (i + 1);
    auto summaries = batch_simulate(model, eps_list[i], x0, y0, T, h, N,
                                    cell_seed, &controls, &pr.xi_star, threads);
    TiltRow row;
    row.eps = eps_list[i];
    row.n = N;
    row.det_cost = pr.cost_star;
    double sum_dev = 0, sum_c = 0, sum_c2 = 0;
    for (const auto& s : summaries) {
      sum_dev += s.sup_dev;
      double c = s.cost_psi + s.cost_phi;
      sum_c += c;
      sum_c2 += c * c;
    }
    row.mean_sup_dev = sum_dev / N;
    row.mean_cost = sum_c / N;
    double var = std::max(0.0, sum_c2 / N - row.mean_cost * row.mean_cost);
    row.cost_stderr = std::sqrt(var / N);
    out.push_back(row);
  }
  return out;
}

}  // namespace switchdiff
