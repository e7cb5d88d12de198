#include "switchdiff/averaging.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "switchdiff/fastchain.hpp"
#include "switchdiff/simulator.hpp"

namespace switchdiff {

Eigen::VectorXd Path::at(double s) const {
  if (t.empty()) throw std::runtime_error("empty path");
  if (s <= t.front()) return x.front();
  if (s >= t.back()) return x.back();
  auto it = std::upper_bound(t.begin(), t.end(), s);
  size_t k = size_t(it - t.begin()) - 1;
  double w = (s - t[k]) / (t[k + 1] - t[k]);
  return (1.0 - w) * x[k] + w * x[k + 1];
}

Eigen::VectorXd averaged_drift(const Model& model, const Eigen::VectorXd& x) {
  Eigen::VectorXd nu = invariant_measure(model, x);
  Eigen::VectorXd out = Eigen::VectorXd::Zero(model.dim());
  for (int y = 0; y < model.num_states(); ++y) out += nu[y] * model.drift(x, y);
  return out;
}

Path solve_averaged_ode(const Model& model, const Eigen::VectorXd& x0, double T,
                        double h, double blowup_bound) {
  if (h <= 0 || T <= 0) throw std::invalid_argument("T and h must be positive");
  auto f = [&](const Eigen::VectorXd& x) { return averaged_drift(model, x); };
  Path p;
  long K = long(std::ceil(T / h - 1e-12));
  p.t.reserve(K + 1);
  p.x.reserve(K + 1);
  Eigen::VectorXd x = x0;
  p.t.push_back(0.0);
  p.x.push_back(x);
  for (long k = 0; k < K; ++k) {
    double t0 = std::min(double(k) * h, T);
    double t1 = std::min(double(k + 1) * h, T);
    double dt = t1 - t0;
    Eigen::VectorXd k1 = f(x);
    Eigen::VectorXd k2 = f(x + 0.5 * dt * k1);
    Eigen::VectorXd k3 = f(x + 0.5 * dt * k2);
    Eigen::VectorXd k4 = f(x + dt * k3);
    x += (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    if (x.norm() > blowup_bound)
      throw std::runtime_error("averaged ODE solution exceeded blow-up bound");
    p.t.push_back(t1);
    p.x.push_back(x);
  }
  return p;
}

std::vector<LlnRow> lln_diagnostic(const Model& model, const Eigen::VectorXd& x0,
                                   int y0, const std::vector<double>& eps_list,
                                   int N, std::uint64_t seed, double T, double h,
                                   int threads) {
  if (N < 2) throw std::invalid_argument("lln_diagnostic requires N >= 2");
  Path ref = solve_averaged_ode(model, x0, T, h);
  std::vector<LlnRow> rows;
  for (double eps : eps_list) {
    auto summaries =
        batch_simulate(model, eps, x0, y0, T, h, N, seed, nullptr, &ref, threads);
    std::vector<double> dev(N);
    for (int i = 0; i < N; ++i) dev[i] = summaries[i].sup_dev;
    double mean = 0;
    for (double d : dev) mean += d;
    mean /= N;
    double var = 0;
    for (double d : dev) var += (d - mean) * (d - mean);
    var /= (N - 1);
    std::vector<double> sorted = dev;
    std::sort(sorted.begin(), sorted.end());
    auto quant = [&](double q) {
      double pos = q * (N - 1);
      size_t lo = size_t(pos);
      size_t hi = std::min(lo + 1, size_t(N - 1));
      double w = pos - double(lo);
      return (1 - w) * sorted[lo] + w * sorted[hi];
    };
    rows.push_back({eps, N, mean, quant(0.5), quant(0.9), std::sqrt(var / N)});
  }
  return rows;
}

}  // namespace switchdiff
