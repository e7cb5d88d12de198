#ifndef SWITCHDIFF_AVERAGING_HPP
#define SWITCHDIFF_AVERAGING_HPP

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "switchdiff/model.hpp"

namespace switchdiff {

/// Piecewise-linear path on a strictly increasing time grid.
struct Path {
  std::vector<double> t;
  std::vector<Eigen::VectorXd> x;

  double horizon() const { return t.empty() ? 0.0 : t.back(); }
  /// Value at time s by linear interpolation.
  Eigen::VectorXd at(double s) const;
};

/// Drift averaged against the fast chain's stationary measure at x.
Eigen::VectorXd averaged_drift(const Model& model, const Eigen::VectorXd& x);

/// RK4 solve of the averaged ODE xi' = bhat(xi) with fixed step h.
Path solve_averaged_ode(const Model& model, const Eigen::VectorXd& x0, double T,
                        double h, double blowup_bound = 1e8);

struct LlnRow {
  double eps;
  int n;
  double mean_sup_dev;
  double q50;
  double q90;
  double stderr_;
};

/// Monte Carlo check of the averaging principle: distribution of the grid
/// sup-deviation between the prelimit slow path and the averaged ODE path.
std::vector<LlnRow> lln_diagnostic(const Model& model, const Eigen::VectorXd& x0,
                                   int y0, const std::vector<double>& eps_list,
                                   int N, std::uint64_t seed, double T, double h,
                                   int threads = 1);

}  // namespace switchdiff

#endif
