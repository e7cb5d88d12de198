#ifndef SWITCHDIFF_OPTIM_HPP
#define SWITCHDIFF_OPTIM_HPP

#include <Eigen/Dense>
#include <functional>

namespace switchdiff {

using ObjectiveFn = std::function<double(const Eigen::VectorXd&)>;

struct MinimizeOptions {
  int max_iter = 200;
  double grad_tol = 1e-9;
  double step_tol = 1e-12;
  double fd_step = 1e-6;  // relative central-difference step
};

struct MinimizeResult {
  Eigen::VectorXd x;
  double value = 0;
  int iterations = 0;
  double grad_norm = 0;
  bool converged = false;
};

/// Central finite-difference gradient.
Eigen::VectorXd fd_gradient(const ObjectiveFn& f, const Eigen::VectorXd& x,
                            double rel_step = 1e-6);

/// BFGS with backtracking line search and finite-difference gradients.
MinimizeResult minimize_bfgs(const ObjectiveFn& f, const Eigen::VectorXd& x0,
                             const MinimizeOptions& opts = {});

struct NelderMeadOptions {
  int max_evals = 2000;
  double init_step = 0.2;    // initial simplex edge, scaled per coordinate
  double f_tol = 1e-10;
  double x_tol = 1e-10;
};

/// Derivative-free simplex search; tolerates infinite objective values (they
/// are treated as worst and contracted away from).
MinimizeResult nelder_mead(const ObjectiveFn& f, const Eigen::VectorXd& x0,
                           const NelderMeadOptions& opts = {});

/// Golden-section search for a scalar unimodal minimum on [a, b].
double golden_section(const std::function<double(double)>& f, double a, double b,
                      double tol = 1e-10);

}  // namespace switchdiff

#endif
