#ifndef SWITCHDIFF_RATEFN_HPP
#define SWITCHDIFF_RATEFN_HPP

#include <Eigen/Dense>
#include <cmath>
#include <optional>
#include <vector>

#include "switchdiff/averaging.hpp"
#include "switchdiff/fastchain.hpp"
#include "switchdiff/model.hpp"

namespace switchdiff {

/// Relative-entropy cost density v log v - v + 1, continuously extended so
/// that entropy_cost(0) = 1.
inline double entropy_cost(double v) {
  if (v < 0) throw std::invalid_argument("entropy_cost requires v >= 0");
  if (v == 0.0) return 1.0;
  return v * std::log(v) - v + 1.0;
}

/// Optimization variables of the local rate problem for one time slice.
struct ControlTriple {
  Eigen::VectorXd pi;                 // probability vector over states
  std::vector<double> q;              // channel rates on the transition set
  std::vector<Eigen::VectorXd> u;     // per-state drift controls
};

struct InnerQuadraticResult {
  double value = 0;                   // (1/2) r^T G^+ r when feasible
  bool feasible = false;
  std::vector<Eigen::VectorXd> u;     // per-state minimizers a_i^T G^+ r
  double range_residual = 0;          // || (I - G G^+) r ||
};

/// Minimum of sum_i pi_i ||u_i||^2 / 2 over controls matching the velocity
/// beta through the state equation; closed-form via the Gram pseudo-inverse.
/// Degenerate diffusion is first-class: beta outside the attainable affine
/// subspace is reported infeasible, not thrown.
InnerQuadraticResult inner_quadratic(const Model& model, const Eigen::VectorXd& x,
                                     const Eigen::VectorXd& pi,
                                     const Eigen::VectorXd& beta,
                                     double rank_tol_rel = 1e-10,
                                     double feas_tol = 1e-8);

/// Entropy cost of running the channels at rates q instead of rho:
/// sum over channels of pi_i rho_ij ell(q_ij / rho_ij).
double jump_cost(const JumpGeometry& geometry, const Eigen::VectorXd& pi,
                 std::span<const double> q);

struct LocalRateOptions {
  int multistarts = 8;
  int max_iter = 200;
  double theta_range = 3.0;          // multistart perturbation box
  std::uint64_t seed = 0x5eed;
  std::vector<double> reg_schedule = {1e-2, 1e-4, 1e-6, 1e-8, 1e-10};
  double rank_tol_rel = 1e-10;
  double feas_tol = 1e-6;            // accepted residual outside range(G)
  double fd_step = 1e-6;
};

struct LocalRateResult {
  double value = 0;                  // +inf iff infeasible
  bool feasible = false;
  std::optional<ControlTriple> argmin;
  int iterations = 0;
  int restarts = 0;
  double grad_norm = 0;
  bool converged = true;
};

/// Local rate L(x, beta): minimize inner quadratic cost plus jump entropy
/// cost over channel rates q = rho * exp(theta), with the slice distribution
/// pi eliminated as the unique stationary vector of the controlled
/// generator.  Multistart BFGS on theta with a regularization continuation
/// for degenerate diffusions.
LocalRateResult local_rate(const Model& model, const Eigen::VectorXd& x,
                           const Eigen::VectorXd& beta,
                           const LocalRateOptions& opts = {});

struct SliceRecord {
  double t_mid;
  Eigen::VectorXd slope;
  LocalRateResult local;
  double cumulative;
};

struct PathRateResult {
  double value = 0;                  // +inf if any slice is infeasible
  bool finite = true;
  int infeasible_slice = -1;
  std::vector<SliceRecord> slices;
};

/// Midpoint-rule quadrature of the local rate along a piecewise-linear path.
PathRateResult path_rate(const Model& model, const Path& path,
                         const LocalRateOptions& opts = {}, int threads = 1);

struct BruteForceGrid {
  double theta_lo = -3.0, theta_hi = 3.0;
  int points_per_dim = 9;
};

/// Exhaustive theta-grid evaluation of the local rate objective; the best
/// grid value is a valid upper bound on L.  Returns (best value, grid step).
std::pair<double, double> local_rate_bruteforce(const Model& model,
                                                const Eigen::VectorXd& x,
                                                const Eigen::VectorXd& beta,
                                                const BruteForceGrid& grid);

struct CapRateResult {
  double alpha = 1;
  std::vector<double> q;             // rescaled channel rates
  double cost = 0;                   // entropy cost including off-interval part
};

/// Uniform scaling of the controlled jump rates by the closed-form optimal
/// factor; never increases the jump cost and bounds pi_i * phi_ij uniformly.
CapRateResult cap_rate_control(const JumpGeometry& geometry,
                               const Eigen::VectorXd& pi,
                               std::span<const double> q);

}  // namespace switchdiff

#endif
