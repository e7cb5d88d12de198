#ifndef SWITCHDIFF_PERTURB_HPP
#define SWITCHDIFF_PERTURB_HPP

#include <Eigen/Dense>
#include <vector>

#include "switchdiff/averaging.hpp"
#include "switchdiff/fastchain.hpp"
#include "switchdiff/model.hpp"

namespace switchdiff {

/// Time-tabulated control triple, piecewise constant on the path grid: slice
/// k applies on [t[k], t[k+1]).  Channel ordering follows Model::transitions.
struct ControlTables {
  std::vector<double> t;                   // K+1 nodes
  std::vector<Eigen::MatrixXd> u;          // K slices, L x m (row i = u_i)
  std::vector<std::vector<double>> q;      // K slices, channel rates
  std::vector<Eigen::VectorXd> pi;         // K slices, state distribution

  int num_slices() const { return int(t.size()) - 1; }
};

/// A control triple with zero running cost along the tabulated dynamics:
/// pi = nu(xi), q = rho(xi), u = 0, with xi integrated slice by slice so the
/// triple satisfies the tabulated state equation exactly.
std::pair<Path, ControlTables> zero_cost_triple(const Model& model,
                                                const Eigen::VectorXd& x0,
                                                double T, int num_slices);

struct PerturbResult {
  Path xi_star;
  ControlTables star;                       // (u*, q*, pi*) tables
  std::vector<std::vector<double>> phi_star;  // per slice per channel, constant
                                              // on the acceptance interval
  std::vector<std::vector<double>> rho_star;  // acceptance lengths at xi_star
  double delta_star = 0;
  double m2 = 0, m3 = 0;
  double K = 0, K1 = 0, M = 0, M0 = 0;
  double nu_floor = 0, r_floor = 0, m0 = 0, m1 = 0;
  double cost_input = 0, cost_star = 0;
  double path_deviation = 0;               // sup_k ||xi - xi*||
};

struct PerturbOptions {
  double membership_tolerance = 1e-6;  // loose gate on the input triple
  int max_halvings = 60;
  ModelBounds bounds;                  // estimated constants (from validate_model)
  bool force_delta_zero = false;       // debug knob: identity construction
};

/// Control-perturbation construction: mixes pi toward the frozen stationary
/// measure, rescales u to preserve u_i pi_i, re-integrates the trajectory,
/// and re-expresses the thinning so the perturbed triple satisfies both the
/// state equation and the stationarity constraint with thinning values
/// bounded in [m2, m3], at a cost increase of at most gamma.
PerturbResult perturb_triple(const Model& model, const Path& xi,
                             const ControlTables& input, double gamma,
                             const PerturbOptions& opts);

/// The stationary map of the perturbed thinning at off-path states: unique
/// stationary vector of the controlled generator whose channel rates come
/// from integrating the slice's thinning value over the acceptance interval
/// at x.
Eigen::VectorXd stationary_map_rho(const Model& model, const PerturbResult& pr,
                                   int slice, const Eigen::VectorXd& x);

struct MembershipReport {
  double dynamics_residual = 0;      // max node gap to the re-integrated path
  double stationarity_residual = 0;  // max slice ||pi Q(q)||_inf
};

/// Residuals of the state equation and the stationarity constraint for a
/// tabulated triple.
MembershipReport verify_membership(const Model& model, const Path& xi,
                                   const ControlTables& tables);

struct UniquenessReport {
  double integrator_disagreement = 0;  // RK4 vs Euler closed-loop gap to xi*
  double ic_sensitivity_bound = 0;     // Gronwall bound for the moved start
  double ic_terminal_gap = 0;
  bool passed = false;
};

/// Re-solves the closed-loop dynamics driven by the stationary map with two
/// integrators and a perturbed start; agreement certifies the uniqueness of
/// the perturbed characterization numerically.
UniquenessReport uniqueness_check(const Model& model, const PerturbResult& pr,
                                  const Eigen::VectorXd& x0,
                                  double tolerance = 1e-6);

}  // namespace switchdiff

#endif
