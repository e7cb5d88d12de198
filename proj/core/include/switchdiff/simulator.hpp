#ifndef SWITCHDIFF_SIMULATOR_HPP
#define SWITCHDIFF_SIMULATOR_HPP

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <vector>

#include "switchdiff/averaging.hpp"
#include "switchdiff/model.hpp"

namespace switchdiff {

struct Jump {
  double time;
  int from;
  int to;
};

struct CostRecord {
  double drift_cost = 0;  // (1/2) int ||psi||^2
  double jump_cost = 0;   // sum_ij int ell(phi_ij) over the acceptance sets
  double total() const { return drift_cost + jump_cost; }
};

struct Trajectory {
  Path path;                  // slow component on the recording grid
  std::vector<int> y;         // fast state at each grid node (left limit at jumps)
  std::vector<Jump> jumps;
  int y0 = 0;
  std::optional<CostRecord> cost;
  std::uint64_t seed = 0, stream = 0;
};

/// Piecewise-constant-in-time feedback controls: per-state drift shifts and
/// per-channel thinning values, constant in the mark variable on the
/// acceptance interval.  Slice k applies on [t[k], t[k+1]).
struct FeedbackControls {
  std::vector<double> t;                        // K+1 nodes
  std::vector<Eigen::MatrixXd> u;               // K slices, L x m rows u_i
  std::vector<std::vector<double>> phi;         // K slices, per channel
  /// Acceptance-interval lengths used for cost accounting (the rho at the
  /// target path).  Empty => use rho at the current simulated state.
  std::vector<std::vector<double>> cost_len;
  double phi_max = 1.0;

  int slice(double s) const;

  /// Identity controls (u = 0, phi = 1): a no-op modification.
  static FeedbackControls identity(const Model& model, double T);
};

/// Exact-in-law simulation of the two-scale pair by thinning a majorant
/// Poisson stream per transition channel; the slow component advances by
/// Euler-Maruyama with substeps capped at h and split at grid nodes and
/// candidate times.
Trajectory simulate(const Model& model, double eps, const Eigen::VectorXd& x0,
                    int y0, double T, double h, std::uint64_t seed,
                    std::uint64_t stream = 1);

/// Controlled variant: drift gains a(x,y) u_y(t) dt, channel (i,j) candidates
/// are thinned by phi_ij(t)/phi_max, and running costs are recorded.
Trajectory simulate_controlled(const Model& model, double eps,
                               const FeedbackControls& controls,
                               const Eigen::VectorXd& x0, int y0, double T,
                               double h, std::uint64_t seed,
                               std::uint64_t stream = 1);

/// Fraction of [0, t] spent in each fast state.
Eigen::VectorXd occupation_measure(const Trajectory& traj, double t);

struct TrajectorySummary {
  int index = 0;
  Eigen::VectorXd terminal;
  double sup_dev = 0;  // grid sup-deviation from the reference path
  int n_jumps = 0;
  double cost_psi = 0;
  double cost_phi = 0;
};

/// N independent trajectories on streams (seed, 1..N); summaries in index
/// order, deterministic for any thread count.
std::vector<TrajectorySummary> batch_simulate(
    const Model& model, double eps, const Eigen::VectorXd& x0, int y0, double T,
    double h, int N, std::uint64_t seed, const FeedbackControls* controls = nullptr,
    const Path* reference = nullptr, int threads = 1);

}  // namespace switchdiff

#endif
