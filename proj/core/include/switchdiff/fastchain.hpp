#ifndef SWITCHDIFF_FASTCHAIN_HPP
#define SWITCHDIFF_FASTCHAIN_HPP

#include <Eigen/Dense>
#include <span>
#include <stdexcept>
#include <vector>

#include "switchdiff/model.hpp"

namespace switchdiff {

struct ReducibleError : std::runtime_error {
  ReducibleError(std::string msg, std::vector<std::vector<int>> sccs)
      : std::runtime_error(std::move(msg)), components(std::move(sccs)) {}
  std::vector<std::vector<int>> components;
};

/// Generator of an L-state jump chain: nonnegative off-diagonals supported on
/// the allowed transitions, rows summing to zero.
struct RateMatrix {
  Eigen::MatrixXd q;
};

/// Per-channel acceptance geometry at a frozen slow state x: the acceptance
/// interval for channel (i,j) is [0, rho_ij] inside [0, zeta] with
/// rho_ij = c_i(x) r_ij(x).
struct JumpGeometry {
  std::vector<std::pair<int, int>> transitions;  // shared channel ordering
  std::vector<double> rho;                       // interval lengths
  double zeta = 0;                               // majorant, sup c + 1
};

JumpGeometry jump_geometry(const Model& model, const Eigen::VectorXd& x);

/// Generator of the uncontrolled fast chain at frozen x.
RateMatrix generator(const Model& model, const Eigen::VectorXd& x);

/// Generator with off-diagonal rates q (one per channel), zero elsewhere.
RateMatrix controlled_generator(const JumpGeometry& geometry, int num_states,
                                std::span<const double> q);

/// Unique stationary vector of an irreducible rate matrix (null-space solve
/// of the transpose with a normalization row).  Throws ReducibleError with
/// the strongly connected components otherwise.
Eigen::VectorXd stationary(const RateMatrix& rm);

/// Stationary measure of the fast chain at frozen x, computed two ways
/// (direct null-space solve and the embedded-chain route) and cross-checked.
Eigen::VectorXd invariant_measure(const Model& model, const Eigen::VectorXd& x,
                                  double route_tolerance = 1e-10);

/// min over (y,z) of the L-fold sum of embedded-chain n-step kernels;
/// strictly positive iff the embedded chain at x is irreducible.
double irreducibility_alpha(const Model& model, const Eigen::VectorXd& x);

}  // namespace switchdiff

#endif
