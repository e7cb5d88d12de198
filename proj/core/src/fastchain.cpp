#include "switchdiff/fastchain.hpp"

#include <cmath>
#include <sstream>

namespace switchdiff {

JumpGeometry jump_geometry(const Model& model, const Eigen::VectorXd& x) {
  JumpGeometry g;
  g.transitions = model.transitions();
  g.rho.reserve(g.transitions.size());
  double cmax = 0;
  for (int y = 0; y < model.num_states(); ++y)
    cmax = std::max(cmax, model.jump_intensity(x, y));
  g.zeta = cmax + 1.0;
  for (auto [i, j] : g.transitions)
    g.rho.push_back(model.jump_intensity(x, i) * model.transition_prob(x, i, j));
  return g;
}

RateMatrix generator(const Model& model, const Eigen::VectorXd& x) {
  JumpGeometry g = jump_geometry(model, x);
  return controlled_generator(g, model.num_states(), g.rho);
}

RateMatrix controlled_generator(const JumpGeometry& geometry, int num_states,
                                std::span<const double> q) {
  if (q.size() != geometry.transitions.size())
    throw ModelError("channel rate vector length mismatch");
  Eigen::MatrixXd Q = Eigen::MatrixXd::Zero(num_states, num_states);
  for (size_t k = 0; k < q.size(); ++k) {
    if (!(q[k] >= 0.0)) throw ModelError("negative channel rate rejected");
    auto [i, j] = geometry.transitions[k];
    Q(i, j) = q[k];
  }
  for (int i = 0; i < num_states; ++i) Q(i, i) = -Q.row(i).sum() + Q(i, i);
  return RateMatrix{Q};
}

namespace {

std::vector<std::vector<int>> scc_of(const Eigen::MatrixXd& Q) {
  int L = int(Q.rows());
  std::vector<std::vector<bool>> reach(L, std::vector<bool>(L, false));
  for (int i = 0; i < L; ++i) reach[i][i] = true;
  for (int i = 0; i < L; ++i)
    for (int j = 0; j < L; ++j)
      if (i != j && Q(i, j) > 0) reach[i][j] = true;
  for (int k = 0; k < L; ++k)
    for (int i = 0; i < L; ++i)
      if (reach[i][k])
        for (int j = 0; j < L; ++j)
          if (reach[k][j]) reach[i][j] = true;
  std::vector<int> comp(L, -1);
  std::vector<std::vector<int>> out;
  for (int i = 0; i < L; ++i) {
    if (comp[i] >= 0) continue;
    comp[i] = int(out.size());
    out.push_back({i});
    for (int j = i + 1; j < L; ++j)
      if (comp[j] < 0 && reach[i][j] && reach[j][i]) {
        comp[j] = comp[i];
        out.back().push_back(j);
      }
  }
  return out;
}

}  // namespace

Eigen::VectorXd stationary(const RateMatrix& rm) {
  const int L = int(rm.q.rows());
  if (L == 1) return Eigen::VectorXd::Ones(1);
  auto sccs = scc_of(rm.q);
  if (sccs.size() > 1) {
    std::ostringstream os;
    os << "rate matrix reducible into " << sccs.size() << " components";
    throw ReducibleError(os.str(), sccs);
  }
  // Solve pi^T Q = 0 with one equation replaced by sum(pi) = 1.
  Eigen::MatrixXd A = rm.q.transpose();
  A.row(L - 1).setOnes();
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(L);
  rhs[L - 1] = 1.0;
  Eigen::VectorXd pi = A.fullPivLu().solve(rhs);
  // One Newton-style refinement pass keeps the residual at roundoff level.
  Eigen::VectorXd resid = rhs - A * pi;
  pi += A.fullPivLu().solve(resid);
  return pi;
}

double irreducibility_alpha(const Model& model, const Eigen::VectorXd& x) {
  const int L = model.num_states();
  if (L == 1) return 1.0;
  Eigen::MatrixXd r(L, L);
  for (int i = 0; i < L; ++i)
    for (int j = 0; j < L; ++j) r(i, j) = model.transition_prob(x, i, j);
  Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(L, L);
  Eigen::MatrixXd pw = Eigen::MatrixXd::Identity(L, L);
  for (int n = 1; n <= L; ++n) {
    pw = pw * r;
    sum += pw;
  }
  return sum.minCoeff();
}

Eigen::VectorXd invariant_measure(const Model& model, const Eigen::VectorXd& x,
                                  double route_tolerance) {
  const int L = model.num_states();
  if (L == 1) return Eigen::VectorXd::Ones(1);

  // Route (i): null-space solve of the generator transpose.
  Eigen::VectorXd nu_direct = stationary(generator(model, x));

  // Route (ii): invariant vector of the averaged embedded kernel
  // p = (1/L) sum_{n=1..L} rhat^n, then tilt by 1/c and renormalize.
  Eigen::MatrixXd r(L, L);
  for (int i = 0; i < L; ++i)
    for (int j = 0; j < L; ++j) r(i, j) = model.transition_prob(x, i, j);
  Eigen::MatrixXd p = Eigen::MatrixXd::Zero(L, L);
  Eigen::MatrixXd pw = Eigen::MatrixXd::Identity(L, L);
  for (int n = 1; n <= L; ++n) {
    pw = pw * r;
    p += pw;
  }
  p /= double(L);
  // pi (p - I) = 0 with normalization.
  Eigen::MatrixXd A = (p - Eigen::MatrixXd::Identity(L, L)).transpose();
  A.row(L - 1).setOnes();
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(L);
  rhs[L - 1] = 1.0;
  Eigen::VectorXd pi = A.fullPivLu().solve(rhs);
  pi += A.fullPivLu().solve(rhs - A * pi);
  Eigen::VectorXd nu_embedded(L);
  for (int y = 0; y < L; ++y) nu_embedded[y] = pi[y] / model.jump_intensity(x, y);
  nu_embedded /= nu_embedded.sum();

  double tv = 0.5 * (nu_direct - nu_embedded).lpNorm<1>();
  if (tv > route_tolerance) {
    std::ostringstream os;
    os << "stationary-measure routes disagree: TV distance " << tv;
    throw ModelError(os.str());
  }
  return nu_direct;
}

}  // namespace switchdiff
