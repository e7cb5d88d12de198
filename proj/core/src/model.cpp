#include "switchdiff/model.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "switchdiff/rng.hpp"

namespace switchdiff {

namespace {

constexpr double kIntensityFloor = 1e-12;

std::string shape_msg(const std::string& what, long got, long want) {
  std::ostringstream os;
  os << "shape mismatch: " << what << " has size " << got << ", expected " << want;
  return os.str();
}

}  // namespace

Model::Model(int d, int m, int L, std::vector<std::pair<int, int>> transitions,
             CoefficientSpec coeff)
    : d_(d), m_(m), L_(L), transitions_(std::move(transitions)),
      coeff_(std::move(coeff)), affine_(coeff_.family == "affine-switching") {
  if (d_ < 1 || m_ < 1 || L_ < 1) throw ModelError("dimensions must be positive");
  std::sort(transitions_.begin(), transitions_.end());
  transitions_.erase(std::unique(transitions_.begin(), transitions_.end()),
                     transitions_.end());
  channel_index_ = Eigen::MatrixXi::Constant(L_, L_, -1);
  out_channels_.assign(L_, {});
  for (int k = 0; k < int(transitions_.size()); ++k) {
    auto [i, j] = transitions_[k];
    if (i < 0 || i >= L_ || j < 0 || j >= L_ || i == j)
      throw ModelError("transition pair out of range or on the diagonal");
    channel_index_(i, j) = k;
    out_channels_[i].push_back(k);
  }
}

void Model::check_finite(const Eigen::VectorXd& x) const {
  if (x.size() != d_) throw ModelError(shape_msg("x", x.size(), d_));
  if (!x.allFinite()) throw ModelError("non-finite slow state rejected");
}

Eigen::VectorXd Model::drift(const Eigen::VectorXd& x, int y) const {
  check_finite(x);
  if (affine_) return coeff_.B[y] * x + coeff_.beta[y];
  return coeff_.custom_b(x, y);
}

Eigen::MatrixXd Model::diffusion(const Eigen::VectorXd& x, int y) const {
  check_finite(x);
  if (affine_) return coeff_.A[y];
  return coeff_.custom_a(x, y);
}

double Model::jump_intensity(const Eigen::VectorXd& x, int y) const {
  check_finite(x);
  if (affine_) return coeff_.c0[y] + coeff_.c1[y] * std::tanh(coeff_.w[y].dot(x));
  return coeff_.custom_c(x, y);
}

double Model::transition_prob(const Eigen::VectorXd& x, int y, int yp) const {
  check_finite(x);
  if (y == yp || channel_index_(y, yp) < 0) return 0.0;
  if (affine_)
    return coeff_.r0(y, yp) + coeff_.r1(y, yp) * std::tanh(coeff_.v.dot(x));
  return coeff_.custom_r(x, y, yp);
}

Model build_model(const BuildConfig& config) {
  const int d = config.d, m = config.m, L = config.L;
  const CoefficientSpec& cs = config.coeff;

  if (cs.family == "affine-switching") {
    if (int(cs.B.size()) != L) throw ModelError(shape_msg("B", cs.B.size(), L));
    if (int(cs.beta.size()) != L) throw ModelError(shape_msg("beta", cs.beta.size(), L));
    if (int(cs.A.size()) != L) throw ModelError(shape_msg("A", cs.A.size(), L));
    if (cs.c0.size() != L) throw ModelError(shape_msg("c0", cs.c0.size(), L));
    if (cs.c1.size() != L) throw ModelError(shape_msg("c1", cs.c1.size(), L));
    if (int(cs.w.size()) != L) throw ModelError(shape_msg("w", cs.w.size(), L));
    if (cs.r0.rows() != L || cs.r0.cols() != L)
      throw ModelError("shape mismatch: r0 must be L x L");
    if (cs.r1.rows() != L || cs.r1.cols() != L)
      throw ModelError("shape mismatch: r1 must be L x L");
    if (cs.v.size() != d) throw ModelError(shape_msg("v", cs.v.size(), d));
    for (int y = 0; y < L; ++y) {
      if (cs.B[y].rows() != d || cs.B[y].cols() != d)
        throw ModelError("shape mismatch: B[y] must be d x d");
      if (cs.beta[y].size() != d) throw ModelError("shape mismatch: beta[y] must be d");
      if (cs.A[y].rows() != d || cs.A[y].cols() != m)
        throw ModelError("shape mismatch: A[y] must be d x m");
      if (cs.w[y].size() != d) throw ModelError("shape mismatch: w[y] must be d");
      if (!cs.B[y].allFinite() || !cs.beta[y].allFinite() || !cs.A[y].allFinite() ||
          !cs.w[y].allFinite())
        throw ModelError("non-finite coefficient parameter");
    }
    if (!cs.c0.allFinite() || !cs.c1.allFinite() || !cs.r0.allFinite() ||
        !cs.r1.allFinite() || !cs.v.allFinite())
      throw ModelError("non-finite coefficient parameter");

    for (int y = 0; y < L; ++y) {
      if (cs.c0[y] - std::abs(cs.c1[y]) < kIntensityFloor) {
        std::ostringstream os;
        os << "c positivity violated: c0 - |c1| = "
           << cs.c0[y] - std::abs(cs.c1[y]) << " at state " << y + 1;
        throw ModelError(os.str());
      }
    }

    // For |L| = 1 the fast component is frozen and r plays no role.
    if (L > 1) {
      auto on = [&](int i, int j) {
        return std::find(config.transitions.begin(), config.transitions.end(),
                         std::make_pair(i, j)) != config.transitions.end();
      };
      for (int y = 0; y < L; ++y) {
        double row0 = cs.r0.row(y).sum();
        double row1 = cs.r1.row(y).sum();
        if (std::abs(row0 - 1.0) > 1e-12) {
          std::ostringstream os;
          os << "row-stochasticity violated: r0 row " << y + 1 << " sums to " << row0;
          throw ModelError(os.str());
        }
        if (std::abs(row1) > 1e-12) {
          std::ostringstream os;
          os << "row-stochasticity violated: r1 row " << y + 1 << " sums to " << row1;
          throw ModelError(os.str());
        }
        for (int yp = 0; yp < L; ++yp) {
          bool edge = y != yp && on(y, yp);
          if (!edge) {
            if (cs.r0(y, yp) != 0.0 || cs.r1(y, yp) != 0.0)
              throw ModelError("r0/r1 nonzero off T_set");
          } else {
            if (cs.r0(y, yp) - std::abs(cs.r1(y, yp)) <= 0.0)
              throw ModelError("transition probability floor violated on T_set");
            if (cs.r0(y, yp) + std::abs(cs.r1(y, yp)) > 1.0 + 1e-12)
              throw ModelError("transition probability exceeds 1 on T_set");
          }
        }
      }
    }
  } else {
    if (!cs.custom_b || !cs.custom_a || !cs.custom_c || !cs.custom_r)
      throw ModelError("custom family requires all four evaluators");
  }

  return Model(d, m, L, config.transitions, cs);
}

namespace {

// Strong connectivity of the transition digraph via boolean reachability.
bool strongly_connected(const Model& model) {
  int L = model.num_states();
  if (L == 1) return true;
  std::vector<std::vector<bool>> reach(L, std::vector<bool>(L, false));
  for (int i = 0; i < L; ++i) reach[i][i] = true;
  for (auto [i, j] : model.transitions()) reach[i][j] = true;
  for (int k = 0; k < L; ++k)
    for (int i = 0; i < L; ++i)
      if (reach[i][k])
        for (int j = 0; j < L; ++j)
          if (reach[k][j]) reach[i][j] = true;
  for (int i = 0; i < L; ++i)
    for (int j = 0; j < L; ++j)
      if (!reach[i][j]) return false;
  return true;
}

double embedded_alpha(const Model& model, const Eigen::VectorXd& x) {
  int L = model.num_states();
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

}  // namespace

ValidationReport validate_model(const Model& model, const ProbeSpec& probe) {
  ValidationReport rep;
  const int d = model.dim();
  const int L = model.num_states();

  if (probe.lo.size() != d || probe.hi.size() != d)
    throw ModelError("probe box dimension mismatch");

  StreamRng rng(probe.seed, 1);
  auto sample = [&]() {
    Eigen::VectorXd x(d);
    for (int k = 0; k < d; ++k) x[k] = rng.uniform(probe.lo[k], probe.hi[k]);
    return x;
  };

  ModelBounds& b = rep.bounds;
  b.varsigma_bar = -1e300;
  b.varsigma_low = 1e300;
  b.kappa3 = 1e300;
  b.alpha = 1e300;
  b.kappa1 = 0;
  b.d_lip = 0;
  b.kappa2 = 0;

  bool r_rows_ok = true, r_nonneg = true, c_pos = true;
  const int n = std::max(probe.count, 2);
  Eigen::VectorXd xprev = sample();
  for (int s = 0; s < n; ++s) {
    Eigen::VectorXd x = sample();
    double cmin = 1e300, cmax = -1e300;
    for (int y = 0; y < L; ++y) {
      double c = model.jump_intensity(x, y);
      cmin = std::min(cmin, c);
      cmax = std::max(cmax, c);
      if (c <= 0) c_pos = false;
      double bn = model.drift(x, y).norm() + model.diffusion(x, y).norm();
      b.kappa1 = std::max(b.kappa1, bn / (1.0 + x.norm()));
      if (L > 1) {
        double row = 0;
        for (int yp = 0; yp < L; ++yp) {
          double r = model.transition_prob(x, y, yp);
          row += r;
          if (r < 0) r_nonneg = false;
        }
        if (std::abs(row - 1.0) > 1e-10) r_rows_ok = false;
      }
    }
    b.varsigma_bar = std::max(b.varsigma_bar, cmax);
    b.varsigma_low = std::min(b.varsigma_low, cmin);
    for (auto [i, j] : model.transitions())
      b.kappa3 = std::min(b.kappa3, model.transition_prob(x, i, j));
    if (L > 1) b.alpha = std::min(b.alpha, embedded_alpha(model, x));

    // Difference-quotient estimates against the previous probe point.
    double dx = (x - xprev).norm();
    if (dx > 1e-12) {
      for (int y = 0; y < L; ++y) {
        double dq = (model.drift(x, y) - model.drift(xprev, y)).norm() / dx;
        dq = std::max(dq, (model.diffusion(x, y) - model.diffusion(xprev, y)).norm() / dx);
        dq = std::max(dq, std::abs(model.jump_intensity(x, y) -
                                   model.jump_intensity(xprev, y)) / dx);
        for (int yp = 0; yp < L; ++yp)
          dq = std::max(dq, std::abs(model.transition_prob(x, y, yp) -
                                     model.transition_prob(xprev, y, yp)) / dx);
        b.d_lip = std::max(b.d_lip, dq);
      }
      for (auto [i, j] : model.transitions()) {
        double ri = model.jump_intensity(x, i) * model.transition_prob(x, i, j);
        double rp = model.jump_intensity(xprev, i) * model.transition_prob(xprev, i, j);
        b.kappa2 = std::max(b.kappa2, std::abs(ri - rp) / dx);
      }
    }
    xprev = x;
  }
  if (L == 1) {
    b.kappa3 = 1.0;
    b.alpha = 1.0;
  }
  b.zeta = b.varsigma_bar + 1.0;
  b.r_floor = b.varsigma_low * b.kappa3;

  bool irred = strongly_connected(model);
  rep.checks.push_back({"c bounded and positive",
                        c_pos && b.varsigma_low > 0 && std::isfinite(b.varsigma_bar),
                        ""});
  rep.checks.push_back({"r row-stochastic with zero diagonal", r_rows_ok && r_nonneg, ""});
  rep.checks.push_back({"r floor kappa3 > 0 on T_set", L == 1 || b.kappa3 > 0, ""});
  rep.checks.push_back({"adjacency irreducible", irred,
                        irred ? "" : "adjacency not irreducible"});
  rep.checks.push_back({"embedded-chain alpha > 0", b.alpha > 0, ""});

  rep.passed = true;
  for (const auto& c : rep.checks) rep.passed = rep.passed && c.passed;
  return rep;
}

}  // namespace switchdiff
