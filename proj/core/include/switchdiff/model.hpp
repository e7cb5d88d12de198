#ifndef SWITCHDIFF_MODEL_HPP
#define SWITCHDIFF_MODEL_HPP

#include <Eigen/Dense>
#include <functional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace switchdiff {

struct ModelError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Parameters of the built-in "affine-switching" coefficient family:
///   b(x,y) = B_y x + beta_y
///   a(x,y) = A_y
///   c(x,y) = c0_y + c1_y * tanh(w_y . x)
///   r(x,y,y') = r0_{yy'} + r1_{yy'} * tanh(v . x)
/// The shared modulator direction v keeps every row of r summing to one.
struct CoefficientSpec {
  std::string family = "affine-switching";

  std::vector<Eigen::MatrixXd> B;     // L matrices, d x d
  std::vector<Eigen::VectorXd> beta;  // L vectors, d
  std::vector<Eigen::MatrixXd> A;     // L matrices, d x m
  Eigen::VectorXd c0, c1;             // L
  std::vector<Eigen::VectorXd> w;     // L vectors, d
  Eigen::MatrixXd r0, r1;             // L x L
  Eigen::VectorXd v;                  // d

  // Extension point: user-supplied evaluators, trusted after validation.
  using DriftFn = std::function<Eigen::VectorXd(const Eigen::VectorXd&, int)>;
  using DiffusionFn = std::function<Eigen::MatrixXd(const Eigen::VectorXd&, int)>;
  using IntensityFn = std::function<double(const Eigen::VectorXd&, int)>;
  using TransitionFn = std::function<double(const Eigen::VectorXd&, int, int)>;
  DriftFn custom_b;
  DiffusionFn custom_a;
  IntensityFn custom_c;
  TransitionFn custom_r;
};

/// Problem instance: dimensions, allowed transitions, coefficient evaluation.
/// Immutable after construction; evaluation is pure and thread-safe.
class Model {
 public:
  Model(int d, int m, int L, std::vector<std::pair<int, int>> transitions,
        CoefficientSpec coeff);

  int dim() const { return d_; }
  int brownian_dim() const { return m_; }
  int num_states() const { return L_; }

  /// Allowed transitions as ordered 0-based pairs, sorted lexicographically.
  const std::vector<std::pair<int, int>>& transitions() const { return transitions_; }
  int num_channels() const { return int(transitions_.size()); }
  bool allowed(int i, int j) const { return channel_index_(i, j) >= 0; }
  /// Index into transitions() of channel (i,j), or -1.
  int channel(int i, int j) const { return channel_index_(i, j); }
  /// Channel indices leaving state i.
  const std::vector<int>& out_channels(int i) const { return out_channels_[i]; }

  Eigen::VectorXd drift(const Eigen::VectorXd& x, int y) const;           // b
  Eigen::MatrixXd diffusion(const Eigen::VectorXd& x, int y) const;       // a
  double jump_intensity(const Eigen::VectorXd& x, int y) const;           // c
  double transition_prob(const Eigen::VectorXd& x, int y, int yp) const;  // r

  const CoefficientSpec& coeff() const { return coeff_; }

 private:
  void check_finite(const Eigen::VectorXd& x) const;

  int d_, m_, L_;
  std::vector<std::pair<int, int>> transitions_;
  Eigen::MatrixXi channel_index_;                // L x L, -1 off T_set
  std::vector<std::vector<int>> out_channels_;   // per state
  CoefficientSpec coeff_;
  bool affine_;
};

/// Numeric bounds and constants attached to a model instance.  Lipschitz
/// entries are sampled estimates over a probe box, not certificates.
struct ModelBounds {
  double varsigma_bar = 0;   // sup c
  double zeta = 0;           // varsigma_bar + 1
  double varsigma_low = 0;   // inf min_y c
  double kappa1 = 0;         // linear-growth constant of a, b
  double kappa2 = 0;         // Lipschitz estimate of c*r (channel rates)
  double kappa3 = 0;         // inf over T_set of r
  double alpha = 0;          // min over probes of the irreducibility constant
  double d_lip = 0;          // Lipschitz estimate of (b, a, c, r)
  double r_floor = 0;        // varsigma_low * kappa3
};

struct ProbeSpec {
  Eigen::VectorXd lo, hi;  // compact box
  int count = 10000;
  std::uint64_t seed = 0;
};

struct AssumptionCheck {
  std::string name;
  bool passed = false;
  std::string detail;
};

struct ValidationReport {
  ModelBounds bounds;
  std::vector<AssumptionCheck> checks;
  bool passed = false;
};

struct BuildConfig {
  int d = 1, m = 1, L = 1;
  std::vector<std::pair<int, int>> transitions;  // 0-based
  CoefficientSpec coeff;
};

/// Constructs a Model and enforces the family constraints (row stochasticity,
/// intensity positivity, floor on transition probabilities over T_set).
Model build_model(const BuildConfig& config);

/// Checks the standing assumptions numerically over a probe box and fills
/// in the bound/constant estimates.  Failures are reported, not thrown.
ValidationReport validate_model(const Model& model, const ProbeSpec& probe);

}  // namespace switchdiff

#endif
