#ifndef SWITCHDIFF_EXPERIMENTS_HPP
#define SWITCHDIFF_EXPERIMENTS_HPP

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "switchdiff/model.hpp"
#include "switchdiff/perturb.hpp"
#include "switchdiff/ratefn.hpp"
#include "switchdiff/simulator.hpp"

namespace switchdiff {

/// Terminal event on the slow state X(T).
struct EventSpec {
  enum class Kind { TerminalBall, TerminalHalfspace };
  Kind kind = Kind::TerminalBall;
  Eigen::VectorXd center;   // ball
  double radius = 1;        // ball; +inf = whole space
  Eigen::VectorXd normal;   // halfspace {normal . x >= threshold}
  double threshold = 0;

  static EventSpec ball(Eigen::VectorXd center, double radius);
  static EventSpec halfspace(Eigen::VectorXd normal, double threshold);

  bool contains(const Eigen::VectorXd& x) const;
  /// Signed violation (0 inside): distance to the event in the ball case,
  /// normalized slack deficit in the halfspace case.
  double violation(const Eigen::VectorXd& x) const;
  /// Closest point of the event to x.
  Eigen::VectorXd project(const Eigen::VectorXd& x) const;
  void validate(int dim) const;
};

struct RareEventRow {
  double eps = 0;
  int n = 0;
  double p_hat = 0;
  double stderr_ = 0;
  double neg_eps_log_p = 0;  // meaningful only when !censored
  bool censored = false;
};

/// Naive Monte Carlo estimate of P(X^eps(T) in event).
RareEventRow mc_rare_event(const Model& model, double eps,
                           const Eigen::VectorXd& x0, int y0, double T, double h,
                           const EventSpec& event, int N, std::uint64_t seed,
                           int threads = 1);

struct SweepResult {
  std::vector<RareEventRow> rows;
  double slope = 0;       // linear fit of -log p_hat against 1/eps
  bool slope_valid = false;
  int cells_used = 0;     // non-censored cells entering the fit
};

/// One mc_rare_event row per epsilon (distinct seed streams per cell) with an
/// extrapolated LDP slope.  Censored cells are reported, never fitted.
SweepResult eps_sweep(const Model& model, const Eigen::VectorXd& x0, int y0,
                      double T, double h, const EventSpec& event,
                      const std::vector<double>& eps_list,
                      const std::vector<int>& N_list, std::uint64_t seed,
                      int threads = 1);

/// Slice-cost solver settings for the transcription: lighter than the
/// standalone local_rate defaults because the outer optimizer calls it many
/// thousands of times on smoothly varying arguments.
inline LocalRateOptions transcription_local_defaults() {
  LocalRateOptions o;
  o.multistarts = 2;
  o.max_iter = 80;
  return o;
}

struct TranscriptionOptions {
  int k_nodes = 8;             // interior path nodes
  int multistarts = 4;
  std::uint64_t seed = 0x7a11;
  double jitter = 0.1;         // multistart node perturbation scale
  double penalty = 1e4;        // terminal event violation weight
  int nm_max_evals = 1500;
  int polish_iters = 80;
  LocalRateOptions local = transcription_local_defaults();
  bool refine_check = true;    // re-solve at 2*k_nodes and compare
};

struct TranscriptionResult {
  double I_star = 0;
  Path path;
  bool optimizer_ok = false;
  double refined_I = 0;        // I* at doubled resolution (if checked)
  double terminal_violation = 0;
  int evaluations = 0;
};

/// Direct transcription of inf { I(xi) : xi(0)=x0, xi(T) in event } over
/// piecewise-linear paths on a fixed grid: derivative-free multistart with a
/// quasi-Newton polish; nested local_rate calls supply slice costs.
TranscriptionResult minimize_rate(const Model& model, const Eigen::VectorXd& x0,
                                  double T, const EventSpec& event,
                                  const TranscriptionOptions& opts = {},
                                  int threads = 1);

struct CompareReport {
  TranscriptionResult variational;
  SweepResult sweep;
  double relative_gap = 0;     // |slope - I*| / max(I*, tiny)
  std::string note;
};

/// Variational I* against the Monte Carlo LDP slope.
CompareReport ldp_compare(const Model& model, const Eigen::VectorXd& x0, int y0,
                          double T, double h, const EventSpec& event,
                          const std::vector<double>& eps_list,
                          const std::vector<int>& N_list, std::uint64_t seed,
                          const TranscriptionOptions& opts = {}, int threads = 1);

struct TiltRow {
  double eps = 0;
  int n = 0;
  double mean_sup_dev = 0;
  double mean_cost = 0;
  double cost_stderr = 0;
  double det_cost = 0;   // deterministic cost of the perturbed triple
};

/// Controlled prelimit runs under the feedback form of the perturbed
/// controls: psi(s) = u*_{Ybar(s-)}(s), phi(s) = phi*_ij(s) on the active
/// row; reports concentration around xi* and cost convergence.
std::vector<TiltRow> tilted_convergence(const Model& model,
                                        const PerturbResult& pr, int y0,
                                        double h,
                                        const std::vector<double>& eps_list,
                                        int N, std::uint64_t seed,
                                        int threads = 1);

/// The feedback controls induced by a perturbation result; cost accounting
/// uses the acceptance lengths at xi*.
FeedbackControls feedback_from_perturbation(const PerturbResult& pr);

}  // namespace switchdiff

#endif
