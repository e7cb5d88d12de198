#include "switchdiff/io.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

using nlohmann::json;

namespace switchdiff {

std::string format_double(double v) {
  char buf[48];
  int n = std::snprintf(buf, sizeof(buf), "%.17g", v);
  return std::string(buf, size_t(n));
}

std::uint64_t fnv1a(const std::string& bytes) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char b : bytes) {
    h ^= b;
    h *= 1099511628211ull;
  }
  return h;
}

namespace {

Eigen::VectorXd vec_from(const json& j, int expect, const char* what) {
  if (!j.is_array() || int(j.size()) != expect)
    throw ConfigError(std::string(what) + ": expected array of length " +
                      std::to_string(expect));
  Eigen::VectorXd v(expect);
  for (int i = 0; i < expect; ++i) v[i] = j[i].get<double>();
  return v;
}

Eigen::MatrixXd mat_from(const json& j, int rows, int cols, const char* what) {
  if (!j.is_array() || int(j.size()) != rows)
    throw ConfigError(std::string(what) + ": expected " + std::to_string(rows) +
                      " rows");
  Eigen::MatrixXd m(rows, cols);
  for (int i = 0; i < rows; ++i) {
    if (!j[i].is_array() || int(j[i].size()) != cols)
      throw ConfigError(std::string(what) + ": row " + std::to_string(i + 1) +
                        " must have " + std::to_string(cols) + " entries");
    for (int k = 0; k < cols; ++k) m(i, k) = j[i][k].get<double>();
  }
  return m;
}

json vec_to(const Eigen::VectorXd& v) {
  json out = json::array();
  for (int i = 0; i < v.size(); ++i) out.push_back(v[i]);
  return out;
}

json mat_to(const Eigen::MatrixXd& m) {
  json out = json::array();
  for (int i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (int k = 0; k < m.cols(); ++k) row.push_back(m(i, k));
    out.push_back(row);
  }
  return out;
}

}  // namespace

BuildConfig parse_model_config(const json& doc) {
  BuildConfig cfg;
  try {
    cfg.d = doc.at("d").get<int>();
    cfg.m = doc.at("m").get<int>();
    cfg.L = doc.at("L").get<int>();
    if (cfg.d < 1 || cfg.m < 1 || cfg.L < 1)
      throw ConfigError("d, m, L must be positive");
    std::string family = doc.value("family", std::string("affine-switching"));
    if (family != "affine-switching")
      throw ConfigError("unknown coefficient family: " + family);
    cfg.coeff.family = family;

    for (const auto& pair : doc.value("T_set", json::array())) {
      if (!pair.is_array() || pair.size() != 2)
        throw ConfigError("T_set entries must be [i, j] pairs");
      int i = pair[0].get<int>(), j = pair[1].get<int>();
      if (i < 1 || i > cfg.L || j < 1 || j > cfg.L || i == j)
        throw ConfigError("T_set pair out of range or diagonal");
      cfg.transitions.emplace_back(i - 1, j - 1);
    }

    const json& p = doc.value("params", json::object());
    auto per_state_mat = [&](const char* key, int rows, int cols,
                             std::vector<Eigen::MatrixXd>& dst) {
      dst.assign(cfg.L, Eigen::MatrixXd::Zero(rows, cols));
      if (!p.contains(key)) return;
      const json& arr = p.at(key);
      if (int(arr.size()) != cfg.L)
        throw ConfigError(std::string(key) + ": expected one entry per state");
      for (int y = 0; y < cfg.L; ++y) dst[y] = mat_from(arr[y], rows, cols, key);
    };
    auto per_state_vec = [&](const char* key,
                             std::vector<Eigen::VectorXd>& dst) {
      dst.assign(cfg.L, Eigen::VectorXd::Zero(cfg.d));
      if (!p.contains(key)) return;
      const json& arr = p.at(key);
      if (int(arr.size()) != cfg.L)
        throw ConfigError(std::string(key) + ": expected one entry per state");
      for (int y = 0; y < cfg.L; ++y) dst[y] = vec_from(arr[y], cfg.d, key);
    };

    per_state_mat("B", cfg.d, cfg.d, cfg.coeff.B);
    per_state_vec("beta", cfg.coeff.beta);
    per_state_mat("A", cfg.d, cfg.m, cfg.coeff.A);
    per_state_vec("w", cfg.coeff.w);
    cfg.coeff.c0 = p.contains("c0") ? vec_from(p.at("c0"), cfg.L, "c0")
                                    : Eigen::VectorXd::Ones(cfg.L);
    cfg.coeff.c1 = p.contains("c1") ? vec_from(p.at("c1"), cfg.L, "c1")
                                    : Eigen::VectorXd::Zero(cfg.L);
    cfg.coeff.r0 = p.contains("r0") ? mat_from(p.at("r0"), cfg.L, cfg.L, "r0")
                                    : Eigen::MatrixXd::Zero(cfg.L, cfg.L);
    cfg.coeff.r1 = p.contains("r1") ? mat_from(p.at("r1"), cfg.L, cfg.L, "r1")
                                    : Eigen::MatrixXd::Zero(cfg.L, cfg.L);
    cfg.coeff.v = p.contains("v") ? vec_from(p.at("v"), cfg.d, "v")
                                  : Eigen::VectorXd::Zero(cfg.d);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("model config: ") + e.what());
  }
  return cfg;
}

json model_config_json(const Model& model) {
  const CoefficientSpec& c = model.coeff();
  json p;
  json B = json::array(), beta = json::array(), A = json::array(),
       w = json::array();
  for (int y = 0; y < model.num_states(); ++y) {
    B.push_back(mat_to(c.B[y]));
    beta.push_back(vec_to(c.beta[y]));
    A.push_back(mat_to(c.A[y]));
    w.push_back(vec_to(c.w[y]));
  }
  p["B"] = B;
  p["beta"] = beta;
  p["A"] = A;
  p["w"] = w;
  p["c0"] = vec_to(c.c0);
  p["c1"] = vec_to(c.c1);
  p["r0"] = mat_to(c.r0);
  p["r1"] = mat_to(c.r1);
  p["v"] = vec_to(c.v);

  json tset = json::array();
  for (auto [i, j] : model.transitions())
    tset.push_back(json::array({i + 1, j + 1}));

  json doc;
  doc["d"] = model.dim();
  doc["m"] = model.brownian_dim();
  doc["L"] = model.num_states();
  doc["family"] = c.family;
  doc["T_set"] = tset;
  doc["params"] = p;
  return doc;
}

json load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config parse error in " + path + ": " + e.what());
  }
}

const json& model_section(const json& config) {
  if (config.contains("model")) return config.at("model");
  return config;
}

EventSpec parse_event(const json& doc) {
  try {
    std::string kind = doc.at("kind").get<std::string>();
    if (kind == "terminal-ball") {
      std::vector<double> c = doc.at("center").get<std::vector<double>>();
      Eigen::VectorXd center =
          Eigen::Map<const Eigen::VectorXd>(c.data(), long(c.size()));
      double radius = doc.at("radius").is_string()
                          ? std::numeric_limits<double>::infinity()
                          : doc.at("radius").get<double>();
      return EventSpec::ball(center, radius);
    }
    if (kind == "terminal-halfspace") {
      std::vector<double> n = doc.at("normal").get<std::vector<double>>();
      Eigen::VectorXd normal =
          Eigen::Map<const Eigen::VectorXd>(n.data(), long(n.size()));
      return EventSpec::halfspace(normal, doc.at("threshold").get<double>());
    }
    throw ConfigError("unknown event kind: " + kind);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("event config: ") + e.what());
  }
}

namespace {

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open output file: " + path);
  return out;
}

}  // namespace

void write_trajectory_csv(const std::string& path, const Trajectory& traj) {
  auto out = open_out(path);
  const int d = int(traj.path.x.empty() ? 0 : traj.path.x[0].size());
  out << "t";
  for (int i = 1; i <= d; ++i) out << ",x_" << i;
  out << ",y\n";
  for (size_t k = 0; k < traj.path.t.size(); ++k) {
    out << format_double(traj.path.t[k]);
    for (int i = 0; i < d; ++i) out << "," << format_double(traj.path.x[k][i]);
    out << "," << traj.y[k] + 1 << "\n";
  }
}

void write_jumps_csv(const std::string& path, const Trajectory& traj) {
  auto out = open_out(path);
  out << "time,from,to\n";
  for (const auto& j : traj.jumps)
    out << format_double(j.time) << "," << j.from + 1 << "," << j.to + 1 << "\n";
}

void write_ensemble_csv(const std::string& path,
                        const std::vector<TrajectorySummary>& rows) {
  auto out = open_out(path);
  const int d = rows.empty() ? 0 : int(rows[0].terminal.size());
  out << "traj_index";
  for (int i = 1; i <= d; ++i) out << ",terminal_x_" << i;
  out << ",sup_dev,n_jumps,cost_psi,cost_phi\n";
  for (const auto& r : rows) {
    out << r.index;
    for (int i = 0; i < d; ++i) out << "," << format_double(r.terminal[i]);
    out << "," << format_double(r.sup_dev) << "," << r.n_jumps << ","
        << format_double(r.cost_psi) << "," << format_double(r.cost_phi) << "\n";
  }
}

void write_lln_csv(const std::string& path, const std::vector<LlnRow>& rows) {
  auto out = open_out(path);
  out << "epsilon,n,mean_sup_dev,q50,q90,stderr\n";
  for (const auto& r : rows)
    out << format_double(r.eps) << "," << r.n << ","
        << format_double(r.mean_sup_dev) << "," << format_double(r.q50) << ","
        << format_double(r.q90) << "," << format_double(r.stderr_) << "\n";
}

void write_path_csv(const std::string& path, const Path& p) {
  auto out = open_out(path);
  const int d = int(p.x.empty() ? 0 : p.x[0].size());
  out << "t";
  for (int i = 1; i <= d; ++i) out << ",x_" << i;
  out << "\n";
  for (size_t k = 0; k < p.t.size(); ++k) {
    out << format_double(p.t[k]);
    for (int i = 0; i < d; ++i) out << "," << format_double(p.x[k][i]);
    out << "\n";
  }
}

Path read_path_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open path file: " + path);
  std::string line;
  if (!std::getline(in, line)) throw ConfigError("empty path file: " + path);
  int d = -1;  // from the header: t,x_1..x_d
  {
    int cols = 1;
    for (char ch : line) cols += ch == ',' ? 1 : 0;
    d = cols - 1;
  }
  if (d < 1) throw ConfigError("path file needs columns t,x_1..x_d");
  Path p;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<double> vals;
    while (std::getline(ss, cell, ',')) vals.push_back(std::stod(cell));
    if (int(vals.size()) != d + 1)
      throw ConfigError("path file line " + std::to_string(lineno) +
                        ": wrong column count");
    p.t.push_back(vals[0]);
    p.x.push_back(Eigen::Map<const Eigen::VectorXd>(vals.data() + 1, d));
  }
  if (p.t.size() < 2) throw ConfigError("path file needs at least two rows");
  return p;
}

void write_path_rate_csv(const std::string& path, const Model& model,
                         const PathRateResult& result) {
  auto out = open_out(path);
  const int d = model.dim();
  const int L = model.num_states();
  out << "t_mid";
  for (int i = 1; i <= d; ++i) out << ",slope_" << i;
  out << ",L_value,feasible";
  for (int i = 1; i <= L; ++i) out << ",pi_" << i;
  for (auto [i, j] : model.transitions()) out << ",q_" << i + 1 << "_" << j + 1;
  out << ",cumulative_I\n";
  for (const auto& s : result.slices) {
    out << format_double(s.t_mid);
    for (int i = 0; i < d; ++i) out << "," << format_double(s.slope[i]);
    out << "," << format_double(s.local.feasible ? s.local.value : 0.0) << ","
        << (s.local.feasible ? 1 : 0);
    if (s.local.argmin) {
      for (int i = 0; i < L; ++i)
        out << "," << format_double(s.local.argmin->pi[i]);
      for (double q : s.local.argmin->q) out << "," << format_double(q);
    } else {
      for (int i = 0; i < L + model.num_channels(); ++i) out << ",nan";
    }
    out << "," << format_double(s.cumulative) << "\n";
  }
}

void write_sweep_csv(const std::string& path, const SweepResult& sweep) {
  auto out = open_out(path);
  out << "epsilon,N,p_hat,stderr,neg_eps_log_p,censored\n";
  for (const auto& r : sweep.rows)
    out << format_double(r.eps) << "," << r.n << "," << format_double(r.p_hat)
        << "," << format_double(r.stderr_) << ","
        << format_double(r.neg_eps_log_p) << "," << (r.censored ? 1 : 0)
        << "\n";
}

void write_tilt_csv(const std::string& path, const std::vector<TiltRow>& rows) {
  auto out = open_out(path);
  out << "epsilon,n,mean_sup_dev,mean_cost,cost_stderr,det_cost\n";
  for (const auto& r : rows)
    out << format_double(r.eps) << "," << r.n << ","
        << format_double(r.mean_sup_dev) << "," << format_double(r.mean_cost)
        << "," << format_double(r.cost_stderr) << ","
        << format_double(r.det_cost) << "\n";
}

void write_occupation_csv(const std::string& path, const Eigen::VectorXd& frac) {
  auto out = open_out(path);
  out << "state,fraction\n";
  for (int i = 0; i < frac.size(); ++i)
    out << i + 1 << "," << format_double(frac[i]) << "\n";
}

void write_perturb_tables_csv(const std::string& path, const Model& model,
                              const PerturbResult& pr) {
  auto out = open_out(path);
  const int L = model.num_states();
  const int m = model.brownian_dim();
  const int d = model.dim();
  out << "t";
  for (int i = 1; i <= d; ++i) out << ",xi_star_" << i;
  for (int i = 1; i <= L; ++i) out << ",pi_" << i;
  for (int i = 1; i <= L; ++i)
    for (int k = 1; k <= m; ++k) out << ",u_" << i << "_" << k;
  for (auto [i, j] : model.transitions()) out << ",q_" << i + 1 << "_" << j + 1;
  for (auto [i, j] : model.transitions())
    out << ",phi_" << i + 1 << "_" << j + 1;
  out << "\n";
  for (int s = 0; s < pr.star.num_slices(); ++s) {
    out << format_double(pr.star.t[s]);
    for (int i = 0; i < d; ++i) out << "," << format_double(pr.xi_star.x[s][i]);
    for (int i = 0; i < L; ++i) out << "," << format_double(pr.star.pi[s][i]);
    for (int i = 0; i < L; ++i)
      for (int k = 0; k < m; ++k)
        out << "," << format_double(pr.star.u[s](i, k));
    for (double q : pr.star.q[s]) out << "," << format_double(q);
    for (double phi : pr.phi_star[s]) out << "," << format_double(phi);
    out << "\n";
  }
}

json validation_json(const ValidationReport& report) {
  json checks = json::array();
  for (const auto& c : report.checks)
    checks.push_back({{"name", c.name}, {"passed", c.passed},
                      {"detail", c.detail}});
  return json{
      {"passed", report.passed},
      {"bounds",
       {{"varsigma_bar", report.bounds.varsigma_bar},
        {"zeta", report.bounds.zeta},
        {"varsigma_low", report.bounds.varsigma_low},
        {"kappa1", report.bounds.kappa1},
        {"kappa2", report.bounds.kappa2},
        {"kappa3", report.bounds.kappa3},
        {"alpha", report.bounds.alpha},
        {"d_lip", report.bounds.d_lip},
        {"r_floor", report.bounds.r_floor}}},
      {"checks", checks}};
}

json perturb_json(const PerturbResult& pr) {
  return json{{"delta_star", pr.delta_star}, {"m2", pr.m2},   {"m3", pr.m3},
              {"K", pr.K},                   {"K1", pr.K1},   {"M", pr.M},
              {"M0", pr.M0},                 {"m0", pr.m0},   {"m1", pr.m1},
              {"nu_floor", pr.nu_floor},     {"r_floor", pr.r_floor},
              {"cost_input", pr.cost_input}, {"cost_star", pr.cost_star},
              {"path_deviation", pr.path_deviation}};
}

json compare_json(const CompareReport& rep) {
  json rows = json::array();
  for (const auto& r : rep.sweep.rows)
    rows.push_back({{"epsilon", r.eps},
                    {"N", r.n},
                    {"p_hat", r.p_hat},
                    {"stderr", r.stderr_},
                    {"neg_eps_log_p", r.neg_eps_log_p},
                    {"censored", r.censored}});
  return json{{"I_star", rep.variational.I_star},
              {"refined_I", rep.variational.refined_I},
              {"optimizer_ok", rep.variational.optimizer_ok},
              {"terminal_violation", rep.variational.terminal_violation},
              {"evaluations", rep.variational.evaluations},
              {"slope_fit", rep.sweep.slope},
              {"slope_valid", rep.sweep.slope_valid},
              {"cells_used", rep.sweep.cells_used},
              {"relative_gap", rep.relative_gap},
              {"note", rep.note},
              {"sweep", rows}};
}

void write_manifest(const std::string& out_dir, const RunManifest& manifest,
                    const json& params_echo) {
  json doc{{"subcommand", manifest.subcommand},
           {"config_hash", manifest.config_hash},
           {"seed", manifest.seed},
           {"params", params_echo},
           {"artifacts", manifest.artifacts},
           {"wall_seconds", manifest.wall_seconds}};
  auto out = open_out(out_dir + "/run.json");
  out << doc.dump(2) << "\n";
}

std::vector<std::pair<std::uint64_t, std::uint64_t>> seed_streams(
    std::uint64_t seed, int n) {
  if (n < 1) throw std::invalid_argument("seed_streams requires n >= 1");
  std::vector<std::pair<std::uint64_t, std::uint64_t>> out;
  out.reserve(n);
  for (int i = 1; i <= n; ++i) out.emplace_back(seed, std::uint64_t(i));
  return out;
}

}  // namespace switchdiff
