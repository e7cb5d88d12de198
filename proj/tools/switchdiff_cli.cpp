#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "switchdiff/experiments.hpp"
#include "switchdiff/io.hpp"
#include "switchdiff/perturb.hpp"

using nlohmann::json;
using namespace switchdiff;

namespace {

struct CommonArgs {
  std::string config_path;
  std::string out_dir = ".";
  std::string path_csv;
  std::uint64_t seed = 0;
  bool seed_set = false;
  int threads = 0;
};

int resolve_threads(int flag_value) {
  if (flag_value > 0) return flag_value;
  if (const char* env = std::getenv("SWITCHDIFF_THREADS")) {
    int v = std::atoi(env);
    if (v > 0) return v;
  }
  unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? int(hw) : 1;
}

Eigen::VectorXd vec_arg(const json& sec, const char* key, int d) {
  if (!sec.contains(key))
    throw ConfigError(std::string("missing config key: ") + key);
  std::vector<double> v = sec.at(key).get<std::vector<double>>();
  if (int(v.size()) != d)
    throw ConfigError(std::string(key) + ": expected " + std::to_string(d) +
                      " entries");
  return Eigen::Map<const Eigen::VectorXd>(v.data(), d);
}

const json& section(const json& config, const char* name) {
  static const json empty = json::object();
  if (config.contains(name)) return config.at(name);
  return empty;
}

ProbeSpec probe_from(const json& sec, int d) {
  ProbeSpec probe;
  probe.lo = Eigen::VectorXd::Constant(d, -5.0);
  probe.hi = Eigen::VectorXd::Constant(d, 5.0);
  if (sec.contains("probe")) {
    const json& p = sec.at("probe");
    if (p.contains("lo")) probe.lo = vec_arg(p, "lo", d);
    if (p.contains("hi")) probe.hi = vec_arg(p, "hi", d);
    probe.count = p.value("count", probe.count);
    probe.seed = p.value("seed", probe.seed);
  }
  return probe;
}

std::uint64_t pick_seed(const CommonArgs& args, const json& sec) {
  if (args.seed_set) return args.seed;
  return sec.value("seed", std::uint64_t(1));
}

int run(const std::string& cmd, const CommonArgs& args) {
  auto t_start = std::chrono::steady_clock::now();
  std::filesystem::create_directories(args.out_dir);

  std::ifstream raw_in(args.config_path, std::ios::binary);
  if (!raw_in) throw ConfigError("cannot open config file: " + args.config_path);
  std::stringstream raw;
  raw << raw_in.rdbuf();
  json config;
  try {
    config = json::parse(raw.str());
  } catch (const json::parse_error& e) {
    throw ConfigError("config parse error in " + args.config_path + ": " +
                      e.what());
  }

  Model model = build_model(parse_model_config(model_section(config)));
  const int threads = resolve_threads(args.threads);
  const std::string out = args.out_dir;

  RunManifest manifest;
  manifest.subcommand = cmd;
  manifest.config_hash = fnv1a(raw.str());
  json echo = json::object();
  int exit_code = 0;

  if (cmd == "validate") {
    const json& sec = section(config, "validate");
    ValidationReport report = validate_model(model, probe_from(sec, model.dim()));
    std::ofstream(out + "/validate.json") << validation_json(report).dump(2)
                                          << "\n";
    manifest.artifacts.push_back("validate.json");
    echo["passed"] = report.passed;
    if (!report.passed) exit_code = 4;
  } else if (cmd == "simulate") {
    const json& sec = section(config, "simulate");
    double eps = sec.value("eps", 0.1);
    double T = sec.value("T", 1.0);
    double h = sec.value("h", 0.01);
    int y0 = sec.value("y0", 1) - 1;
    manifest.seed = pick_seed(args, sec);
    Trajectory traj = simulate(model, eps, vec_arg(sec, "x0", model.dim()), y0,
                               T, h, manifest.seed);
    write_trajectory_csv(out + "/trajectory.csv", traj);
    write_jumps_csv(out + "/jumps.csv", traj);
    manifest.artifacts = {"trajectory.csv", "jumps.csv"};
    echo = {{"eps", eps}, {"T", T}, {"h", h}, {"y0", y0 + 1},
            {"n_jumps", traj.jumps.size()}};
  } else if (cmd == "average") {
    const json& sec = section(config, "average");
    double T = sec.value("T", 1.0);
    double h = sec.value("h", 0.001);
    Eigen::VectorXd x0 = vec_arg(sec, "x0", model.dim());
    Path avg = solve_averaged_ode(model, x0, T, h);
    write_path_csv(out + "/averaged.csv", avg);
    manifest.artifacts.push_back("averaged.csv");
    echo = {{"T", T}, {"h", h}};
    if (sec.contains("lln")) {
      const json& l = sec.at("lln");
      manifest.seed = pick_seed(args, l);
      auto rows = lln_diagnostic(model, x0, l.value("y0", 1) - 1,
                                 l.at("eps_list").get<std::vector<double>>(),
                                 l.value("N", 100), manifest.seed, T,
                                 l.value("h", 0.01), threads);
      write_lln_csv(out + "/lln.csv", rows);
      manifest.artifacts.push_back("lln.csv");
    }
  } else if (cmd == "occupation") {
    const json& sec = section(config, "occupation");
    double eps = sec.value("eps", 0.1);
    double T = sec.value("T", 1.0);
    double h = sec.value("h", 0.01);
    manifest.seed = pick_seed(args, sec);
    Trajectory traj = simulate(model, eps, vec_arg(sec, "x0", model.dim()),
                               sec.value("y0", 1) - 1, T, h, manifest.seed);
    write_occupation_csv(out + "/occupation.csv",
                         occupation_measure(traj, sec.value("t", T)));
    manifest.artifacts = {"occupation.csv"};
    echo = {{"eps", eps}, {"T", T}, {"t", sec.value("t", T)}};
  } else if (cmd == "ratefn") {
    if (args.path_csv.empty())
      throw ConfigError("ratefn requires --path PATH.csv");
    Path p = read_path_csv(args.path_csv);
    LocalRateOptions lopts;
    const json& sec = section(config, "ratefn");
    lopts.multistarts = sec.value("multistarts", lopts.multistarts);
    lopts.max_iter = sec.value("max_iter", lopts.max_iter);
    PathRateResult result = path_rate(model, p, lopts, threads);
    write_path_rate_csv(out + "/path_rate.csv", model, result);
    manifest.artifacts = {"path_rate.csv"};
    echo = {{"I", result.finite ? result.value : -1.0},
            {"finite", result.finite},
            {"infeasible_slice", result.infeasible_slice}};
    std::cout << "I = " << (result.finite ? format_double(result.value) : "inf")
              << "\n";
  } else if (cmd == "perturb") {
    const json& sec = section(config, "perturb");
    double T = sec.value("T", 1.0);
    int slices = sec.value("num_slices", 200);
    double gamma = sec.value("gamma", 0.1);
    Eigen::VectorXd x0 = vec_arg(sec, "x0", model.dim());
    auto [xi, tables] = zero_cost_triple(model, x0, T, slices);
    PerturbOptions popts;
    popts.bounds = validate_model(model, probe_from(sec, model.dim())).bounds;
    PerturbResult pr = perturb_triple(model, xi, tables, gamma, popts);
    std::ofstream(out + "/perturb.json") << perturb_json(pr).dump(2) << "\n";
    write_perturb_tables_csv(out + "/perturb_tables.csv", model, pr);
    manifest.artifacts = {"perturb.json", "perturb_tables.csv"};
    echo = {{"T", T}, {"num_slices", slices}, {"gamma", gamma},
            {"delta_star", pr.delta_star}};
  } else if (cmd == "sweep" || cmd == "compare") {
    const json& sec = section(config, cmd.c_str());
    double T = sec.value("T", 1.0);
    double h = sec.value("h", 0.01);
    int y0 = sec.value("y0", 1) - 1;
    Eigen::VectorXd x0 = vec_arg(sec, "x0", model.dim());
    EventSpec event = parse_event(sec.at("event"));
    auto eps_list = sec.at("eps_list").get<std::vector<double>>();
    auto N_list = sec.at("N_list").get<std::vector<int>>();
    manifest.seed = pick_seed(args, sec);
    echo = {{"T", T}, {"h", h}, {"eps_list", eps_list}, {"N_list", N_list}};
    if (cmd == "sweep") {
      SweepResult sweep = eps_sweep(model, x0, y0, T, h, event, eps_list,
                                    N_list, manifest.seed, threads);
      write_sweep_csv(out + "/sweep.csv", sweep);
      manifest.artifacts = {"sweep.csv"};
      echo["slope"] = sweep.slope;
      echo["slope_valid"] = sweep.slope_valid;
    } else {
      TranscriptionOptions topts;
      topts.k_nodes = sec.value("k_nodes", topts.k_nodes);
      topts.multistarts = sec.value("multistarts", topts.multistarts);
      topts.refine_check = sec.value("refine_check", topts.refine_check);
      CompareReport rep = ldp_compare(model, x0, y0, T, h, event, eps_list,
                                      N_list, manifest.seed, topts, threads);
      std::ofstream(out + "/compare.json") << compare_json(rep).dump(2) << "\n";
      write_sweep_csv(out + "/sweep.csv", rep.sweep);
      manifest.artifacts = {"compare.json", "sweep.csv"};
      echo["I_star"] = rep.variational.I_star;
      echo["slope"] = rep.sweep.slope;
    }
  } else if (cmd == "tilt") {
    const json& sec = section(config, "tilt");
    double T = sec.value("T", 1.0);
    int slices = sec.value("num_slices", 200);
    double gamma = sec.value("gamma", 0.1);
    double h = sec.value("h", 0.01);
    int y0 = sec.value("y0", 1) - 1;
    int N = sec.value("N", 200);
    Eigen::VectorXd x0 = vec_arg(sec, "x0", model.dim());
    auto eps_list = sec.at("eps_list").get<std::vector<double>>();
    manifest.seed = pick_seed(args, sec);
    auto [xi, tables] = zero_cost_triple(model, x0, T, slices);
    PerturbOptions popts;
    popts.bounds = validate_model(model, probe_from(sec, model.dim())).bounds;
    PerturbResult pr = perturb_triple(model, xi, tables, gamma, popts);
    auto rows = tilted_convergence(model, pr, y0, h, eps_list, N,
                                   manifest.seed, threads);
    write_tilt_csv(out + "/tilt.csv", rows);
    manifest.artifacts = {"tilt.csv"};
    echo = {{"T", T}, {"gamma", gamma}, {"N", N}, {"eps_list", eps_list}};
  }

  manifest.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start)
          .count();
  manifest.artifacts.push_back("run.json");
  write_manifest(out, manifest, echo);
  return exit_code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Two-scale Markov-modulated diffusion toolkit"};
  app.require_subcommand(1);

  CommonArgs args;
  std::string cmd;
  const std::vector<std::string> names = {"validate", "simulate", "average",
                                          "occupation", "ratefn", "perturb",
                                          "sweep", "compare", "tilt"};
  for (const auto& name : names) {
    CLI::App* sub = app.add_subcommand(name);
    sub->add_option("--config", args.config_path, "JSON config file")
        ->required();
    sub->add_option("--out", args.out_dir, "output directory");
    sub->add_option("--seed", args.seed, "seed override")
        ->each([&](const std::string&) { args.seed_set = true; });
    sub->add_option("--threads", args.threads, "worker thread cap");
    if (name == "ratefn")
      sub->add_option("--path", args.path_csv, "path CSV (t,x_1..x_d)");
    sub->callback([&app, &cmd] { cmd = app.get_subcommands().front()->get_name(); });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    return run(cmd, args);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const ModelError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const ReducibleError& e) {
    std::cerr << "validation error: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return 3;
  }
}
