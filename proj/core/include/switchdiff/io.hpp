#ifndef SWITCHDIFF_IO_HPP
#define SWITCHDIFF_IO_HPP

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "switchdiff/averaging.hpp"
#include "switchdiff/experiments.hpp"
#include "switchdiff/model.hpp"
#include "switchdiff/perturb.hpp"
#include "switchdiff/ratefn.hpp"
#include "switchdiff/simulator.hpp"

namespace switchdiff {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// 17-significant-digit decimal rendering (round-trips binary64).
std::string format_double(double v);

/// FNV-1a over the raw bytes; platform-stable.
std::uint64_t fnv1a(const std::string& bytes);

/// Model document <-> BuildConfig.  States and T_set indices are 1-based in
/// JSON and 0-based in memory.
BuildConfig parse_model_config(const nlohmann::json& doc);
nlohmann::json model_config_json(const Model& model);

/// Reads the config file; the model document is either the whole object or
/// under "model".  Parse failures carry line/column in the message.
nlohmann::json load_config(const std::string& path);
const nlohmann::json& model_section(const nlohmann::json& config);

EventSpec parse_event(const nlohmann::json& doc);

// CSV emission; every writer emits a header row and 17-digit decimals.
void write_trajectory_csv(const std::string& path, const Trajectory& traj);
void write_jumps_csv(const std::string& path, const Trajectory& traj);
void write_ensemble_csv(const std::string& path,
                        const std::vector<TrajectorySummary>& rows);
void write_lln_csv(const std::string& path, const std::vector<LlnRow>& rows);
void write_path_csv(const std::string& path, const Path& p);
Path read_path_csv(const std::string& path);
void write_path_rate_csv(const std::string& path, const Model& model,
                         const PathRateResult& result);
void write_sweep_csv(const std::string& path, const SweepResult& sweep);
void write_tilt_csv(const std::string& path, const std::vector<TiltRow>& rows);
void write_occupation_csv(const std::string& path, const Eigen::VectorXd& frac);
void write_perturb_tables_csv(const std::string& path, const Model& model,
                              const PerturbResult& pr);

nlohmann::json validation_json(const ValidationReport& report);
nlohmann::json perturb_json(const PerturbResult& pr);
nlohmann::json compare_json(const CompareReport& rep);

struct RunManifest {
  std::string subcommand;
  std::uint64_t config_hash = 0;
  std::uint64_t seed = 0;
  std::vector<std::string> artifacts;
  double wall_seconds = 0;
};

void write_manifest(const std::string& out_dir, const RunManifest& manifest,
                    const nlohmann::json& params_echo);

/// Simulation stream descriptors (seed, 1..n): the counter-based purity
/// contract makes these sufficient to reproduce any draw.
std::vector<std::pair<std::uint64_t, std::uint64_t>> seed_streams(
    std::uint64_t seed, int n);

}  // namespace switchdiff

#endif
