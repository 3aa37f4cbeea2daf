#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "latentdyad/dyadic_data.hpp"
#include "latentdyad/model.hpp"
#include "latentdyad/netstats.hpp"
#include "latentdyad/sampler.hpp"

namespace latentdyad {

// Synthetic network generator. With explicit clusters every member sits at its
// cluster centre; otherwise sites come from a CRP(alpha) partition with H0(kappa)
// coordinates.
struct GeneratorCluster {
  std::vector<double> center;
  std::size_t size = 0;
};

struct GeneratorSpec {
  std::vector<GeneratorCluster> clusters;
  std::size_t n = 100;  // used only without explicit clusters
  double alpha = 4.0;
  double kappa = 2.0;
  std::size_t dim = 2;
  PopulationParams params;
  int weeks = 26;

  nlohmann::json to_json() const;
  static GeneratorSpec from_json(const nlohmann::json& j);
};

struct SimulatedNetwork {
  ClusterTable clusters;
  PopulationParams params;
  DyadTable table;                          // counts over [0, weeks)
  std::vector<InteractionRecord> records;   // one per contact, week uniform over the window
};

// Contacts of each dyad are spread uniformly over the weeks, which matches a
// constant Poisson rate; the caller side is picked at random.
SimulatedNetwork simulate_records(const GeneratorSpec& spec, Rng& rng);

struct ExportOptions {
  bool jitter = false;
  double jitter_half_width = 0.03;
  bool svg = false;
  bool edges = false;
  std::optional<std::size_t> sweep;  // default: draw with the largest loglik

  void validate() const;
};

struct PpcSettings {
  std::size_t replicates = 100;
  ClusteringMode clustering = ClusteringMode::Transitivity;
};

struct PredictSettings {
  std::vector<double> q_percents = {0.1, 0.2, 1.0};
  std::optional<double> horizon;  // default: holdout duration
  bool write_scores = true;
  std::size_t max_draws = 200;    // stored draws are thinned evenly down to this
};

struct ScalingSettings {
  std::vector<double> alphas = {0.5, 20.0, 300.0};
  std::vector<std::size_t> sizes = {100, 500, 1000};
};

struct RunConfig {
  std::string input;
  std::string out = "out";
  std::string draws;  // default: <out>/draws.jsonl, or the fit output of the same out dir
  std::uint64_t seed = 1;
  std::size_t threads = 1;
  std::optional<int> boundary_week;
  std::optional<ObservationWindow> window;  // default: [min week, max week + 1)
  SamplerConfig sampler;
  HyperpriorConfig hyper;
  GeneratorSpec generator;
  ExportOptions export_options;
  PpcSettings ppc;
  PredictSettings predict;
  ScalingSettings scaling;

  // Throws ConfigError on unknown keys or bad values.
  static RunConfig from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
  void validate() const;
};

// Command-line values that take precedence over the config document.
struct CliOverrides {
  std::optional<std::string> config;
  std::optional<std::string> input;
  std::optional<std::string> out;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> threads;
  std::optional<std::string> variant;
  std::optional<int> boundary_week;
  std::optional<double> fixed_alpha;
  std::vector<double> q_percents;
};

RunConfig resolve_config(const CliOverrides& overrides);

// Exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitData = 3;
inline constexpr int kExitNumerical = 4;

int cmd_simulate(const RunConfig& config, std::ostream& log);
int cmd_fit(const RunConfig& config, std::ostream& log);
int cmd_stats(const RunConfig& config, std::ostream& log);
int cmd_ppc(const RunConfig& config, std::ostream& log);
int cmd_predict(const RunConfig& config, std::ostream& log);
int cmd_export(const RunConfig& config, std::ostream& log);
int cmd_scaling(const RunConfig& config, std::ostream& log);

// Runs a command by name, mapping exceptions to exit codes.
int run_command(const std::string& command, const CliOverrides& overrides, std::ostream& log, std::ostream& err);

int cli_main(int argc, char** argv);

}  // namespace latentdyad
