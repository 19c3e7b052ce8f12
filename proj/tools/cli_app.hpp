#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "json.hpp"

#include "mm1re/coefficients.hpp"
#include "mm1re/environment.hpp"
#include "mm1re/expansion_fit.hpp"
#include "mm1re/perturbation.hpp"

namespace mm1re::cli {

enum ExitCode : int {
  kOk = 0,
  kUsage = 1,
  kConfigError = 2,
  kValidationError = 3,
  kRuntimeAbort = 4,
};

enum class Experiment { moments_check, first_order, second_order, rsr_gap, fast_env, sweep };

struct ExperimentInfo {
  Experiment id;
  const char* name;
  const char* summary;
};
const std::vector<ExperimentInfo>& experiments();

using AnyEnvironment = std::variant<FiniteCtmc, OuEnvironment>;
using AnySpec =
    std::variant<PerturbationSpec<FiniteCtmc>, PerturbationSpec<OuEnvironment>>;

struct ExperimentConfig {
  nlohmann::json source;  // the file as parsed, echoed into the manifest
  Experiment experiment = Experiment::sweep;
  QueueParams queue;
  std::optional<AnyEnvironment> environment;
  std::optional<AnySpec> perturbation;
  double epsilon = 0.05;
  std::vector<double> eps_grid = default_eps_grid();
  std::vector<double> alphas{1.0, 4.0, 16.0, 64.0};
  std::optional<double> covariance_decay_rate;
  std::uint64_t n_replicas = 1'000'000;
  std::uint64_t coefficient_replicas = 100'000;
  std::size_t bootstrap_resamples = 200;
  std::uint64_t seed = 1;
  unsigned workers = 0;
  std::uint64_t max_events = kDefaultMaxEvents;
  std::filesystem::path output = "results";
};

// Parses and validates. Throws ConfigError for malformed files and
// ValidationError when the model violates a modelling assumption.
ExperimentConfig load_config(const std::filesystem::path& path);
ExperimentConfig parse_config(const nlohmann::json& j);

struct ResultRow {
  std::string name;
  double value;
  double std_error;
  std::uint64_t n_replicas;
  EstimateMethod method;
  std::string anchor;
};

struct RunOutput {
  std::vector<ResultRow> rows;
  std::optional<SweepResult> sweep;
  std::uint64_t replicas = 0;
  std::uint64_t aborted = 0;
  bool aborted_flag = false;
};

RunOutput run_experiment(const ExperimentConfig& config);

inline constexpr const char* kResultsSchema = "mm1re.results.v1";
void write_results_csv(std::ostream& os, const std::vector<ResultRow>& rows);

// Entry point for the command line tool; returns the process exit code.
int main_entry(int argc, char** argv);

}  // namespace mm1re::cli
