#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "opera/bootstrap/bootstrap.hpp"
#include "opera/envs/bandit.hpp"
#include "opera/envs/graph.hpp"
#include "opera/envs/sepsis.hpp"

namespace opera {

// One estimator entry from the config. folds/iterations matter only for the
// estimators that cross-fit.
struct EstimatorSpec {
  std::string id;
  int folds = 2;
  int iterations = 0;  // 0: one backup per horizon step
};

// Policies are specified by their mixing level against the uniform policy:
// epsilon = 0 is the environment's optimal policy ("optimal"), anything else
// reads "noised:<epsilon>". Bandit policies reuse epsilon as the exploration
// mix of the softmax evaluation policy.
struct PolicySpec {
  double epsilon = 0.0;

  std::string label() const;
  static PolicySpec parse(const std::string& text);  // "optimal" | "noised:<eps>"
};

struct ExperimentConfig {
  std::string environment_id;  // "graph" | "sepsis" | "bandit"
  std::variant<envs::GraphConfig, envs::SepsisConfig, envs::BanditConfig> environment;

  PolicySpec behavior;                // ignored by the bandit (it logs its own softmax)
  std::vector<PolicySpec> policies;   // evaluation targets
  std::vector<int> dataset_sizes;
  int trials = 1;
  std::vector<EstimatorSpec> estimators;
  BootstrapPlan bootstrap;            // plan.seed is derived per trial, not taken from here
  std::vector<std::string> methods;   // opera, opera_is, opera_magic, best_ope, avg_ope
  std::string centering_estimator = "is";  // consistent anchor for opera_is
  std::uint64_t seed = 0;
  double v_max = 0.0;                 // <= 0: per-environment default
  std::string output;                 // empty: stdout only
  std::int64_t truth_episodes = 1000000;  // Monte Carlo truth draws (bandit)

  // Structural checks that need no environment work (unknown ids, empty
  // lists, impossible sizes). Fails fast before any dataset is generated.
  void validate() const;
};

// Builds a config from a parsed file. Unknown keys anywhere are errors.
ExperimentConfig parse_experiment_config(const nlohmann::json& j);

ExperimentConfig load_experiment_config(const std::string& path);

// The documented per-environment v_max defaults (graph: H+1, sepsis: 1,
// bandit: max |reward| over a fixed 1024-sample calibration draw).
double default_v_max(const ExperimentConfig& config);

}  // namespace opera
