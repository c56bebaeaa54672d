#pragma once

#include <string>
#include <vector>

#include "opera/harness/config.hpp"
#include "opera/harness/table.hpp"
#include "opera/policy.hpp"
#include "opera/value.hpp"

namespace opera {

struct ExperimentResult {
  std::vector<ResultRow> rows;
  int total_failures = 0;           // hard-failed trials across all cells
  std::vector<std::string> notes;   // one line per failure (policy, n, trial, cause)
};

// Runs the full study: for every (evaluation policy, dataset size, trial),
// log a dataset under the behavior policy, bootstrap all estimators on shared
// resamples, score every configured method, and aggregate per-cell MSE
// against the ground truth. Per-cell rows carry the base estimators first
// (under their ids), then the methods, both in config order.
//
// Seeds derive from (config.seed, policy index, n, trial, stage), so results
// are identical for any thread count. A trial where an estimator fails
// hard (e.g. collapses under subsampling) is recorded, excluded from the
// aggregation, and surfaced in the failures column; such failures make the
// CLI exit nonzero but do not stop the run.
ExperimentResult run_experiment(const ExperimentConfig& config, int threads = 1);

// Ground truth for one policy spec in the configured environment: exact DP
// for the tabular environments, Monte Carlo (truth_episodes draws) for the
// bandit. The MC path reports its standard error; DP reports 0.
MonteCarloValue experiment_truth(const ExperimentConfig& config, const PolicySpec& policy);

}  // namespace opera
