#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "opera/policy.hpp"
#include "opera/trajectory.hpp"

namespace opera {

// Structural facts estimators need beyond the dataset itself. Observation and
// action counts are taken from the evaluation policy's dimensions.
struct EvalContext {
  double discount = 1.0;
  int horizon = 0;

  void validate() const;
};

// Trajectory-wise importance sampling: mean over trajectories of
// (product of per-step probability ratios) * discounted return.
double is_estimate(const TabularPolicy& policy, const Dataset& data, double discount);

// Self-normalized variant. Throws EstimatorError("degenerate weights") when
// every trajectory weight is zero.
double wis_estimate(const TabularPolicy& policy, const Dataset& data, double discount);

// Cross-fitted tabular fitted Q evaluation.
//
// Folds are assigned by hashing trajectory contents with the seed, numbering
// exact duplicates so copies spread across folds; the assignment is invariant
// to dataset order either way. Each fold's Q is fit on
// the complement by `iterations` empirical Bellman backups over (observation,
// action) pairs; unseen pairs default to Q = 0, and the value bootstraps to 0
// past the end of a trajectory. The estimate averages the per-fold values of
// the held-out initial observations under the policy. iterations <= 0 means
// "use the horizon". folds == 1 disables cross-fitting.
double fqe_estimate(const TabularPolicy& policy, const Dataset& data, const EvalContext& ctx,
                    int folds, int iterations, std::uint64_t seed);

// fqe_estimate with an explicit fold id per trajectory (exposed for tests).
double fqe_estimate_with_folds(const TabularPolicy& policy, const Dataset& data,
                               const EvalContext& ctx, const std::vector<int>& fold_of,
                               int folds, int iterations);

// Per-fold Q tables as fit by fqe, indexed [fold][obs * A + a]. Used by the
// doubly robust estimator and exposed for tests.
std::vector<std::vector<double>> fit_q_tables(const TabularPolicy& policy, const Dataset& data,
                                              const EvalContext& ctx,
                                              const std::vector<int>& fold_of, int folds,
                                              int iterations);

// Maximum-likelihood tabular model over observations (unseen pairs self-loop
// with zero reward; trajectory ends count as transitions to an absorbing
// sink), evaluated exactly by finite-horizon dynamic programming.
double mb_estimate(const TabularPolicy& policy, const Dataset& data, const EvalContext& ctx);

// Per-decision doubly robust estimate with a cross-fitted tabular Q as the
// control variate (same folds/iterations conventions as fqe).
double dr_estimate(const TabularPolicy& policy, const Dataset& data, const EvalContext& ctx,
                   int folds, int iterations, std::uint64_t seed);

// A named off-policy estimator bound to its hyperparameters. estimate must be
// deterministic given (policy, data, seed) and safe to call concurrently on
// distinct datasets.
struct OpeEstimator {
  std::string id;
  std::function<double(const TabularPolicy&, const Dataset&, std::uint64_t seed)> estimate;
};

// Builds an estimator from a registry id: "is", "wis", "fqe", "mb", "dr"
// ("dm-kernel:<bandwidth>" ids belong to the bandit path and are rejected
// here). folds/iterations apply to fqe and dr. Unknown ids -> ConfigError.
OpeEstimator make_estimator(const std::string& id, const EvalContext& ctx, int folds,
                            int iterations);

}  // namespace opera
