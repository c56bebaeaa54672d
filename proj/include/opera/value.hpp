#pragma once

#include <cstdint>

#include "opera/mdp.hpp"
#include "opera/policy.hpp"
#include "opera/trajectory.hpp"

namespace opera {

// Sum of discount^t * reward_t over the trajectory.
double discounted_return(const Trajectory& trajectory, double discount);

struct MonteCarloValue {
  double mean = 0.0;
  double stderr_ = 0.0;
};

// Exact finite-horizon policy value by backward induction over states.
// The policy is indexed by observation; values are propagated on states, so
// the result is exact for partially observed models as well.
// Throws EstimatorError("empty horizon") when mdp.horizon == 0.
double true_value_dp(const TabularMdp& mdp, const TabularPolicy& policy);

// Monte-Carlo policy value. Episode i draws its RNG stream from
// (seed, i) only, so the result is independent of evaluation order.
MonteCarloValue true_value_mc(const TabularMdp& mdp, const TabularPolicy& policy,
                              std::int64_t episodes, std::uint64_t seed);

}  // namespace opera
