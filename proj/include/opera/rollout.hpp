#pragma once

#include <cstdint>

#include "opera/mdp.hpp"
#include "opera/policy.hpp"
#include "opera/rng.hpp"
#include "opera/trajectory.hpp"

namespace opera {

// Simulate one episode: start from the initial distribution, act with the
// behavior policy, stop at an absorbing state or after mdp.horizon steps.
// Each step logs the probability the policy assigned to the sampled action.
Trajectory simulate_episode(const TabularMdp& mdp, const TabularPolicy& policy, RngStream rng);

// n episodes; episode i uses the stream derived from (seed, i), so the
// dataset is bitwise reproducible regardless of threading in the caller.
Dataset rollout(const TabularMdp& mdp, const TabularPolicy& policy, int n, std::uint64_t seed);

}  // namespace opera
