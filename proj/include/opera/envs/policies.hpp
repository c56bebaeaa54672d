#pragma once

#include "opera/mdp.hpp"
#include "opera/policy.hpp"

namespace opera::envs {

// Deterministic greedy policy over *states* from finite-horizon backward
// induction (greedy w.r.t. the full-horizon Q at the initial step; ties break
// toward the lowest action id).
TabularPolicy optimal_state_policy(const TabularMdp& mdp);

// Project a state-indexed policy to observations by averaging the action
// distributions of the states behind each observation (uniform over states).
TabularPolicy marginalize_to_observations(const TabularMdp& mdp, const TabularPolicy& state_policy);

// optimal_state_policy followed by marginalize_to_observations. For fully
// observed models this is just the optimal policy.
TabularPolicy optimal_policy(const TabularMdp& mdp);

// (1 - epsilon) * policy + epsilon * uniform. epsilon in [0, 1].
TabularPolicy noised_policy(const TabularPolicy& policy, double epsilon);

}  // namespace opera::envs
