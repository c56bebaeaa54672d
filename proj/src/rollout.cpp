#include "opera/rollout.hpp"

#include <span>

#include "opera/errors.hpp"

namespace opera {

Trajectory simulate_episode(const TabularMdp& mdp, const TabularPolicy& policy, RngStream rng) {
  if (policy.num_observations() != mdp.num_observations())
    throw ConfigError("policy covers " + std::to_string(policy.num_observations()) +
                      " observations, environment has " + std::to_string(mdp.num_observations()));
  if (policy.num_actions() != mdp.num_actions)
    throw ConfigError("policy action count does not match environment");

  if (mdp.horizon < 1) throw ConfigError("rollout requires horizon >= 1");

  Trajectory traj;
  int s = rng.sample_index(std::span<const double>(mdp.initial));
  for (int t = 0; t < mdp.horizon; ++t) {
    // The first step is always logged (an absorbing start yields one zero-reward
    // self-loop step) so trajectories are never empty.
    if (t > 0 && mdp.is_absorbing(s)) break;
    const int obs = mdp.observation(s);
    const std::vector<double>& action_probs = policy.row(obs);
    const int a = rng.sample_index(std::span<const double>(action_probs));
    const double p_behavior = action_probs[static_cast<std::size_t>(a)];

    std::span<const double> row(&mdp.transition[mdp.idx(s, a, 0)],
                                static_cast<std::size_t>(mdp.num_states));
    const int s2 = rng.sample_index(row);
    traj.steps.push_back(Step{s, obs, a, p_behavior, mdp.r(s, a, s2), s2});
    s = s2;
  }
  return traj;
}

Dataset rollout(const TabularMdp& mdp, const TabularPolicy& policy, int n, std::uint64_t seed) {
  if (n <= 0) throw ConfigError("rollout requires n >= 1");
  RngStream root(seed);
  Dataset data;
  data.trajectories.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i)
    data.trajectories.push_back(
        simulate_episode(mdp, policy, root.child(static_cast<std::uint64_t>(i))));
  return data;
}

}  // namespace opera
