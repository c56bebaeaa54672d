#include "opera/envs/policies.hpp"

#include <vector>

#include "opera/errors.hpp"

namespace opera::envs {

TabularPolicy optimal_state_policy(const TabularMdp& mdp) {
  if (mdp.horizon == 0) throw EstimatorError("empty horizon");
  const int S = mdp.num_states;
  const int A = mdp.num_actions;

  std::vector<double> v(static_cast<std::size_t>(S), 0.0);
  std::vector<double> next(static_cast<std::size_t>(S), 0.0);
  std::vector<int> greedy(static_cast<std::size_t>(S), 0);
  for (int h = 0; h < mdp.horizon; ++h) {
    for (int s = 0; s < S; ++s) {
      double best = 0.0;
      int best_a = 0;
      for (int a = 0; a < A; ++a) {
        double q = 0.0;
        const std::size_t base = mdp.idx(s, a, 0);
        for (int s2 = 0; s2 < S; ++s2) {
          const double pr = mdp.transition[base + static_cast<std::size_t>(s2)];
          if (pr == 0.0) continue;
          q += pr * (mdp.reward[base + static_cast<std::size_t>(s2)] +
                     mdp.discount * v[static_cast<std::size_t>(s2)]);
        }
        if (a == 0 || q > best) {
          best = q;
          best_a = a;
        }
      }
      next[static_cast<std::size_t>(s)] = best;
      greedy[static_cast<std::size_t>(s)] = best_a;
    }
    std::swap(v, next);
  }

  TabularPolicy policy(S, A);
  for (int s = 0; s < S; ++s) policy.set(s, greedy[static_cast<std::size_t>(s)], 1.0);
  policy.validate();
  return policy;
}

TabularPolicy marginalize_to_observations(const TabularMdp& mdp,
                                          const TabularPolicy& state_policy) {
  if (state_policy.num_observations() != mdp.num_states)
    throw ConfigError("state policy must cover every state");
  const int A = state_policy.num_actions();
  const int n_obs = mdp.num_observations();

  std::vector<std::vector<double>> rows(static_cast<std::size_t>(n_obs),
                                        std::vector<double>(static_cast<std::size_t>(A), 0.0));
  std::vector<int> counts(static_cast<std::size_t>(n_obs), 0);
  for (int s = 0; s < mdp.num_states; ++s) {
    const int o = mdp.observation(s);
    ++counts[static_cast<std::size_t>(o)];
    for (int a = 0; a < A; ++a)
      rows[static_cast<std::size_t>(o)][static_cast<std::size_t>(a)] += state_policy.prob(s, a);
  }
  for (int o = 0; o < n_obs; ++o)
    for (int a = 0; a < A; ++a)
      rows[static_cast<std::size_t>(o)][static_cast<std::size_t>(a)] /=
          static_cast<double>(counts[static_cast<std::size_t>(o)]);

  TabularPolicy policy(std::move(rows));
  return policy;
}

TabularPolicy optimal_policy(const TabularMdp& mdp) {
  return marginalize_to_observations(mdp, optimal_state_policy(mdp));
}

TabularPolicy noised_policy(const TabularPolicy& policy, double epsilon) {
  if (epsilon < 0.0 || epsilon > 1.0) throw ConfigError("epsilon must lie in [0, 1]");
  const int n_obs = policy.num_observations();
  const int A = policy.num_actions();
  TabularPolicy out(n_obs, A);
  const double u = epsilon / static_cast<double>(A);
  for (int o = 0; o < n_obs; ++o)
    for (int a = 0; a < A; ++a) out.set(o, a, (1.0 - epsilon) * policy.prob(o, a) + u);
  out.validate();
  return out;
}

}  // namespace opera::envs
