#include "opera/value.hpp"

#include <cmath>

#include "opera/errors.hpp"
#include "opera/rng.hpp"
#include "opera/rollout.hpp"

namespace opera {

double discounted_return(const Trajectory& trajectory, double discount) {
  double g = 0.0;
  double w = 1.0;
  for (const Step& st : trajectory.steps) {
    g += w * st.reward;
    w *= discount;
  }
  return g;
}

double true_value_dp(const TabularMdp& mdp, const TabularPolicy& policy) {
  if (mdp.horizon == 0) throw EstimatorError("empty horizon");
  const int S = mdp.num_states;
  const int A = mdp.num_actions;

  // v[s] holds the value of s with h steps to go; built up from h = 0.
  std::vector<double> v(static_cast<std::size_t>(S), 0.0);
  std::vector<double> next(static_cast<std::size_t>(S), 0.0);
  for (int h = 0; h < mdp.horizon; ++h) {
    for (int s = 0; s < S; ++s) {
      const std::vector<double>& action_probs = policy.row(mdp.observation(s));
      double val = 0.0;
      for (int a = 0; a < A; ++a) {
        const double pa = action_probs[static_cast<std::size_t>(a)];
        if (pa == 0.0) continue;
        double q = 0.0;
        const std::size_t base = mdp.idx(s, a, 0);
        for (int s2 = 0; s2 < S; ++s2) {
          const double pr = mdp.transition[base + static_cast<std::size_t>(s2)];
          if (pr == 0.0) continue;
          q += pr * (mdp.reward[base + static_cast<std::size_t>(s2)] +
                     mdp.discount * v[static_cast<std::size_t>(s2)]);
        }
        val += pa * q;
      }
      next[static_cast<std::size_t>(s)] = val;
    }
    std::swap(v, next);
  }

  double j = 0.0;
  for (int s = 0; s < S; ++s) j += mdp.initial[static_cast<std::size_t>(s)] * v[static_cast<std::size_t>(s)];
  return j;
}

MonteCarloValue true_value_mc(const TabularMdp& mdp, const TabularPolicy& policy,
                              std::int64_t episodes, std::uint64_t seed) {
  if (episodes < 1) throw ConfigError("true_value_mc requires episodes >= 1");
  RngStream root(seed);
  double sum = 0.0;
  double sum_sq = 0.0;
  for (std::int64_t i = 0; i < episodes; ++i) {
    Trajectory traj =
        simulate_episode(mdp, policy, root.child(static_cast<std::uint64_t>(i)));
    const double g = discounted_return(traj, mdp.discount);
    sum += g;
    sum_sq += g * g;
  }
  const double n = static_cast<double>(episodes);
  const double mean = sum / n;
  double var = (sum_sq - n * mean * mean) / (n > 1 ? n - 1 : 1);
  if (var < 0.0) var = 0.0;  // fp cancellation on degenerate data
  return MonteCarloValue{mean, std::sqrt(var / n)};
}

}  // namespace opera
