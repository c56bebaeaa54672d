#pragma once

#include <string>
#include <vector>

namespace opera {

// Finite tabular MDP (optionally partially observed through observation_map).
//
// transition and reward are dense [s][a][s'] tables stored flat. Every
// transition row sums to 1 within 1e-9. observation_map assigns each state an
// observation id; ids must form the contiguous range 0..num_observations-1 so
// they can index policy and estimator tables directly. discount in (0, 1];
// discount == 1 is allowed because the horizon is finite.
struct TabularMdp {
  int num_states = 0;
  int num_actions = 0;
  int horizon = 0;
  double discount = 1.0;
  std::vector<double> transition;   // num_states * num_actions * num_states
  std::vector<double> reward;       // num_states * num_actions * num_states
  std::vector<double> initial;      // num_states
  std::vector<int> observation_map; // num_states

  std::size_t idx(int s, int a, int s2) const {
    return (static_cast<std::size_t>(s) * static_cast<std::size_t>(num_actions) +
            static_cast<std::size_t>(a)) *
               static_cast<std::size_t>(num_states) +
           static_cast<std::size_t>(s2);
  }
  double p(int s, int a, int s2) const { return transition[idx(s, a, s2)]; }
  double r(int s, int a, int s2) const { return reward[idx(s, a, s2)]; }
  int observation(int s) const { return observation_map[static_cast<std::size_t>(s)]; }

  int num_observations() const;

  // Absorbing: every action self-loops with probability 1 and zero reward.
  bool is_absorbing(int s) const;

  // Throws ConfigError with the offending table entry in the message.
  void validate() const;

  void save_json(const std::string& path) const;
  static TabularMdp load_json(const std::string& path);
};

}  // namespace opera
