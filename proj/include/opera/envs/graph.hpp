#pragma once

#include "opera/mdp.hpp"

namespace opera::envs {

// Layered binary chain with horizon T.
//
// Base states are {0..2T}: 0 is the start, layer t (t = 1..T-1) holds the odd
// state 2t-1 and the even state 2t, and 2T is absorbing. From layer t action 0
// moves to the next layer's odd state and action 1 to its even state; with
// stochastic transitions the realized action flips with probability p_slip.
// Both actions leave layer T-1 into the absorbing state, so every episode has
// length exactly T. (State 2T-1 completes the numbering but is unreachable.)
//
// Rewards: entering an odd state pays +1, entering an even state pays -1
// (this includes the absorbing state), and the final transition additionally
// pays a +1 bonus when the penultimate state's parity matches
// penultimate_bonus_on_odd. With stochastic rewards the realized step reward
// is sign-flipped with probability p_rnoise; internally each state then gets
// a sign twin so the flip is part of the tabular dynamics, and the
// observation map collapses the twins again.
//
// Partially observed mode replaces state ids by layer ids: start, layers
// 1..T, absorbing -> T + 2 distinct observations.
struct GraphConfig {
  int horizon = 4;
  bool stochastic_transitions = false;
  double p_slip = 0.25;
  bool stochastic_rewards = false;
  double p_rnoise = 0.25;
  bool partially_observed = false;
  bool penultimate_bonus_on_odd = true;
  double discount = 1.0;

  void validate() const;
};

TabularMdp build_graph(const GraphConfig& config);

}  // namespace opera::envs
