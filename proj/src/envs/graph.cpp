#include "opera/envs/graph.hpp"

#include <vector>

#include "opera/errors.hpp"

namespace opera::envs {

namespace {

struct Layout {
  int T;
  int base_count;  // 2T + 1
  bool twins;      // sign twins for stochastic rewards

  int absorbing() const { return 2 * T; }
  int layer(int x) const { return x == 0 ? 0 : (x + 1) / 2; }

  // Sign twin ids live at base + base_count; flipped == 1 negates the entry reward.
  int id(int base, int flipped) const { return flipped ? base + base_count : base; }
};

}  // namespace

void GraphConfig::validate() const {
  if (horizon < 2) throw ConfigError("graph horizon must be >= 2");
  if (p_slip < 0.0 || p_slip >= 1.0) throw ConfigError("p_slip must lie in [0, 1)");
  if (p_rnoise < 0.0 || p_rnoise >= 1.0) throw ConfigError("p_rnoise must lie in [0, 1)");
  if (!(discount > 0.0) || discount > 1.0) throw ConfigError("discount must lie in (0, 1]");
}

TabularMdp build_graph(const GraphConfig& config) {
  config.validate();
  const int T = config.horizon;
  const double slip = config.stochastic_transitions ? config.p_slip : 0.0;
  const double flip = config.stochastic_rewards ? config.p_rnoise : 0.0;

  Layout ly{T, 2 * T + 1, config.stochastic_rewards};
  const int S = config.stochastic_rewards ? 2 * ly.base_count : ly.base_count;

  TabularMdp mdp;
  mdp.num_states = S;
  mdp.num_actions = 2;
  mdp.horizon = T;
  mdp.discount = config.discount;
  mdp.transition.assign(static_cast<std::size_t>(S) * 2 * static_cast<std::size_t>(S), 0.0);
  mdp.reward.assign(static_cast<std::size_t>(S) * 2 * static_cast<std::size_t>(S), 0.0);
  mdp.initial.assign(static_cast<std::size_t>(S), 0.0);
  mdp.initial[0] = 1.0;

  const double bonus_if_odd = config.penultimate_bonus_on_odd ? 1.0 : 0.0;
  const double bonus_if_even = config.penultimate_bonus_on_odd ? 0.0 : 1.0;
  auto entry_reward = [&](int from_base, int to_base) {
    if (to_base == ly.absorbing())
      return -1.0 + (from_base % 2 == 1 ? bonus_if_odd : bonus_if_even);
    return to_base % 2 == 1 ? 1.0 : -1.0;
  };

  // Transition mass from (x, f) under action a onto y's twins, with the entry
  // reward carried (and negated on the flipped twin).
  auto connect = [&](int x, int f, int a, int y, double prob) {
    const int from = ly.id(x, f);
    const double r = entry_reward(x, y);
    if (config.stochastic_rewards) {
      mdp.transition[mdp.idx(from, a, ly.id(y, 0))] += prob * (1.0 - flip);
      mdp.transition[mdp.idx(from, a, ly.id(y, 1))] += prob * flip;
      mdp.reward[mdp.idx(from, a, ly.id(y, 0))] = r;
      mdp.reward[mdp.idx(from, a, ly.id(y, 1))] = -r;
    } else {
      mdp.transition[mdp.idx(from, a, y)] += prob;
      mdp.reward[mdp.idx(from, a, y)] = r;
    }
  };

  const int copies = config.stochastic_rewards ? 2 : 1;
  for (int f = 0; f < copies; ++f) {
    for (int x = 0; x <= 2 * T; ++x) {
      const int t = ly.layer(x);
      const bool self_loop = x == ly.absorbing() || x == 2 * T - 1;  // absorbing / unused filler
      for (int a = 0; a < 2; ++a) {
        if (self_loop) {
          mdp.transition[mdp.idx(ly.id(x, f), a, ly.id(x, f))] = 1.0;
        } else if (t == T - 1) {
          connect(x, f, a, ly.absorbing(), 1.0);
        } else {
          const int odd_child = 2 * t + 1;
          const int even_child = 2 * t + 2;
          const double p_odd = a == 0 ? 1.0 - slip : slip;
          connect(x, f, a, odd_child, p_odd);
          connect(x, f, a, even_child, 1.0 - p_odd);
        }
      }
    }
  }

  mdp.observation_map.resize(static_cast<std::size_t>(S));
  auto base_observation = [&](int x) {
    if (!config.partially_observed) return x;
    if (x == 0) return 0;
    if (x == ly.absorbing()) return T + 1;
    return ly.layer(x);
  };
  for (int f = 0; f < copies; ++f)
    for (int x = 0; x <= 2 * T; ++x)
      mdp.observation_map[static_cast<std::size_t>(ly.id(x, f))] = base_observation(x);

  mdp.validate();
  return mdp;
}

}  // namespace opera::envs
