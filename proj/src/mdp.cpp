#include "opera/mdp.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <vector>

#include <nlohmann/json.hpp>

#include "opera/errors.hpp"

namespace opera {

namespace {

std::string cell(const char* table, int s, int a) {
  return std::string(table) + "[" + std::to_string(s) + "][" + std::to_string(a) + "]";
}

}  // namespace

int TabularMdp::num_observations() const {
  int max_id = -1;
  for (int o : observation_map) max_id = std::max(max_id, o);
  return max_id + 1;
}

bool TabularMdp::is_absorbing(int s) const {
  for (int a = 0; a < num_actions; ++a) {
    if (std::abs(p(s, a, s) - 1.0) > 1e-12) return false;
    if (std::abs(r(s, a, s)) != 0.0) return false;
  }
  return true;
}

void TabularMdp::validate() const {
  if (num_states <= 0) throw ConfigError("num_states must be positive");
  if (num_actions <= 0) throw ConfigError("num_actions must be positive");
  if (horizon < 0) throw ConfigError("horizon must be non-negative");
  if (!(discount > 0.0) || discount > 1.0) throw ConfigError("discount must lie in (0, 1]");

  const std::size_t table_size = static_cast<std::size_t>(num_states) *
                                 static_cast<std::size_t>(num_actions) *
                                 static_cast<std::size_t>(num_states);
  if (transition.size() != table_size)
    throw ConfigError("transition table has " + std::to_string(transition.size()) +
                      " entries, expected " + std::to_string(table_size));
  if (reward.size() != table_size)
    throw ConfigError("reward table has " + std::to_string(reward.size()) +
                      " entries, expected " + std::to_string(table_size));
  if (initial.size() != static_cast<std::size_t>(num_states))
    throw ConfigError("initial distribution has " + std::to_string(initial.size()) +
                      " entries, expected " + std::to_string(num_states));
  if (observation_map.size() != static_cast<std::size_t>(num_states))
    throw ConfigError("observation_map has " + std::to_string(observation_map.size()) +
                      " entries, expected " + std::to_string(num_states));

  for (int s = 0; s < num_states; ++s) {
    for (int a = 0; a < num_actions; ++a) {
      double sum = 0.0;
      for (int s2 = 0; s2 < num_states; ++s2) {
        double pr = p(s, a, s2);
        if (pr < 0.0)
          throw ConfigError(cell("transition", s, a) + "[" + std::to_string(s2) +
                            "]: negative probability");
        sum += pr;
      }
      if (std::abs(sum - 1.0) > 1e-9)
        throw ConfigError(cell("transition", s, a) + ": row sums to " + std::to_string(sum) +
                          ", expected 1");
    }
  }

  double init_sum = 0.0;
  for (int s = 0; s < num_states; ++s) {
    if (initial[static_cast<std::size_t>(s)] < 0.0)
      throw ConfigError("initial[" + std::to_string(s) + "]: negative probability");
    init_sum += initial[static_cast<std::size_t>(s)];
  }
  if (std::abs(init_sum - 1.0) > 1e-9)
    throw ConfigError("initial distribution sums to " + std::to_string(init_sum) +
                      ", expected 1");

  // Observation ids must cover 0..max contiguously so they can index tables.
  const int n_obs = num_observations();
  if (n_obs <= 0) throw ConfigError("observation_map assigns no valid observation id");
  std::vector<bool> seen(static_cast<std::size_t>(n_obs), false);
  for (int s = 0; s < num_states; ++s) {
    int o = observation_map[static_cast<std::size_t>(s)];
    if (o < 0)
      throw ConfigError("observation_map[" + std::to_string(s) + "]: negative observation id");
    seen[static_cast<std::size_t>(o)] = true;
  }
  for (int o = 0; o < n_obs; ++o)
    if (!seen[static_cast<std::size_t>(o)])
      throw ConfigError("observation id " + std::to_string(o) +
                        " unused: ids must form a contiguous range");
}

void TabularMdp::save_json(const std::string& path) const {
  validate();
  nlohmann::json j;
  j["num_states"] = num_states;
  j["num_actions"] = num_actions;
  j["horizon"] = horizon;
  j["discount"] = discount;

  auto nested = [&](const std::vector<double>& flat) {
    nlohmann::json out = nlohmann::json::array();
    for (int s = 0; s < num_states; ++s) {
      nlohmann::json per_action = nlohmann::json::array();
      for (int a = 0; a < num_actions; ++a) {
        nlohmann::json row = nlohmann::json::array();
        for (int s2 = 0; s2 < num_states; ++s2) row.push_back(flat[idx(s, a, s2)]);
        per_action.push_back(std::move(row));
      }
      out.push_back(std::move(per_action));
    }
    return out;
  };
  j["transition"] = nested(transition);
  j["reward"] = nested(reward);
  j["initial"] = initial;
  j["observation_map"] = observation_map;

  std::ofstream f(path);
  if (!f) throw ConfigError("cannot open '" + path + "' for writing");
  f << j.dump(1) << "\n";
  if (!f) throw ConfigError("failed writing '" + path + "'");
}

TabularMdp TabularMdp::load_json(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open '" + path + "' for reading");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(f);  // parse errors carry line/column positions
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(std::string("'") + path + "': " + e.what());
  }

  TabularMdp mdp;
  try {
    mdp.num_states = j.at("num_states").get<int>();
    mdp.num_actions = j.at("num_actions").get<int>();
    mdp.horizon = j.at("horizon").get<int>();
    mdp.discount = j.at("discount").get<double>();
    if (mdp.num_states <= 0 || mdp.num_actions <= 0)
      throw ConfigError("num_states and num_actions must be positive");

    auto flatten = [&](const nlohmann::json& t, const char* name) {
      std::vector<double> flat;
      flat.reserve(static_cast<std::size_t>(mdp.num_states) *
                   static_cast<std::size_t>(mdp.num_actions) *
                   static_cast<std::size_t>(mdp.num_states));
      if (!t.is_array() || t.size() != static_cast<std::size_t>(mdp.num_states))
        throw ConfigError(std::string(name) + ": expected " + std::to_string(mdp.num_states) +
                          " per-state entries");
      for (int s = 0; s < mdp.num_states; ++s) {
        const auto& per_action = t[static_cast<std::size_t>(s)];
        if (!per_action.is_array() || per_action.size() != static_cast<std::size_t>(mdp.num_actions))
          throw ConfigError(cell(name, s, 0) + ": expected " + std::to_string(mdp.num_actions) +
                            " per-action rows");
        for (int a = 0; a < mdp.num_actions; ++a) {
          const auto& row = per_action[static_cast<std::size_t>(a)];
          if (!row.is_array() || row.size() != static_cast<std::size_t>(mdp.num_states))
            throw ConfigError(cell(name, s, a) + ": expected row of length " +
                              std::to_string(mdp.num_states));
          for (int s2 = 0; s2 < mdp.num_states; ++s2)
            flat.push_back(row[static_cast<std::size_t>(s2)].get<double>());
        }
      }
      return flat;
    };
    mdp.transition = flatten(j.at("transition"), "transition");
    mdp.reward = flatten(j.at("reward"), "reward");
    mdp.initial = j.at("initial").get<std::vector<double>>();
    mdp.observation_map = j.at("observation_map").get<std::vector<int>>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("'") + path + "': " + e.what());
  }

  mdp.validate();
  return mdp;
}

}  // namespace opera
