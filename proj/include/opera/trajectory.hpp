#pragma once

#include <span>
#include <vector>

#include "opera/errors.hpp"

namespace opera {

// One logged transition. behavior_prob is the probability the behavior policy
// assigned to the logged action; it must be positive (support requirement is
// checked at construction so estimators can rely on it).
struct Step {
  int state = 0;
  int observation = 0;
  int action = 0;
  double behavior_prob = 1.0;
  double reward = 0.0;
  int next_state = 0;
};

struct Trajectory {
  std::vector<Step> steps;

  std::size_t length() const { return steps.size(); }

  void validate() const {
    if (steps.empty()) throw ConfigError("trajectory must contain at least one step");
    for (const Step& st : steps) {
      if (!(st.behavior_prob > 0.0) || st.behavior_prob > 1.0)
        throw ConfigError("behavior_prob must lie in (0, 1]");
    }
  }
};

// A set of logged trajectories. Estimators treat the set as unordered.
struct Dataset {
  std::vector<Trajectory> trajectories;

  std::size_t size() const { return trajectories.size(); }
  bool empty() const { return trajectories.empty(); }

  void validate() const {
    if (trajectories.empty()) throw ConfigError("dataset must contain at least one trajectory");
    for (const Trajectory& t : trajectories) t.validate();
  }

  Dataset subset(std::span<const int> indices) const {
    Dataset out;
    out.trajectories.reserve(indices.size());
    for (int i : indices) out.trajectories.push_back(trajectories[static_cast<std::size_t>(i)]);
    return out;
  }
};

}  // namespace opera
