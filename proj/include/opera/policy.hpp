#pragma once

#include <vector>

namespace opera {

// Stochastic tabular policy over observation ids. probs[o][a] is the
// probability of action a in observation o; every row sums to 1 within 1e-9.
class TabularPolicy {
 public:
  TabularPolicy() = default;
  TabularPolicy(int num_observations, int num_actions)
      : probs_(static_cast<std::size_t>(num_observations),
               std::vector<double>(static_cast<std::size_t>(num_actions), 0.0)) {}
  explicit TabularPolicy(std::vector<std::vector<double>> probs) : probs_(std::move(probs)) {
    validate();
  }

  int num_observations() const { return static_cast<int>(probs_.size()); }
  int num_actions() const { return probs_.empty() ? 0 : static_cast<int>(probs_[0].size()); }

  double prob(int observation, int action) const {
    return probs_[static_cast<std::size_t>(observation)][static_cast<std::size_t>(action)];
  }
  std::vector<double>& row(int observation) { return probs_[static_cast<std::size_t>(observation)]; }
  const std::vector<double>& row(int observation) const {
    return probs_[static_cast<std::size_t>(observation)];
  }

  void set(int observation, int action, double p) {
    probs_[static_cast<std::size_t>(observation)][static_cast<std::size_t>(action)] = p;
  }

  void validate() const;

 private:
  std::vector<std::vector<double>> probs_;
};

}  // namespace opera
