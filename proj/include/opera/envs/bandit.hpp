#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "opera/value.hpp"

namespace opera::envs {

// Synthetic contextual bandit with a nonlinear reward surface.
//
// Contexts are standard-normal feature vectors. The mean reward is a fixed
// random two-layer tanh network over [context; one-hot action], drawn once
// from reward_function_seed. The behavior policy is a softmax over noisy
// scores: a blend of the true surface with an independent distractor network,
// so logging is correlated with, but not equal to, the target. Evaluation
// policies are a sharper softmax of the true surface, optionally mixed with
// epsilon-uniform exploration.
struct BanditConfig {
  int feature_dim = 10;
  int num_actions = 5;
  std::uint64_t reward_function_seed = 7;
  double noise_std = 0.5;
  // Kernel bandwidths for the direct-method family, ascending: small
  // bandwidths give high-variance/low-bias fits and large ones the reverse.
  std::vector<double> bandwidths = {0.5, 1.0, 2.0, 4.0, 8.0, 16.0, 32.0, 64.0};
  double eval_temperature = 2.0;
  double behavior_temperature = 1.0;
  double behavior_score_noise = 0.5;  // distractor weight in the behavior score

  void validate() const;
};

struct BanditSample {
  std::vector<double> context;
  int action = 0;
  double propensity = 1.0;
  double reward = 0.0;
};

struct BanditDataset {
  std::vector<BanditSample> samples;
  std::size_t size() const { return samples.size(); }
};

class BanditProblem {
 public:
  explicit BanditProblem(BanditConfig config);

  const BanditConfig& config() const { return config_; }

  double mean_reward(std::span<const double> context, int action) const;
  std::vector<double> behavior_probs(std::span<const double> context) const;
  std::vector<double> eval_probs(std::span<const double> context, double epsilon) const;

  BanditDataset sample_logged(int n, std::uint64_t seed) const;

  // Noiseless-surface Monte Carlo over fresh contexts.
  MonteCarloValue true_value(double epsilon, std::int64_t draws, std::uint64_t seed) const;

 private:
  struct Net {
    std::vector<double> w1;  // hidden x in
    std::vector<double> b1;  // hidden
    std::vector<double> w2;  // hidden
    double b2 = 0.0;
  };
  double net_score(const Net& net, std::span<const double> context, int action) const;

  BanditConfig config_;
  Net reward_net_;
  Net distractor_net_;
  static constexpr int kHidden = 16;
};

// Nadaraya-Watson direct method: per-action kernel regression of rewards on
// contexts, evaluated under the target policy on the dataset's own contexts.
// Actions with no kernel mass at a context fall back to the dataset's global
// mean reward.
double dm_kernel_estimate(const BanditProblem& problem, double eval_epsilon,
                          const BanditDataset& data, double bandwidth);

double bandit_is_estimate(const BanditProblem& problem, double eval_epsilon,
                          const BanditDataset& data);

double bandit_wis_estimate(const BanditProblem& problem, double eval_epsilon,
                           const BanditDataset& data);

}  // namespace opera::envs
