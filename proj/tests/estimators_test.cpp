#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "opera/envs/graph.hpp"
#include "opera/envs/policies.hpp"
#include "opera/errors.hpp"
#include "opera/estimators/estimators.hpp"
#include "opera/rng.hpp"
#include "opera/rollout.hpp"
#include "opera/value.hpp"

using namespace opera;
using namespace opera::envs;

namespace {

Step make_step(int obs, int action, double bprob, double reward) {
  Step s;
  s.state = obs;
  s.observation = obs;
  s.action = action;
  s.behavior_prob = bprob;
  s.reward = reward;
  s.next_state = obs;
  return s;
}

TabularPolicy deterministic_policy(int observations, int actions, int action) {
  TabularPolicy p(observations, actions);
  for (int o = 0; o < observations; ++o) p.set(o, action, 1.0);
  return p;
}

Dataset shuffled(const Dataset& data, std::uint64_t seed) {
  Dataset out = data;
  RngStream rng(seed);
  for (std::size_t i = out.size(); i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng.next_below(i));
    std::swap(out.trajectories[i - 1], out.trajectories[j]);
  }
  return out;
}

}  // namespace

TEST_SUITE("estimators") {

TEST_CASE("importance sampling matches the hand-worked ratio") {
  Dataset data;
  Trajectory traj;
  traj.steps = {make_step(0, 0, 0.5, 1.0), make_step(0, 0, 0.5, 0.0)};
  data.trajectories = {traj};
  const TabularPolicy policy = deterministic_policy(1, 2, 0);
  // Both steps up-weight by 1 / 0.5, return is 1.
  CHECK(is_estimate(policy, data, 1.0) == doctest::Approx(4.0).epsilon(1e-12));
}

TEST_CASE("weighted importance sampling self-normalizes") {
  Dataset data;
  Trajectory heavy;
  heavy.steps = {make_step(0, 0, 1.0 / 3.0, 1.0)};
  Trajectory light;
  light.steps = {make_step(0, 0, 1.0, 0.0)};
  data.trajectories = {heavy, light};
  const TabularPolicy policy = deterministic_policy(1, 2, 0);
  // Weights 3 and 1: WIS = 3 / 4, plain IS = 3 / 2.
  CHECK(wis_estimate(policy, data, 1.0) == doctest::Approx(0.75).epsilon(1e-12));
  CHECK(is_estimate(policy, data, 1.0) == doctest::Approx(1.5).epsilon(1e-12));
}

TEST_CASE("on-policy data collapses both IS variants to the sample mean") {
  GraphConfig cfg;
  cfg.horizon = 4;
  cfg.stochastic_transitions = true;
  const TabularMdp mdp = build_graph(cfg);
  const TabularPolicy policy = noised_policy(optimal_policy(mdp), 0.3);
  const Dataset data = rollout(mdp, policy, 300, 8);
  double mean = 0.0;
  for (const Trajectory& t : data.trajectories) mean += discounted_return(t, 1.0);
  mean /= static_cast<double>(data.size());
  CHECK(is_estimate(policy, data, 1.0) == doctest::Approx(mean).epsilon(1e-12));
  CHECK(wis_estimate(policy, data, 1.0) == doctest::Approx(mean).epsilon(1e-12));
}

TEST_CASE("zero behavior probability is a support violation") {
  Dataset data;
  Trajectory traj;
  traj.steps = {make_step(0, 0, 0.0, 1.0)};
  data.trajectories = {traj};
  const TabularPolicy policy = deterministic_policy(1, 2, 0);
  CHECK_THROWS_WITH_AS(is_estimate(policy, data, 1.0), "support violation", EstimatorError);
  CHECK_THROWS_WITH_AS(wis_estimate(policy, data, 1.0), "support violation", EstimatorError);
  EvalContext ctx{1.0, 4};
  CHECK_THROWS_WITH_AS(dr_estimate(policy, data, ctx, 1, 0, 0), "support violation",
                       EstimatorError);
}

TEST_CASE("all-zero weights are rejected as degenerate") {
  Dataset data;
  Trajectory traj;
  traj.steps = {make_step(0, 1, 0.5, 1.0)};  // action 1, never taken by target
  data.trajectories = {traj};
  const TabularPolicy policy = deterministic_policy(1, 2, 0);
  CHECK_THROWS_WITH_AS(wis_estimate(policy, data, 1.0), "degenerate weights", EstimatorError);
  CHECK(is_estimate(policy, data, 1.0) == 0.0);  // plain IS is fine with zero mass
}

TEST_CASE("importance sampling is unbiased on the graph") {
  GraphConfig cfg;
  cfg.horizon = 4;
  cfg.stochastic_transitions = true;
  cfg.stochastic_rewards = true;
  const TabularMdp mdp = build_graph(cfg);
  const TabularPolicy behavior = noised_policy(optimal_policy(mdp), 0.5);
  const TabularPolicy target = noised_policy(optimal_policy(mdp), 0.1);
  const double truth = true_value_dp(mdp, target);

  const int datasets = 1000;
  std::vector<double> estimates;
  estimates.reserve(datasets);
  for (int i = 0; i < datasets; ++i)
    estimates.push_back(is_estimate(target, rollout(mdp, behavior, 16, 5000 + i), 1.0));
  const double mean =
      std::accumulate(estimates.begin(), estimates.end(), 0.0) / static_cast<double>(datasets);
  double var = 0.0;
  for (const double e : estimates) var += (e - mean) * (e - mean);
  var /= (datasets - 1);
  const double se = std::sqrt(var / datasets);
  CHECK(std::abs(mean - truth) <= 4.0 * se);
}

TEST_CASE("weighted importance sampling stays inside the observed returns") {
  GraphConfig cfg;
  cfg.horizon = 5;
  cfg.stochastic_transitions = true;
  cfg.stochastic_rewards = true;
  const TabularMdp mdp = build_graph(cfg);
  const TabularPolicy behavior = noised_policy(optimal_policy(mdp), 0.6);
  const TabularPolicy target = noised_policy(optimal_policy(mdp), 0.1);
  const Dataset data = rollout(mdp, behavior, 200, 21);
  double lo = discounted_return(data.trajectories[0], 1.0);
  double hi = lo;
  for (const Trajectory& t : data.trajectories) {
    const double g = discounted_return(t, 1.0);
    lo = std::min(lo, g);
    hi = std::max(hi, g);
  }
  const double wis = wis_estimate(target, data, 1.0);
  CHECK(wis >= lo);
  CHECK(wis <= hi);
}

TEST_CASE("every estimator is invariant to trajectory order") {
  GraphConfig cfg;
  cfg.horizon = 4;
  cfg.stochastic_transitions = true;
  cfg.stochastic_rewards = true;
  const TabularMdp mdp = build_graph(cfg);
  const TabularPolicy behavior = noised_policy(optimal_policy(mdp), 0.5);
  const TabularPolicy target = noised_policy(optimal_policy(mdp), 0.1);
  const Dataset data = rollout(mdp, behavior, 120, 31);
  const Dataset perm = shuffled(data, 99);
  EvalContext ctx{1.0, cfg.horizon};

  CHECK(is_estimate(target, perm, 1.0) ==
        doctest::Approx(is_estimate(target, data, 1.0)).epsilon(1e-12));
  CHECK(wis_estimate(target, perm, 1.0) ==
        doctest::Approx(wis_estimate(target, data, 1.0)).epsilon(1e-12));
  CHECK(fqe_estimate(target, perm, ctx, 2, 0, 7) ==
        doctest::Approx(fqe_estimate(target, data, ctx, 2, 0, 7)).epsilon(1e-12));
  CHECK(mb_estimate(target, perm, ctx) ==
        doctest::Approx(mb_estimate(target, data, ctx)).epsilon(1e-12));
  CHECK(dr_estimate(target, perm, ctx, 2, 0, 7) ==
        doctest::Approx(dr_estimate(target, data, ctx, 2, 0, 7)).epsilon(1e-12));
}

TEST_CASE("cross-fitting on duplicated data equals a single fit") {
  GraphConfig cfg;
  cfg.horizon = 4;
  cfg.stochastic_transitions = true;
  const TabularMdp mdp = build_graph(cfg);
  const TabularPolicy behavior = noised_policy(optimal_policy(mdp), 0.5);
  const TabularPolicy target = noised_policy(optimal_policy(mdp), 0.1);
  const Dataset data = rollout(mdp, behavior, 40, 61);
  EvalContext ctx{1.0, cfg.horizon};

  Dataset doubled = data;
  doubled.trajectories.insert(doubled.trajectories.end(), data.trajectories.begin(),
                              data.trajectories.end());
  std::vector<int> fold_of(doubled.size(), 0);
  std::fill(fold_of.begin() + static_cast<std::ptrdiff_t>(data.size()), fold_of.end(), 1);

  // Each fold trains on an exact copy of the full original dataset.
  const double crossed = fqe_estimate_with_folds(target, doubled, ctx, fold_of, 2, 0);
  const double single = fqe_estimate_with_folds(target, data, ctx, std::vector<int>(data.size(), 0), 1, 0);
  CHECK(crossed == doctest::Approx(single).epsilon(1e-12));
}

TEST_CASE("model-based and fitted Q recover a deterministic environment exactly") {
  GraphConfig cfg;
  cfg.horizon = 4;
  const TabularMdp mdp = build_graph(cfg);
  const TabularPolicy behavior = noised_policy(optimal_policy(mdp), 1.0);  // uniform
  const TabularPolicy target = deterministic_policy(mdp.num_observations(), 2, 0);
  const Dataset data = rollout(mdp, behavior, 400, 71);
  EvalContext ctx{1.0, cfg.horizon};

  CHECK(mb_estimate(target, data, ctx) == doctest::Approx(3.0).epsilon(1e-9));
  CHECK(fqe_estimate(target, data, ctx, 1, 0, 0) == doctest::Approx(3.0).epsilon(1e-9));
  // With an exact control variate the per-decision corrections telescope away.
  CHECK(dr_estimate(target, data, ctx, 1, 0, 0) == doctest::Approx(3.0).epsilon(1e-9));
}

TEST_CASE("doubly robust estimation is unbiased on the graph") {
  GraphConfig cfg;
  cfg.horizon = 4;
  cfg.stochastic_transitions = true;
  cfg.stochastic_rewards = true;
  const TabularMdp mdp = build_graph(cfg);
  const TabularPolicy behavior = noised_policy(optimal_policy(mdp), 0.5);
  const TabularPolicy target = noised_policy(optimal_policy(mdp), 0.1);
  const double truth = true_value_dp(mdp, target);
  EvalContext ctx{1.0, cfg.horizon};

  const int datasets = 400;
  std::vector<double> estimates;
  estimates.reserve(datasets);
  for (int i = 0; i < datasets; ++i)
    estimates.push_back(dr_estimate(target, rollout(mdp, behavior, 32, 9000 + i), ctx, 2, 0, 3));
  const double mean =
      std::accumulate(estimates.begin(), estimates.end(), 0.0) / static_cast<double>(datasets);
  double var = 0.0;
  for (const double e : estimates) var += (e - mean) * (e - mean);
  var /= (datasets - 1);
  CHECK(std::abs(mean - truth) <= 4.0 * std::sqrt(var / datasets));
}

TEST_CASE("folds without training data are rejected") {
  GraphConfig cfg;
  cfg.horizon = 4;
  const TabularMdp mdp = build_graph(cfg);
  const TabularPolicy policy = noised_policy(optimal_policy(mdp), 0.5);
  const Dataset data = rollout(mdp, policy, 4, 81);
  EvalContext ctx{1.0, cfg.horizon};

  std::vector<int> all_zero(data.size(), 0);
  CHECK_THROWS_WITH_AS(fqe_estimate_with_folds(policy, data, ctx, all_zero, 2, 0),
                       "insufficient data for folds", EstimatorError);

  Dataset tiny;
  tiny.trajectories = {data.trajectories[0]};
  CHECK_THROWS_WITH_AS(fqe_estimate(policy, tiny, ctx, 2, 0, 0),
                       "insufficient data for folds", EstimatorError);
}

TEST_CASE("registry wires ids to the same functions") {
  GraphConfig cfg;
  cfg.horizon = 4;
  cfg.stochastic_transitions = true;
  const TabularMdp mdp = build_graph(cfg);
  const TabularPolicy behavior = noised_policy(optimal_policy(mdp), 0.5);
  const TabularPolicy target = noised_policy(optimal_policy(mdp), 0.1);
  const Dataset data = rollout(mdp, behavior, 60, 91);
  EvalContext ctx{1.0, cfg.horizon};

  CHECK(make_estimator("is", ctx, 2, 0).estimate(target, data, 5) ==
        doctest::Approx(is_estimate(target, data, 1.0)).epsilon(1e-12));
  CHECK(make_estimator("wis", ctx, 2, 0).estimate(target, data, 5) ==
        doctest::Approx(wis_estimate(target, data, 1.0)).epsilon(1e-12));
  CHECK(make_estimator("fqe", ctx, 2, 0).estimate(target, data, 5) ==
        doctest::Approx(fqe_estimate(target, data, ctx, 2, 0, 5)).epsilon(1e-12));
  CHECK(make_estimator("mb", ctx, 2, 0).estimate(target, data, 5) ==
        doctest::Approx(mb_estimate(target, data, ctx)).epsilon(1e-12));
  CHECK(make_estimator("dr", ctx, 2, 0).estimate(target, data, 5) ==
        doctest::Approx(dr_estimate(target, data, ctx, 2, 0, 5)).epsilon(1e-12));
  CHECK_THROWS_AS(make_estimator("nope", ctx, 2, 0), ConfigError);
  CHECK_THROWS_AS(make_estimator("dm-kernel:2", ctx, 2, 0), ConfigError);
}

TEST_CASE("evaluation context validates its bounds") {
  CHECK_THROWS_AS((EvalContext{1.0, 0}.validate()), ConfigError);
  CHECK_THROWS_AS((EvalContext{0.0, 4}.validate()), ConfigError);
  CHECK_THROWS_AS((EvalContext{1.5, 4}.validate()), ConfigError);
  CHECK_NOTHROW((EvalContext{1.0, 4}.validate()));
}

}  // TEST_SUITE
