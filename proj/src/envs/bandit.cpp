#include "opera/envs/bandit.hpp"

#include <algorithm>
#include <cmath>

#include "opera/errors.hpp"
#include "opera/rng.hpp"

namespace opera::envs {

void BanditConfig::validate() const {
  if (feature_dim < 1) throw ConfigError("feature_dim must be >= 1");
  if (num_actions < 2) throw ConfigError("num_actions must be >= 2");
  if (noise_std < 0.0) throw ConfigError("noise_std must be >= 0");
  if (bandwidths.empty()) throw ConfigError("bandwidths must be non-empty");
  double prev = 0.0;
  for (double b : bandwidths) {
    if (!(b > 0.0)) throw ConfigError("bandwidths must be strictly positive");
    if (b <= prev) throw ConfigError("bandwidths must be strictly ascending");
    prev = b;
  }
  if (behavior_score_noise < 0.0 || behavior_score_noise > 1.0)
    throw ConfigError("behavior_score_noise must lie in [0, 1]");
  if (eval_temperature <= 0.0 || behavior_temperature <= 0.0)
    throw ConfigError("softmax temperatures must be positive");
}

namespace {

std::vector<double> softmax(std::vector<double> scores) {
  const double m = *std::max_element(scores.begin(), scores.end());
  double sum = 0.0;
  for (double& s : scores) {
    s = std::exp(s - m);
    sum += s;
  }
  for (double& s : scores) s /= sum;
  return scores;
}

}  // namespace

BanditProblem::BanditProblem(BanditConfig config) : config_(std::move(config)) {
  config_.validate();
  const int in = config_.feature_dim + config_.num_actions;
  auto draw_net = [&](std::uint64_t tag) {
    Net net;
    RngStream rng = RngStream(config_.reward_function_seed).child(tag);
    const double w1_scale = 1.0 / std::sqrt(static_cast<double>(in));
    const double w2_scale = 1.0 / std::sqrt(static_cast<double>(kHidden));
    net.w1.resize(static_cast<std::size_t>(kHidden) * static_cast<std::size_t>(in));
    for (double& w : net.w1) w = 1.6 * w1_scale * rng.next_gaussian();
    net.b1.resize(kHidden);
    for (double& b : net.b1) b = 0.3 * rng.next_gaussian();
    net.w2.resize(kHidden);
    for (double& w : net.w2) w = 1.5 * w2_scale * rng.next_gaussian();
    net.b2 = 0.2 * rng.next_gaussian();
    return net;
  };
  reward_net_ = draw_net(0);
  distractor_net_ = draw_net(1);
}

double BanditProblem::net_score(const Net& net, std::span<const double> context,
                                int action) const {
  const int in = config_.feature_dim + config_.num_actions;
  double out = net.b2;
  for (int h = 0; h < kHidden; ++h) {
    double z = net.b1[static_cast<std::size_t>(h)];
    const std::size_t row = static_cast<std::size_t>(h) * static_cast<std::size_t>(in);
    for (int i = 0; i < config_.feature_dim; ++i)
      z += net.w1[row + static_cast<std::size_t>(i)] * context[static_cast<std::size_t>(i)];
    z += net.w1[row + static_cast<std::size_t>(config_.feature_dim + action)];
    out += net.w2[static_cast<std::size_t>(h)] * std::tanh(z);
  }
  return out;
}

double BanditProblem::mean_reward(std::span<const double> context, int action) const {
  return net_score(reward_net_, context, action);
}

std::vector<double> BanditProblem::behavior_probs(std::span<const double> context) const {
  const double w = config_.behavior_score_noise;
  std::vector<double> scores(static_cast<std::size_t>(config_.num_actions));
  for (int a = 0; a < config_.num_actions; ++a)
    scores[static_cast<std::size_t>(a)] =
        config_.behavior_temperature * ((1.0 - w) * net_score(reward_net_, context, a) +
                                        w * net_score(distractor_net_, context, a));
  return softmax(std::move(scores));
}

std::vector<double> BanditProblem::eval_probs(std::span<const double> context,
                                              double epsilon) const {
  std::vector<double> scores(static_cast<std::size_t>(config_.num_actions));
  for (int a = 0; a < config_.num_actions; ++a)
    scores[static_cast<std::size_t>(a)] =
        config_.eval_temperature * net_score(reward_net_, context, a);
  std::vector<double> probs = softmax(std::move(scores));
  const double u = epsilon / static_cast<double>(config_.num_actions);
  for (double& p : probs) p = (1.0 - epsilon) * p + u;
  return probs;
}

BanditDataset BanditProblem::sample_logged(int n, std::uint64_t seed) const {
  if (n < 1) throw ConfigError("bandit logging requires n >= 1");
  RngStream root(seed);
  BanditDataset data;
  data.samples.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    RngStream rng = root.child(static_cast<std::uint64_t>(i));
    BanditSample s;
    s.context.resize(static_cast<std::size_t>(config_.feature_dim));
    for (double& x : s.context) x = rng.next_gaussian();
    const std::vector<double> probs = behavior_probs(s.context);
    s.action = rng.sample_index(probs);
    s.propensity = probs[static_cast<std::size_t>(s.action)];
    s.reward = mean_reward(s.context, s.action) + config_.noise_std * rng.next_gaussian();
    data.samples.push_back(std::move(s));
  }
  return data;
}

MonteCarloValue BanditProblem::true_value(double epsilon, std::int64_t draws,
                                          std::uint64_t seed) const {
  if (draws < 1) throw ConfigError("true_value requires draws >= 1");
  RngStream root(seed);
  double sum = 0.0;
  double sum_sq = 0.0;
  std::vector<double> x(static_cast<std::size_t>(config_.feature_dim));
  for (std::int64_t i = 0; i < draws; ++i) {
    RngStream rng = root.child(static_cast<std::uint64_t>(i));
    for (double& xi : x) xi = rng.next_gaussian();
    const std::vector<double> probs = eval_probs(x, epsilon);
    double v = 0.0;
    for (int a = 0; a < config_.num_actions; ++a)
      v += probs[static_cast<std::size_t>(a)] * mean_reward(x, a);
    sum += v;
    sum_sq += v * v;
  }
  const double n = static_cast<double>(draws);
  const double mean = sum / n;
  double var = (sum_sq - n * mean * mean) / (n > 1 ? n - 1 : 1);
  if (var < 0.0) var = 0.0;
  return MonteCarloValue{mean, std::sqrt(var / n)};
}

double dm_kernel_estimate(const BanditProblem& problem, double eval_epsilon,
                          const BanditDataset& data, double bandwidth) {
  if (data.samples.empty()) throw EstimatorError("empty bandit dataset");
  if (!(bandwidth > 0.0)) throw ConfigError("bandwidth must be positive");
  const int A = problem.config().num_actions;
  const std::size_t m = data.samples.size();

  double global_mean = 0.0;
  for (const BanditSample& s : data.samples) global_mean += s.reward;
  global_mean /= static_cast<double>(m);

  const double inv = 1.0 / (2.0 * bandwidth * bandwidth);
  double total = 0.0;
  std::vector<double> num(static_cast<std::size_t>(A));
  std::vector<double> den(static_cast<std::size_t>(A));
  for (std::size_t i = 0; i < m; ++i) {
    std::fill(num.begin(), num.end(), 0.0);
    std::fill(den.begin(), den.end(), 0.0);
    const std::vector<double>& xi = data.samples[i].context;
    for (std::size_t j = 0; j < m; ++j) {
      const std::vector<double>& xj = data.samples[j].context;
      double d2 = 0.0;
      for (std::size_t c = 0; c < xi.size(); ++c) {
        const double diff = xi[c] - xj[c];
        d2 += diff * diff;
      }
      const double k = std::exp(-d2 * inv);
      const std::size_t a = static_cast<std::size_t>(data.samples[j].action);
      num[a] += k * data.samples[j].reward;
      den[a] += k;
    }
    const std::vector<double> probs = problem.eval_probs(xi, eval_epsilon);
    for (int a = 0; a < A; ++a) {
      const double fit = den[static_cast<std::size_t>(a)] > 1e-300
                             ? num[static_cast<std::size_t>(a)] / den[static_cast<std::size_t>(a)]
                             : global_mean;
      total += probs[static_cast<std::size_t>(a)] * fit;
    }
  }
  return total / static_cast<double>(m);
}

double bandit_is_estimate(const BanditProblem& problem, double eval_epsilon,
                          const BanditDataset& data) {
  if (data.samples.empty()) throw EstimatorError("empty bandit dataset");
  double total = 0.0;
  for (const BanditSample& s : data.samples) {
    if (!(s.propensity > 0.0)) throw EstimatorError("support violation");
    const std::vector<double> probs = problem.eval_probs(s.context, eval_epsilon);
    total += probs[static_cast<std::size_t>(s.action)] / s.propensity * s.reward;
  }
  return total / static_cast<double>(data.samples.size());
}

double bandit_wis_estimate(const BanditProblem& problem, double eval_epsilon,
                           const BanditDataset& data) {
  if (data.samples.empty()) throw EstimatorError("empty bandit dataset");
  double num = 0.0;
  double den = 0.0;
  for (const BanditSample& s : data.samples) {
    if (!(s.propensity > 0.0)) throw EstimatorError("support violation");
    const std::vector<double> probs = problem.eval_probs(s.context, eval_epsilon);
    const double w = probs[static_cast<std::size_t>(s.action)] / s.propensity;
    num += w * s.reward;
    den += w;
  }
  if (den == 0.0) throw EstimatorError("degenerate weights");
  return num / den;
}

}  // namespace opera::envs
