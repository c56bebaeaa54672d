#include "opera/estimators/estimators.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <unordered_map>

#include "opera/errors.hpp"
#include "opera/rng.hpp"
#include "opera/value.hpp"

namespace opera {

namespace {

double trajectory_weight(const TabularPolicy& policy, const Trajectory& traj) {
  double w = 1.0;
  for (const Step& st : traj.steps) {
    if (!(st.behavior_prob > 0.0)) throw EstimatorError("support violation");
    w *= policy.prob(st.observation, st.action) / st.behavior_prob;
  }
  return w;
}

std::uint64_t double_bits(double x) { return std::bit_cast<std::uint64_t>(x); }

// Order-independent fold assignment: hash trajectory contents, not its index.
std::uint64_t content_hash(const Trajectory& traj, std::uint64_t seed) {
  std::uint64_t h = mix64(seed ^ 0x8f1bbcdcbfa53e0bULL);
  for (const Step& st : traj.steps) {
    h = mix64(h ^ static_cast<std::uint64_t>(st.state));
    h = mix64(h ^ static_cast<std::uint64_t>(st.observation));
    h = mix64(h ^ static_cast<std::uint64_t>(st.action));
    h = mix64(h ^ static_cast<std::uint64_t>(st.next_state));
    h = mix64(h ^ double_bits(st.behavior_prob));
    h = mix64(h ^ double_bits(st.reward));
  }
  return h;
}

// Exact duplicates are interchangeable, so numbering them and folding on
// (content, occurrence) keeps the assignment order-independent while spreading
// copies over folds. Pure content folding would starve a fold whenever the
// data has few distinct trajectories (short deterministic horizons, bootstrap
// resamples), leaving Q unfit for entire trajectory types.
std::vector<int> hashed_folds(const Dataset& data, int folds, std::uint64_t seed) {
  std::vector<int> fold_of(data.size());
  std::unordered_map<std::uint64_t, std::uint64_t> occurrence;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const std::uint64_t h = content_hash(data.trajectories[i], seed);
    fold_of[i] =
        static_cast<int>(mix64(h ^ mix64(occurrence[h]++)) % static_cast<std::uint64_t>(folds));
  }
  return fold_of;
}

}  // namespace

void EvalContext::validate() const {
  if (!(discount > 0.0) || discount > 1.0) throw ConfigError("discount must lie in (0, 1]");
  if (horizon < 1) throw ConfigError("horizon must be >= 1");
}

double is_estimate(const TabularPolicy& policy, const Dataset& data, double discount) {
  if (data.empty()) throw EstimatorError("empty dataset");
  double total = 0.0;
  for (const Trajectory& traj : data.trajectories)
    total += trajectory_weight(policy, traj) * discounted_return(traj, discount);
  return total / static_cast<double>(data.size());
}

double wis_estimate(const TabularPolicy& policy, const Dataset& data, double discount) {
  if (data.empty()) throw EstimatorError("empty dataset");
  double num = 0.0;
  double den = 0.0;
  for (const Trajectory& traj : data.trajectories) {
    const double w = trajectory_weight(policy, traj);
    num += w * discounted_return(traj, discount);
    den += w;
  }
  if (den == 0.0) throw EstimatorError("degenerate weights");
  return num / den;
}

std::vector<std::vector<double>> fit_q_tables(const TabularPolicy& policy, const Dataset& data,
                                              const EvalContext& ctx,
                                              const std::vector<int>& fold_of, int folds,
                                              int iterations) {
  ctx.validate();
  const int n_obs = policy.num_observations();
  const int A = policy.num_actions();
  const std::size_t table = static_cast<std::size_t>(n_obs) * static_cast<std::size_t>(A);
  const int iters = iterations > 0 ? iterations : ctx.horizon;

  std::vector<std::vector<double>> q_tables;
  q_tables.reserve(static_cast<std::size_t>(folds));

  for (int f = 0; f < folds; ++f) {
    bool has_train = false;
    for (std::size_t i = 0; i < data.size(); ++i)
      if (folds == 1 || fold_of[i] != f) {
        has_train = true;
        break;
      }
    if (!has_train) throw EstimatorError("insufficient data for folds");

    std::vector<double> q(table, 0.0);
    std::vector<double> next_q(table, 0.0);
    std::vector<double> count(table, 0.0);
    auto v_of = [&](int obs) {
      double v = 0.0;
      const std::size_t base = static_cast<std::size_t>(obs) * static_cast<std::size_t>(A);
      for (int a = 0; a < A; ++a) v += policy.prob(obs, a) * q[base + static_cast<std::size_t>(a)];
      return v;
    };

    for (int it = 0; it < iters; ++it) {
      std::fill(next_q.begin(), next_q.end(), 0.0);
      std::fill(count.begin(), count.end(), 0.0);
      for (std::size_t i = 0; i < data.size(); ++i) {
        if (folds > 1 && fold_of[i] == f) continue;
        const Trajectory& traj = data.trajectories[i];
        for (std::size_t t = 0; t < traj.steps.size(); ++t) {
          const Step& st = traj.steps[t];
          // Value past the recorded trajectory bootstraps to zero.
          const double v_next =
              t + 1 < traj.steps.size() ? v_of(traj.steps[t + 1].observation) : 0.0;
          const std::size_t k = static_cast<std::size_t>(st.observation) *
                                    static_cast<std::size_t>(A) +
                                static_cast<std::size_t>(st.action);
          next_q[k] += st.reward + ctx.discount * v_next;
          count[k] += 1.0;
        }
      }
      for (std::size_t k = 0; k < table; ++k)
        next_q[k] = count[k] > 0.0 ? next_q[k] / count[k] : 0.0;
      std::swap(q, next_q);
    }
    q_tables.push_back(std::move(q));
  }
  return q_tables;
}

double fqe_estimate_with_folds(const TabularPolicy& policy, const Dataset& data,
                               const EvalContext& ctx, const std::vector<int>& fold_of,
                               int folds, int iterations) {
  if (data.empty()) throw EstimatorError("empty dataset");
  if (folds < 1) throw ConfigError("folds must be >= 1");
  if (fold_of.size() != data.size()) throw ConfigError("fold assignment size mismatch");

  const std::vector<std::vector<double>> q_tables =
      fit_q_tables(policy, data, ctx, fold_of, folds, iterations);
  const int A = policy.num_actions();

  // Each trajectory's initial observation is valued with the Q fit on the
  // other folds (with folds == 1, on everything).
  double total = 0.0;
  std::size_t used = 0;
  for (int f = 0; f < folds; ++f) {
    const std::vector<double>& q = q_tables[static_cast<std::size_t>(f)];
    for (std::size_t i = 0; i < data.size(); ++i) {
      if (folds > 1 && fold_of[i] != f) continue;
      if (folds == 1 && f > 0) continue;
      const int obs = data.trajectories[i].steps.front().observation;
      double v = 0.0;
      for (int a = 0; a < A; ++a)
        v += policy.prob(obs, a) *
             q[static_cast<std::size_t>(obs) * static_cast<std::size_t>(A) +
               static_cast<std::size_t>(a)];
      total += v;
      ++used;
    }
  }
  if (used != data.size()) throw EstimatorError("insufficient data for folds");
  return total / static_cast<double>(data.size());
}

double fqe_estimate(const TabularPolicy& policy, const Dataset& data, const EvalContext& ctx,
                    int folds, int iterations, std::uint64_t seed) {
  if (data.empty()) throw EstimatorError("empty dataset");
  if (folds < 1) throw ConfigError("folds must be >= 1");
  std::vector<int> fold_of = hashed_folds(data, folds, seed);
  if (folds > 1) {
    // Every fold must hold out at least one trajectory.
    std::vector<bool> seen(static_cast<std::size_t>(folds), false);
    for (int f : fold_of) seen[static_cast<std::size_t>(f)] = true;
    for (int f = 0; f < folds; ++f)
      if (!seen[static_cast<std::size_t>(f)]) throw EstimatorError("insufficient data for folds");
  }
  return fqe_estimate_with_folds(policy, data, ctx, fold_of, folds, iterations);
}

double mb_estimate(const TabularPolicy& policy, const Dataset& data, const EvalContext& ctx) {
  if (data.empty()) throw EstimatorError("empty dataset");
  ctx.validate();
  const int n_obs = policy.num_observations();
  const int A = policy.num_actions();
  const int sink = n_obs;  // virtual absorbing observation for trajectory ends
  const int n_model = n_obs + 1;
  const std::size_t pairs = static_cast<std::size_t>(n_obs) * static_cast<std::size_t>(A);

  // MLE transition counts and mean rewards over (obs, action, next obs).
  std::vector<double> count(pairs * static_cast<std::size_t>(n_model), 0.0);
  std::vector<double> reward_sum(pairs * static_cast<std::size_t>(n_model), 0.0);
  std::vector<double> pair_count(pairs, 0.0);
  std::vector<double> initial(static_cast<std::size_t>(n_obs), 0.0);
  auto at = [&](int o, int a, int o2) {
    return (static_cast<std::size_t>(o) * static_cast<std::size_t>(A) +
            static_cast<std::size_t>(a)) *
               static_cast<std::size_t>(n_model) +
           static_cast<std::size_t>(o2);
  };

  for (const Trajectory& traj : data.trajectories) {
    initial[static_cast<std::size_t>(traj.steps.front().observation)] += 1.0;
    for (std::size_t t = 0; t < traj.steps.size(); ++t) {
      const Step& st = traj.steps[t];
      const int o2 = t + 1 < traj.steps.size() ? traj.steps[t + 1].observation : sink;
      count[at(st.observation, st.action, o2)] += 1.0;
      reward_sum[at(st.observation, st.action, o2)] += st.reward;
      pair_count[static_cast<std::size_t>(st.observation) * static_cast<std::size_t>(A) +
                 static_cast<std::size_t>(st.action)] += 1.0;
    }
  }

  // Exact finite-horizon DP on the fitted model. The sink and unseen pairs
  // contribute zero value, matching the self-loop-with-zero-reward convention.
  std::vector<double> v(static_cast<std::size_t>(n_model), 0.0);
  std::vector<double> next(static_cast<std::size_t>(n_model), 0.0);
  for (int h = 0; h < ctx.horizon; ++h) {
    for (int o = 0; o < n_obs; ++o) {
      double val = 0.0;
      for (int a = 0; a < A; ++a) {
        const double pa = policy.prob(o, a);
        if (pa == 0.0) continue;
        const double denom =
            pair_count[static_cast<std::size_t>(o) * static_cast<std::size_t>(A) +
                       static_cast<std::size_t>(a)];
        if (denom == 0.0) {
          // Unseen pair: self-loop with zero reward.
          val += pa * ctx.discount * v[static_cast<std::size_t>(o)];
          continue;
        }
        double q = 0.0;
        for (int o2 = 0; o2 < n_model; ++o2) {
          const double c = count[at(o, a, o2)];
          if (c == 0.0) continue;
          const double mean_r = reward_sum[at(o, a, o2)] / c;
          q += (c / denom) * (mean_r + ctx.discount * v[static_cast<std::size_t>(o2)]);
        }
        val += pa * q;
      }
      next[static_cast<std::size_t>(o)] = val;
    }
    next[static_cast<std::size_t>(sink)] = 0.0;
    std::swap(v, next);
  }

  double total = 0.0;
  for (int o = 0; o < n_obs; ++o) total += initial[static_cast<std::size_t>(o)] * v[static_cast<std::size_t>(o)];
  return total / static_cast<double>(data.size());
}

double dr_estimate(const TabularPolicy& policy, const Dataset& data, const EvalContext& ctx,
                   int folds, int iterations, std::uint64_t seed) {
  if (data.empty()) throw EstimatorError("empty dataset");
  if (folds < 1) throw ConfigError("folds must be >= 1");
  ctx.validate();
  std::vector<int> fold_of = hashed_folds(data, folds, seed);
  if (folds > 1) {
    std::vector<bool> seen(static_cast<std::size_t>(folds), false);
    for (int f : fold_of) seen[static_cast<std::size_t>(f)] = true;
    for (int f = 0; f < folds; ++f)
      if (!seen[static_cast<std::size_t>(f)]) throw EstimatorError("insufficient data for folds");
  }
  const std::vector<std::vector<double>> q_tables =
      fit_q_tables(policy, data, ctx, fold_of, folds, iterations);
  const int A = policy.num_actions();

  double total = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const std::vector<double>& q = q_tables[folds > 1 ? static_cast<std::size_t>(fold_of[i]) : 0];
    auto q_at = [&](int o, int a) {
      return q[static_cast<std::size_t>(o) * static_cast<std::size_t>(A) +
               static_cast<std::size_t>(a)];
    };
    auto v_at = [&](int o) {
      double v = 0.0;
      for (int a = 0; a < A; ++a) v += policy.prob(o, a) * q_at(o, a);
      return v;
    };

    // Per-decision form: sum_t gamma^t [rho_{0:t-1} V(o_t) + rho_{0:t} (r_t - Q(o_t, a_t))].
    double rho = 1.0;
    double gamma_t = 1.0;
    double contrib = 0.0;
    for (const Step& st : data.trajectories[i].steps) {
      if (!(st.behavior_prob > 0.0)) throw EstimatorError("support violation");
      contrib += gamma_t * rho * v_at(st.observation);
      rho *= policy.prob(st.observation, st.action) / st.behavior_prob;
      contrib += gamma_t * rho * (st.reward - q_at(st.observation, st.action));
      gamma_t *= ctx.discount;
    }
    total += contrib;
  }
  return total / static_cast<double>(data.size());
}

OpeEstimator make_estimator(const std::string& id, const EvalContext& ctx, int folds,
                            int iterations) {
  ctx.validate();
  if (id == "is")
    return OpeEstimator{id, [discount = ctx.discount](const TabularPolicy& p, const Dataset& d,
                                                      std::uint64_t) {
                          return is_estimate(p, d, discount);
                        }};
  if (id == "wis")
    return OpeEstimator{id, [discount = ctx.discount](const TabularPolicy& p, const Dataset& d,
                                                      std::uint64_t) {
                          return wis_estimate(p, d, discount);
                        }};
  if (id == "fqe")
    return OpeEstimator{id, [ctx, folds, iterations](const TabularPolicy& p, const Dataset& d,
                                                     std::uint64_t seed) {
                          return fqe_estimate(p, d, ctx, folds, iterations, seed);
                        }};
  if (id == "mb")
    return OpeEstimator{id, [ctx](const TabularPolicy& p, const Dataset& d, std::uint64_t) {
                          return mb_estimate(p, d, ctx);
                        }};
  if (id == "dr")
    return OpeEstimator{id, [ctx, folds, iterations](const TabularPolicy& p, const Dataset& d,
                                                     std::uint64_t seed) {
                          return dr_estimate(p, d, ctx, folds, iterations, seed);
                        }};
  throw ConfigError("unknown estimator id '" + id + "'");
}

}  // namespace opera
