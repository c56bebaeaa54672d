#include "opera/harness/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <memory>
#include <optional>

#include "opera/aggregate/aggregate.hpp"
#include "opera/envs/policies.hpp"
#include "opera/errors.hpp"
#include "opera/parallel.hpp"
#include "opera/rng.hpp"
#include "opera/rollout.hpp"

namespace opera {

namespace {

// Stage tags of the per-trial seed path (config.seed -> policy -> n -> trial
// -> stage).
constexpr std::uint64_t kStageData = 0x64617461;
constexpr std::uint64_t kStageBoot = 0x626f6f74;
constexpr std::uint64_t kTruthTag = 0x74727574;

struct TrialRecord {
  bool failed = false;
  std::string failure;
  std::vector<double> points;                    // per estimator, config order
  std::vector<double> mse_hats;                  // self-centered diagonal
  std::vector<double> method_values;             // per method, config order
};

// Everything fixed across trials for one environment kind.
struct TrialRunner {
  // Evaluates all estimators and methods for one (policy, n, trial).
  std::function<TrialRecord(int policy_index, int n, int trial)> run;
};

std::uint64_t trial_stage_seed(const ExperimentConfig& config, int policy_index, int n, int trial,
                               std::uint64_t stage) {
  return RngStream(config.seed)
      .child(static_cast<std::uint64_t>(policy_index))
      .child(static_cast<std::uint64_t>(n))
      .child(static_cast<std::uint64_t>(trial))
      .child(stage)
      .next_u64();
}

// Scores every configured method from one trial's reports. The wis report
// used by opera_magic sits at index k (appended internally) when the config
// itself does not list wis.
std::vector<double> score_methods(const ExperimentConfig& config,
                                  const std::vector<EstimatorReport>& all_reports,
                                  const BootstrapPlan& plan, std::size_t n, double v_max,
                                  const EstimatorReport* magic_anchor) {
  const std::size_t k = config.estimators.size();
  const std::vector<EstimatorReport> reports(all_reports.begin(),
                                             all_reports.begin() + static_cast<std::ptrdiff_t>(k));

  std::optional<ErrorMatrix> self_matrix;
  auto self = [&]() -> const ErrorMatrix& {
    if (!self_matrix) self_matrix = build_error_matrix(reports, plan, n);
    return *self_matrix;
  };

  std::vector<double> values;
  values.reserve(config.methods.size());
  for (const std::string& method : config.methods) {
    if (method == "opera") {
      values.push_back(opera_score(reports, self(), v_max).value);
    } else if (method == "opera_is") {
      BootstrapPlan anchored = plan;
      anchored.centering = config.centering_estimator;
      values.push_back(opera_score(reports, build_error_matrix(reports, anchored, n), v_max).value);
    } else if (method == "opera_magic") {
      values.push_back(opera_magic_score(reports, *magic_anchor, plan, n, v_max).value);
    } else if (method == "best_ope") {
      values.push_back(best_ope_score(reports, self()).value);
    } else {
      values.push_back(avg_ope_score(reports).value);
    }
  }
  return values;
}

bool needs_magic(const ExperimentConfig& config) {
  return std::find(config.methods.begin(), config.methods.end(), "opera_magic") !=
         config.methods.end();
}

int wis_index(const ExperimentConfig& config) {
  for (std::size_t i = 0; i < config.estimators.size(); ++i)
    if (config.estimators[i].id == "wis") return static_cast<int>(i);
  return -1;
}

TrialRecord make_record(const ExperimentConfig& config,
                        const std::vector<EstimatorReport>& all_reports,
                        const BootstrapPlan& plan, std::size_t n, double v_max) {
  const std::size_t k = config.estimators.size();
  const EstimatorReport* anchor = nullptr;
  if (needs_magic(config)) {
    const int wi = wis_index(config);
    anchor = &all_reports[wi >= 0 ? static_cast<std::size_t>(wi) : k];
  }

  TrialRecord rec;
  rec.points.reserve(k);
  rec.mse_hats.reserve(k);
  for (std::size_t e = 0; e < k; ++e) {
    rec.points.push_back(all_reports[e].point);
    rec.mse_hats.push_back(mse_hat(all_reports[e], plan, n));
  }
  rec.method_values = score_methods(config, all_reports, plan, n, v_max, anchor);
  return rec;
}

TrialRunner make_trajectory_runner(const ExperimentConfig& config, const TabularMdp& mdp,
                                   double v_max) {
  const TabularPolicy optimal = envs::optimal_policy(mdp);
  const TabularPolicy behavior = envs::noised_policy(optimal, config.behavior.epsilon);

  auto targets = std::make_shared<std::vector<TabularPolicy>>();
  for (const PolicySpec& spec : config.policies)
    targets->push_back(envs::noised_policy(optimal, spec.epsilon));

  const EvalContext ctx{mdp.discount, mdp.horizon};
  auto estimators = std::make_shared<std::vector<OpeEstimator>>();
  for (const EstimatorSpec& spec : config.estimators)
    estimators->push_back(make_estimator(spec.id, ctx, spec.folds, spec.iterations));
  if (needs_magic(config) && wis_index(config) < 0)
    estimators->push_back(make_estimator("wis", ctx, 2, 0));

  TrialRunner runner;
  runner.run = [config, &mdp, behavior, targets, estimators, v_max](int p, int n, int t) {
    const Dataset data =
        rollout(mdp, behavior, n, trial_stage_seed(config, p, n, t, kStageData));
    BootstrapPlan plan = config.bootstrap;
    plan.seed = trial_stage_seed(config, p, n, t, kStageBoot);
    const auto reports =
        collect_reports(*estimators, (*targets)[static_cast<std::size_t>(p)], data, plan);
    return make_record(config, reports, plan, data.size(), v_max);
  };
  return runner;
}

TrialRunner make_bandit_runner(const ExperimentConfig& config, const envs::BanditProblem& problem,
                               double v_max) {
  TrialRunner runner;
  runner.run = [config, &problem, v_max](int p, int n, int t) {
    const envs::BanditDataset data =
        problem.sample_logged(n, trial_stage_seed(config, p, n, t, kStageData));
    const double eps = config.policies[static_cast<std::size_t>(p)].epsilon;

    auto subset_eval = [&](auto&& fn) {
      return [&data, fn](std::span<const int> indices, std::uint64_t) {
        envs::BanditDataset sub;
        sub.samples.reserve(indices.size());
        for (const int i : indices) sub.samples.push_back(data.samples[static_cast<std::size_t>(i)]);
        return fn(sub);
      };
    };

    std::vector<IndexedEvaluator> evaluators;
    auto add = [&](const std::string& id) {
      if (id == "is")
        evaluators.push_back({id, subset_eval([&problem, eps](const envs::BanditDataset& d) {
                                return envs::bandit_is_estimate(problem, eps, d);
                              })});
      else if (id == "wis")
        evaluators.push_back({id, subset_eval([&problem, eps](const envs::BanditDataset& d) {
                                return envs::bandit_wis_estimate(problem, eps, d);
                              })});
      else {
        const double bw = std::strtod(id.c_str() + 10, nullptr);
        evaluators.push_back({id, subset_eval([&problem, eps, bw](const envs::BanditDataset& d) {
                                return envs::dm_kernel_estimate(problem, eps, d, bw);
                              })});
      }
    };
    for (const EstimatorSpec& spec : config.estimators) add(spec.id);
    if (needs_magic(config) && wis_index(config) < 0) add("wis");

    BootstrapPlan plan = config.bootstrap;
    plan.seed = trial_stage_seed(config, p, n, t, kStageBoot);
    const auto reports = collect_reports_indexed(data.size(), evaluators, plan);
    return make_record(config, reports, plan, data.size(), v_max);
  };
  return runner;
}

struct CellAggregate {
  double mse = 0.0;
  double stderr_ = 0.0;
  int trials = 0;
};

CellAggregate aggregate_errors(const std::vector<double>& squared_errors) {
  CellAggregate out;
  out.trials = static_cast<int>(squared_errors.size());
  if (out.trials == 0) return out;
  for (const double e : squared_errors) out.mse += e;
  out.mse /= static_cast<double>(out.trials);
  double var = 0.0;
  for (const double e : squared_errors) var += (e - out.mse) * (e - out.mse);
  var = out.trials > 1 ? var / static_cast<double>(out.trials - 1) : 0.0;
  out.stderr_ = std::sqrt(var / static_cast<double>(out.trials));
  return out;
}

}  // namespace

MonteCarloValue experiment_truth(const ExperimentConfig& config, const PolicySpec& policy) {
  if (config.environment_id == "bandit") {
    const envs::BanditProblem problem(std::get<envs::BanditConfig>(config.environment));
    const std::uint64_t seed = RngStream(config.seed).child(kTruthTag).next_u64();
    return problem.true_value(policy.epsilon, config.truth_episodes, seed);
  }
  const TabularMdp mdp = config.environment_id == "graph"
                             ? envs::build_graph(std::get<envs::GraphConfig>(config.environment))
                             : envs::build_sepsis(std::get<envs::SepsisConfig>(config.environment));
  const TabularPolicy target = envs::noised_policy(envs::optimal_policy(mdp), policy.epsilon);
  return MonteCarloValue{true_value_dp(mdp, target), 0.0};
}

ExperimentResult run_experiment(const ExperimentConfig& config, int threads) {
  config.validate();
  const double v_max = default_v_max(config);

  // Environment objects outlive every trial closure.
  std::optional<TabularMdp> mdp;
  std::optional<envs::BanditProblem> problem;
  TrialRunner runner;
  if (config.environment_id == "bandit") {
    problem.emplace(std::get<envs::BanditConfig>(config.environment));
    runner = make_bandit_runner(config, *problem, v_max);
  } else {
    mdp = config.environment_id == "graph"
              ? envs::build_graph(std::get<envs::GraphConfig>(config.environment))
              : envs::build_sepsis(std::get<envs::SepsisConfig>(config.environment));
    runner = make_trajectory_runner(config, *mdp, v_max);
  }

  std::vector<MonteCarloValue> truths;
  truths.reserve(config.policies.size());
  for (const PolicySpec& spec : config.policies) truths.push_back(experiment_truth(config, spec));

  ExperimentResult result;
  for (std::size_t p = 0; p < config.policies.size(); ++p) {
    for (const int n : config.dataset_sizes) {
      std::vector<TrialRecord> records(static_cast<std::size_t>(config.trials));
      parallel_for(config.trials, threads, [&](int t) {
        try {
          records[static_cast<std::size_t>(t)] = runner.run(static_cast<int>(p), n, t);
        } catch (const EstimatorError& e) {
          records[static_cast<std::size_t>(t)].failed = true;
          records[static_cast<std::size_t>(t)].failure = e.what();
        }
      });

      int failures = 0;
      for (int t = 0; t < config.trials; ++t) {
        const TrialRecord& rec = records[static_cast<std::size_t>(t)];
        if (!rec.failed) continue;
        ++failures;
        result.notes.push_back("policy=" + config.policies[p].label() + " n=" +
                               std::to_string(n) + " trial=" + std::to_string(t) + ": " +
                               rec.failure);
      }
      result.total_failures += failures;
      const double truth = truths[p].mean;

      auto emit = [&](const std::string& method, const std::vector<double>& sq) {
        const CellAggregate agg = aggregate_errors(sq);
        ResultRow row;
        row.env = config.environment_id;
        row.policy = config.policies[p].label();
        row.n = n;
        row.method = method;
        row.mse = agg.mse;
        row.rmse = std::sqrt(agg.mse);
        row.stderr_ = agg.stderr_;
        row.trials = agg.trials;
        row.truth = truth;
        row.truth_stderr = truths[p].stderr_;
        row.failures = failures;
        result.rows.push_back(std::move(row));
      };

      for (std::size_t e = 0; e < config.estimators.size(); ++e) {
        std::vector<double> sq;
        double double_entry = 0.0;
        for (const TrialRecord& rec : records) {
          if (rec.failed) continue;
          const double err = rec.points[e] - truth;
          sq.push_back(err * err);
          double_entry += err * err;
        }
        // Double-entry guard: the aggregate must equal the mean of per-trial
        // squared errors recomputed from the stored points.
        const CellAggregate agg = aggregate_errors(sq);
        if (!sq.empty()) {
          double_entry /= static_cast<double>(sq.size());
          if (std::abs(double_entry - agg.mse) > 1e-12 * std::max(1.0, std::abs(agg.mse)))
            throw EstimatorError("mse aggregation mismatch for '" + config.estimators[e].id + "'");
        }
        emit(config.estimators[e].id, sq);
      }
      for (std::size_t m = 0; m < config.methods.size(); ++m) {
        std::vector<double> sq;
        for (const TrialRecord& rec : records) {
          if (rec.failed) continue;
          const double err = rec.method_values[m] - truth;
          sq.push_back(err * err);
        }
        emit(config.methods[m], sq);
      }
    }
  }
  return result;
}

}  // namespace opera
