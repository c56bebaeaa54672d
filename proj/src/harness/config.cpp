#include "opera/harness/config.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>

#include "opera/errors.hpp"
#include "opera/harness/toml_lite.hpp"

namespace opera {

namespace {

const std::set<std::string> kTrajectoryEstimators = {"is", "wis", "fqe", "mb", "dr"};
const std::set<std::string> kMethods = {"opera", "opera_is", "opera_magic", "best_ope",
                                        "avg_ope"};

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

// Strict field reader: every consumed key is checked off so leftovers can be
// reported as typos.
class FieldReader {
 public:
  FieldReader(const nlohmann::json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j.is_object()) throw ConfigError(where_ + " must be a table/object");
  }

  template <typename T>
  T get(const std::string& key, T fallback) {
    seen_.insert(key);
    if (!j_.contains(key)) return fallback;
    return read<T>(key);
  }

  template <typename T>
  T require(const std::string& key) {
    seen_.insert(key);
    if (!j_.contains(key)) throw ConfigError(where_ + " is missing required key '" + key + "'");
    return read<T>(key);
  }

  bool has(const std::string& key) const { return j_.contains(key); }

  const nlohmann::json& raw(const std::string& key) {
    seen_.insert(key);
    return j_.at(key);
  }

  void finish() const {
    for (const auto& [key, value] : j_.items())
      if (seen_.find(key) == seen_.end())
        throw ConfigError(where_ + " has unknown key '" + key + "'");
  }

 private:
  template <typename T>
  T read(const std::string& key) {
    try {
      return j_.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
      throw ConfigError(where_ + " key '" + key + "' has the wrong type");
    }
  }

  const nlohmann::json& j_;
  std::string where_;
  std::set<std::string> seen_;
};

envs::GraphConfig parse_graph(const nlohmann::json& j) {
  envs::GraphConfig cfg;
  FieldReader r(j, "environment (graph)");
  r.get<std::string>("id", "graph");
  cfg.horizon = r.get<int>("horizon", cfg.horizon);
  cfg.stochastic_transitions = r.get<bool>("stochastic_transitions", cfg.stochastic_transitions);
  cfg.p_slip = r.get<double>("p_slip", cfg.p_slip);
  cfg.stochastic_rewards = r.get<bool>("stochastic_rewards", cfg.stochastic_rewards);
  cfg.p_rnoise = r.get<double>("p_rnoise", cfg.p_rnoise);
  cfg.partially_observed = r.get<bool>("partially_observed", cfg.partially_observed);
  cfg.penultimate_bonus_on_odd =
      r.get<bool>("penultimate_bonus_on_odd", cfg.penultimate_bonus_on_odd);
  cfg.discount = r.get<double>("discount", cfg.discount);
  r.finish();
  cfg.validate();
  return cfg;
}

envs::SepsisConfig parse_sepsis(const nlohmann::json& j) {
  envs::SepsisConfig cfg;
  FieldReader r(j, "environment (sepsis)");
  r.get<std::string>("id", "sepsis");
  cfg.hr_levels = r.get<int>("hr_levels", cfg.hr_levels);
  cfg.bp_levels = r.get<int>("bp_levels", cfg.bp_levels);
  cfg.o2_levels = r.get<int>("o2_levels", cfg.o2_levels);
  cfg.glucose_levels = r.get<int>("glucose_levels", cfg.glucose_levels);
  cfg.diabetes_prob = r.get<double>("diabetes_prob", cfg.diabetes_prob);
  cfg.horizon = r.get<int>("horizon", cfg.horizon);
  cfg.partially_observed = r.get<bool>("partially_observed", cfg.partially_observed);
  cfg.discount = r.get<double>("discount", cfg.discount);
  if (r.has("params")) {
    FieldReader p(r.raw("params"), "environment.params");
    auto& t = cfg.params;
    t.untreated_drift = p.get<double>("untreated_drift", t.untreated_drift);
    t.abx_hr_effect = p.get<double>("abx_hr_effect", t.abx_hr_effect);
    t.abx_bp_effect = p.get<double>("abx_bp_effect", t.abx_bp_effect);
    t.vaso_bp_effect = p.get<double>("vaso_bp_effect", t.vaso_bp_effect);
    t.vent_o2_effect = p.get<double>("vent_o2_effect", t.vent_o2_effect);
    t.glucose_fluct = p.get<double>("glucose_fluct", t.glucose_fluct);
    t.glucose_fluct_diabetic = p.get<double>("glucose_fluct_diabetic", t.glucose_fluct_diabetic);
    p.finish();
  }
  r.finish();
  cfg.validate();
  return cfg;
}

envs::BanditConfig parse_bandit(const nlohmann::json& j) {
  envs::BanditConfig cfg;
  FieldReader r(j, "environment (bandit)");
  r.get<std::string>("id", "bandit");
  cfg.feature_dim = r.get<int>("feature_dim", cfg.feature_dim);
  cfg.num_actions = r.get<int>("num_actions", cfg.num_actions);
  cfg.reward_function_seed = r.get<std::uint64_t>("reward_function_seed", cfg.reward_function_seed);
  cfg.noise_std = r.get<double>("noise_std", cfg.noise_std);
  cfg.bandwidths = r.get<std::vector<double>>("bandwidths", cfg.bandwidths);
  cfg.eval_temperature = r.get<double>("eval_temperature", cfg.eval_temperature);
  cfg.behavior_temperature = r.get<double>("behavior_temperature", cfg.behavior_temperature);
  cfg.behavior_score_noise = r.get<double>("behavior_score_noise", cfg.behavior_score_noise);
  r.finish();
  cfg.validate();
  return cfg;
}

PolicySpec parse_policy(const nlohmann::json& j, const std::string& where) {
  PolicySpec spec;
  if (j.is_string()) return PolicySpec::parse(j.get<std::string>());
  FieldReader r(j, where);
  spec.epsilon = r.get<double>("epsilon", 0.0);
  r.finish();
  if (spec.epsilon < 0.0 || spec.epsilon > 1.0)
    throw ConfigError(where + ": epsilon must lie in [0, 1]");
  return spec;
}

bool is_dm_kernel(const std::string& id) { return id.rfind("dm-kernel:", 0) == 0; }

}  // namespace

std::string PolicySpec::label() const {
  if (epsilon == 0.0) return "optimal";
  return "noised:" + format_double(epsilon);
}

PolicySpec PolicySpec::parse(const std::string& text) {
  PolicySpec spec;
  if (text == "optimal") return spec;
  if (text.rfind("noised:", 0) == 0) {
    const std::string num = text.substr(7);
    char* end = nullptr;
    spec.epsilon = std::strtod(num.c_str(), &end);
    if (end != num.c_str() + num.size() || !(spec.epsilon >= 0.0) || spec.epsilon > 1.0)
      throw ConfigError("bad policy spec '" + text + "': epsilon must lie in [0, 1]");
    return spec;
  }
  throw ConfigError("bad policy spec '" + text + "' (expected 'optimal' or 'noised:<eps>')");
}

void ExperimentConfig::validate() const {
  if (trials < 1) throw ConfigError("trials must be >= 1");
  if (policies.empty()) throw ConfigError("at least one evaluation policy is required");
  if (dataset_sizes.empty()) throw ConfigError("at least one dataset size is required");
  for (const int n : dataset_sizes)
    if (n < 1) throw ConfigError("dataset sizes must be >= 1");
  if (estimators.empty()) throw ConfigError("at least one estimator is required");
  if (methods.empty()) throw ConfigError("at least one method is required");
  bootstrap.validate();

  const bool bandit = environment_id == "bandit";
  std::set<std::string> ids;
  for (const EstimatorSpec& e : estimators) {
    if (!ids.insert(e.id).second) throw ConfigError("duplicate estimator id '" + e.id + "'");
    if (e.folds < 1) throw ConfigError("estimator '" + e.id + "': folds must be >= 1");
    if (bandit) {
      if (e.id != "is" && e.id != "wis" && !is_dm_kernel(e.id))
        throw ConfigError("estimator '" + e.id + "' is not available on the bandit");
      if (is_dm_kernel(e.id)) {
        const std::string num = e.id.substr(10);
        char* end = nullptr;
        const double bw = std::strtod(num.c_str(), &end);
        if (end != num.c_str() + num.size() || !(bw > 0.0))
          throw ConfigError("estimator '" + e.id + "' needs a positive bandwidth");
      }
    } else if (kTrajectoryEstimators.find(e.id) == kTrajectoryEstimators.end()) {
      throw ConfigError("unknown estimator id '" + e.id + "'");
    }
  }

  bool wants_anchor = false;
  for (const std::string& m : methods) {
    if (kMethods.find(m) == kMethods.end()) throw ConfigError("unknown method '" + m + "'");
    wants_anchor = wants_anchor || m == "opera_is";
  }
  if (wants_anchor && ids.find(centering_estimator) == ids.end())
    throw ConfigError("method opera_is needs estimator '" + centering_estimator +
                      "' in the estimator list");
  if (truth_episodes < 1) throw ConfigError("truth_episodes must be >= 1");
}

ExperimentConfig parse_experiment_config(const nlohmann::json& j) {
  ExperimentConfig cfg;
  FieldReader r(j, "config");

  const nlohmann::json& env = r.raw("environment");
  if (!env.is_object() || !env.contains("id"))
    throw ConfigError("environment must be a table with an 'id'");
  cfg.environment_id = env.at("id").get<std::string>();
  if (cfg.environment_id == "graph")
    cfg.environment = parse_graph(env);
  else if (cfg.environment_id == "sepsis")
    cfg.environment = parse_sepsis(env);
  else if (cfg.environment_id == "bandit")
    cfg.environment = parse_bandit(env);
  else
    throw ConfigError("unknown environment id '" + cfg.environment_id + "'");

  if (r.has("behavior")) cfg.behavior = parse_policy(r.raw("behavior"), "behavior");
  const nlohmann::json& pols = r.raw("policies");
  if (!pols.is_array() || pols.empty()) throw ConfigError("policies must be a nonempty list");
  for (const auto& p : pols) cfg.policies.push_back(parse_policy(p, "policies[]"));

  cfg.dataset_sizes = r.require<std::vector<int>>("dataset_sizes");
  cfg.trials = r.get<int>("trials", 1);

  const nlohmann::json& ests = r.raw("estimators");
  if (!ests.is_array() || ests.empty()) throw ConfigError("estimators must be a nonempty list");
  for (const auto& e : ests) {
    EstimatorSpec spec;
    if (e.is_string()) {
      spec.id = e.get<std::string>();
    } else {
      FieldReader er(e, "estimators[]");
      spec.id = er.require<std::string>("id");
      spec.folds = er.get<int>("folds", spec.folds);
      spec.iterations = er.get<int>("iterations", spec.iterations);
      er.finish();
    }
    cfg.estimators.push_back(std::move(spec));
  }

  if (r.has("bootstrap")) {
    FieldReader b(r.raw("bootstrap"), "bootstrap");
    cfg.bootstrap.num_resamples = b.get<int>("num_resamples", cfg.bootstrap.num_resamples);
    cfg.bootstrap.eta = b.get<double>("eta", cfg.bootstrap.eta);
    b.finish();
  }

  cfg.methods = r.get<std::vector<std::string>>(
      "methods", {"opera", "opera_is", "opera_magic", "best_ope", "avg_ope"});
  cfg.centering_estimator = r.get<std::string>("centering_estimator", cfg.centering_estimator);
  cfg.seed = r.get<std::uint64_t>("seed", 0);
  cfg.v_max = r.get<double>("v_max", 0.0);
  cfg.output = r.get<std::string>("output", "");
  cfg.truth_episodes = r.get<std::int64_t>("truth_episodes", cfg.truth_episodes);
  r.finish();

  cfg.validate();
  return cfg;
}

ExperimentConfig load_experiment_config(const std::string& path) {
  return parse_experiment_config(load_config_file(path));
}

double default_v_max(const ExperimentConfig& config) {
  if (config.v_max > 0.0) return config.v_max;
  if (config.environment_id == "graph")
    return static_cast<double>(std::get<envs::GraphConfig>(config.environment).horizon) + 1.0;
  if (config.environment_id == "sepsis") return 1.0;
  const envs::BanditProblem problem(std::get<envs::BanditConfig>(config.environment));
  const envs::BanditDataset calib = problem.sample_logged(1024, 0xca11b);
  double v = 1e-6;
  for (const envs::BanditSample& s : calib.samples) v = std::max(v, std::abs(s.reward));
  return v;
}

}  // namespace opera
