#include <cstdio>
#include <exception>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "opera/envs/graph.hpp"
#include "opera/envs/sepsis.hpp"
#include "opera/errors.hpp"
#include "opera/harness/config.hpp"
#include "opera/harness/experiment.hpp"
#include "opera/harness/testbed.hpp"
#include "opera/harness/toml_lite.hpp"
#include "opera/mdp.hpp"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitEstimator = 3;

struct CommonOptions {
  std::string format = "csv";
  std::string out;
  int threads = 1;
  bool seed_set = false;
  std::uint64_t seed = 0;
};

void add_common(CLI::App* cmd, CommonOptions& opts) {
  cmd->add_option("--format", opts.format, "Output format: csv, json, markdown")
      ->check(CLI::IsMember({"csv", "json", "markdown"}));
  cmd->add_option("--out", opts.out, "Write the table to this path instead of stdout");
  cmd->add_option("--threads", opts.threads, "Worker threads for trials")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--seed", opts.seed, "Override the config's master seed");
}

void deliver(const std::vector<opera::ResultRow>& rows, const CommonOptions& opts) {
  const opera::TableFormat format = opera::parse_table_format(opts.format);
  if (opts.out.empty())
    std::cout << opera::render_table(rows, format);
  else
    opera::write_table(rows, format, opts.out);
}

int run_command(const std::string& config_path, CommonOptions& opts) {
  opera::ExperimentConfig config = opera::load_experiment_config(config_path);
  if (opts.seed_set) config.seed = opts.seed;
  const opera::ExperimentResult result = opera::run_experiment(config, opts.threads);

  if (!opts.out.empty()) {
    deliver(result.rows, opts);
  } else if (!config.output.empty()) {
    CommonOptions file_opts = opts;
    file_opts.out = config.output;
    deliver(result.rows, file_opts);
  } else {
    deliver(result.rows, opts);
  }

  for (const std::string& note : result.notes) std::cerr << "estimator failure: " << note << "\n";
  return result.total_failures > 0 ? kExitEstimator : 0;
}

int testbed_command(const std::string& config_path, CommonOptions& opts) {
  opera::GaussianTestbedConfig config =
      opera::parse_testbed_config(opera::load_config_file(config_path));
  if (opts.seed_set) config.seed = opts.seed;
  const opera::GaussianTestbedResult result = opera::run_gaussian_testbed(config);
  deliver(opera::testbed_rows(config, result), opts);

  std::cerr << "analytic weights:";
  for (int i = 0; i < result.analytic_weights.size(); ++i)
    std::cerr << " " << result.analytic_weights(i);
  std::cerr << "\nsimulated weights:";
  for (int i = 0; i < result.simulated_weights.size(); ++i)
    std::cerr << " " << result.simulated_weights(i);
  std::cerr << "\n";
  return 0;
}

int value_command(const std::string& env_flag, const std::string& policy_flag,
                  const std::string& config_path, CommonOptions& opts) {
  opera::ExperimentConfig config;
  if (!config_path.empty()) {
    config = opera::load_experiment_config(config_path);
    if (config.environment_id != env_flag)
      throw opera::ConfigError("config environment '" + config.environment_id +
                               "' does not match requested '" + env_flag + "'");
  } else {
    nlohmann::json j = {{"environment", {{"id", env_flag}}},
                        {"policies", nlohmann::json::array({"optimal"})},
                        {"dataset_sizes", {1}},
                        {"estimators", nlohmann::json::array({"is"})}};
    config = opera::parse_experiment_config(j);
  }
  if (opts.seed_set) config.seed = opts.seed;

  const opera::PolicySpec policy = opera::PolicySpec::parse(policy_flag);
  const opera::MonteCarloValue truth = opera::experiment_truth(config, policy);
  std::printf("%.12g", truth.mean);
  if (truth.stderr_ > 0.0) std::printf(" +- %.12g (mc stderr)", truth.stderr_);
  std::printf("\n");
  return 0;
}

int export_command(const std::string& env_id, const std::string& path) {
  if (env_id == "graph") {
    opera::envs::build_graph(opera::envs::GraphConfig{}).save_json(path);
  } else if (env_id == "sepsis") {
    opera::envs::build_sepsis(opera::envs::SepsisConfig{}).save_json(path);
  } else {
    throw opera::ConfigError("environment '" + env_id +
                             "' has no tabular-MDP export (only graph and sepsis do)");
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"OPERA: bootstrapped combination of off-policy estimates"};
  app.require_subcommand(1);

  CommonOptions opts;
  std::string config_path;
  std::string env_id;
  std::string policy_spec;
  std::string export_path;
  std::string value_config;

  CLI::App* run = app.add_subcommand("run", "Run a config-driven experiment");
  run->add_option("config", config_path, "Experiment config (.json or .toml)")->required();
  add_common(run, opts);

  CLI::App* testbed = app.add_subcommand("testbed", "Run the synthetic Gaussian testbed");
  testbed->add_option("config", config_path, "Testbed config (.json or .toml)")->required();
  add_common(testbed, opts);

  CLI::App* value = app.add_subcommand("value", "Print a policy's ground-truth value");
  value->add_option("env", env_id, "Environment id: graph, sepsis, bandit")->required();
  value->add_option("policy", policy_spec, "'optimal' or 'noised:<eps>'")->required();
  value->add_option("--config", value_config, "Experiment config for environment overrides");
  add_common(value, opts);

  CLI::App* export_env = app.add_subcommand("export-env", "Write an environment as MDP JSON");
  export_env->add_option("env", env_id, "Environment id: graph or sepsis")->required();
  export_env->add_option("path", export_path, "Destination file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }
  for (const CLI::App* sub : {run, testbed, value})
    if (sub->parsed()) opts.seed_set = sub->count("--seed") > 0;

  try {
    if (run->parsed()) return run_command(config_path, opts);
    if (testbed->parsed()) return testbed_command(config_path, opts);
    if (value->parsed()) return value_command(env_id, policy_spec, value_config, opts);
    return export_command(env_id, export_path);
  } catch (const opera::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const opera::EstimatorError& e) {
    std::cerr << "estimator failure: " << e.what() << "\n";
    return kExitEstimator;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
