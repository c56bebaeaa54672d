#include "opera/harness/testbed.hpp"

#include <cmath>

#include "opera/aggregate/aggregate.hpp"
#include "opera/errors.hpp"
#include "opera/rng.hpp"

namespace opera {

Eigen::MatrixXd GaussianTestbedConfig::covariance() const {
  const int n = k();
  Eigen::MatrixXd corr = correlation;
  if (corr.size() == 0) corr = Eigen::MatrixXd::Identity(n, n);
  Eigen::MatrixXd cov(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      cov(i, j) = corr(i, j) * std::sqrt(variances[static_cast<std::size_t>(i)] *
                                         variances[static_cast<std::size_t>(j)]);
  return cov;
}

void GaussianTestbedConfig::validate() const {
  if (biases.empty()) throw ConfigError("testbed needs at least one estimator");
  if (variances.size() != biases.size())
    throw ConfigError("biases and variances must have equal length");
  for (const double v : variances)
    if (v < 0.0) throw ConfigError("variances must be nonnegative");
  if (trials < 1) throw ConfigError("trials must be >= 1");
  const int n = k();
  if (correlation.size() != 0 && (correlation.rows() != n || correlation.cols() != n))
    throw ConfigError("correlation matrix must be k x k");
  const Eigen::MatrixXd cov = covariance();
  if ((cov - cov.transpose()).cwiseAbs().maxCoeff() > 1e-12 * std::max(1.0, cov.cwiseAbs().maxCoeff()))
    throw ConfigError("covariance must be symmetric");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov, Eigen::EigenvaluesOnly);
  if (eig.eigenvalues()(0) < -1e-10 * std::max(1.0, cov.cwiseAbs().maxCoeff()))
    throw ConfigError("covariance must be positive semidefinite");
}

GaussianTestbedConfig parse_testbed_config(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("testbed config must be a table/object");
  GaussianTestbedConfig cfg;
  for (const auto& [key, value] : j.items()) {
    try {
      if (key == "biases")
        cfg.biases = value.get<std::vector<double>>();
      else if (key == "variances")
        cfg.variances = value.get<std::vector<double>>();
      else if (key == "correlation") {
        const auto rows = value.get<std::vector<std::vector<double>>>();
        const int n = static_cast<int>(rows.size());
        cfg.correlation.resize(n, n);
        for (int i = 0; i < n; ++i) {
          if (static_cast<int>(rows[static_cast<std::size_t>(i)].size()) != n)
            throw ConfigError("correlation matrix must be square");
          for (int c = 0; c < n; ++c)
            cfg.correlation(i, c) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(c)];
        }
      } else if (key == "true_value")
        cfg.true_value = value.get<double>();
      else if (key == "trials")
        cfg.trials = value.get<int>();
      else if (key == "seed")
        cfg.seed = value.get<std::uint64_t>();
      else
        throw ConfigError("testbed config has unknown key '" + key + "'");
    } catch (const nlohmann::json::exception&) {
      throw ConfigError("testbed config key '" + key + "' has the wrong type");
    }
  }
  cfg.validate();
  return cfg;
}

GaussianTestbedResult run_gaussian_testbed(const GaussianTestbedConfig& config) {
  config.validate();
  const int k = config.k();
  const Eigen::MatrixXd cov = config.covariance();
  Eigen::VectorXd bias(k);
  for (int i = 0; i < k; ++i) bias(i) = config.biases[static_cast<std::size_t>(i)];

  GaussianTestbedResult out;
  out.analytic_a = cov + bias * bias.transpose();
  out.analytic_weights = solve_weights(out.analytic_a).alpha;

  // Square root of the covariance via its eigensystem; LLT would reject the
  // semidefinite edge cases (zero-variance estimators) that the closed-form
  // weight patterns exercise.
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
  const Eigen::MatrixXd sqrt_cov =
      eig.eigenvectors() *
      eig.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal() *
      eig.eigenvectors().transpose();

  RngStream root(config.seed);
  const int trials = config.trials;
  Eigen::MatrixXd errors(k, trials);  // per-trial estimator error vectors
  for (int t = 0; t < trials; ++t) {
    RngStream rng = root.child(static_cast<std::uint64_t>(t));
    Eigen::VectorXd z(k);
    for (int i = 0; i < k; ++i) z(i) = rng.next_gaussian();
    errors.col(t) = bias + sqrt_cov * z;
  }

  out.simulated_a = (errors * errors.transpose()) / static_cast<double>(trials);
  out.simulated_weights = solve_weights(out.simulated_a).alpha;

  out.estimator_mse.assign(static_cast<std::size_t>(k), 0.0);
  for (int i = 0; i < k; ++i)
    out.estimator_mse[static_cast<std::size_t>(i)] =
        errors.row(i).squaredNorm() / static_cast<double>(trials);

  const Eigen::VectorXd analytic_err = errors.transpose() * out.analytic_weights;
  const Eigen::VectorXd simulated_err = errors.transpose() * out.simulated_weights;
  out.analytic_combo_mse = analytic_err.squaredNorm() / static_cast<double>(trials);
  out.simulated_combo_mse = simulated_err.squaredNorm() / static_cast<double>(trials);

  int best = 0;
  for (int i = 1; i < k; ++i)
    if (out.estimator_mse[static_cast<std::size_t>(i)] <
        out.estimator_mse[static_cast<std::size_t>(best)])
      best = i;
  out.best_single_mse = out.estimator_mse[static_cast<std::size_t>(best)];
  double var = 0.0;
  for (int t = 0; t < trials; ++t) {
    const double sq = errors(best, t) * errors(best, t);
    var += (sq - out.best_single_mse) * (sq - out.best_single_mse);
  }
  var = trials > 1 ? var / static_cast<double>(trials - 1) : 0.0;
  out.best_single_stderr = std::sqrt(var / static_cast<double>(trials));
  return out;
}

std::vector<ResultRow> testbed_rows(const GaussianTestbedConfig& config,
                                    const GaussianTestbedResult& result) {
  std::vector<ResultRow> rows;
  auto base = [&](std::string method, double mse) {
    ResultRow r;
    r.env = "gaussian";
    r.policy = "-";
    r.n = config.trials;
    r.method = std::move(method);
    r.mse = mse;
    r.rmse = std::sqrt(mse);
    r.trials = config.trials;
    r.truth = config.true_value;
    return r;
  };
  for (int i = 0; i < config.k(); ++i)
    rows.push_back(base("estimator_" + std::to_string(i),
                        result.estimator_mse[static_cast<std::size_t>(i)]));
  rows.push_back(base("opera_analytic", result.analytic_combo_mse));
  rows.push_back(base("opera_simulated", result.simulated_combo_mse));
  return rows;
}

}  // namespace opera
