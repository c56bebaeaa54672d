#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include <nlohmann/json.hpp>

#include "opera/harness/table.hpp"

namespace opera {

// Idealized setting where estimator errors are exactly Gaussian: estimator i
// returns true_value + bias_i + noise, noise ~ N(0, Cov). The error matrix
// has the closed form A = Cov + bias bias^T, so solver behavior can be
// checked against ground truth and against the matrix refit from draws.
struct GaussianTestbedConfig {
  std::vector<double> biases;
  std::vector<double> variances;
  Eigen::MatrixXd correlation;  // k x k; defaults to identity when empty
  double true_value = 0.0;
  int trials = 10000;
  std::uint64_t seed = 0;

  int k() const { return static_cast<int>(biases.size()); }
  Eigen::MatrixXd covariance() const;
  void validate() const;
};

GaussianTestbedConfig parse_testbed_config(const nlohmann::json& j);

struct GaussianTestbedResult {
  Eigen::MatrixXd analytic_a;
  Eigen::MatrixXd simulated_a;       // refit from the draws around the truth
  Eigen::VectorXd analytic_weights;
  Eigen::VectorXd simulated_weights;
  std::vector<double> estimator_mse;  // empirical, per estimator
  double analytic_combo_mse = 0.0;    // empirical MSE of the analytic-weight combination
  double simulated_combo_mse = 0.0;
  double best_single_mse = 0.0;
  double best_single_stderr = 0.0;    // stderr of that estimator's squared error
};

GaussianTestbedResult run_gaussian_testbed(const GaussianTestbedConfig& config);

std::vector<ResultRow> testbed_rows(const GaussianTestbedConfig& config,
                                    const GaussianTestbedResult& result);

}  // namespace opera
