#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "opera/bootstrap/bootstrap.hpp"

namespace opera {

struct WeightVector {
  Eigen::VectorXd alpha;        // sums to 1 within 1e-9; entries may be negative
  double ridge_used = 0.0;      // diagonal epsilon added on the retry path, 0 otherwise
  double objective_value = 0.0; // alpha^T A alpha on the matrix as given
};

// Minimize alpha^T A alpha subject to sum(alpha) = 1 via the KKT system
//   [2A 1; 1^T 0] [alpha; lambda] = [0; 1].
// A must be symmetric positive semidefinite within tolerance, otherwise
// EstimatorError("invalid error matrix"). If the KKT system is singular
// (condition number above 1e12), retries once with A + eps*I,
// eps = 1e-8 * max(trace(A)/k, 1), and reports eps in ridge_used.
WeightVector solve_weights(const Eigen::MatrixXd& a);

WeightVector solve_weights(const ErrorMatrix& matrix);

// A combined estimate with full provenance for serialization.
struct EnsembleScore {
  std::string method;
  double value = 0.0;
  std::vector<double> weights;
  double ridge_used = 0.0;
  std::vector<std::string> estimator_ids;
  std::vector<double> points;
  std::vector<double> mse_hat_diagonal;
};

// Weighted combination of the full-data points under the error-matrix
// weights. v_max rescales estimates into roughly [-1, 1] for the solve
// (points / v_max, matrix / v_max^2) and scales the result back; the reported
// diagonal stays in raw units.
EnsembleScore opera_score(const std::vector<EstimatorReport>& reports, const ErrorMatrix& matrix,
                          double v_max = 1.0);

// Point of the estimator with the smallest error-matrix diagonal
// (ties: lowest index).
EnsembleScore best_ope_score(const std::vector<EstimatorReport>& reports,
                             const ErrorMatrix& matrix);

// Uniform average of the points.
EnsembleScore avg_ope_score(const std::vector<EstimatorReport>& reports);

// MAGIC-style surrogate: per-estimator signed bias = distance from the point
// to the nearest endpoint of the WIS replicates' [25%, 75%] interval (zero
// inside), covariance from the shared replicates scaled by n1/n; the solve
// runs on bias*bias^T + covariance, whose diagonal equals magic_mse_hat.
EnsembleScore opera_magic_score(const std::vector<EstimatorReport>& reports,
                                const EstimatorReport& wis_report, const BootstrapPlan& plan,
                                std::size_t dataset_size, double v_max = 1.0);

std::string ensemble_score_to_json(const EnsembleScore& score);
void write_ensemble_score_json(const EnsembleScore& score, const std::string& path);

}  // namespace opera
