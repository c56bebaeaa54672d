#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "opera/estimators/estimators.hpp"
#include "opera/trajectory.hpp"

namespace opera {

// Subsampled-bootstrap plan. Resample j of a size-n dataset draws
// n1 = ceil(n^eta) trajectories uniformly with replacement, with RNG derived
// from (seed, j) only, so resamples are shared across estimators and
// reproducible under any evaluation order.
struct BootstrapPlan {
  int num_resamples = 200;
  double eta = 0.5;
  std::uint64_t seed = 0;
  // "self": center each estimator's replicates on its own full-data point.
  // Any estimator id: center every row on that (consistent) estimator's point.
  std::string centering = "self";

  void validate() const;
  int subsample_size(std::size_t n) const;
};

struct EstimatorReport {
  std::string estimator_id;
  double point = 0.0;
  std::vector<double> replicates;
  // Resamples where the estimator failed and the full-data point was recorded
  // instead. More than 20% of them is an error at collection time.
  int fallback_count = 0;
};

// Cross-estimator error matrix: a_hat = (n1/n) * (1/B) * delta delta^T where
// delta_ij = replicate_ij - center_i. Symmetric PSD by construction.
struct ErrorMatrix {
  Eigen::MatrixXd a_hat;
  BootstrapPlan plan;
  std::size_t dataset_size = 0;
  int subsample_size = 0;
  double scale_applied = 1.0;  // n1 / n
};

// n1 indices drawn uniformly with replacement from [0, n).
std::vector<int> resample_indices(std::size_t n, int n1, std::uint64_t seed);

Dataset resample(const Dataset& data, int n1, std::uint64_t seed);

// Evaluator over dataset indices; the adapter layer between the bootstrap and
// whatever the estimator actually consumes (trajectory or bandit data).
struct IndexedEvaluator {
  std::string id;
  std::function<double(std::span<const int>, std::uint64_t)> eval;
};

// Shared-resample bootstrap over any indexed evaluators. Estimator failures
// (EstimatorError) on a resample fall back to that estimator's full-data
// point; a fallback rate above 20% raises
// EstimatorError("unstable estimator under subsampling").
std::vector<EstimatorReport> collect_reports_indexed(std::size_t n,
                                                     const std::vector<IndexedEvaluator>& estimators,
                                                     const BootstrapPlan& plan, int threads = 1);

// Trajectory-dataset front end over collect_reports_indexed.
std::vector<EstimatorReport> collect_reports(const std::vector<OpeEstimator>& estimators,
                                             const TabularPolicy& policy, const Dataset& data,
                                             const BootstrapPlan& plan, int threads = 1);

ErrorMatrix build_error_matrix(const std::vector<EstimatorReport>& reports,
                               const BootstrapPlan& plan, std::size_t dataset_size);

// Diagonal entry of the self-centered error matrix for one estimator.
double mse_hat(const EstimatorReport& report, const BootstrapPlan& plan,
               std::size_t dataset_size);

// Percentile with linear interpolation between order statistics (the common
// "type 7" rule). q in [0, 1].
double percentile(std::vector<double> values, double q);

// MAGIC-style MSE surrogate: squared distance from the point to the nearest
// endpoint of the [25th, 75th] percentile interval of the WIS replicates
// (zero inside), plus the sample variance of the estimator's own replicates
// scaled by subsample_scale (= n1/n).
double magic_mse_hat(double estimator_point, std::span<const double> wis_replicates,
                     std::span<const double> estimator_replicates, double subsample_scale);

// Replicate matrix as CSV: one row per estimator (id first), one column per
// resample.
void write_replicates_csv(const std::vector<EstimatorReport>& reports, const std::string& path);

std::string error_matrix_to_json(const ErrorMatrix& matrix);
void write_error_matrix_json(const ErrorMatrix& matrix, const std::string& path);

}  // namespace opera
