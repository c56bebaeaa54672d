#include "opera/aggregate/aggregate.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <nlohmann/json.hpp>

#include "opera/errors.hpp"

namespace opera {

namespace {

constexpr double kConditionLimit = 1e12;

struct KktSolution {
  Eigen::VectorXd alpha;
  bool singular = false;
};

KktSolution solve_kkt(const Eigen::MatrixXd& a) {
  const int k = static_cast<int>(a.rows());
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(k + 1, k + 1);
  m.topLeftCorner(k, k) = 2.0 * a;
  m.topRightCorner(k, 1).setOnes();
  m.bottomLeftCorner(1, k).setOnes();
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(k + 1);
  rhs(k) = 1.0;

  Eigen::JacobiSVD<Eigen::MatrixXd> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const double s_max = svd.singularValues()(0);
  const double s_min = svd.singularValues()(k);
  KktSolution out;
  out.singular = !(s_min > 0.0) || s_max / s_min > kConditionLimit;
  out.alpha = svd.solve(rhs).head(k);
  return out;
}

void check_valid(const Eigen::MatrixXd& a) {
  if (a.rows() < 1 || a.rows() != a.cols()) throw EstimatorError("invalid error matrix");
  const double scale = std::max(1.0, a.cwiseAbs().maxCoeff());
  if ((a - a.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale)
    throw EstimatorError("invalid error matrix");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(a, Eigen::EigenvaluesOnly);
  if (eig.eigenvalues()(0) < -1e-10 * scale) throw EstimatorError("invalid error matrix");
}

EnsembleScore make_score(std::string method, const std::vector<EstimatorReport>& reports,
                         const Eigen::VectorXd& alpha, double ridge_used,
                         const Eigen::MatrixXd* diag_source) {
  EnsembleScore score;
  score.method = std::move(method);
  score.ridge_used = ridge_used;
  const std::size_t k = reports.size();
  score.weights.resize(k);
  score.estimator_ids.resize(k);
  score.points.resize(k);
  score.mse_hat_diagonal.assign(k, 0.0);
  double value = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    score.weights[i] = alpha(static_cast<Eigen::Index>(i));
    score.estimator_ids[i] = reports[i].estimator_id;
    score.points[i] = reports[i].point;
    if (diag_source != nullptr)
      score.mse_hat_diagonal[i] = (*diag_source)(static_cast<Eigen::Index>(i),
                                                 static_cast<Eigen::Index>(i));
    value += score.weights[i] * reports[i].point;
  }
  score.value = value;
  return score;
}

}  // namespace

WeightVector solve_weights(const Eigen::MatrixXd& a) {
  check_valid(a);
  const int k = static_cast<int>(a.rows());

  WeightVector out;
  KktSolution sol = solve_kkt(a);
  if (sol.singular) {
    const double eps = 1e-8 * std::max(a.trace() / static_cast<double>(k), 1.0);
    const Eigen::MatrixXd ridged = a + eps * Eigen::MatrixXd::Identity(k, k);
    // With a PSD matrix the ridged KKT system is nonsingular; the SVD solution
    // is kept even if the conditioning heuristic still objects.
    sol = solve_kkt(ridged);
    out.ridge_used = eps;
  }
  out.alpha = std::move(sol.alpha);
  out.objective_value = out.alpha.dot(a * out.alpha);

  const double total = out.alpha.sum();
  if (!std::isfinite(total) || std::abs(total - 1.0) > 1e-9)
    throw EstimatorError("invalid error matrix");
  return out;
}

WeightVector solve_weights(const ErrorMatrix& matrix) { return solve_weights(matrix.a_hat); }

EnsembleScore opera_score(const std::vector<EstimatorReport>& reports, const ErrorMatrix& matrix,
                          double v_max) {
  if (reports.empty()) throw ConfigError("no reports to combine");
  if (matrix.a_hat.rows() != static_cast<Eigen::Index>(reports.size()))
    throw ConfigError("error matrix size does not match report count");
  if (!(v_max > 0.0)) throw ConfigError("v_max must be positive");

  const WeightVector w = solve_weights(Eigen::MatrixXd(matrix.a_hat / (v_max * v_max)));
  EnsembleScore score = make_score("opera", reports, w.alpha, w.ridge_used, &matrix.a_hat);
  return score;
}

EnsembleScore best_ope_score(const std::vector<EstimatorReport>& reports,
                             const ErrorMatrix& matrix) {
  if (reports.empty()) throw ConfigError("no reports to combine");
  if (matrix.a_hat.rows() != static_cast<Eigen::Index>(reports.size()))
    throw ConfigError("error matrix size does not match report count");
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < matrix.a_hat.rows(); ++i)
    if (matrix.a_hat(i, i) < matrix.a_hat(best, best)) best = i;
  Eigen::VectorXd alpha = Eigen::VectorXd::Zero(matrix.a_hat.rows());
  alpha(best) = 1.0;
  return make_score("best_ope", reports, alpha, 0.0, &matrix.a_hat);
}

EnsembleScore avg_ope_score(const std::vector<EstimatorReport>& reports) {
  if (reports.empty()) throw ConfigError("no reports to combine");
  const Eigen::Index k = static_cast<Eigen::Index>(reports.size());
  Eigen::VectorXd alpha =
      Eigen::VectorXd::Constant(k, 1.0 / static_cast<double>(k));
  return make_score("avg_ope", reports, alpha, 0.0, nullptr);
}

EnsembleScore opera_magic_score(const std::vector<EstimatorReport>& reports,
                                const EstimatorReport& wis_report, const BootstrapPlan& plan,
                                std::size_t dataset_size, double v_max) {
  if (reports.empty()) throw ConfigError("no reports to combine");
  if (wis_report.replicates.empty()) throw ConfigError("wis report carries no replicates");
  if (!(v_max > 0.0)) throw ConfigError("v_max must be positive");
  const int k = static_cast<int>(reports.size());
  const int B = static_cast<int>(reports.front().replicates.size());
  for (const EstimatorReport& r : reports)
    if (static_cast<int>(r.replicates.size()) != B)
      throw ConfigError("replicate counts differ across estimators");

  std::vector<double> wis(wis_report.replicates.begin(), wis_report.replicates.end());
  const double lo = percentile(wis, 0.25);
  const double hi = percentile(std::move(wis), 0.75);

  const int n1 = plan.subsample_size(dataset_size);
  const double scale = static_cast<double>(n1) / static_cast<double>(dataset_size);

  Eigen::VectorXd bias(k);
  Eigen::VectorXd means(k);
  for (int i = 0; i < k; ++i) {
    const double point = reports[static_cast<std::size_t>(i)].point;
    bias(i) = point < lo ? point - lo : (point > hi ? point - hi : 0.0);
    double m = 0.0;
    for (double rep : reports[static_cast<std::size_t>(i)].replicates) m += rep;
    means(i) = m / static_cast<double>(B);
  }

  Eigen::MatrixXd magic = bias * bias.transpose();
  if (B > 1) {
    for (int i = 0; i < k; ++i)
      for (int j = i; j < k; ++j) {
        double acc = 0.0;
        const std::vector<double>& ri = reports[static_cast<std::size_t>(i)].replicates;
        const std::vector<double>& rj = reports[static_cast<std::size_t>(j)].replicates;
        for (int b = 0; b < B; ++b)
          acc += (ri[static_cast<std::size_t>(b)] - means(i)) *
                 (rj[static_cast<std::size_t>(b)] - means(j));
        const double cov = scale * acc / static_cast<double>(B - 1);
        magic(i, j) += cov;
        if (i != j) magic(j, i) += cov;
      }
  }

  const WeightVector w = solve_weights(Eigen::MatrixXd(magic / (v_max * v_max)));
  EnsembleScore score = make_score("opera_magic", reports, w.alpha, w.ridge_used, &magic);
  return score;
}

std::string ensemble_score_to_json(const EnsembleScore& score) {
  nlohmann::json j;
  j["method"] = score.method;
  j["value"] = score.value;
  j["weights"] = score.weights;
  j["ridge_used"] = score.ridge_used;
  j["estimator_ids"] = score.estimator_ids;
  j["points"] = score.points;
  j["mse_hat_diagonal"] = score.mse_hat_diagonal;
  return j.dump(1);
}

void write_ensemble_score_json(const EnsembleScore& score, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw ConfigError("cannot open '" + path + "' for writing");
  f << ensemble_score_to_json(score) << "\n";
  if (!f) throw ConfigError("failed writing '" + path + "'");
}

}  // namespace opera
