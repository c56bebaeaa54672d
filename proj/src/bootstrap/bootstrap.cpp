#include "opera/bootstrap/bootstrap.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <nlohmann/json.hpp>

#include "opera/errors.hpp"
#include "opera/parallel.hpp"
#include "opera/rng.hpp"

namespace opera {

namespace {

// Seed-path tags for the stages of one bootstrap collection.
constexpr std::uint64_t kPointTag = 0x706f696e74ULL;     // full-data evaluation
constexpr std::uint64_t kIndicesTag = 0x696e646963ULL;   // resample index draws
constexpr std::uint64_t kEvalTag = 0x6576616cULL;        // per-resample estimator seed

}  // namespace

void BootstrapPlan::validate() const {
  if (num_resamples < 2) throw ConfigError("num_resamples must be >= 2");
  if (!(eta > 0.0) || eta > 1.0) throw ConfigError("eta must lie in (0, 1]");
  if (centering.empty()) throw ConfigError("centering must be 'self' or an estimator id");
}

int BootstrapPlan::subsample_size(std::size_t n) const {
  if (n == 0) throw ConfigError("dataset must be non-empty");
  const double raw = std::pow(static_cast<double>(n), eta);
  int n1 = static_cast<int>(std::ceil(raw - 1e-12));  // guard fp overshoot of exact powers
  n1 = std::max(1, std::min(n1, static_cast<int>(n)));
  return n1;
}

std::vector<int> resample_indices(std::size_t n, int n1, std::uint64_t seed) {
  if (n == 0) throw ConfigError("dataset must be non-empty");
  if (n1 < 1) throw ConfigError("subsample size must be >= 1");
  RngStream rng(seed);
  std::vector<int> indices(static_cast<std::size_t>(n1));
  for (int& idx : indices) idx = static_cast<int>(rng.next_below(n));
  return indices;
}

Dataset resample(const Dataset& data, int n1, std::uint64_t seed) {
  const std::vector<int> indices = resample_indices(data.size(), n1, seed);
  return data.subset(indices);
}

std::vector<EstimatorReport> collect_reports_indexed(
    std::size_t n, const std::vector<IndexedEvaluator>& estimators, const BootstrapPlan& plan,
    int threads) {
  plan.validate();
  if (estimators.empty()) throw ConfigError("at least one estimator is required");
  const int B = plan.num_resamples;
  const int n1 = plan.subsample_size(n);
  const std::size_t k = estimators.size();

  RngStream root(plan.seed);
  const RngStream indices_root = root.child(kIndicesTag);
  const RngStream eval_root = root.child(kEvalTag);

  // Full-data points first; a failure here is a hard error. The seed is
  // shared across estimators (like the per-resample seeds below) so that
  // permuting or duplicating estimators cannot change any one of them.
  std::vector<double> points(k);
  {
    std::vector<int> all(n);
    for (std::size_t i = 0; i < n; ++i) all[i] = static_cast<int>(i);
    const std::uint64_t point_seed = root.child(kPointTag).next_u64();
    for (std::size_t e = 0; e < k; ++e) points[e] = estimators[e].eval(all, point_seed);
  }

  std::vector<std::vector<double>> replicates(k,
                                              std::vector<double>(static_cast<std::size_t>(B)));
  std::vector<std::vector<unsigned char>> fell_back(
      k, std::vector<unsigned char>(static_cast<std::size_t>(B), 0));

  parallel_for(B, threads, [&](int j) {
    // Resample j is a pure function of (plan.seed, j); all estimators see the
    // same draw and the same evaluation seed.
    RngStream idx_rng = indices_root.child(static_cast<std::uint64_t>(j));
    std::vector<int> indices(static_cast<std::size_t>(n1));
    for (int& idx : indices) idx = static_cast<int>(idx_rng.next_below(n));
    const std::uint64_t eval_seed =
        eval_root.child(static_cast<std::uint64_t>(j)).next_u64();
    for (std::size_t e = 0; e < k; ++e) {
      try {
        replicates[e][static_cast<std::size_t>(j)] = estimators[e].eval(indices, eval_seed);
      } catch (const EstimatorError&) {
        replicates[e][static_cast<std::size_t>(j)] = points[e];
        fell_back[e][static_cast<std::size_t>(j)] = 1;
      }
    }
  });

  std::vector<EstimatorReport> reports(k);
  for (std::size_t e = 0; e < k; ++e) {
    reports[e].estimator_id = estimators[e].id;
    reports[e].point = points[e];
    reports[e].replicates = std::move(replicates[e]);
    reports[e].fallback_count = 0;
    for (unsigned char f : fell_back[e]) reports[e].fallback_count += f;
    if (reports[e].fallback_count > 0.2 * static_cast<double>(B))
      throw EstimatorError("unstable estimator under subsampling: " + reports[e].estimator_id);
  }
  return reports;
}

std::vector<EstimatorReport> collect_reports(const std::vector<OpeEstimator>& estimators,
                                             const TabularPolicy& policy, const Dataset& data,
                                             const BootstrapPlan& plan, int threads) {
  data.validate();
  std::vector<IndexedEvaluator> adapters;
  adapters.reserve(estimators.size());
  for (const OpeEstimator& est : estimators)
    adapters.push_back(IndexedEvaluator{
        est.id, [&est, &policy, &data](std::span<const int> indices, std::uint64_t seed) {
          return est.estimate(policy, data.subset(indices), seed);
        }});
  return collect_reports_indexed(data.size(), adapters, plan, threads);
}

ErrorMatrix build_error_matrix(const std::vector<EstimatorReport>& reports,
                               const BootstrapPlan& plan, std::size_t dataset_size) {
  plan.validate();
  if (reports.empty()) throw ConfigError("at least one report is required");
  const int k = static_cast<int>(reports.size());
  const int B = static_cast<int>(reports.front().replicates.size());
  if (B < 1) throw ConfigError("reports carry no replicates");
  for (const EstimatorReport& r : reports)
    if (static_cast<int>(r.replicates.size()) != B)
      throw ConfigError("replicate counts differ across estimators");

  std::vector<double> centers(static_cast<std::size_t>(k));
  if (plan.centering == "self") {
    for (int i = 0; i < k; ++i) centers[static_cast<std::size_t>(i)] = reports[static_cast<std::size_t>(i)].point;
  } else {
    const auto it = std::find_if(reports.begin(), reports.end(), [&](const EstimatorReport& r) {
      return r.estimator_id == plan.centering;
    });
    if (it == reports.end())
      throw ConfigError("centering estimator '" + plan.centering + "' not among reports");
    std::fill(centers.begin(), centers.end(), it->point);
  }

  const int n1 = plan.subsample_size(dataset_size);
  const double scale = static_cast<double>(n1) / static_cast<double>(dataset_size);

  ErrorMatrix out;
  out.plan = plan;
  out.dataset_size = dataset_size;
  out.subsample_size = n1;
  out.scale_applied = scale;
  out.a_hat = Eigen::MatrixXd::Zero(k, k);
  for (int i = 0; i < k; ++i) {
    for (int j = i; j < k; ++j) {
      double acc = 0.0;
      const std::vector<double>& ri = reports[static_cast<std::size_t>(i)].replicates;
      const std::vector<double>& rj = reports[static_cast<std::size_t>(j)].replicates;
      for (int b = 0; b < B; ++b)
        acc += (ri[static_cast<std::size_t>(b)] - centers[static_cast<std::size_t>(i)]) *
               (rj[static_cast<std::size_t>(b)] - centers[static_cast<std::size_t>(j)]);
      const double value = scale * acc / static_cast<double>(B);
      out.a_hat(i, j) = value;
      out.a_hat(j, i) = value;
    }
  }
  return out;
}

double mse_hat(const EstimatorReport& report, const BootstrapPlan& plan,
               std::size_t dataset_size) {
  plan.validate();
  if (report.replicates.empty()) throw ConfigError("report carries no replicates");
  const int n1 = plan.subsample_size(dataset_size);
  const double scale = static_cast<double>(n1) / static_cast<double>(dataset_size);
  double acc = 0.0;
  for (double rep : report.replicates) {
    const double d = rep - report.point;
    acc += d * d;
  }
  return scale * acc / static_cast<double>(report.replicates.size());
}

double percentile(std::vector<double> values, double q) {
  if (values.empty()) throw ConfigError("percentile of empty set");
  if (q < 0.0 || q > 1.0) throw ConfigError("percentile q must lie in [0, 1]");
  std::sort(values.begin(), values.end());
  const double h = q * static_cast<double>(values.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(h);
  if (lo + 1 >= values.size()) return values.back();
  const double frac = h - static_cast<double>(lo);
  return values[lo] + frac * (values[lo + 1] - values[lo]);
}

double magic_mse_hat(double estimator_point, std::span<const double> wis_replicates,
                     std::span<const double> estimator_replicates, double subsample_scale) {
  if (wis_replicates.empty() || estimator_replicates.empty())
    throw ConfigError("magic_mse_hat requires replicates");
  std::vector<double> wis(wis_replicates.begin(), wis_replicates.end());
  const double lo = percentile(wis, 0.25);
  const double hi = percentile(std::move(wis), 0.75);

  double bias = 0.0;
  if (estimator_point < lo)
    bias = estimator_point - lo;
  else if (estimator_point > hi)
    bias = estimator_point - hi;

  const std::size_t b = estimator_replicates.size();
  double mean = 0.0;
  for (double r : estimator_replicates) mean += r;
  mean /= static_cast<double>(b);
  double var = 0.0;
  for (double r : estimator_replicates) var += (r - mean) * (r - mean);
  var = b > 1 ? var / static_cast<double>(b - 1) : 0.0;

  return bias * bias + subsample_scale * var;
}

void write_replicates_csv(const std::vector<EstimatorReport>& reports, const std::string& path) {
  if (reports.empty()) throw ConfigError("no reports to write");
  std::ofstream f(path);
  if (!f) throw ConfigError("cannot open '" + path + "' for writing");
  char buffer[40];
  for (const EstimatorReport& r : reports) {
    f << r.estimator_id;
    for (double rep : r.replicates) {
      std::snprintf(buffer, sizeof(buffer), "%.12g", rep);
      f << ',' << buffer;
    }
    f << '\n';
  }
  if (!f) throw ConfigError("failed writing '" + path + "'");
}

std::string error_matrix_to_json(const ErrorMatrix& matrix) {
  nlohmann::json j;
  const int k = static_cast<int>(matrix.a_hat.rows());
  nlohmann::json rows = nlohmann::json::array();
  for (int i = 0; i < k; ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (int c = 0; c < k; ++c) row.push_back(matrix.a_hat(i, c));
    rows.push_back(std::move(row));
  }
  j["a_hat"] = std::move(rows);
  j["k"] = k;
  j["plan"] = {{"num_resamples", matrix.plan.num_resamples},
               {"eta", matrix.plan.eta},
               {"seed", matrix.plan.seed},
               {"centering", matrix.plan.centering}};
  j["dataset_size"] = matrix.dataset_size;
  j["subsample_size"] = matrix.subsample_size;
  j["scale_applied"] = matrix.scale_applied;
  return j.dump(1);
}

void write_error_matrix_json(const ErrorMatrix& matrix, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw ConfigError("cannot open '" + path + "' for writing");
  f << error_matrix_to_json(matrix) << "\n";
  if (!f) throw ConfigError("failed writing '" + path + "'");
}

}  // namespace opera
