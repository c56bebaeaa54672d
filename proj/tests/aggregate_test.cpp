#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "opera/aggregate/aggregate.hpp"
#include "opera/bootstrap/bootstrap.hpp"
#include "opera/envs/graph.hpp"
#include "opera/envs/policies.hpp"
#include "opera/errors.hpp"
#include "opera/rng.hpp"
#include "opera/rollout.hpp"

using namespace opera;
using namespace opera::envs;

namespace {

Eigen::MatrixXd random_pd(int k, std::uint64_t seed) {
  RngStream rng(seed);
  Eigen::MatrixXd m(k, k);
  for (int i = 0; i < k; ++i)
    for (int j = 0; j < k; ++j) m(i, j) = rng.next_gaussian();
  return m.transpose() * m + 0.1 * Eigen::MatrixXd::Identity(k, k);
}

// Closed form for positive definite A: alpha = A^-1 1 / (1^T A^-1 1).
Eigen::VectorXd closed_form(const Eigen::MatrixXd& a) {
  const Eigen::VectorXd unnorm = a.inverse() * Eigen::VectorXd::Ones(a.rows());
  return unnorm / unnorm.sum();
}

EstimatorReport constant_report(std::string id, double point, int b) {
  EstimatorReport r;
  r.estimator_id = std::move(id);
  r.point = point;
  r.replicates.assign(static_cast<std::size_t>(b), point);
  return r;
}

}  // namespace

TEST_SUITE("aggregate") {

TEST_CASE("solver matches the closed form on positive definite matrices") {
  for (std::uint64_t seed = 1; seed <= 50; ++seed) {
    const int k = 2 + static_cast<int>(seed % 5);
    const Eigen::MatrixXd a = random_pd(k, seed);
    const WeightVector w = solve_weights(a);
    const Eigen::VectorXd expect = closed_form(a);
    CHECK(w.ridge_used == 0.0);
    CHECK(std::abs(w.alpha.sum() - 1.0) <= 1e-9);
    CHECK((w.alpha - expect).cwiseAbs().maxCoeff() <= 1e-8);
    const double objective = expect.dot(a * expect);
    CHECK(w.objective_value == doctest::Approx(objective).epsilon(1e-10));
  }
}

TEST_CASE("variance-only matrices weight estimators inversely to variance") {
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(2, 2);
  a(0, 0) = 1.0;
  a(1, 1) = 4.0;
  const WeightVector w = solve_weights(a);
  CHECK(w.alpha(0) == doctest::Approx(0.8).epsilon(1e-12));
  CHECK(w.alpha(1) == doctest::Approx(0.2).epsilon(1e-12));
  // Equalizes alpha_i * A_ii across estimators.
  CHECK(w.alpha(0) * a(0, 0) == doctest::Approx(w.alpha(1) * a(1, 1)).epsilon(1e-12));
}

TEST_CASE("opposite biases of equal size cancel with equal weights") {
  const double v = 0.3;
  Eigen::Vector2d b(1.0, -1.0);
  const Eigen::MatrixXd a = b * b.transpose() + v * Eigen::MatrixXd::Identity(2, 2);
  const WeightVector w = solve_weights(a);
  CHECK(w.alpha(0) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(w.alpha(1) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("aligned biases push a weight negative") {
  // Shared-direction bias b = (1, 2) with a little independent noise: the
  // constrained minimum extrapolates, alpha -> (2, -1) as noise -> 0.
  Eigen::Vector2d b(1.0, 2.0);
  const double v = 0.01;
  const Eigen::MatrixXd a = b * b.transpose() + v * Eigen::MatrixXd::Identity(2, 2);
  const WeightVector w = solve_weights(a);
  const Eigen::VectorXd expect = closed_form(a);
  CHECK((w.alpha - expect).cwiseAbs().maxCoeff() <= 1e-8);
  CHECK(w.alpha(1) < 0.0);
  CHECK(w.alpha(0) > 1.0);

  // The exact rank-one limit: the KKT system is still nonsingular and the
  // solution annihilates the bias direction.
  Eigen::MatrixXd rank1(2, 2);
  rank1 << 1.0, 2.0, 2.0, 4.0;
  const WeightVector w0 = solve_weights(rank1);
  CHECK(w0.ridge_used == 0.0);
  CHECK(w0.alpha(0) == doctest::Approx(2.0).epsilon(1e-9));
  CHECK(w0.alpha(1) == doctest::Approx(-1.0).epsilon(1e-9));
  CHECK(w0.objective_value <= 1e-15);
}

TEST_CASE("bias-versus-variance trades off by the diagonal") {
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(2, 2);
  a(0, 0) = 0.25;  // variance-dominated estimator
  a(1, 1) = 1.0;   // bias-dominated estimator
  const WeightVector w = solve_weights(a);
  CHECK(w.alpha(0) == doctest::Approx(0.8).epsilon(1e-12));
  CHECK(w.alpha(1) == doctest::Approx(0.2).epsilon(1e-12));
}

TEST_CASE("a single estimator always gets weight one") {
  for (const double c : {0.0, 0.5, 2.0}) {
    Eigen::MatrixXd a(1, 1);
    a(0, 0) = c;
    const WeightVector w = solve_weights(a);
    CHECK(w.alpha(0) == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("degenerate matrices take the ridge retry") {
  const Eigen::MatrixXd zero = Eigen::MatrixXd::Zero(2, 2);
  const WeightVector w = solve_weights(zero);
  CHECK(w.ridge_used == doctest::Approx(1e-8).epsilon(1e-12));
  CHECK(w.alpha(0) == doctest::Approx(0.5).epsilon(1e-9));
  CHECK(w.alpha(1) == doctest::Approx(0.5).epsilon(1e-9));

  const Eigen::MatrixXd ones = Eigen::MatrixXd::Ones(3, 3);
  const WeightVector w1 = solve_weights(ones);
  CHECK(w1.ridge_used > 0.0);
  for (int i = 0; i < 3; ++i) CHECK(w1.alpha(i) == doctest::Approx(1.0 / 3.0).epsilon(1e-9));
}

TEST_CASE("weights are invariant to positive rescaling of the matrix") {
  const Eigen::MatrixXd a = random_pd(4, 9);
  const WeightVector base = solve_weights(a);
  for (const double c : {1e-3, 1.0, 1e3}) {
    const WeightVector scaled = solve_weights(Eigen::MatrixXd(c * a));
    CHECK((scaled.alpha - base.alpha).cwiseAbs().maxCoeff() <= 1e-10);
  }
}

TEST_CASE("malformed matrices are rejected") {
  Eigen::MatrixXd asym(2, 2);
  asym << 1.0, 0.5, -0.5, 1.0;
  CHECK_THROWS_WITH_AS(solve_weights(asym), "invalid error matrix", EstimatorError);

  const Eigen::MatrixXd negdef = -Eigen::MatrixXd::Identity(2, 2);
  CHECK_THROWS_WITH_AS(solve_weights(negdef), "invalid error matrix", EstimatorError);

  Eigen::MatrixXd nan_mat = Eigen::MatrixXd::Zero(2, 2);
  nan_mat(0, 0) = std::nan("");
  CHECK_THROWS_AS(solve_weights(nan_mat), EstimatorError);

  CHECK_THROWS_AS(solve_weights(Eigen::MatrixXd(0, 0)), EstimatorError);
}

TEST_CASE("combined scores carry provenance and honor v_max scaling") {
  GraphConfig cfg;
  cfg.horizon = 4;
  cfg.stochastic_transitions = true;
  cfg.stochastic_rewards = true;
  const TabularMdp mdp = build_graph(cfg);
  const TabularPolicy behavior = noised_policy(optimal_policy(mdp), 0.5);
  const TabularPolicy target = noised_policy(optimal_policy(mdp), 0.1);
  const Dataset data = rollout(mdp, behavior, 80, 3);
  EvalContext ctx{1.0, cfg.horizon};
  const std::vector<OpeEstimator> ests = {make_estimator("is", ctx, 2, 0),
                                          make_estimator("wis", ctx, 2, 0),
                                          make_estimator("fqe", ctx, 2, 0)};
  BootstrapPlan plan;
  plan.num_resamples = 80;
  plan.seed = 17;
  const auto reports = collect_reports(ests, target, data, plan);
  const ErrorMatrix m = build_error_matrix(reports, plan, data.size());

  const EnsembleScore opera = opera_score(reports, m, 5.0);
  CHECK(opera.method == "opera");
  double sum = 0.0;
  double value = 0.0;
  for (std::size_t i = 0; i < reports.size(); ++i) {
    sum += opera.weights[i];
    value += opera.weights[i] * reports[i].point;
    CHECK(opera.estimator_ids[i] == reports[i].estimator_id);
    CHECK(opera.points[i] == reports[i].point);
    // Reported diagnostics stay in raw units regardless of v_max.
    CHECK(opera.mse_hat_diagonal[i] ==
          doctest::Approx(m.a_hat(static_cast<int>(i), static_cast<int>(i))).epsilon(1e-15));
  }
  CHECK(std::abs(sum - 1.0) <= 1e-9);
  CHECK(opera.value == doctest::Approx(value).epsilon(1e-12));

  const EnsembleScore rescaled = opera_score(reports, m, 1.0);
  CHECK(rescaled.value == doctest::Approx(opera.value).epsilon(1e-9));

  const EnsembleScore best = best_ope_score(reports, m);
  int argmin = 0;
  for (int i = 1; i < 3; ++i)
    if (m.a_hat(i, i) < m.a_hat(argmin, argmin)) argmin = i;
  CHECK(best.method == "best_ope");
  CHECK(best.value == reports[static_cast<std::size_t>(argmin)].point);
  for (int i = 0; i < 3; ++i)
    CHECK(best.weights[static_cast<std::size_t>(i)] == (i == argmin ? 1.0 : 0.0));

  const EnsembleScore avg = avg_ope_score(reports);
  CHECK(avg.method == "avg_ope");
  const double mean = (reports[0].point + reports[1].point + reports[2].point) / 3.0;
  CHECK(avg.value == doctest::Approx(mean).epsilon(1e-12));
  for (const double w : avg.weights) CHECK(w == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
}

TEST_CASE("best-of ties break toward the lowest index") {
  const auto r1 = constant_report("a", 1.0, 4);
  const auto r2 = constant_report("b", 2.0, 4);
  const auto r3 = constant_report("c", 3.0, 4);
  ErrorMatrix m;
  m.a_hat = Eigen::MatrixXd::Zero(3, 3);
  m.a_hat(0, 0) = 2.0;
  m.a_hat(1, 1) = 1.0;
  m.a_hat(2, 2) = 1.0;
  const EnsembleScore best = best_ope_score({r1, r2, r3}, m);
  CHECK(best.value == 2.0);
  CHECK(best.weights[1] == 1.0);
}

TEST_CASE("duplicate estimators leave the combined value unchanged") {
  GraphConfig cfg;
  cfg.horizon = 4;
  cfg.stochastic_transitions = true;
  cfg.stochastic_rewards = true;
  const TabularMdp mdp = build_graph(cfg);
  const TabularPolicy behavior = noised_policy(optimal_policy(mdp), 0.5);
  const TabularPolicy target = noised_policy(optimal_policy(mdp), 0.1);
  EvalContext ctx{1.0, cfg.horizon};
  BootstrapPlan plan;
  plan.num_resamples = 60;

  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Dataset data = rollout(mdp, behavior, 64, 1000 + seed);
    plan.seed = seed;
    const std::vector<OpeEstimator> base = {make_estimator("is", ctx, 2, 0),
                                            make_estimator("wis", ctx, 2, 0)};
    const std::vector<OpeEstimator> dup = {make_estimator("is", ctx, 2, 0),
                                           make_estimator("wis", ctx, 2, 0),
                                           make_estimator("wis", ctx, 2, 0)};
    const auto reports = collect_reports(base, target, data, plan);
    const auto dup_reports = collect_reports(dup, target, data, plan);
    // Shared seeds make the duplicate a bitwise copy of its sibling.
    CHECK(dup_reports[2].point == dup_reports[1].point);
    CHECK(dup_reports[2].replicates == dup_reports[1].replicates);

    const EnsembleScore a =
        opera_score(reports, build_error_matrix(reports, plan, data.size()));
    const EnsembleScore b =
        opera_score(dup_reports, build_error_matrix(dup_reports, plan, data.size()));
    CHECK(b.ridge_used > 0.0);  // duplicated rows make the KKT system singular
    CHECK(std::abs(a.value - b.value) < 1e-6);
  }
}

TEST_CASE("magic scoring combines interval bias with replicate covariance") {
  const int b = 4;
  EstimatorReport wis = constant_report("wis", 0.5, b);
  wis.replicates = {0.0, 0.0, 1.0, 1.0};  // CI [0, 1]

  const auto biased = constant_report("biased", 2.0, b);   // bias 1, no variance
  const auto inside = constant_report("inside", 0.5, b);   // bias 0, no variance
  BootstrapPlan plan;
  plan.num_resamples = b;
  const std::size_t n = 4;  // eta 0.5 -> n1 = 2, scale = 1/2

  const EnsembleScore score = opera_magic_score({biased, inside}, wis, plan, n);
  CHECK(score.method == "opera_magic");
  CHECK(score.mse_hat_diagonal[0] == 1.0);
  CHECK(score.mse_hat_diagonal[1] == 0.0);
  CHECK(score.mse_hat_diagonal[0] ==
        magic_mse_hat(biased.point, wis.replicates, biased.replicates, 0.5));
  CHECK(score.weights[0] == doctest::Approx(0.0).epsilon(1e-9));
  CHECK(score.weights[1] == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(score.value == doctest::Approx(0.5).epsilon(1e-9));

  EstimatorReport spread = constant_report("spread", 0.5, b);
  spread.replicates = {0.0, 1.0, 0.0, 1.0};
  const EnsembleScore with_var = opera_magic_score({biased, spread}, wis, plan, n);
  // Sample variance 1/3 scaled by 1/2 on the diagonal.
  CHECK(with_var.mse_hat_diagonal[1] == doctest::Approx(1.0 / 6.0).epsilon(1e-12));
}

TEST_CASE("ensemble scores serialize to json") {
  EnsembleScore score;
  score.method = "opera";
  score.value = 1.25;
  score.weights = {0.75, 0.25};
  score.ridge_used = 0.0;
  score.estimator_ids = {"is", "wis"};
  score.points = {1.5, 0.5};
  score.mse_hat_diagonal = {0.1, 0.2};
  const nlohmann::json j = nlohmann::json::parse(ensemble_score_to_json(score));
  CHECK(j["method"] == "opera");
  CHECK(j["value"].get<double>() == 1.25);
  CHECK(j["weights"][0].get<double>() == 0.75);
  CHECK(j["estimator_ids"][1] == "wis");
  CHECK(j["mse_hat_diagonal"][1].get<double>() == 0.2);

  const std::string path = "score_test.json";
  write_ensemble_score_json(score, path);
  CHECK(std::filesystem::exists(path));
  std::filesystem::remove(path);
}

}  // TEST_SUITE
