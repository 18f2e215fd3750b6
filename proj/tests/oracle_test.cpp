#include "ensync/oracle.hpp"

#include "support/instances.hpp"

#include <catch2/catch.hpp>

using namespace ensync;
using kalman::GaussianBelief;
using kalman::StepModel;

namespace {

StepModel unit_step() {
  StepModel step;
  step.obs_matrix = Eigen::MatrixXd::Identity(1, 1);
  step.trans_matrix = Eigen::MatrixXd::Identity(1, 1);
  step.obs_cov = Eigen::MatrixXd::Identity(1, 1);
  step.proc_cov = Eigen::MatrixXd::Identity(1, 1);
  return step;
}

GaussianBelief standard_normal() {
  GaussianBelief belief;
  belief.mean = Eigen::VectorXd::Zero(1);
  belief.cov = Eigen::MatrixXd::Identity(1, 1);
  return belief;
}

}  // namespace

TEST_CASE("build_joint: scalar chain has the hand-computed covariance") {
  const auto joint = oracle::build_joint(standard_normal(), {unit_step()});
  REQUIRE(joint.mean.size() == 3);  // theta_0, theta_1, y_1
  Eigen::MatrixXd expected(3, 3);
  expected << 1, 1, 1, 1, 2, 2, 1, 2, 3;
  CHECK((joint.cov - expected).cwiseAbs().maxCoeff() < 1e-14);
  CHECK(joint.mean.isZero(0.0));
}

TEST_CASE("build_joint: deterministic chain collapses to rank p") {
  StepModel step;
  step.obs_matrix = Eigen::MatrixXd::Identity(2, 2);
  step.trans_matrix = Eigen::MatrixXd::Identity(2, 2);
  step.obs_cov = Eigen::MatrixXd::Zero(2, 2);
  step.proc_cov = Eigen::MatrixXd::Zero(2, 2);

  GaussianBelief init;
  init.mean = Eigen::VectorXd::Zero(2);
  init.cov = Eigen::MatrixXd::Identity(2, 2);

  const auto joint = oracle::build_joint(init, {step, step});
  const Eigen::VectorXd eigs =
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(joint.cov).eigenvalues();
  CHECK((eigs.array() > 1e-9).count() == 2);
  // every variable is a copy of theta_0
  CHECK((joint.cov.block(0, 0, 2, 2) - init.cov).cwiseAbs().maxCoeff() < 1e-14);
  CHECK((joint.cov.block(2, 0, 2, 2) - init.cov).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("build_joint: marginal of theta_0 equals the initial belief") {
  const auto inst = support::make_random_instance(5);
  const auto joint = oracle::build_joint(inst.init, inst.steps);
  const Eigen::Index p = inst.init.dim();
  CHECK((joint.cov.topLeftCorner(p, p) - inst.init.cov).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((joint.mean.head(p) - inst.init.mean).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("build_joint: size guard rejects large instances") {
  GaussianBelief init;
  init.mean = Eigen::VectorXd::Zero(10);
  init.cov = Eigen::MatrixXd::Identity(10, 10);
  StepModel step;
  step.obs_matrix = Eigen::MatrixXd::Identity(10, 10);
  step.trans_matrix = Eigen::MatrixXd::Identity(10, 10);
  step.obs_cov = Eigen::MatrixXd::Identity(10, 10);
  step.proc_cov = Eigen::MatrixXd::Identity(10, 10);
  const std::vector<StepModel> steps(25, step);
  CHECK_THROWS_AS(oracle::build_joint(init, steps), ContractViolation);
}

TEST_CASE("condition: scalar example matches the sequential update") {
  const auto joint = oracle::build_joint(standard_normal(), {unit_step()});
  const auto result =
      oracle::condition_on_observations(joint, {Eigen::VectorXd::Constant(1, 3.0)});
  REQUIRE(result.filtered.size() == 1);
  CHECK(result.filtered[0].mean(0) == Approx(2.0).epsilon(1e-12));
  CHECK(result.filtered[0].cov(0, 0) == Approx(2.0 / 3.0).epsilon(1e-12));
  // N = 1: filtered and smoothed coincide
  CHECK(result.smoothed[1].mean(0) == Approx(2.0).epsilon(1e-12));
}

TEST_CASE("condition: prior-predictive observations leave the means alone") {
  const auto inst = support::make_random_instance(6);
  const auto joint = oracle::build_joint(inst.init, inst.steps);
  std::vector<Eigen::VectorXd> mean_obs;
  const Eigen::Index m = joint.obs_dim;
  for (Eigen::Index n = 0; n < joint.n_steps; ++n) {
    mean_obs.push_back(joint.mean.segment(joint.obs_offset() + n * m, m));
  }
  const auto result = oracle::condition_on_observations(joint, mean_obs);
  for (Eigen::Index n = 0; n <= joint.n_steps; ++n) {
    const Eigen::VectorXd prior_mean =
        joint.mean.segment(joint.theta_offset(n), joint.state_dim);
    CHECK((result.smoothed[static_cast<std::size_t>(n)].mean - prior_mean)
              .cwiseAbs()
              .maxCoeff() < 1e-10);
  }
}

TEST_CASE("condition: final smoothed belief equals the final filtered belief") {
  const auto inst = support::make_random_instance(7);
  const auto joint = oracle::build_joint(inst.init, inst.steps);
  const auto result = oracle::condition_on_observations(joint, inst.observations);
  const auto& last_filtered = result.filtered.back();
  const auto& last_smoothed = result.smoothed.back();
  CHECK(support::rel_gap(last_smoothed.mean, last_filtered.mean) < 1e-10);
  CHECK(support::rel_gap(last_smoothed.cov, last_filtered.cov) < 1e-10);

  const auto filter_steps = kalman::filter(inst.init, inst.steps, inst.observations);
  CHECK(support::rel_gap(filter_steps.back().posterior.mean, last_filtered.mean) < 1e-9);
}

TEST_CASE("equivalence: filter and smoother match the oracle on 100 instances") {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const auto gaps = support::compare_with_oracle(support::make_random_instance(seed));
    INFO("seed " << seed);
    CHECK(gaps.filtered_mean < 1e-8);
    CHECK(gaps.filtered_cov < 1e-6);
    CHECK(gaps.smoothed_mean < 1e-8);
    CHECK(gaps.smoothed_cov < 1e-6);
  }
}

TEST_CASE("equivalence: zero W-blocks exercise the smoother jitter policy") {
  bool any_jitter = false;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto gaps =
        support::compare_with_oracle(support::make_random_instance(seed, true));
    INFO("seed " << seed);
    CHECK(gaps.filtered_mean < 1e-4);
    CHECK(gaps.filtered_cov < 1e-4);
    CHECK(gaps.smoothed_mean < 1e-4);
    CHECK(gaps.smoothed_cov < 1e-4);
    any_jitter = any_jitter || gaps.jitter_seen;
  }
  CHECK(any_jitter);
}
