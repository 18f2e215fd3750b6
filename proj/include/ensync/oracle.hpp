// Brute-force exact inference over small state-space instances.
//
// Builds the explicit joint Gaussian of (theta_0, ..., theta_N, y_1, ..., y_N)
// by linear propagation and conditions on observations directly. Deliberately
// O((N p)^3); meant as a correctness reference for the sequential filter and
// smoother, and independent of them.
#pragma once

#include "ensync/kalman.hpp"

#include <vector>

namespace ensync::oracle {

struct JointGaussian {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
  Eigen::Index state_dim = 0;  // p
  Eigen::Index obs_dim = 0;    // m
  Eigen::Index n_steps = 0;    // N

  Eigen::Index theta_offset(Eigen::Index n) const { return n * state_dim; }
  Eigen::Index obs_offset() const { return (n_steps + 1) * state_dim; }
};

inline JointGaussian build_joint(const kalman::GaussianBelief& init,
                                 const std::vector<kalman::StepModel>& steps) {
  require(!steps.empty(), "joint construction needs at least one step");
  const Eigen::Index p = init.dim();
  const Eigen::Index m = steps.front().obs_dim();
  const Eigen::Index n_steps = static_cast<Eigen::Index>(steps.size());
  require(init.cov.rows() == p && init.cov.cols() == p,
          "initial covariance must be p x p");
  for (const auto& step : steps) {
    require(step.state_dim() == p && step.obs_dim() == m,
            "all steps must share the instance dimensions");
  }
  require(p * (n_steps + 1) + m * n_steps <= 400, "joint size guard exceeded");

  // Base variables z = (theta_0, w_1..w_N, v_1..v_N) are independent; every
  // joint variable is a linear map of z.
  const Eigen::Index base_dim = p + n_steps * p + n_steps * m;
  const Eigen::Index total_dim = (n_steps + 1) * p + n_steps * m;
  Eigen::MatrixXd load = Eigen::MatrixXd::Zero(total_dim, base_dim);
  Eigen::MatrixXd base_cov = Eigen::MatrixXd::Zero(base_dim, base_dim);

  load.block(0, 0, p, p).setIdentity();
  base_cov.block(0, 0, p, p) = init.cov;
  for (Eigen::Index n = 1; n <= n_steps; ++n) {
    const kalman::StepModel& step = steps[static_cast<std::size_t>(n - 1)];
    load.middleRows(n * p, p) = step.trans_matrix * load.middleRows((n - 1) * p, p);
    load.block(n * p, p + (n - 1) * p, p, p) += Eigen::MatrixXd::Identity(p, p);
    base_cov.block(p + (n - 1) * p, p + (n - 1) * p, p, p) = step.proc_cov;

    const Eigen::Index obs_row = (n_steps + 1) * p + (n - 1) * m;
    load.middleRows(obs_row, m) = step.obs_matrix * load.middleRows(n * p, p);
    load.block(obs_row, p + n_steps * p + (n - 1) * m, m, m) +=
        Eigen::MatrixXd::Identity(m, m);
    base_cov.block(p + n_steps * p + (n - 1) * m, p + n_steps * p + (n - 1) * m, m, m) =
        step.obs_cov;
  }

  JointGaussian joint;
  joint.state_dim = p;
  joint.obs_dim = m;
  joint.n_steps = n_steps;
  joint.mean = load.leftCols(p) * init.mean;
  joint.cov = load * base_cov * load.transpose();
  symmetrize(joint.cov);
  return joint;
}

struct ConditionResult {
  // p(theta_n | y_{1:N}) for n = 0..N, indexed by n.
  std::vector<kalman::GaussianBelief> smoothed;
  // p(theta_n | y_{1:n}) for n = 1..N, indexed by n-1.
  std::vector<kalman::GaussianBelief> filtered;
};

inline ConditionResult condition_on_observations(
    const JointGaussian& joint, const std::vector<Eigen::VectorXd>& observations) {
  const Eigen::Index p = joint.state_dim;
  const Eigen::Index m = joint.obs_dim;
  const Eigen::Index n_steps = joint.n_steps;
  require(static_cast<Eigen::Index>(observations.size()) == n_steps,
          "observation count must match the joint");
  Eigen::VectorXd stacked(n_steps * m);
  for (Eigen::Index n = 0; n < n_steps; ++n) {
    require(observations[static_cast<std::size_t>(n)].size() == m,
            "observation dimension mismatch");
    stacked.segment(n * m, m) = observations[static_cast<std::size_t>(n)];
  }

  // Condition the theta_n block on y_{1:n_obs} by truncating the joint.
  const auto condition = [&](Eigen::Index theta_off,
                             Eigen::Index n_obs) -> kalman::GaussianBelief {
    const Eigen::Index y_off = joint.obs_offset();
    const Eigen::Index y_len = n_obs * m;
    const Eigen::MatrixXd cov_xx = joint.cov.block(theta_off, theta_off, p, p);
    const Eigen::MatrixXd cov_xy = joint.cov.block(theta_off, y_off, p, y_len);
    Eigen::MatrixXd cov_yy = joint.cov.block(y_off, y_off, y_len, y_len);

    std::optional<SymmetricSolver> solver(std::in_place, cov_yy);
    if (solver->degenerate()) {
      cov_yy.diagonal().array() += kOracleJitter;
      solver.emplace(cov_yy);
      if (solver->degenerate()) throw NumericError("singular observation block");
    }
    // weights = Sigma_yy^{-1} Sigma_yx
    const Eigen::MatrixXd weights = solver->solve(cov_xy.transpose());
    const Eigen::VectorXd residual =
        stacked.head(y_len) - joint.mean.segment(y_off, y_len);

    kalman::GaussianBelief belief;
    belief.mean = joint.mean.segment(theta_off, p) + weights.transpose() * residual;
    belief.cov = cov_xx - cov_xy * weights;
    symmetrize(belief.cov);
    return belief;
  };

  ConditionResult result;
  result.smoothed.reserve(static_cast<std::size_t>(n_steps) + 1);
  result.filtered.reserve(static_cast<std::size_t>(n_steps));
  for (Eigen::Index n = 0; n <= n_steps; ++n) {
    result.smoothed.push_back(condition(joint.theta_offset(n), n_steps));
  }
  for (Eigen::Index n = 1; n <= n_steps; ++n) {
    result.filtered.push_back(condition(joint.theta_offset(n), n));
  }
  return result;
}

}  // namespace ensync::oracle
