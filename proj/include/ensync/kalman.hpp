// Generic linear-Gaussian state-space filtering and smoothing.
//
// The model for step n is
//   y_n     = obs_matrix   * theta_n     + v_n,   v_n ~ N(0, obs_cov)
//   theta_n = trans_matrix * theta_{n-1} + w_n,   w_n ~ N(0, proc_cov)
// with a Gaussian initial state theta_0 ~ N(mean, cov).
#pragma once

#include "ensync/common.hpp"

#include <cstddef>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace ensync::kalman {

struct GaussianBelief {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;

  Eigen::Index dim() const { return mean.size(); }
};

// The quadruple (F_n, G_n, V_n, W_n) defining one state-space step.
struct StepModel {
  Eigen::MatrixXd obs_matrix;    // F, m x p
  Eigen::MatrixXd trans_matrix;  // G, p x p
  Eigen::MatrixXd obs_cov;       // V, m x m
  Eigen::MatrixXd proc_cov;      // W, p x p

  Eigen::Index state_dim() const { return trans_matrix.rows(); }
  Eigen::Index obs_dim() const { return obs_matrix.rows(); }
};

struct Prediction {
  GaussianBelief prior;           // (a_n, R_n)
  Eigen::VectorXd obs_pred_mean;  // f_n
  Eigen::MatrixXd obs_pred_cov;   // Q_n
};

struct FilterStep {
  GaussianBelief prior;           // (a_n, R_n)
  Eigen::VectorXd obs_pred_mean;  // f_n
  Eigen::MatrixXd obs_pred_cov;   // Q_n
  Eigen::VectorXd innovation;     // e_n = y_n - f_n
  GaussianBelief posterior;       // (k_n, C_n)
};

struct SmoothedStep {
  GaussianBelief smoothed;      // (s_n, S_n)
  bool jitter_applied = false;  // the solve against R_{n+1} needed diagonal jitter
};

namespace detail {

inline void check_step_dims(const GaussianBelief& belief, const StepModel& step) {
  const Eigen::Index p = step.state_dim();
  const Eigen::Index m = step.obs_dim();
  require(p >= 1 && m >= 1, "state and observation dimensions must be positive");
  require(step.trans_matrix.cols() == p, "trans_matrix must be square");
  require(step.obs_matrix.cols() == p,
          "obs_matrix columns must match the state dimension");
  require(step.obs_cov.rows() == m && step.obs_cov.cols() == m,
          "obs_cov must be m x m");
  require(step.proc_cov.rows() == p && step.proc_cov.cols() == p,
          "proc_cov must be p x p");
  require(belief.mean.size() == p, "belief dimension must match the step model");
  require(belief.cov.rows() == p && belief.cov.cols() == p,
          "belief covariance must be p x p");
}

}  // namespace detail

// Prediction step: propagate the previous posterior through the transition
// model and project it into observation space.
inline Prediction predict(const GaussianBelief& prev_posterior, const StepModel& step) {
  detail::check_step_dims(prev_posterior, step);
  Prediction out;
  out.prior.mean = step.trans_matrix * prev_posterior.mean;
  out.prior.cov = step.trans_matrix * prev_posterior.cov * step.trans_matrix.transpose() +
                  step.proc_cov;
  symmetrize(out.prior.cov);
  out.obs_pred_mean = step.obs_matrix * out.prior.mean;
  out.obs_pred_cov =
      step.obs_matrix * out.prior.cov * step.obs_matrix.transpose() + step.obs_cov;
  symmetrize(out.obs_pred_cov);
  return out;
}

// Update step: condition the prior on the observation. All solves go against
// a factorization of Q_n; Q_n is never inverted explicitly.
inline FilterStep update(const GaussianBelief& prior, const Eigen::VectorXd& obs_pred_mean,
                         const Eigen::MatrixXd& obs_pred_cov,
                         const Eigen::MatrixXd& obs_matrix,
                         const Eigen::VectorXd& observation, std::size_t step_index = 1) {
  const Eigen::Index m = obs_pred_mean.size();
  const Eigen::Index p = prior.mean.size();
  require(observation.size() == m, "observation dimension must match the prediction");
  require(obs_pred_cov.rows() == m && obs_pred_cov.cols() == m,
          "obs_pred_cov must be m x m");
  require(obs_matrix.rows() == m && obs_matrix.cols() == p,
          "obs_matrix shape must match prior and prediction");
  require(prior.cov.rows() == p && prior.cov.cols() == p,
          "prior covariance must be p x p");

  const SymmetricSolver q_solver(obs_pred_cov);
  if (q_solver.degenerate()) {
    throw NumericError("degenerate innovation covariance at step " +
                       std::to_string(step_index));
  }

  FilterStep out;
  out.prior = prior;
  out.obs_pred_mean = obs_pred_mean;
  out.obs_pred_cov = obs_pred_cov;
  out.innovation = observation - obs_pred_mean;

  // gain = R F^T Q^{-1}, using symmetry of R and Q
  const Eigen::MatrixXd projected = obs_matrix * prior.cov;            // F R
  const Eigen::MatrixXd gain = q_solver.solve(projected).transpose();  // p x m
  out.posterior.mean = prior.mean + gain * out.innovation;
  out.posterior.cov = prior.cov - gain * projected;
  symmetrize(out.posterior.cov);
  return out;
}

// Run the filtering equations over a full observation record. Step n (1-based)
// uses steps[n-1] and observations[n-1]; errors carry the failing index.
inline std::vector<FilterStep> filter(const GaussianBelief& init,
                                      const std::vector<StepModel>& steps,
                                      const std::vector<Eigen::VectorXd>& observations) {
  require(!steps.empty(), "filter needs at least one step");
  require(steps.size() == observations.size(),
          "steps and observations must have equal length");
  std::vector<FilterStep> out;
  out.reserve(steps.size());
  const GaussianBelief* current = &init;
  for (std::size_t n = 0; n < steps.size(); ++n) {
    try {
      Prediction pred = predict(*current, steps[n]);
      require(observations[n].size() == steps[n].obs_dim(),
              "observation dimension mismatch");
      out.push_back(update(pred.prior, pred.obs_pred_mean, pred.obs_pred_cov,
                           steps[n].obs_matrix, observations[n], n + 1));
    } catch (const ContractViolation& e) {
      throw ContractViolation("step " + std::to_string(n + 1) + ": " + e.what());
    }
    current = &out.back().posterior;
  }
  return out;
}

// Backward smoothing recursion. The base case copies the last filtered
// posterior; earlier steps follow
//   s_n = k_n + C_n G_{n+1}^T R_{n+1}^{-1} (s_{n+1} - a_{n+1})
//   S_n = C_n - C_n G_{n+1}^T R_{n+1}^{-1} (R_{n+1} - S_{n+1}) R_{n+1}^{-1} G_{n+1} C_n
// When R_{n+1} is numerically singular (null proc_cov blocks shrink it), the
// solve retries once with kSmootherJitter added to the diagonal and the step
// is flagged.
inline std::vector<SmoothedStep> smooth(const std::vector<FilterStep>& filter_steps,
                                        const std::vector<StepModel>& steps) {
  require(!filter_steps.empty(), "smoother needs at least one filtered step");
  require(filter_steps.size() == steps.size(),
          "filter output and step models must have equal length");

  const std::size_t n_steps = filter_steps.size();
  std::vector<SmoothedStep> out(n_steps);
  out[n_steps - 1].smoothed = filter_steps[n_steps - 1].posterior;

  for (std::size_t idx = n_steps - 1; idx-- > 0;) {
    const FilterStep& here = filter_steps[idx];
    const FilterStep& next = filter_steps[idx + 1];
    const Eigen::MatrixXd& trans_next = steps[idx + 1].trans_matrix;
    require(trans_next.rows() == here.posterior.dim() &&
                next.prior.dim() == here.posterior.dim(),
            "smoother inputs must come from one filter run");

    Eigen::MatrixXd prior_cov_next = next.prior.cov;
    bool jittered = false;
    std::optional<SymmetricSolver> solver(std::in_place, prior_cov_next);
    if (solver->degenerate()) {
      prior_cov_next.diagonal().array() += kSmootherJitter;
      solver.emplace(prior_cov_next);
      jittered = true;
      if (solver->degenerate()) {
        throw NumericError("degenerate prior covariance in smoother at step " +
                           std::to_string(idx + 2));
      }
    }

    // J = C_n G_{n+1}^T R_{n+1}^{-1}
    const Eigen::MatrixXd smoother_gain =
        solver->solve(trans_next * here.posterior.cov).transpose();
    const GaussianBelief& next_smoothed = out[idx + 1].smoothed;

    out[idx].smoothed.mean =
        here.posterior.mean + smoother_gain * (next_smoothed.mean - next.prior.mean);
    Eigen::MatrixXd cov =
        here.posterior.cov -
        smoother_gain * (prior_cov_next - next_smoothed.cov) * smoother_gain.transpose();
    symmetrize(cov);
    out[idx].smoothed.cov = std::move(cov);
    out[idx].jitter_applied = jittered;
  }
  return out;
}

// Joint log-density of the innovations under their predictive distributions:
// sum_n -1/2 (m log 2pi + log det Q_n + e_n^T Q_n^{-1} e_n).
inline double innovation_loglik(const std::vector<FilterStep>& filter_steps) {
  constexpr double kLog2Pi = 1.8378770664093454836;
  double total = 0.0;
  for (std::size_t n = 0; n < filter_steps.size(); ++n) {
    const FilterStep& fs = filter_steps[n];
    const SymmetricSolver q_solver(fs.obs_pred_cov);
    if (q_solver.degenerate() || !q_solver.positive_definite()) {
      throw NumericError("innovation covariance not positive definite at step " +
                         std::to_string(n + 1));
    }
    const double quad = fs.innovation.dot(q_solver.solve(fs.innovation));
    total += -0.5 * (static_cast<double>(fs.innovation.size()) * kLog2Pi +
                     q_solver.log_det() + quad);
  }
  return total;
}

}  // namespace ensync::kalman
