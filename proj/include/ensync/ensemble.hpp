// State-space construction for ensemble synchronization.
//
// Hidden state for K performers, dimension 2K^2:
//   [0, K)              timekeeper intervals T_n (ms)
//   [K, 2K)             inter-onset intervals r_n (ms)
//   [2K, 2K + K(K-1))   phase correction gains alpha_n
//   [2K + K(K-1), 2K^2) period correction gains beta_n
// Gains are laid out per ordered pair (i, j), i != j, in lexicographic order.
// Observations are the K-vector of IOIs.
#pragma once

#include "ensync/kalman.hpp"

#include <optional>
#include <vector>

namespace ensync::ensemble {

// All model parameters: performer count, noise variances, gain priors.
// Time-like variances are in ms^2.
struct EnsembleConfig {
  int K = 4;
  double sigma_T2 = 500.0;  // timekeeper variance
  double sigma_r2 = 25.0;   // motor variance
  double v_alpha = 1e-4;    // per-gain random-walk variance
  double rho_alpha = -0.1;  // correlation between distinct alpha_{ij} of one performer
  double v_beta = 0.0;
  double rho_beta = 0.0;
  double obs_jitter = 1e-5;  // diagonal of V_n; numerical floor, never zero
  double alpha_init = 0.25;
  double beta_init = 0.0;
  double init_gain_var = 1e-3;
  std::optional<double> init_Tr_var;  // prior variance of T/r components; defaults to sigma_T2

  double effective_init_Tr_var() const {
    return init_Tr_var ? *init_Tr_var : sigma_T2;
  }

  void validate() const {
    require(K >= 1, "K must be >= 1");
    require(sigma_T2 >= 0.0 && sigma_r2 >= 0.0 && v_alpha >= 0.0 && v_beta >= 0.0 &&
                init_gain_var >= 0.0 && effective_init_Tr_var() >= 0.0,
            "variances must be nonnegative");
    require(std::abs(rho_alpha) < 1.0 && std::abs(rho_beta) < 1.0,
            "gain correlations must satisfy |rho| < 1");
    require(obs_jitter > 0.0, "obs_jitter must be positive");
    if (K >= 2) {
      // Compound-symmetry eigenvalues are v(1 - rho) and v(1 + (K-2) rho).
      if (v_alpha > 0.0) {
        require(v_alpha * (1.0 - rho_alpha) > 0.0 &&
                    v_alpha * (1.0 + (K - 2) * rho_alpha) > 0.0,
                "alpha process-noise block is not positive definite");
      }
      if (v_beta > 0.0) {
        require(v_beta * (1.0 - rho_beta) > 0.0 &&
                    v_beta * (1.0 + (K - 2) * rho_beta) > 0.0,
                "beta process-noise block is not positive definite");
      }
    }
  }
};

inline Eigen::Index pair_count(int performers) {
  return static_cast<Eigen::Index>(performers) * (performers - 1);
}

inline Eigen::Index state_dim(int performers) {
  return 2 * static_cast<Eigen::Index>(performers) * performers;
}

// Position of the ordered pair (i, j) in the lexicographic gain layout;
// performer ids are 1-based.
inline Eigen::Index pair_index(int i, int j, int performers) {
  require(performers >= 2, "pair_index needs at least two performers");
  require(i >= 1 && i <= performers && j >= 1 && j <= performers,
          "performer id out of range");
  require(i != j, "pair_index requires i != j");
  return static_cast<Eigen::Index>(i - 1) * (performers - 1) + (j < i ? j - 1 : j - 2);
}

inline Eigen::Index alpha_state_index(int i, int j, int performers) {
  return 2 * static_cast<Eigen::Index>(performers) + pair_index(i, j, performers);
}

inline Eigen::Index beta_state_index(int i, int j, int performers) {
  return 2 * static_cast<Eigen::Index>(performers) + pair_count(performers) +
         pair_index(i, j, performers);
}

// Per-player tone-onset times t_{i,n}; column n holds the onsets of event n.
struct OnsetTimeline {
  Eigen::MatrixXd onsets;  // K x (N+1)

  int performers() const { return static_cast<int>(onsets.rows()); }
  Eigen::Index n_steps() const { return onsets.cols() - 1; }

  void validate() const {
    require(onsets.rows() >= 1 && onsets.cols() >= 1, "timeline must be nonempty");
    for (Eigen::Index i = 0; i < onsets.rows(); ++i) {
      for (Eigen::Index n = 1; n < onsets.cols(); ++n) {
        require(onsets(i, n) > onsets(i, n - 1),
                "onsets must be strictly increasing per player");
      }
    }
  }
};

// Observed IOIs r_{i,n} = t_{i,n} - t_{i,n-1} plus the absolute first onsets,
// which asynchrony reconstruction needs.
struct IoiSeries {
  Eigen::MatrixXd iois;            // K x N; column n-1 holds r_{.,n}
  Eigen::VectorXd initial_onsets;  // t_{i,0}

  int performers() const { return static_cast<int>(iois.rows()); }
  Eigen::Index n_steps() const { return iois.cols(); }

  void validate() const {
    require(iois.rows() >= 1, "IOI series must have at least one performer");
    require(iois.cols() >= 1, "IOI series must have at least one step");
    require(initial_onsets.size() == iois.rows(),
            "initial onsets must have one entry per performer");
    require((iois.array() > 0.0).all(), "all IOIs must be positive");
  }
};

inline OnsetTimeline reconstruct_timeline(const IoiSeries& series) {
  series.validate();
  OnsetTimeline timeline;
  timeline.onsets.resize(series.iois.rows(), series.iois.cols() + 1);
  timeline.onsets.col(0) = series.initial_onsets;
  for (Eigen::Index n = 0; n < series.iois.cols(); ++n) {
    timeline.onsets.col(n + 1) = timeline.onsets.col(n) + series.iois.col(n);
  }
  return timeline;
}

// Asynchronies of performer i against all others at event n-1:
// [A_{i1}, ..., A_{i(i-1)}, A_{i(i+1)}, ..., A_{iK}] with A_{ij} = t_i - t_j.
inline Eigen::VectorXd asynchrony_vector(const OnsetTimeline& timeline, int performer,
                                         Eigen::Index n) {
  const int performers = timeline.performers();
  require(performer >= 1 && performer <= performers, "performer id out of range");
  require(n >= 1 && n <= timeline.n_steps(), "step index out of range");
  Eigen::VectorXd out(performers - 1);
  const auto col = timeline.onsets.col(n - 1);
  Eigen::Index slot = 0;
  for (int j = 1; j <= performers; ++j) {
    if (j == performer) continue;
    out(slot++) = col(performer - 1) - col(j - 1);
  }
  return out;
}

// F = [0_K | I_K | 0 | 0], constant through time.
inline Eigen::MatrixXd build_observation_matrix(int performers) {
  require(performers >= 1, "K must be >= 1");
  Eigen::MatrixXd obs =
      Eigen::MatrixXd::Zero(performers, state_dim(performers));
  obs.block(0, performers, performers, performers).setIdentity();
  return obs;
}

// G_n: identity propagation of T and the gains, T_{n-1} feeding r_n, and the
// three coupling blocks built from minus the asynchronies at event n-1.
inline Eigen::MatrixXd build_transition_matrix(const OnsetTimeline& timeline,
                                               Eigen::Index n) {
  const int performers = timeline.performers();
  require(n >= 1 && n <= timeline.n_steps(), "step index out of range");
  const Eigen::Index pairs = pair_count(performers);
  const Eigen::Index dim = state_dim(performers);
  const Eigen::Index k = performers;

  Eigen::MatrixXd trans = Eigen::MatrixXd::Zero(dim, dim);
  trans.block(0, 0, k, k).setIdentity();  // T_n <- T_{n-1}
  trans.block(k, 0, k, k).setIdentity();  // r_n <- T_{n-1}
  trans.block(2 * k, 2 * k, pairs, pairs).setIdentity();
  trans.block(2 * k + pairs, 2 * k + pairs, pairs, pairs).setIdentity();

  if (performers >= 2) {
    // blockdiag(-A_{1:}^T, ..., -A_{K:}^T), shared by the T-beta, r-alpha and
    // r-beta couplings
    Eigen::MatrixXd coupling = Eigen::MatrixXd::Zero(k, pairs);
    for (int i = 1; i <= performers; ++i) {
      coupling.block(i - 1, static_cast<Eigen::Index>(i - 1) * (performers - 1), 1,
                     performers - 1) = -asynchrony_vector(timeline, i, n).transpose();
    }
    trans.block(0, 2 * k + pairs, k, pairs) = coupling;
    trans.block(k, 2 * k, k, pairs) = coupling;
    trans.block(k, 2 * k + pairs, k, pairs) = coupling;
  }
  return trans;
}

inline Eigen::MatrixXd compound_symmetric_block(double variance, double correlation,
                                                Eigen::Index size) {
  Eigen::MatrixXd block =
      Eigen::MatrixXd::Constant(size, size, correlation * variance);
  block.diagonal().setConstant(variance);
  return block;
}

// W = blockdiag(sigma_T^2 I, sigma_r^2 I, W_alpha, W_beta) with compound
// symmetric per-performer gain blocks.
inline Eigen::MatrixXd build_process_cov(const EnsembleConfig& config) {
  config.validate();
  const Eigen::Index k = config.K;
  const Eigen::Index pairs = pair_count(config.K);
  Eigen::MatrixXd proc = Eigen::MatrixXd::Zero(state_dim(config.K), state_dim(config.K));
  proc.block(0, 0, k, k) = config.sigma_T2 * Eigen::MatrixXd::Identity(k, k);
  proc.block(k, k, k, k) = config.sigma_r2 * Eigen::MatrixXd::Identity(k, k);
  if (config.K >= 2) {
    const Eigen::Index block_size = config.K - 1;
    const Eigen::MatrixXd alpha_block =
        compound_symmetric_block(config.v_alpha, config.rho_alpha, block_size);
    const Eigen::MatrixXd beta_block =
        compound_symmetric_block(config.v_beta, config.rho_beta, block_size);
    for (int i = 0; i < config.K; ++i) {
      const Eigen::Index off = i * block_size;
      proc.block(2 * k + off, 2 * k + off, block_size, block_size) = alpha_block;
      proc.block(2 * k + pairs + off, 2 * k + pairs + off, block_size, block_size) =
          beta_block;
    }
  }
  return proc;
}

// V = obs_jitter * I. The motor variance already lives in W; a numerically
// zero V would make the innovation covariance singular.
inline Eigen::MatrixXd build_obs_cov(const EnsembleConfig& config) {
  config.validate();
  return config.obs_jitter * Eigen::MatrixXd::Identity(config.K, config.K);
}

// theta_0: T and r components seeded with the first IOI of each performer,
// gains at their configured prior means; diagonal C_0.
inline kalman::GaussianBelief initial_state(const EnsembleConfig& config,
                                            const Eigen::VectorXd& first_iois) {
  config.validate();
  require(first_iois.size() == config.K, "first IOI vector must have K entries");
  require((first_iois.array() > 0.0).all(), "first IOIs must be positive");

  const Eigen::Index k = config.K;
  const Eigen::Index pairs = pair_count(config.K);
  kalman::GaussianBelief belief;
  belief.mean.resize(state_dim(config.K));
  belief.mean.segment(0, k) = first_iois;
  belief.mean.segment(k, k) = first_iois;
  belief.mean.segment(2 * k, pairs).setConstant(config.alpha_init);
  belief.mean.segment(2 * k + pairs, pairs).setConstant(config.beta_init);

  Eigen::VectorXd diag(state_dim(config.K));
  diag.segment(0, 2 * k).setConstant(config.effective_init_Tr_var());
  diag.segment(2 * k, 2 * pairs).setConstant(config.init_gain_var);
  belief.cov = diag.asDiagonal();
  return belief;
}

// Per ordered pair (i, j): estimated mean and marginal variance of alpha and
// beta at every step, with the origin (filtered or smoothed) of each step.
struct GainTrajectory {
  int K = 0;
  Eigen::MatrixXd alpha_mean;  // pair_count x N
  Eigen::MatrixXd alpha_var;
  Eigen::MatrixXd beta_mean;
  Eigen::MatrixXd beta_var;
  std::vector<bool> smoothed_origin;  // per step n = 1..N

  Eigen::Index n_steps() const {
    return static_cast<Eigen::Index>(smoothed_origin.size());
  }
};

inline GainTrajectory extract_gain_trajectory(
    const std::vector<kalman::GaussianBelief>& beliefs, int performers, bool smoothed) {
  require(performers >= 1, "K must be >= 1");
  const Eigen::Index pairs = pair_count(performers);
  const Eigen::Index n_steps = static_cast<Eigen::Index>(beliefs.size());
  GainTrajectory out;
  out.K = performers;
  out.alpha_mean.resize(pairs, n_steps);
  out.alpha_var.resize(pairs, n_steps);
  out.beta_mean.resize(pairs, n_steps);
  out.beta_var.resize(pairs, n_steps);
  out.smoothed_origin.assign(static_cast<std::size_t>(n_steps), smoothed);
  const Eigen::Index alpha_off = 2 * static_cast<Eigen::Index>(performers);
  const Eigen::Index beta_off = alpha_off + pairs;
  for (Eigen::Index n = 0; n < n_steps; ++n) {
    const kalman::GaussianBelief& belief = beliefs[static_cast<std::size_t>(n)];
    require(belief.dim() == state_dim(performers),
            "belief dimension does not match the ensemble layout");
    out.alpha_mean.col(n) = belief.mean.segment(alpha_off, pairs);
    out.beta_mean.col(n) = belief.mean.segment(beta_off, pairs);
    out.alpha_var.col(n) = belief.cov.diagonal().segment(alpha_off, pairs);
    out.beta_var.col(n) = belief.cov.diagonal().segment(beta_off, pairs);
  }
  return out;
}

// Step models for a full performance: constant F, V, W; G_n rebuilt from the
// onsets reconstructed cumulatively from initial_onsets + IOIs.
inline std::vector<kalman::StepModel> build_step_models(const IoiSeries& data,
                                                        const EnsembleConfig& config) {
  data.validate();
  config.validate();
  require(data.performers() == config.K,
          "performer count mismatch between data and config");
  const OnsetTimeline timeline = reconstruct_timeline(data);
  const Eigen::MatrixXd obs_matrix = build_observation_matrix(config.K);
  const Eigen::MatrixXd obs_cov = build_obs_cov(config);
  const Eigen::MatrixXd proc_cov = build_process_cov(config);
  std::vector<kalman::StepModel> steps;
  steps.reserve(static_cast<std::size_t>(data.n_steps()));
  for (Eigen::Index n = 1; n <= data.n_steps(); ++n) {
    steps.push_back(
        {obs_matrix, build_transition_matrix(timeline, n), obs_cov, proc_cov});
  }
  return steps;
}

struct FilterRun {
  std::vector<kalman::FilterStep> steps;
  GainTrajectory gains;
};

struct SmootherRun {
  std::vector<kalman::SmoothedStep> steps;
  GainTrajectory gains;
  std::vector<kalman::FilterStep> filter_steps;  // forward pass, kept for diagnostics
};

inline FilterRun run_filter(const IoiSeries& data, const EnsembleConfig& config) {
  const std::vector<kalman::StepModel> steps = build_step_models(data, config);
  const kalman::GaussianBelief init = initial_state(config, data.iois.col(0));
  std::vector<Eigen::VectorXd> observations;
  observations.reserve(steps.size());
  for (Eigen::Index n = 0; n < data.n_steps(); ++n) {
    observations.push_back(data.iois.col(n));
  }
  FilterRun run;
  run.steps = kalman::filter(init, steps, observations);
  std::vector<kalman::GaussianBelief> beliefs;
  beliefs.reserve(run.steps.size());
  for (const auto& step : run.steps) beliefs.push_back(step.posterior);
  run.gains = extract_gain_trajectory(beliefs, config.K, false);
  return run;
}

inline SmootherRun run_smoother(const IoiSeries& data, const EnsembleConfig& config) {
  const std::vector<kalman::StepModel> steps = build_step_models(data, config);
  const kalman::GaussianBelief init = initial_state(config, data.iois.col(0));
  std::vector<Eigen::VectorXd> observations;
  observations.reserve(steps.size());
  for (Eigen::Index n = 0; n < data.n_steps(); ++n) {
    observations.push_back(data.iois.col(n));
  }
  SmootherRun run;
  run.filter_steps = kalman::filter(init, steps, observations);
  run.steps = kalman::smooth(run.filter_steps, steps);
  std::vector<kalman::GaussianBelief> beliefs;
  beliefs.reserve(run.steps.size());
  for (const auto& step : run.steps) beliefs.push_back(step.smoothed);
  run.gains = extract_gain_trajectory(beliefs, config.K, true);
  return run;
}

}  // namespace ensync::ensemble
