// Shared test helpers: random state-space instances, simulated observations
// and gap metrics against the exact-inference oracle.
#pragma once

#include "ensync/kalman.hpp"
#include "ensync/oracle.hpp"

#include <algorithm>
#include <cstdint>
#include <random>
#include <vector>

namespace support {

struct RandomInstance {
  ensync::kalman::GaussianBelief init;
  std::vector<ensync::kalman::StepModel> steps;
  std::vector<Eigen::VectorXd> observations;
};

inline Eigen::MatrixXd random_matrix(std::mt19937_64& rng, Eigen::Index rows,
                                     Eigen::Index cols, double scale) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = scale * gauss(rng);
  }
  return m;
}

inline Eigen::MatrixXd random_spd(std::mt19937_64& rng, Eigen::Index dim,
                                  double floor) {
  const Eigen::MatrixXd a = random_matrix(rng, dim, dim, 1.0);
  Eigen::MatrixXd spd = a * a.transpose() / static_cast<double>(dim) +
                        floor * Eigen::MatrixXd::Identity(dim, dim);
  ensync::symmetrize(spd);
  return spd;
}

// A well-conditioned instance with p <= 8, m <= 4, N <= 6 and PD noise.
// With zero_w_block set, the trailing half of the state gets an identity
// transition, zero process noise and a 1e-13 initial variance, which drives
// the smoother's prior covariance past the condition limit and forces the
// jitter path.
inline RandomInstance make_random_instance(std::uint64_t seed,
                                           bool zero_w_block = false) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> p_dist(zero_w_block ? 2 : 1, 8);
  std::uniform_int_distribution<int> m_dist(1, 4);
  std::uniform_int_distribution<int> n_dist(zero_w_block ? 2 : 1, 6);
  std::normal_distribution<double> gauss(0.0, 1.0);

  const Eigen::Index p = p_dist(rng);
  const Eigen::Index m = m_dist(rng);
  const int n_steps = n_dist(rng);

  RandomInstance inst;
  inst.init.mean = random_matrix(rng, p, 1, 1.0);
  inst.init.cov = random_spd(rng, p, 0.3);

  Eigen::MatrixXd trans = random_matrix(rng, p, p, 0.9 / std::sqrt(double(p)));
  Eigen::MatrixXd proc = random_spd(rng, p, 0.3);
  Eigen::Index frozen = 0;
  if (zero_w_block) {
    frozen = p / 2;
    const Eigen::Index live = p - frozen;
    trans.block(0, live, live, frozen).setZero();
    trans.block(live, 0, frozen, live).setZero();
    trans.block(live, live, frozen, frozen).setIdentity();
    proc.block(0, live, live, frozen).setZero();
    proc.block(live, 0, frozen, live).setZero();
    proc.block(live, live, frozen, frozen).setZero();
    inst.init.cov.block(0, live, live, frozen).setZero();
    inst.init.cov.block(live, 0, frozen, live).setZero();
    inst.init.cov.block(live, live, frozen, frozen) =
        1e-13 * Eigen::MatrixXd::Identity(frozen, frozen);
  }

  for (int n = 0; n < n_steps; ++n) {
    ensync::kalman::StepModel step;
    step.trans_matrix = trans;
    step.proc_cov = proc;
    step.obs_matrix = random_matrix(rng, m, p, 1.0);
    step.obs_cov = random_spd(rng, m, 0.3);
    inst.steps.push_back(std::move(step));
  }

  // Observations simulated from the model keep everything at sane scales.
  Eigen::VectorXd state = inst.init.mean;
  {
    const Eigen::MatrixXd chol = inst.init.cov.llt().matrixL();
    state += chol * random_matrix(rng, p, 1, 1.0);
  }
  for (const auto& step : inst.steps) {
    state = step.trans_matrix * state;
    if (!zero_w_block) {
      const Eigen::MatrixXd chol = step.proc_cov.llt().matrixL();
      state += chol * random_matrix(rng, p, 1, 1.0);
    } else {
      const Eigen::Index live = p - frozen;
      const Eigen::MatrixXd chol =
          step.proc_cov.topLeftCorner(live, live).llt().matrixL();
      state.head(live) += chol * random_matrix(rng, live, 1, 1.0);
    }
    Eigen::VectorXd obs = step.obs_matrix * state;
    const Eigen::MatrixXd chol = step.obs_cov.llt().matrixL();
    obs += chol * random_matrix(rng, m, 1, 1.0);
    inst.observations.push_back(std::move(obs));
  }
  return inst;
}

inline double rel_gap(const Eigen::MatrixXd& value, const Eigen::MatrixXd& reference) {
  const double scale = std::max(1.0, reference.cwiseAbs().maxCoeff());
  return (value - reference).cwiseAbs().maxCoeff() / scale;
}

struct OracleGaps {
  double filtered_mean = 0.0;
  double filtered_cov = 0.0;
  double smoothed_mean = 0.0;
  double smoothed_cov = 0.0;
  bool jitter_seen = false;
};

// Run filter + smoother and the oracle on one instance; report the largest
// gaps over all steps.
inline OracleGaps compare_with_oracle(const RandomInstance& inst) {
  namespace kal = ensync::kalman;
  namespace orc = ensync::oracle;

  const std::vector<kal::FilterStep> filtered =
      kal::filter(inst.init, inst.steps, inst.observations);
  const std::vector<kal::SmoothedStep> smoothed = kal::smooth(filtered, inst.steps);
  const orc::JointGaussian joint = orc::build_joint(inst.init, inst.steps);
  const orc::ConditionResult exact =
      orc::condition_on_observations(joint, inst.observations);

  OracleGaps gaps;
  for (std::size_t n = 0; n < filtered.size(); ++n) {
    gaps.filtered_mean = std::max(
        gaps.filtered_mean,
        rel_gap(filtered[n].posterior.mean, exact.filtered[n].mean));
    gaps.filtered_cov = std::max(
        gaps.filtered_cov, rel_gap(filtered[n].posterior.cov, exact.filtered[n].cov));
    gaps.smoothed_mean = std::max(
        gaps.smoothed_mean,
        rel_gap(smoothed[n].smoothed.mean, exact.smoothed[n + 1].mean));
    gaps.smoothed_cov = std::max(
        gaps.smoothed_cov, rel_gap(smoothed[n].smoothed.cov, exact.smoothed[n + 1].cov));
    gaps.jitter_seen = gaps.jitter_seen || smoothed[n].jitter_applied;
  }
  return gaps;
}

}  // namespace support
