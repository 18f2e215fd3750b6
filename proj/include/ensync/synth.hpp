// Generative simulator for ensemble performances with known correction gains.
//
// Onsets evolve as
//   t_{i,n} = t_{i,n-1} + T_{i,n} - sum_j alpha_{ij,n} A_{ij,n-1} + eps_{i,n}
//   T_{i,n} = T_{i,n-1} - sum_j beta_{ij,n} A_{ij,n-1}
// with optional random walks on the gains and a scripted tempo multiplier on
// the timekeeper. Everything is deterministic given the seed.
#pragma once

#include "ensync/ensemble.hpp"

#include <algorithm>
#include <cstdint>
#include <random>
#include <string>
#include <utility>
#include <vector>

namespace ensync::synth {

enum class Condition { deadpan, normal, speed };

inline const char* to_string(Condition condition) {
  switch (condition) {
    case Condition::deadpan: return "deadpan";
    case Condition::normal: return "normal";
    case Condition::speed: return "speed";
  }
  return "unknown";
}

inline Condition condition_from_string(const std::string& name) {
  if (name == "deadpan") return Condition::deadpan;
  if (name == "normal") return Condition::normal;
  if (name == "speed") return Condition::speed;
  throw ContractViolation("unknown condition '" + name + "'");
}

// Linear tempo-multiplier ramp over [start_step, end_step].
struct TempoSegment {
  Eigen::Index start_step = 1;
  Eigen::Index end_step = 1;
  double mult_start = 1.0;
  double mult_end = 1.0;
};

struct TempoScript {
  Condition condition = Condition::deadpan;
  int leader = 0;  // 1-based performer id; meaningful for the speed condition only
  double base_T = 500.0;  // ms
  std::vector<TempoSegment> segments;

  double multiplier_at(Eigen::Index n) const {
    for (const TempoSegment& seg : segments) {
      if (n >= seg.start_step && n <= seg.end_step) {
        if (seg.end_step == seg.start_step) return seg.mult_start;
        const double u = static_cast<double>(n - seg.start_step) /
                         static_cast<double>(seg.end_step - seg.start_step);
        return seg.mult_start + u * (seg.mult_end - seg.mult_start);
      }
    }
    return 1.0;
  }

  // Speed scripts drive the leader only; the other conditions apply to all.
  double multiplier_for(int player, Eigen::Index n) const {
    if (condition == Condition::speed && player != leader) return 1.0;
    return multiplier_at(n);
  }

  // Smallest step range on which the multiplier departs from 1, widened by
  // one step on each side to include the ramp endpoints. Falls back to the
  // whole range when the script is flat.
  std::pair<Eigen::Index, Eigen::Index> active_window(Eigen::Index n_steps) const {
    Eigen::Index first = 0, last = 0;
    for (Eigen::Index n = 1; n <= n_steps; ++n) {
      if (std::abs(multiplier_at(n) - 1.0) > 1e-12) {
        if (first == 0) first = n;
        last = n;
      }
    }
    if (first == 0) return {1, n_steps};
    return {std::max<Eigen::Index>(1, first - 1), std::min(n_steps, last + 1)};
  }

  void validate(Eigen::Index n_steps, int performers) const {
    require(base_T > 0.0, "base_T must be positive");
    Eigen::Index prev_end = 0;
    for (const TempoSegment& seg : segments) {
      require(seg.start_step >= 1 && seg.end_step <= n_steps &&
                  seg.start_step <= seg.end_step,
              "script segment out of range");
      require(seg.start_step >= prev_end, "script segments must not overlap");
      require(seg.mult_start > 0.0 && seg.mult_end > 0.0,
              "tempo multipliers must be positive");
      prev_end = seg.end_step;
    }
    if (condition == Condition::speed) {
      require(leader >= 1 && leader <= performers,
              "speed condition requires a valid leader id");
    }
  }
};

// deadpan: flat. normal: low-frequency sinusoid within +-3%, seeded. speed:
// linear accelerando to x0.8 over the middle third, ritardando back to x1.0.
inline TempoScript make_script(Condition condition, int performers,
                               Eigen::Index n_steps, double base_T, int leader,
                               std::uint64_t seed) {
  require(performers >= 1, "K must be >= 1");
  require(n_steps >= 1, "N must be >= 1");
  require(base_T > 0.0, "base_T must be positive");

  TempoScript script;
  script.condition = condition;
  script.base_T = base_T;
  switch (condition) {
    case Condition::deadpan:
      script.segments = {{1, n_steps, 1.0, 1.0}};
      break;
    case Condition::normal: {
      std::mt19937_64 rng(seed);
      std::uniform_real_distribution<double> cycles_dist(1.0, 2.5);
      std::uniform_real_distribution<double> phase_dist(0.0, 6.283185307179586);
      const double cycles = cycles_dist(rng);
      const double phase = phase_dist(rng);
      const auto knot = [&](Eigen::Index n) {
        const double u = n_steps > 1
                             ? static_cast<double>(n - 1) / static_cast<double>(n_steps - 1)
                             : 0.0;
        return 1.0 + 0.03 * std::sin(6.283185307179586 * cycles * u + phase);
      };
      if (n_steps == 1) {
        script.segments = {{1, 1, knot(1), knot(1)}};
      } else {
        for (Eigen::Index n = 1; n < n_steps; ++n) {
          script.segments.push_back({n, n + 1, knot(n), knot(n + 1)});
        }
      }
      break;
    }
    case Condition::speed: {
      require(leader >= 1 && leader <= performers,
              "speed condition requires a valid leader id");
      require(n_steps >= 3, "speed script needs at least three steps");
      script.leader = leader;
      const Eigen::Index ramp_start = n_steps / 3 + 1;
      const Eigen::Index ramp_mid = 2 * n_steps / 3 + 1;
      script.segments = {{1, ramp_start, 1.0, 1.0},
                         {ramp_start, ramp_mid, 1.0, 0.8},
                         {ramp_mid, n_steps, 0.8, 1.0}};
      break;
    }
  }
  return script;
}

// Constant gain, or a random walk from `initial` with per-step `walk_std`.
struct GainSpec {
  double initial = 0.0;
  double walk_std = 0.0;
};

inline std::vector<GainSpec> uniform_gains(int performers, double initial,
                                           double walk_std = 0.0) {
  return std::vector<GainSpec>(
      static_cast<std::size_t>(ensemble::pair_count(performers)),
      GainSpec{initial, walk_std});
}

struct SimulationParams {
  int K = 4;
  Eigen::Index n_steps = 46;
  std::vector<GainSpec> true_alpha;  // pair_index order, size K(K-1)
  std::vector<GainSpec> true_beta;
  double sigma_T = 22.360679774997898;  // ms; sqrt(500)
  Eigen::VectorXd initial_onsets;       // t_{i,0}; empty means all zero
  TempoScript script;
  std::uint64_t seed = 0;

  void validate() const {
    require(K >= 1, "K must be >= 1");
    require(n_steps >= 1, "N must be >= 1");
    require(sigma_T >= 0.0, "sigma_T must be nonnegative");
    const std::size_t pairs = static_cast<std::size_t>(ensemble::pair_count(K));
    require(true_alpha.size() == pairs && true_beta.size() == pairs,
            "gain specs must cover every ordered pair");
    for (const GainSpec& spec : true_alpha) {
      require(spec.walk_std >= 0.0, "gain walk std must be nonnegative");
    }
    for (const GainSpec& spec : true_beta) {
      require(spec.walk_std >= 0.0, "gain walk std must be nonnegative");
    }
    require(initial_onsets.size() == 0 || initial_onsets.size() == K,
            "initial onsets must be empty or have K entries");
    script.validate(n_steps, K);
  }
};

struct GroundTruth {
  Eigen::MatrixXd alpha;       // pair_count x N, values alpha_{ij,n}
  Eigen::MatrixXd beta;        // pair_count x N
  Eigen::MatrixXd timekeeper;  // K x N, effective interval driving each onset
};

struct Simulation {
  ensemble::OnsetTimeline timeline;
  GroundTruth truth;
};

// Walking alphas stay clipped to [-0.5, 1.5]; unbounded walks eventually
// destabilize the onset recursion. Constant gains are left untouched.
inline constexpr double kAlphaClipLo = -0.5;
inline constexpr double kAlphaClipHi = 1.5;

inline Simulation simulate(const SimulationParams& params) {
  params.validate();
  const int performers = params.K;
  const Eigen::Index n_steps = params.n_steps;
  const Eigen::Index pairs = ensemble::pair_count(performers);

  std::mt19937_64 rng(params.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);

  Eigen::VectorXd alpha(pairs), beta(pairs);
  for (Eigen::Index p = 0; p < pairs; ++p) {
    alpha(p) = params.true_alpha[static_cast<std::size_t>(p)].initial;
    beta(p) = params.true_beta[static_cast<std::size_t>(p)].initial;
  }
  Eigen::VectorXd timekeeper =
      Eigen::VectorXd::Constant(performers, params.script.base_T);

  Simulation sim;
  sim.timeline.onsets.resize(performers, n_steps + 1);
  sim.timeline.onsets.col(0) = params.initial_onsets.size() == performers
                                   ? params.initial_onsets
                                   : Eigen::VectorXd::Zero(performers);
  sim.truth.alpha.resize(pairs, n_steps);
  sim.truth.beta.resize(pairs, n_steps);
  sim.truth.timekeeper.resize(performers, n_steps);

  for (Eigen::Index n = 1; n <= n_steps; ++n) {
    // asynchronies at the previous event, A(i,j) = t_i - t_j
    const auto prev = sim.timeline.onsets.col(n - 1);

    // beta walk, then the timekeeper update that consumes it
    for (Eigen::Index p = 0; p < pairs; ++p) {
      const GainSpec& spec = params.true_beta[static_cast<std::size_t>(p)];
      if (spec.walk_std > 0.0) beta(p) += spec.walk_std * gauss(rng);
    }
    for (int i = 1; i <= performers; ++i) {
      double correction = 0.0;
      for (int j = 1; j <= performers; ++j) {
        if (j == i) continue;
        correction +=
            beta(ensemble::pair_index(i, j, performers)) * (prev(i - 1) - prev(j - 1));
      }
      timekeeper(i - 1) -= correction;
    }

    // alpha walk
    for (Eigen::Index p = 0; p < pairs; ++p) {
      const GainSpec& spec = params.true_alpha[static_cast<std::size_t>(p)];
      if (spec.walk_std > 0.0) {
        alpha(p) = std::clamp(alpha(p) + spec.walk_std * gauss(rng), kAlphaClipLo,
                              kAlphaClipHi);
      }
    }

    // emit onsets
    for (int i = 1; i <= performers; ++i) {
      const double effective =
          timekeeper(i - 1) * params.script.multiplier_for(i, n);
      double correction = 0.0;
      for (int j = 1; j <= performers; ++j) {
        if (j == i) continue;
        correction +=
            alpha(ensemble::pair_index(i, j, performers)) * (prev(i - 1) - prev(j - 1));
      }
      const double noise = params.sigma_T > 0.0 ? params.sigma_T * gauss(rng) : 0.0;
      const double onset = prev(i - 1) + effective - correction + noise;
      if (!(onset > prev(i - 1))) {
        throw NumericError("nonpositive IOI for performer " + std::to_string(i) +
                           " at step " + std::to_string(n));
      }
      sim.timeline.onsets(i - 1, n) = onset;
      sim.truth.timekeeper(i - 1, n - 1) = effective;
    }
    sim.truth.alpha.col(n - 1) = alpha;
    sim.truth.beta.col(n - 1) = beta;
  }
  return sim;
}

inline ensemble::IoiSeries to_ioi_series(const ensemble::OnsetTimeline& timeline) {
  require(timeline.onsets.cols() >= 2, "timeline needs at least two events");
  timeline.validate();
  ensemble::IoiSeries series;
  series.initial_onsets = timeline.onsets.col(0);
  series.iois.resize(timeline.onsets.rows(), timeline.onsets.cols() - 1);
  for (Eigen::Index n = 1; n < timeline.onsets.cols(); ++n) {
    series.iois.col(n - 1) = timeline.onsets.col(n) - timeline.onsets.col(n - 1);
  }
  return series;
}

}  // namespace ensync::synth
