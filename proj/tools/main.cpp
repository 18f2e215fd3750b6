// Command-line front end: simulate ensemble performances, estimate gain
// trajectories by filtering or smoothing, run recovery experiments and
// benchmark the smoother.
//
// Exit codes: 0 success, 1 numerical/runtime failure, 2 usage or format error.

#include "ensync/ensync.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <iostream>
#include <string>
#include <vector>

namespace {

using namespace ensync;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

double elapsed_ms(const std::chrono::steady_clock::time_point& start) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() -
                                                   start)
      .count();
}

// Least-squares slope of values(pair, n) over steps [first, last], 1-based.
double slope_over_window(const Eigen::MatrixXd& values, Eigen::Index pair,
                         Eigen::Index first, Eigen::Index last) {
  const Eigen::Index count = last - first + 1;
  double x_mean = 0.0, y_mean = 0.0;
  for (Eigen::Index n = first; n <= last; ++n) {
    x_mean += static_cast<double>(n);
    y_mean += values(pair, n - 1);
  }
  x_mean /= static_cast<double>(count);
  y_mean /= static_cast<double>(count);
  double num = 0.0, den = 0.0;
  for (Eigen::Index n = first; n <= last; ++n) {
    const double dx = static_cast<double>(n) - x_mean;
    num += dx * (values(pair, n - 1) - y_mean);
    den += dx * dx;
  }
  return den > 0.0 ? num / den : 0.0;
}

struct SimulateOptions {
  std::string condition;
  int performers = 4;
  long n_steps = 46;
  double base_T = 500.0;
  int leader = 0;
  std::uint64_t seed = 0;
  std::string out_path;
  std::string truth_path;
  double alpha = 0.25;
  double beta = 0.0;
  double alpha_walk_std = 0.0;
  double beta_walk_std = 0.0;
  double sigma_T = std::sqrt(500.0);
};

synth::SimulationParams make_params(const SimulateOptions& opt) {
  const synth::Condition condition = synth::condition_from_string(opt.condition);
  if (condition == synth::Condition::speed && opt.leader == 0) {
    throw UsageError("--condition speed requires --leader");
  }
  synth::SimulationParams params;
  params.K = opt.performers;
  params.n_steps = opt.n_steps;
  params.true_alpha = synth::uniform_gains(opt.performers, opt.alpha, opt.alpha_walk_std);
  params.true_beta = synth::uniform_gains(opt.performers, opt.beta, opt.beta_walk_std);
  params.sigma_T = opt.sigma_T;
  params.seed = opt.seed;
  params.script = synth::make_script(condition, opt.performers, opt.n_steps, opt.base_T,
                                     opt.leader, opt.seed);
  return params;
}

int cmd_simulate(const SimulateOptions& opt) {
  const synth::SimulationParams params = make_params(opt);
  const synth::Simulation sim = synth::simulate(params);
  io::write_performance_onsets(opt.out_path, sim.timeline);
  if (!opt.truth_path.empty()) {
    io::write_truth(opt.truth_path, sim.truth, opt.performers);
  }
  std::cout << "simulate: condition=" << opt.condition << " K=" << opt.performers
            << " N=" << opt.n_steps << " wrote " << opt.out_path << "\n";
  return 0;
}

struct EstimateOptions {
  std::string input_path;
  std::string config_path;
  std::string out_path;
};

ensemble::EnsembleConfig load_config(const std::string& config_path, int data_performers) {
  ensemble::EnsembleConfig config;
  config.K = data_performers;
  if (!config_path.empty()) {
    config = io::read_config(config_path, config);
    if (config.K != data_performers) {
      throw io::FormatError("config K=" + std::to_string(config.K) +
                            " does not match data K=" + std::to_string(data_performers));
    }
  }
  return config;
}

int cmd_estimate(const EstimateOptions& opt, bool smoothed) {
  const io::Performance perf = io::read_performance(opt.input_path);
  if (perf.t0_defaulted) {
    std::cerr << "warning: no '# t0:' line in " << opt.input_path
              << "; assuming all initial onsets are 0\n";
  }
  const ensemble::EnsembleConfig config =
      load_config(opt.config_path, perf.series.performers());

  const auto start = std::chrono::steady_clock::now();
  ensemble::GainTrajectory gains;
  double loglik = 0.0;
  if (smoothed) {
    const ensemble::SmootherRun run = ensemble::run_smoother(perf.series, config);
    loglik = kalman::innovation_loglik(run.filter_steps);
    gains = run.gains;
  } else {
    const ensemble::FilterRun run = ensemble::run_filter(perf.series, config);
    loglik = kalman::innovation_loglik(run.steps);
    gains = run.gains;
  }
  const double runtime = elapsed_ms(start);

  io::write_gains(opt.out_path, gains);
  std::cout << (smoothed ? "smooth" : "filter") << ": N=" << perf.series.n_steps()
            << " K=" << perf.series.performers() << " runtime_ms=" << runtime
            << " innovation_loglik=" << io::format_real(loglik) << "\n";
  return 0;
}

struct RecoverOptions {
  std::string condition;
  int performers = 4;
  long n_steps = 200;
  std::uint64_t seed = 0;
  std::string config_path;
  std::string report_path;
  int leader = 2;
  double alpha = 0.25;
  double sigma_T = std::sqrt(500.0);
  double leader_alpha_in = 0.40;   // true alpha of followers toward the leader
  double leader_alpha_out = 0.10;  // true alpha of the leader toward followers
};

// Simulate with known gains, smooth, and report per-pair recovery error plus
// the gain trends inside the scripted tempo window. The speed scenario models
// leadership as asymmetric coupling: followers correct strongly toward the
// leader, the leader only weakly toward the others.
int cmd_recover(const RecoverOptions& opt) {
  const synth::Condition condition = synth::condition_from_string(opt.condition);
  if (condition == synth::Condition::speed && opt.leader == 0) {
    throw UsageError("--condition speed requires --leader");
  }

  synth::SimulationParams params;
  params.K = opt.performers;
  params.n_steps = opt.n_steps;
  params.true_alpha = synth::uniform_gains(opt.performers, opt.alpha);
  params.true_beta = synth::uniform_gains(opt.performers, 0.0);
  params.sigma_T = opt.sigma_T;
  params.seed = opt.seed;
  params.script = synth::make_script(condition, opt.performers, opt.n_steps, 500.0,
                                     opt.leader, opt.seed);
  if (condition == synth::Condition::speed) {
    for (int i = 1; i <= opt.performers; ++i) {
      if (i == opt.leader) continue;
      params.true_alpha[static_cast<std::size_t>(
          ensemble::pair_index(i, opt.leader, opt.performers))] = {opt.leader_alpha_in, 0.0};
      params.true_alpha[static_cast<std::size_t>(
          ensemble::pair_index(opt.leader, i, opt.performers))] = {opt.leader_alpha_out, 0.0};
    }
  }

  const synth::Simulation sim = synth::simulate(params);
  const ensemble::IoiSeries series = synth::to_ioi_series(sim.timeline);

  // Default estimator config matched to the synthetic noise structure: the
  // simulated timekeeper noise is white per onset, so it belongs in the IOI
  // slot; T keeps a small drift allowance and the gain walk stays gentle
  // because the scenario gains are constant.
  ensemble::EnsembleConfig config;
  config.K = opt.performers;
  config.sigma_T2 = 25.0;
  config.sigma_r2 = opt.sigma_T * opt.sigma_T;
  config.init_Tr_var = 500.0;
  config.v_alpha = 1e-5;
  if (!opt.config_path.empty()) {
    config = load_config(opt.config_path, opt.performers);
  }
  const ensemble::SmootherRun run = ensemble::run_smoother(series, config);

  const Eigen::Index n_steps = series.n_steps();
  const Eigen::Index tail = std::max<Eigen::Index>(1, n_steps / 4);
  const Eigen::Index tail_first = n_steps - tail + 1;
  const auto [window_first, window_last] = params.script.active_window(n_steps);

  std::ofstream report = io::detail::open_for_write(opt.report_path);
  report << "# gain recovery report\n";
  report << "condition = " << opt.condition << "\n";
  report << "K = " << opt.performers << "\n";
  report << "N = " << n_steps << "\n";
  report << "seed = " << opt.seed << "\n";
  if (condition == synth::Condition::speed) report << "leader = " << opt.leader << "\n";
  report << "window = " << window_first << ".." << window_last << "\n";
  report << "tail = " << tail_first << ".." << n_steps << "\n";

  report << "# mean absolute error of smoothed alpha over the tail\n";
  report << "mae,i,j,value\n";
  double worst_mae = 0.0;
  for (int i = 1; i <= opt.performers; ++i) {
    for (int j = 1; j <= opt.performers; ++j) {
      if (j == i) continue;
      const Eigen::Index pair = ensemble::pair_index(i, j, opt.performers);
      double mae = 0.0;
      for (Eigen::Index n = tail_first; n <= n_steps; ++n) {
        mae += std::abs(run.gains.alpha_mean(pair, n - 1) - sim.truth.alpha(pair, n - 1));
      }
      mae /= static_cast<double>(tail);
      worst_mae = std::max(worst_mae, mae);
      report << "mae," << i << "," << j << "," << io::format_real(mae) << "\n";
    }
  }

  report << "# least-squares slope of smoothed alpha over the window\n";
  report << "slope,i,j,value,sign\n";
  int followers_positive = 0, followers_total = 0;
  double leader_slope_sum = 0.0;
  for (int i = 1; i <= opt.performers; ++i) {
    for (int j = 1; j <= opt.performers; ++j) {
      if (j == i) continue;
      const Eigen::Index pair = ensemble::pair_index(i, j, opt.performers);
      const double slope =
          slope_over_window(run.gains.alpha_mean, pair, window_first, window_last);
      report << "slope," << i << "," << j << "," << io::format_real(slope) << ","
             << (slope >= 0.0 ? "positive" : "negative") << "\n";
      if (condition == synth::Condition::speed) {
        if (j == opt.leader) {
          ++followers_total;
          if (slope > 0.0) ++followers_positive;
        }
        if (i == opt.leader) leader_slope_sum += slope;
      }
    }
  }

  report << "worst_mae = " << io::format_real(worst_mae) << "\n";
  if (condition == synth::Condition::speed) {
    report << "followers_toward_leader_positive = " << followers_positive << "/"
           << followers_total << "\n";
    report << "leader_mean_slope = "
           << io::format_real(leader_slope_sum /
                              static_cast<double>(opt.performers - 1))
           << "\n";
  }
  std::cout << "recover: wrote " << opt.report_path << " (worst_mae="
            << io::format_real(worst_mae) << ")\n";
  return 0;
}

struct BenchOptions {
  int performers = 4;
  long n_steps = 46;
  int reps = 20;
  std::uint64_t seed = 1;
};

int cmd_bench(const BenchOptions& opt) {
  synth::SimulationParams params;
  params.K = opt.performers;
  params.n_steps = opt.n_steps;
  params.true_alpha = synth::uniform_gains(opt.performers, 0.25);
  params.true_beta = synth::uniform_gains(opt.performers, 0.0);
  params.seed = opt.seed;
  params.script = synth::make_script(synth::Condition::deadpan, opt.performers,
                                     opt.n_steps, 500.0, 0, opt.seed);
  const synth::Simulation sim = synth::simulate(params);
  const ensemble::IoiSeries series = synth::to_ioi_series(sim.timeline);
  ensemble::EnsembleConfig config;
  config.K = opt.performers;

  (void)ensemble::run_smoother(series, config);  // warm-up
  std::vector<double> times;
  times.reserve(static_cast<std::size_t>(opt.reps));
  for (int rep = 0; rep < opt.reps; ++rep) {
    const auto start = std::chrono::steady_clock::now();
    const ensemble::SmootherRun run = ensemble::run_smoother(series, config);
    times.push_back(elapsed_ms(start));
    if (run.steps.empty()) return 1;
  }
  std::sort(times.begin(), times.end());
  const std::size_t mid = times.size() / 2;
  const double median = times.size() % 2 == 1
                            ? times[mid]
                            : 0.5 * (times[mid - 1] + times[mid]);
  std::cout << "bench: K=" << opt.performers << " N=" << opt.n_steps
            << " reps=" << opt.reps << " median_ms=" << median
            << " min_ms=" << times.front() << " max_ms=" << times.back() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Time-varying phase/period correction gain estimation for "
               "rhythmic ensembles"};
  app.require_subcommand(1);

  SimulateOptions sim_opt;
  CLI::App* sim = app.add_subcommand("simulate", "Generate a synthetic performance");
  sim->add_option("--condition", sim_opt.condition, "deadpan, normal or speed")
      ->required();
  sim->add_option("--K", sim_opt.performers, "number of performers");
  sim->add_option("--N", sim_opt.n_steps, "number of IOIs");
  sim->add_option("--base-T", sim_opt.base_T, "base timekeeper interval (ms)");
  sim->add_option("--leader", sim_opt.leader, "leader id (speed condition)");
  sim->add_option("--seed", sim_opt.seed, "random seed");
  sim->add_option("--out", sim_opt.out_path, "onset CSV output path")->required();
  sim->add_option("--truth", sim_opt.truth_path, "ground-truth gain CSV path");
  sim->add_option("--alpha", sim_opt.alpha, "true phase correction gain");
  sim->add_option("--beta", sim_opt.beta, "true period correction gain");
  sim->add_option("--alpha-walk-std", sim_opt.alpha_walk_std,
                  "per-step std of the alpha random walk");
  sim->add_option("--beta-walk-std", sim_opt.beta_walk_std,
                  "per-step std of the beta random walk");
  sim->add_option("--sigma-T", sim_opt.sigma_T, "timekeeper noise std (ms)");

  EstimateOptions filter_opt;
  CLI::App* filter = app.add_subcommand("filter", "Sequential gain estimation");
  filter->add_option("--input", filter_opt.input_path, "performance CSV")->required();
  filter->add_option("--config", filter_opt.config_path, "config file");
  filter->add_option("--out", filter_opt.out_path, "gain CSV output path")->required();

  EstimateOptions smooth_opt;
  CLI::App* smooth = app.add_subcommand("smooth", "Retrospective gain estimation");
  smooth->add_option("--input", smooth_opt.input_path, "performance CSV")->required();
  smooth->add_option("--config", smooth_opt.config_path, "config file");
  smooth->add_option("--out", smooth_opt.out_path, "gain CSV output path")->required();

  RecoverOptions rec_opt;
  CLI::App* recover = app.add_subcommand("recover", "Simulate, smooth and report "
                                                    "recovery quality");
  recover->add_option("--condition", rec_opt.condition, "deadpan, normal or speed")
      ->required();
  recover->add_option("--K", rec_opt.performers, "number of performers");
  recover->add_option("--N", rec_opt.n_steps, "number of IOIs");
  recover->add_option("--seed", rec_opt.seed, "random seed");
  recover->add_option("--config", rec_opt.config_path, "config file");
  recover->add_option("--report", rec_opt.report_path, "report output path")->required();
  recover->add_option("--leader", rec_opt.leader, "leader id (speed condition)");
  recover->add_option("--alpha", rec_opt.alpha, "true baseline alpha");
  recover->add_option("--sigma-T", rec_opt.sigma_T, "timekeeper noise std (ms)");
  recover->add_option("--leader-alpha-in", rec_opt.leader_alpha_in,
                      "true follower-to-leader alpha (speed)");
  recover->add_option("--leader-alpha-out", rec_opt.leader_alpha_out,
                      "true leader-to-follower alpha (speed)");

  BenchOptions bench_opt;
  CLI::App* bench = app.add_subcommand("bench", "Time the smoother");
  bench->add_option("--K", bench_opt.performers, "number of performers");
  bench->add_option("--N", bench_opt.n_steps, "number of IOIs");
  bench->add_option("--reps", bench_opt.reps, "repetitions");
  bench->add_option("--seed", bench_opt.seed, "random seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (sim->parsed()) return cmd_simulate(sim_opt);
    if (filter->parsed()) return cmd_estimate(filter_opt, false);
    if (smooth->parsed()) return cmd_estimate(smooth_opt, true);
    if (recover->parsed()) return cmd_recover(rec_opt);
    if (bench->parsed()) return cmd_bench(bench_opt);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const ensync::io::FormatError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const ensync::ContractViolation& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const ensync::NumericError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
