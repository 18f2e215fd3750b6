// Integration tests for the command-line tool; each case shells out to the
// built binary and asserts the exit-code contract (0 success, 1 numerical
// failure, 2 usage/format error).

#include "ensync/io.hpp"

#include <catch2/catch.hpp>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

namespace fs = std::filesystem;

namespace {

struct CommandResult {
  int exit_code = -1;
  std::string out;
  std::string err;
};

fs::path temp_dir() {
  static int counter = 0;
  const fs::path dir =
      fs::temp_directory_path() / ("ensync_cli_tests_" + std::to_string(counter++));
  fs::create_directories(dir);
  return dir;
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path);
  return std::string(std::istreambuf_iterator<char>(in),
                     std::istreambuf_iterator<char>());
}

CommandResult run_cli(const std::string& args) {
  const fs::path dir = temp_dir();
  const fs::path out_path = dir / "stdout.txt";
  const fs::path err_path = dir / "stderr.txt";
  const std::string command = std::string(ENSYNC_CLI_PATH) + " " + args + " > " +
                              out_path.string() + " 2> " + err_path.string();
  const int status = std::system(command.c_str());
  CommandResult result;
  result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  result.out = read_text(out_path);
  result.err = read_text(err_path);
  return result;
}

double parse_metric(const std::string& text, const std::string& key) {
  const auto pos = text.find(key + "=");
  REQUIRE(pos != std::string::npos);
  return std::stod(text.substr(pos + key.size() + 1));
}

int count_lines(const fs::path& path) {
  std::ifstream in(path);
  int lines = 0;
  std::string line;
  while (std::getline(in, line)) ++lines;
  return lines;
}

}  // namespace

TEST_CASE("cli: simulate writes onsets and truth deterministically") {
  const fs::path dir = temp_dir();
  const fs::path perf = dir / "perf.csv";
  const fs::path truth = dir / "truth.csv";
  const std::string flags = "simulate --condition deadpan --K 4 --N 46 --base-T 500 "
                            "--seed 7 --out " +
                            perf.string() + " --truth " + truth.string();
  const auto first = run_cli(flags);
  REQUIRE(first.exit_code == 0);
  REQUIRE(fs::exists(perf));
  REQUIRE(fs::exists(truth));
  // units comment + header + 47 onset rows (indices 0..46)
  CHECK(count_lines(perf) == 49);
  const std::string first_bytes = read_text(perf);

  const fs::path perf2 = dir / "perf2.csv";
  const auto second = run_cli("simulate --condition deadpan --K 4 --N 46 --base-T 500 "
                              "--seed 7 --out " +
                              perf2.string());
  REQUIRE(second.exit_code == 0);
  CHECK(read_text(perf2) == first_bytes);
}

TEST_CASE("cli: speed condition without a leader is a usage error") {
  const fs::path dir = temp_dir();
  const auto result = run_cli("simulate --condition speed --K 4 --N 46 --out " +
                              (dir / "x.csv").string());
  CHECK(result.exit_code == 2);
  CHECK(result.err.find("leader") != std::string::npos);
}

TEST_CASE("cli: unknown flags and missing files map to exit 2") {
  CHECK(run_cli("simulate --nonsense 1").exit_code == 2);
  CHECK(run_cli("").exit_code == 2);
  const fs::path dir = temp_dir();
  CHECK(run_cli("filter --input " + (dir / "missing.csv").string() + " --out " +
                (dir / "g.csv").string())
            .exit_code == 2);

  const fs::path junk = dir / "junk.csv";
  std::ofstream(junk) << "not,a,performance\n1,2,3\n";
  CHECK(run_cli("filter --input " + junk.string() + " --out " +
                (dir / "g2.csv").string())
            .exit_code == 2);
}

TEST_CASE("cli: filter and smooth agree on the final step") {
  const fs::path dir = temp_dir();
  const fs::path perf = dir / "perf.csv";
  REQUIRE(run_cli("simulate --condition normal --K 4 --N 46 --seed 3 --out " +
                  perf.string())
              .exit_code == 0);

  const fs::path filtered = dir / "filtered.csv";
  const fs::path smoothed = dir / "smoothed.csv";
  const auto filter_res =
      run_cli("filter --input " + perf.string() + " --out " + filtered.string());
  REQUIRE(filter_res.exit_code == 0);
  CHECK(filter_res.out.find("filter: N=46 K=4") != std::string::npos);
  parse_metric(filter_res.out, "innovation_loglik");

  const auto smooth_res =
      run_cli("smooth --input " + perf.string() + " --out " + smoothed.string());
  REQUIRE(smooth_res.exit_code == 0);
  const double runtime_ms = parse_metric(smooth_res.out, "runtime_ms");
  CHECK(runtime_ms < 100.0);

  const auto gains_f = ensync::io::read_gains(filtered);
  const auto gains_s = ensync::io::read_gains(smoothed);
  REQUIRE(gains_f.n_steps() == 46);
  REQUIRE(gains_s.n_steps() == 46);
  CHECK_FALSE(gains_f.smoothed_origin.front());
  CHECK(gains_s.smoothed_origin.front());
  for (Eigen::Index pair = 0; pair < 12; ++pair) {
    CHECK(gains_f.alpha_mean(pair, 45) ==
          Approx(gains_s.alpha_mean(pair, 45)).margin(1e-9));
  }
}

TEST_CASE("cli: config file is honored and validated") {
  const fs::path dir = temp_dir();
  const fs::path perf = dir / "perf.csv";
  REQUIRE(run_cli("simulate --condition deadpan --K 2 --N 20 --seed 5 --out " +
                  perf.string())
              .exit_code == 0);

  const fs::path config = dir / "config.txt";
  std::ofstream(config) << "K = 2\nsigma_T2 = 250\n";
  CHECK(run_cli("smooth --input " + perf.string() + " --config " + config.string() +
                " --out " + (dir / "g.csv").string())
            .exit_code == 0);

  const fs::path mismatched = dir / "mismatched.txt";
  std::ofstream(mismatched) << "K = 3\n";
  CHECK(run_cli("smooth --input " + perf.string() + " --config " +
                mismatched.string() + " --out " + (dir / "g2.csv").string())
            .exit_code == 2);

  const fs::path invalid = dir / "invalid.txt";
  std::ofstream(invalid) << "obs_jitter = 0\n";
  CHECK(run_cli("smooth --input " + perf.string() + " --config " + invalid.string() +
                " --out " + (dir / "g3.csv").string())
            .exit_code == 2);
}

TEST_CASE("cli: IOI input without t0 warns and succeeds") {
  const fs::path dir = temp_dir();
  const fs::path perf = dir / "iois.csv";
  std::ofstream(perf) << "# units: ms\nn,ioi_p1,ioi_p2\n1,500,505\n2,498,501\n"
                      << "3,502,499\n4,500,500\n";
  const auto result =
      run_cli("smooth --input " + perf.string() + " --out " + (dir / "g.csv").string());
  CHECK(result.exit_code == 0);
  CHECK(result.err.find("t0") != std::string::npos);
}

TEST_CASE("cli: recover reports static gains within the frozen threshold") {
  const fs::path dir = temp_dir();
  const fs::path report = dir / "report.txt";
  const auto result = run_cli("recover --condition deadpan --K 4 --N 200 --seed 1 "
                              "--report " +
                              report.string());
  REQUIRE(result.exit_code == 0);
  const std::string text = read_text(report);
  CHECK(text.find("mae,") != std::string::npos);
  CHECK(text.find("slope,") != std::string::npos);
  CHECK(parse_metric(text, "worst_mae ") <= 0.1);

  // zero-asynchrony data carries no gain signal, so nothing moves
  const fs::path flat_report = dir / "flat_report.txt";
  const auto flat = run_cli("recover --condition deadpan --K 4 --N 100 --seed 1 "
                            "--sigma-T 0 --report " +
                            flat_report.string());
  REQUIRE(flat.exit_code == 0);
  CHECK(parse_metric(read_text(flat_report), "worst_mae ") <= 0.05);
}

TEST_CASE("cli: recover finds the leader-direction pattern in a speed run") {
  const fs::path dir = temp_dir();
  const fs::path report = dir / "speed_report.txt";
  const auto result = run_cli("recover --condition speed --K 4 --N 46 --seed 2 "
                              "--leader 2 --report " +
                              report.string());
  REQUIRE(result.exit_code == 0);
  const std::string text = read_text(report);
  CHECK(text.find("followers_toward_leader_positive = 3/3") != std::string::npos);
  CHECK(parse_metric(text, "leader_mean_slope ") < 0.0);

  const auto no_leader =
      run_cli("recover --condition speed --K 4 --N 46 --leader 0 --report " +
              (dir / "x.txt").string());
  CHECK(no_leader.exit_code == 2);
}

TEST_CASE("cli: bench reports a median runtime") {
  const auto result = run_cli("bench --K 4 --N 46 --reps 5 --seed 1");
  REQUIRE(result.exit_code == 0);
  const double median = parse_metric(result.out, "median_ms");
  CHECK(median >= 0.0);
}
