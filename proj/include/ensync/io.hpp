// CSV performance files, key-value config files and gain output files.
//
// Performance files come in two modes, detected from the header row:
//   onset mode:  n,onset_p1,...,onset_pK     rows n = 0..N
//   IOI mode:    n,ioi_p1,...,ioi_pK         rows n = 1..N
// Comment lines start with '#'. Two carry data: "# units: ms|s" and, in IOI
// mode, "# t0: v1,...,vK" with the absolute initial onsets. Reals are written
// with 17 significant digits so that write/read round-trips are bit-stable.
#pragma once

#include "ensync/ensemble.hpp"
#include "ensync/synth.hpp"

#include <cerrno>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace ensync::io {

class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class TimeUnit { milliseconds, seconds };

inline std::string format_real(double value) {
  char buffer[40];
  std::snprintf(buffer, sizeof(buffer), "%.17g", value);
  return buffer;
}

namespace detail {

inline std::string trim(const std::string& text) {
  const auto begin = text.find_first_not_of(" \t\r\n");
  if (begin == std::string::npos) return "";
  const auto end = text.find_last_not_of(" \t\r\n");
  return text.substr(begin, end - begin + 1);
}

inline std::vector<std::string> split(const std::string& line, char delim) {
  std::vector<std::string> out;
  std::string token;
  std::istringstream stream(line);
  while (std::getline(stream, token, delim)) out.push_back(trim(token));
  if (!line.empty() && line.back() == delim) out.push_back("");
  return out;
}

inline double parse_real(const std::string& token, const std::string& context) {
  const std::string value = trim(token);
  if (value.empty()) throw FormatError(context + ": empty numeric field");
  errno = 0;
  char* end = nullptr;
  const double parsed = std::strtod(value.c_str(), &end);
  if (end != value.c_str() + value.size() || errno == ERANGE) {
    throw FormatError(context + ": cannot parse '" + value + "' as a real number");
  }
  if (!std::isfinite(parsed)) {
    throw FormatError(context + ": value '" + value + "' is not finite");
  }
  return parsed;
}

inline long parse_int(const std::string& token, const std::string& context) {
  const std::string value = trim(token);
  if (value.empty()) throw FormatError(context + ": empty integer field");
  errno = 0;
  char* end = nullptr;
  const long parsed = std::strtol(value.c_str(), &end, 10);
  if (end != value.c_str() + value.size() || errno == ERANGE) {
    throw FormatError(context + ": cannot parse '" + value + "' as an integer");
  }
  return parsed;
}

inline std::vector<std::string> read_lines(const std::filesystem::path& path) {
  std::ifstream stream(path);
  if (!stream) throw FormatError("cannot open '" + path.string() + "'");
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(stream, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  return lines;
}

inline std::ofstream open_for_write(const std::filesystem::path& path) {
  std::ofstream stream(path, std::ios::trunc);
  if (!stream) throw FormatError("cannot write '" + path.string() + "'");
  return stream;
}

}  // namespace detail

struct Performance {
  ensemble::IoiSeries series;  // milliseconds
  bool t0_defaulted = false;   // IOI mode without a "# t0:" line
};

// Parse a performance file. Either mode funnels into an IoiSeries, so the two
// encodings of one performance drive the filter identically.
inline Performance read_performance(const std::filesystem::path& path) {
  const std::vector<std::string> lines = detail::read_lines(path);
  const std::string context = path.filename().string();

  TimeUnit unit = TimeUnit::milliseconds;
  std::optional<std::string> t0_text;
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;

  for (const std::string& raw : lines) {
    const std::string line = detail::trim(raw);
    if (line.empty()) continue;
    if (line.front() == '#') {
      const std::string body = detail::trim(line.substr(1));
      if (body.rfind("units:", 0) == 0) {
        const std::string value = detail::trim(body.substr(6));
        if (value == "ms") {
          unit = TimeUnit::milliseconds;
        } else if (value == "s") {
          unit = TimeUnit::seconds;
        } else {
          throw FormatError(context + ": units must be 'ms' or 's', got '" + value + "'");
        }
      } else if (body.rfind("t0:", 0) == 0) {
        t0_text = detail::trim(body.substr(3));
      }
      continue;
    }
    if (header.empty()) {
      header = detail::split(line, ',');
      continue;
    }
    const std::vector<std::string> cells = detail::split(line, ',');
    if (cells.size() != header.size()) {
      throw FormatError(context + ": row with " + std::to_string(cells.size()) +
                        " fields, expected " + std::to_string(header.size()));
    }
    std::vector<double> row;
    row.reserve(cells.size());
    for (const std::string& cell : cells) row.push_back(detail::parse_real(cell, context));
    rows.push_back(std::move(row));
  }

  if (header.empty()) throw FormatError(context + ": missing header row");
  if (header.size() < 2 || header[0] != "n") {
    throw FormatError(context + ": header must start with 'n' and one column per player");
  }
  const int performers = static_cast<int>(header.size()) - 1;
  bool onset_mode;
  if (header[1].rfind("onset_p", 0) == 0) {
    onset_mode = true;
  } else if (header[1].rfind("ioi_p", 0) == 0) {
    onset_mode = false;
  } else {
    throw FormatError(context + ": player columns must be onset_p<i> or ioi_p<i>");
  }
  const std::string prefix = onset_mode ? "onset_p" : "ioi_p";
  for (int i = 1; i <= performers; ++i) {
    if (header[static_cast<std::size_t>(i)] != prefix + std::to_string(i)) {
      throw FormatError(context + ": expected column '" + prefix + std::to_string(i) +
                        "', got '" + header[static_cast<std::size_t>(i)] + "'");
    }
  }
  if (rows.empty()) throw FormatError(context + ": no data rows");

  const long first_n = onset_mode ? 0 : 1;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const long expected = first_n + static_cast<long>(r);
    if (rows[r][0] != static_cast<double>(expected)) {
      throw FormatError(context + ": expected n=" + std::to_string(expected) +
                        " at data row " + std::to_string(r + 1));
    }
  }

  const double scale = unit == TimeUnit::seconds ? 1000.0 : 1.0;
  Performance perf;
  if (onset_mode) {
    if (rows.size() < 2) throw FormatError(context + ": onset mode needs at least two rows");
    ensemble::OnsetTimeline timeline;
    timeline.onsets.resize(performers, static_cast<Eigen::Index>(rows.size()));
    for (std::size_t r = 0; r < rows.size(); ++r) {
      for (int i = 0; i < performers; ++i) {
        timeline.onsets(i, static_cast<Eigen::Index>(r)) =
            rows[r][static_cast<std::size_t>(i) + 1] * scale;
      }
    }
    try {
      perf.series = synth::to_ioi_series(timeline);
    } catch (const ContractViolation& e) {
      throw FormatError(context + ": " + e.what());
    }
  } else {
    perf.series.iois.resize(performers, static_cast<Eigen::Index>(rows.size()));
    for (std::size_t r = 0; r < rows.size(); ++r) {
      for (int i = 0; i < performers; ++i) {
        perf.series.iois(i, static_cast<Eigen::Index>(r)) =
            rows[r][static_cast<std::size_t>(i) + 1] * scale;
      }
    }
    if (t0_text) {
      const std::vector<std::string> cells = detail::split(*t0_text, ',');
      if (static_cast<int>(cells.size()) != performers) {
        throw FormatError(context + ": t0 line must list one onset per player");
      }
      perf.series.initial_onsets.resize(performers);
      for (int i = 0; i < performers; ++i) {
        perf.series.initial_onsets(i) =
            detail::parse_real(cells[static_cast<std::size_t>(i)], context) * scale;
      }
    } else {
      perf.series.initial_onsets = Eigen::VectorXd::Zero(performers);
      perf.t0_defaulted = true;
    }
    try {
      perf.series.validate();
    } catch (const ContractViolation& e) {
      throw FormatError(context + ": " + e.what());
    }
  }
  return perf;
}

inline void write_performance_onsets(const std::filesystem::path& path,
                                     const ensemble::OnsetTimeline& timeline) {
  timeline.validate();
  std::ofstream out = detail::open_for_write(path);
  out << "# units: ms\n";
  out << "n";
  for (int i = 1; i <= timeline.performers(); ++i) out << ",onset_p" << i;
  out << "\n";
  for (Eigen::Index n = 0; n < timeline.onsets.cols(); ++n) {
    out << n;
    for (Eigen::Index i = 0; i < timeline.onsets.rows(); ++i) {
      out << "," << format_real(timeline.onsets(i, n));
    }
    out << "\n";
  }
}

inline void write_performance_iois(const std::filesystem::path& path,
                                   const ensemble::IoiSeries& series) {
  series.validate();
  std::ofstream out = detail::open_for_write(path);
  out << "# units: ms\n";
  out << "# t0: ";
  for (Eigen::Index i = 0; i < series.initial_onsets.size(); ++i) {
    if (i > 0) out << ",";
    out << format_real(series.initial_onsets(i));
  }
  out << "\n";
  out << "n";
  for (int i = 1; i <= series.performers(); ++i) out << ",ioi_p" << i;
  out << "\n";
  for (Eigen::Index n = 0; n < series.iois.cols(); ++n) {
    out << (n + 1);
    for (Eigen::Index i = 0; i < series.iois.rows(); ++i) {
      out << "," << format_real(series.iois(i, n));
    }
    out << "\n";
  }
}

// Key-value config mirroring the EnsembleConfig field names. Unknown keys are
// rejected; omitted keys keep the supplied defaults.
inline ensemble::EnsembleConfig read_config(const std::filesystem::path& path,
                                            ensemble::EnsembleConfig config = {}) {
  const std::string context = path.filename().string();
  for (const std::string& raw : detail::read_lines(path)) {
    const std::string line = detail::trim(raw);
    if (line.empty() || line.front() == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw FormatError(context + ": expected 'key = value', got '" + line + "'");
    }
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string value = detail::trim(line.substr(eq + 1));
    if (key == "K") {
      config.K = static_cast<int>(detail::parse_int(value, context));
    } else if (key == "sigma_T2") {
      config.sigma_T2 = detail::parse_real(value, context);
    } else if (key == "sigma_r2") {
      config.sigma_r2 = detail::parse_real(value, context);
    } else if (key == "v_alpha") {
      config.v_alpha = detail::parse_real(value, context);
    } else if (key == "rho_alpha") {
      config.rho_alpha = detail::parse_real(value, context);
    } else if (key == "v_beta") {
      config.v_beta = detail::parse_real(value, context);
    } else if (key == "rho_beta") {
      config.rho_beta = detail::parse_real(value, context);
    } else if (key == "obs_jitter") {
      config.obs_jitter = detail::parse_real(value, context);
    } else if (key == "alpha_init") {
      config.alpha_init = detail::parse_real(value, context);
    } else if (key == "beta_init") {
      config.beta_init = detail::parse_real(value, context);
    } else if (key == "init_gain_var") {
      config.init_gain_var = detail::parse_real(value, context);
    } else if (key == "init_Tr_var") {
      config.init_Tr_var = detail::parse_real(value, context);
    } else {
      throw FormatError(context + ": unknown config key '" + key + "'");
    }
  }
  try {
    config.validate();
  } catch (const ContractViolation& e) {
    throw FormatError(context + ": " + e.what());
  }
  return config;
}

inline void write_config(const std::filesystem::path& path,
                         const ensemble::EnsembleConfig& config) {
  config.validate();
  std::ofstream out = detail::open_for_write(path);
  out << "K = " << config.K << "\n";
  out << "sigma_T2 = " << format_real(config.sigma_T2) << "\n";
  out << "sigma_r2 = " << format_real(config.sigma_r2) << "\n";
  out << "v_alpha = " << format_real(config.v_alpha) << "\n";
  out << "rho_alpha = " << format_real(config.rho_alpha) << "\n";
  out << "v_beta = " << format_real(config.v_beta) << "\n";
  out << "rho_beta = " << format_real(config.rho_beta) << "\n";
  out << "obs_jitter = " << format_real(config.obs_jitter) << "\n";
  out << "alpha_init = " << format_real(config.alpha_init) << "\n";
  out << "beta_init = " << format_real(config.beta_init) << "\n";
  out << "init_gain_var = " << format_real(config.init_gain_var) << "\n";
  out << "init_Tr_var = " << format_real(config.effective_init_Tr_var()) << "\n";
}

// Long-format gain estimates: one row per (step, ordered pair), pairs in
// pair_index order within each step.
inline void write_gains(const std::filesystem::path& path,
                        const ensemble::GainTrajectory& gains) {
  std::ofstream out = detail::open_for_write(path);
  out << "n,i,j,alpha_mean,alpha_var,beta_mean,beta_var,mode\n";
  for (Eigen::Index n = 0; n < gains.n_steps(); ++n) {
    const char* mode = gains.smoothed_origin[static_cast<std::size_t>(n)]
                           ? "smoothed"
                           : "filtered";
    Eigen::Index pair = 0;
    for (int i = 1; i <= gains.K; ++i) {
      for (int j = 1; j <= gains.K; ++j) {
        if (j == i) continue;
        out << (n + 1) << "," << i << "," << j << ","
            << format_real(gains.alpha_mean(pair, n)) << ","
            << format_real(gains.alpha_var(pair, n)) << ","
            << format_real(gains.beta_mean(pair, n)) << ","
            << format_real(gains.beta_var(pair, n)) << "," << mode << "\n";
        ++pair;
      }
    }
  }
}

inline ensemble::GainTrajectory read_gains(const std::filesystem::path& path) {
  const std::string context = path.filename().string();
  const std::vector<std::string> lines = detail::read_lines(path);
  std::vector<std::vector<std::string>> rows;
  bool header_seen = false;
  for (const std::string& raw : lines) {
    const std::string line = detail::trim(raw);
    if (line.empty() || line.front() == '#') continue;
    if (!header_seen) {
      if (line != "n,i,j,alpha_mean,alpha_var,beta_mean,beta_var,mode") {
        throw FormatError(context + ": unexpected gain file header");
      }
      header_seen = true;
      continue;
    }
    std::vector<std::string> cells = detail::split(line, ',');
    if (cells.size() != 8) throw FormatError(context + ": gain rows need 8 fields");
    rows.push_back(std::move(cells));
  }
  if (!header_seen) throw FormatError(context + ": missing header row");
  if (rows.empty()) throw FormatError(context + ": no gain rows");

  int performers = 0;
  for (const auto& row : rows) {
    performers = std::max(performers, static_cast<int>(detail::parse_int(row[1], context)));
    performers = std::max(performers, static_cast<int>(detail::parse_int(row[2], context)));
  }
  const Eigen::Index pairs = ensemble::pair_count(performers);
  if (pairs == 0 || rows.size() % static_cast<std::size_t>(pairs) != 0) {
    throw FormatError(context + ": row count is not a multiple of the pair count");
  }
  const Eigen::Index n_steps = static_cast<Eigen::Index>(rows.size()) / pairs;

  ensemble::GainTrajectory gains;
  gains.K = performers;
  gains.alpha_mean.resize(pairs, n_steps);
  gains.alpha_var.resize(pairs, n_steps);
  gains.beta_mean.resize(pairs, n_steps);
  gains.beta_var.resize(pairs, n_steps);
  gains.smoothed_origin.assign(static_cast<std::size_t>(n_steps), false);

  std::size_t row_idx = 0;
  for (Eigen::Index n = 1; n <= n_steps; ++n) {
    for (int i = 1; i <= performers; ++i) {
      for (int j = 1; j <= performers; ++j) {
        if (j == i) continue;
        const auto& row = rows[row_idx++];
        if (detail::parse_int(row[0], context) != n ||
            detail::parse_int(row[1], context) != i ||
            detail::parse_int(row[2], context) != j) {
          throw FormatError(context + ": rows must be ascending in n with pairs in "
                                      "pair_index order");
        }
        const Eigen::Index pair = ensemble::pair_index(i, j, performers);
        gains.alpha_mean(pair, n - 1) = detail::parse_real(row[3], context);
        gains.alpha_var(pair, n - 1) = detail::parse_real(row[4], context);
        gains.beta_mean(pair, n - 1) = detail::parse_real(row[5], context);
        gains.beta_var(pair, n - 1) = detail::parse_real(row[6], context);
        if (row[7] == "smoothed") {
          gains.smoothed_origin[static_cast<std::size_t>(n - 1)] = true;
        } else if (row[7] != "filtered") {
          throw FormatError(context + ": mode must be 'filtered' or 'smoothed'");
        }
      }
    }
  }
  return gains;
}

// Ground-truth gains from a simulation: n,i,j,alpha,beta.
inline void write_truth(const std::filesystem::path& path,
                        const synth::GroundTruth& truth, int performers) {
  std::ofstream out = detail::open_for_write(path);
  out << "n,i,j,alpha,beta\n";
  for (Eigen::Index n = 0; n < truth.alpha.cols(); ++n) {
    Eigen::Index pair = 0;
    for (int i = 1; i <= performers; ++i) {
      for (int j = 1; j <= performers; ++j) {
        if (j == i) continue;
        out << (n + 1) << "," << i << "," << j << ","
            << format_real(truth.alpha(pair, n)) << ","
            << format_real(truth.beta(pair, n)) << "\n";
        ++pair;
      }
    }
  }
}

struct GainTable {
  int K = 0;
  Eigen::MatrixXd alpha;  // pair_count x N
  Eigen::MatrixXd beta;
};

inline GainTable read_truth(const std::filesystem::path& path) {
  const std::string context = path.filename().string();
  const std::vector<std::string> lines = detail::read_lines(path);
  std::vector<std::vector<std::string>> rows;
  bool header_seen = false;
  for (const std::string& raw : lines) {
    const std::string line = detail::trim(raw);
    if (line.empty() || line.front() == '#') continue;
    if (!header_seen) {
      if (line != "n,i,j,alpha,beta") {
        throw FormatError(context + ": unexpected truth file header");
      }
      header_seen = true;
      continue;
    }
    std::vector<std::string> cells = detail::split(line, ',');
    if (cells.size() != 5) throw FormatError(context + ": truth rows need 5 fields");
    rows.push_back(std::move(cells));
  }
  if (!header_seen || rows.empty()) throw FormatError(context + ": no truth rows");

  int performers = 0;
  for (const auto& row : rows) {
    performers = std::max(performers, static_cast<int>(detail::parse_int(row[1], context)));
  }
  const Eigen::Index pairs = ensemble::pair_count(performers);
  if (pairs == 0 || rows.size() % static_cast<std::size_t>(pairs) != 0) {
    throw FormatError(context + ": row count is not a multiple of the pair count");
  }
  GainTable table;
  table.K = performers;
  const Eigen::Index n_steps = static_cast<Eigen::Index>(rows.size()) / pairs;
  table.alpha.resize(pairs, n_steps);
  table.beta.resize(pairs, n_steps);
  for (const auto& row : rows) {
    const Eigen::Index n = detail::parse_int(row[0], context);
    const int i = static_cast<int>(detail::parse_int(row[1], context));
    const int j = static_cast<int>(detail::parse_int(row[2], context));
    if (n < 1 || n > n_steps) throw FormatError(context + ": step index out of range");
    const Eigen::Index pair = ensemble::pair_index(i, j, performers);
    table.alpha(pair, n - 1) = detail::parse_real(row[3], context);
    table.beta(pair, n - 1) = detail::parse_real(row[4], context);
  }
  return table;
}

}  // namespace ensync::io
