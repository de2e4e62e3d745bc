#pragma once

// Command dispatch for the dispar tool, kept apart from main() so tests can
// drive it in-process.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace dispar::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitRegime = 3;
inline constexpr int kExitNumerical = 4;

const std::vector<std::string>& commands();

struct Options {
  std::string command;
  std::optional<std::filesystem::path> config;
  std::filesystem::path out = "out";
  std::optional<std::uint64_t> seed;
  unsigned threads = 1;
  std::optional<double> dt_ps;
  std::optional<double> t_gate_ns;
  std::optional<int> levels;
  std::optional<std::string> frame;
  std::optional<int> n_cnots;
  std::optional<double> f_cnot;
  std::optional<double> t1_us;          // applied to every qubit mode
  int trace_stride = 0;
  std::optional<std::filesystem::path> gate_report;  // compare: reuse an evolve report
  std::optional<std::filesystem::path> golden;       // shifts: compare against a CSV
};

/// Runs one command, writing artifacts under options.out and a short human
/// summary to `log`. Errors are reported on `err` and mapped to exit codes.
int execute(const Options& options, std::ostream& log, std::ostream& err);

/// Directory holding the shipped example configurations.
std::filesystem::path data_dir();

}  // namespace dispar::cli
