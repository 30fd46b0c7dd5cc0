#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace maser {

struct RunConfig {
  std::string subcommand;
  double alpha_min = 0.0;
  double alpha_max = 7.0;
  int steps = 200;
  std::optional<double> phi;
  double n_ex = 100.0;
  double nu = 0.15;
  double tail_tol = 1e-12;
  double horizon = 1e4;
  std::size_t n_traj = 1000;
  std::uint64_t seed = 1;
  std::string out;
  std::string format = "csv";
  std::vector<std::string> channels;
  std::vector<double> u;
  std::vector<double> v;
  std::vector<double> s;
  std::vector<double> times;
  std::vector<std::string> methods;
  std::string input;
  std::int64_t initial_state = -1;  ///< -1: draw from the stationary law
  unsigned workers = 0;             ///< 0: hardware concurrency
};

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitNumerical = 3;

/// Parses argv (flags override an optional key=value file given by --config)
/// and runs the subcommand. Data goes to --out or `out`; the machine-readable
/// error line goes to `err`.
int run_cli(int argc, char** argv, std::ostream& out, std::ostream& err);

/// Runs an already resolved configuration.
int run(const RunConfig& cfg, std::ostream& out, std::ostream& err);

}  // namespace maser
