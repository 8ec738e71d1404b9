#pragma once

#include <cstddef>
#include <cstdint>
#include <string>

namespace coaltree {

// One parsed command-line run: the subcommand plus every knob it may use.
// The seed is mandatory on every subcommand, so no run depends on the wall
// clock; knobs a subcommand does not read keep their defaults and do not
// perturb the config hash semantics of runs that do read them.
struct RunConfig {
  std::string command;
  std::string check_name;
  std::string xi_path;
  std::size_t n = 0;
  double t = -1.0;
  double step = 0.01;
  std::size_t reps = 0;
  std::string mode = "rho";
  std::uint64_t seed = 0;
  std::size_t threads = 1;
  std::string out_dir;

  // Stable key: value listing of everything that shapes the output.
  // Thread count is deliberately excluded: results are identical for any
  // thread count, so the hash must be too.
  std::string canonical_text() const;
};

// Exit status: 0 all good, 1 a named check ran and failed, 2 malformed
// command line or config file.
int run_cli(int argc, const char* const* argv);

}  // namespace coaltree
