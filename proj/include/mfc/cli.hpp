#pragma once

// Experiment configuration and the command-line runner.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "mfc/control.hpp"
#include "mfc/core.hpp"
#include "mfc/estimators.hpp"
#include "mfc/optimize.hpp"

namespace mfc {

/// Bad configuration text or values; maps to exit code 2.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ExperimentConfig {
  std::string scenario = "fig2-3";
  ModelParams params;
  double dt = 1e-3;
  std::size_t intervals = 5;
  std::vector<double> breakpoints;   // empty: `intervals` equal pieces of [0, T]
  std::vector<double> coefficients;  // empty: zeros (starting point / fixed control)
  double leader0 = 0.8;
  std::uint64_t seed = 20240601;
  std::string output_dir = "out";

  std::size_t mc_paths = 10000;
  std::size_t sim_paths = 20;
  std::size_t replications = 20;
  std::size_t newton_max_iter = 200;
  double newton_tol = 0.0;  // <= 0: 1e-4 (1 + |J(a0)|)

  std::size_t cells = 64;

  std::vector<std::size_t> chaos_n = {16, 32, 64, 128, 256};
  std::size_t chaos_reps = 20;
  std::size_t chaos_cells = 128;
  std::size_t bootstrap = 2000;

  double fd_step = 1e-2;
  std::vector<double> fd_sweep;
  bool zero_running_cost = false;
  std::string control_term = "girsanov";  // girsanov | analytic
  std::string hessian_form = "exact";     // exact | printed
  bool baseline = true;

  TimeGrid grid() const;
  PiecewiseConstantControl basis() const;    // zero coefficients
  PiecewiseConstantControl control() const;  // configured coefficients
  Eigen::VectorXd start() const;
  EstimatorOptions estimator() const;
  NewtonOptions newton() const;
};

/// Published parameters of a figure scenario: fig1, fig2-3, fig4-sigma01,
/// fig4-sigma02, fig5, chaos. Throws ConfigError for unknown names.
ExperimentConfig default_config(std::string_view scenario);

std::vector<std::string> scenario_names();

/// Applies `key = value` lines to `base`. Strict: unknown keys, duplicate
/// keys and malformed values raise ConfigError naming the line.
ExperimentConfig parse_config(std::string_view text, ExperimentConfig base);

/// Reads a config file. A `scenario` key selects the defaults the remaining
/// keys override; otherwise `fallback_scenario` does.
ExperimentConfig load_config(const std::filesystem::path& path,
                             std::string_view fallback_scenario = "fig2-3");

/// Single override in `key=value` form.
void apply_override(ExperimentConfig& config, std::string_view assignment);

/// Canonical text of every key, in a fixed order; hashed into the manifest.
std::string to_text(const ExperimentConfig& config);

/// Empty iff all module invariants hold, plus the CFL bound of every
/// Fokker-Planck grid `command` solves on (with no command, the grid of the
/// fig5 or chaos scenario).
std::vector<std::string> validate_config(const ExperimentConfig& config,
                                         std::string_view command = "");

/// Entry point of the `mfc` tool. Returns 0 on success, 2 on configuration
/// or usage errors, 1 on numerical failure.
int run_subcommand(int argc, const char* const* argv);

}  // namespace mfc
