#include <CLI11.hpp>
#include <fmt/format.h>
#include <fmt/ostream.h>

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>

#include "mfc/chaos.hpp"
#include "mfc/cli.hpp"
#include "mfc/experiments.hpp"
#include "mfc/io.hpp"

namespace mfc {

namespace fs = std::filesystem;

namespace {

using Json = nlohmann::json;

std::vector<double> to_std(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

Json paired_json(const PairedSummary& s) {
  return {{"mean", s.mean}, {"std_error", s.std_error}, {"n", s.n}, {"lower_bound", s.lower},
          {"level", s.level}};
}

/// Files written by a run, relative to its output directory.
class Outputs {
 public:
  explicit Outputs(fs::path dir) : dir_(std::move(dir)) {}
  fs::path add(const std::string& name) {
    files_.push_back(name);
    return dir_ / name;
  }
  const std::vector<std::string>& files() const { return files_; }
  const fs::path& dir() const { return dir_; }

 private:
  fs::path dir_;
  std::vector<std::string> files_;
};

void write_markov_csv(const fs::path& path, std::span<const MarkovReplication> reps,
                      std::size_t m) {
  auto out = open_output(path);
  out << "rep";
  for (std::size_t k = 0; k < m; ++k) out << ",a_" << k + 1;
  out << ",cost,zero_cost,within,zero_within\n";
  for (const auto& r : reps) {
    out << r.replication;
    for (double a : r.committed) fmt::print(out, ",{:.17g}", a);
    fmt::print(out, ",{:.17g},{:.17g},{:.17g},{:.17g}\n", r.cost, r.zero_cost, r.within,
               r.zero_within);
  }
}

Json markov_summary(std::span<const MarkovReplication> reps) {
  std::vector<double> within_gain;
  std::vector<double> cost_gain;
  std::vector<double> within;
  for (const auto& r : reps) {
    within_gain.push_back(r.within - r.zero_within);
    cost_gain.push_back(r.zero_cost - r.cost);
    within.push_back(r.within);
  }
  const auto w = mean_with_error(within);
  return {{"replications", reps.size()},
          {"mean_within", w.mean},
          {"mean_within_se", w.std_error},
          {"within_gain", paired_json(paired_summary(within_gain))},
          {"cost_reduction", paired_json(paired_summary(cost_gain))}};
}

void write_stage_logs(Outputs& outputs, const MarkovReplication& rep, const std::string& prefix) {
  for (std::size_t s = 0; s < rep.stages.size(); ++s) {
    auto out = open_output(outputs.add(fmt::format("{}_stage{}.csv", prefix, s + 1)));
    write_iteration_csv(out, rep.stages[s]);
  }
}

// --- subcommands -----------------------------------------------------------

void cmd_simulate(const ExperimentConfig& c, Outputs& outputs) {
  const auto init = initial_state(c);
  const auto paths = simulate_paths(c.params, c.grid(), c.control(), init, SeedSpec{c.seed},
                                    c.sim_paths, Execution::kParallel);
  {
    auto out = open_output(outputs.add("trajectories.csv"));
    write_trajectory_csv(out, paths);
  }
  auto out = open_output(outputs.add("noise.csv"));
  write_noise_csv(out, paths);
}

void cmd_optimize(const ExperimentConfig& c, Outputs& outputs) {
  const HkControlProblem problem(c.params, c.grid(), initial_state(c), c.zero_running_cost);
  MonteCarloOracle oracle(problem, c.basis(), c.mc_paths, planning_seed(c), c.estimator());
  const auto report = newton_solve(oracle, c.start(), c.newton());
  {
    auto out = open_output(outputs.add("newton_log.csv"));
    write_iteration_csv(out, report);
  }
  const auto& batch = oracle.batch(report.final_a());
  write_json_file(outputs.add("derivatives.json"),
                  derivatives_json(batch, gradient(batch, c.estimator()),
                                   hessian(batch, c.estimator())));
  const auto gain = paired_cost_difference(problem, c.basis(), c.start(), report.final_a(),
                                           c.mc_paths, evaluation_seed(c));
  write_json_file(outputs.add("optimize_summary.json"),
                  {{"status", to_string(report.status)},
                   {"iterations", report.iterates.size() - 1},
                   {"tol", report.tol},
                   {"a_final", to_std(report.final_a())},
                   {"J_start", report.iterates.front().value},
                   {"J_final", report.iterates.back().value},
                   {"cost_reduction", paired_json(gain)}});
}

void cmd_markov(const ExperimentConfig& c, Outputs& outputs) {
  std::vector<MarkovReplication> reps;
  TrajectoryBundle controlled;
  TrajectoryBundle uncontrolled;
  for (std::size_t r = 0; r < c.replications; ++r)
    reps.push_back(r == 0 ? run_hk_markov(c, r, &controlled, &uncontrolled) : run_hk_markov(c, r));
  write_markov_csv(outputs.add("markov.csv"), reps, c.basis().intervals());
  {
    auto out = open_output(outputs.add("markov_trajectory.csv"));
    write_trajectory_csv(out, std::span(&controlled, 1));
  }
  {
    auto out = open_output(outputs.add("zero_trajectory.csv"));
    write_trajectory_csv(out, std::span(&uncontrolled, 1));
  }
  write_stage_logs(outputs, reps.front(), "markov_rep0");
  write_json_file(outputs.add("markov_summary.json"), markov_summary(reps));
}

void cmd_meanfield(const ExperimentConfig& c, Outputs& outputs) {
  const auto traj = simulate_mf(c.params, c.grid(), c.control(), initial_density(c.cells),
                                c.leader0, realised_seed(c), 0);
  auto out = open_output(outputs.add("density.csv"));
  write_density_csv(out, std::span(&traj, 1));
}

void cmd_mf_optimize(const ExperimentConfig& c, Outputs& outputs) {
  const MeanFieldControlProblem problem(c.params, c.grid(), initial_density(c.cells), c.leader0,
                                        c.zero_running_cost);
  MonteCarloOracle oracle(problem, c.basis(), c.mc_paths, planning_seed(c), c.estimator());
  const auto report = newton_solve(oracle, c.start(), c.newton());
  {
    auto out = open_output(outputs.add("mf_newton_log.csv"));
    write_iteration_csv(out, report);
  }
  std::vector<MarkovReplication> reps;
  MeanFieldTrajectory controlled;
  MeanFieldTrajectory uncontrolled;
  for (std::size_t r = 0; r < c.replications; ++r)
    reps.push_back(r == 0 ? run_mf_markov(c, r, &controlled, &uncontrolled) : run_mf_markov(c, r));
  write_markov_csv(outputs.add("mf_markov.csv"), reps, c.basis().intervals());
  {
    auto out = open_output(outputs.add("density_markov.csv"));
    write_density_csv(out, std::span(&controlled, 1));
  }
  {
    auto out = open_output(outputs.add("density_zero.csv"));
    write_density_csv(out, std::span(&uncontrolled, 1));
  }
  Json summary = markov_summary(reps);
  summary["offline"] = {{"status", to_string(report.status)},
                        {"iterations", report.iterates.size() - 1},
                        {"a_final", to_std(report.final_a())},
                        {"J_start", report.iterates.front().value},
                        {"J_final", report.iterates.back().value}};
  write_json_file(outputs.add("mf_summary.json"), summary);
}

void cmd_chaos(const ExperimentConfig& c, Outputs& outputs) {
  ChaosSetup setup{c.params, c.grid(), c.control(), initial_density(c.chaos_cells), c.leader0,
                   SeedSpec{c.seed}};
  const auto study = convergence_study(setup, c.chaos_n, c.chaos_reps);
  {
    auto out = open_output(outputs.add("chaos_study.csv"));
    write_study_csv(out, study.records);
  }
  const auto fit = fit_slope(study.records, c.bootstrap, SeedSpec{c.seed});
  write_json_file(outputs.add("chaos_summary.json"), to_json(fit, study.rows));
}

void cmd_check_gradient(const ExperimentConfig& c, Outputs& outputs) {
  const HkControlProblem problem(c.params, c.grid(), initial_state(c), c.zero_running_cost);
  const auto check =
      fd_gradient_check(problem, c.control(), c.fd_step, c.mc_paths, planning_seed(c), c.estimator());
  Json report = to_json(check);
  report["h"] = c.fd_step;
  report["a"] = to_std(c.start());
  write_json_file(outputs.add("gradient_check.json"), report);
  fmt::print("max relative error over resolved components: {}\n",
             report["max_relative_error"].dump());
  if (c.fd_sweep.empty()) return;
  auto out = open_output(outputs.add("fd_sweep.csv"));
  out << "h,k,estimate,estimate_se,finite_difference,finite_difference_se,relative_error,resolved\n";
  for (double h : c.fd_sweep) {
    const auto s =
        fd_gradient_check(problem, c.control(), h, c.mc_paths, planning_seed(c), c.estimator());
    for (Eigen::Index k = 0; k < s.estimate.size(); ++k) {
      fmt::print(out, "{:.17g},{},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},{}\n", h, k + 1,
                 s.estimate(k), s.estimate_se(k), s.finite_difference(k),
                 s.finite_difference_se(k), s.relative_error(k),
                 s.resolved[static_cast<std::size_t>(k)] ? 1 : 0);
    }
  }
}

using Command = void (*)(const ExperimentConfig&, Outputs&);

const std::map<std::string, std::pair<Command, std::string>>& commands() {
  static const std::map<std::string, std::pair<Command, std::string>> table = {
      {"simulate", {cmd_simulate, "Simulate follower/leader trajectories under a fixed control"}},
      {"optimize", {cmd_optimize, "Offline Newton optimisation of the control coefficients"}},
      {"markov", {cmd_markov, "Receding-horizon Markov control over replications"}},
      {"meanfield", {cmd_meanfield, "Solve the coupled Fokker-Planck / leader system"}},
      {"mf-optimize", {cmd_mf_optimize, "Newton and Markov control of the mean-field system"}},
      {"chaos", {cmd_chaos, "Propagation-of-chaos convergence study"}},
      {"check-gradient", {cmd_check_gradient, "Gradient estimator vs finite differences"}},
  };
  return table;
}

struct Invocation {
  std::string config_path;
  std::string scenario;
  std::string out_dir;
  std::vector<std::string> overrides;
  int threads = 0;
};

ExperimentConfig resolve_config(const Invocation& inv) {
  ExperimentConfig c = inv.config_path.empty()
                           ? default_config(inv.scenario.empty() ? "fig2-3" : inv.scenario)
                           : load_config(inv.config_path, inv.scenario.empty() ? "fig2-3" : inv.scenario);
  for (const auto& o : inv.overrides) apply_override(c, o);
  if (const char* env = std::getenv("MFC_SEED")) apply_override(c, std::string("seed=") + env);
  if (!inv.out_dir.empty()) c.output_dir = inv.out_dir;
  return c;
}

int execute(const std::string& name, const Invocation& inv) {
  const auto start = std::chrono::steady_clock::now();
  ExperimentConfig config;
  try {
    config = resolve_config(inv);
  } catch (const ConfigError& e) {
    fmt::print(stderr, "config error: {}\n", e.what());
    return 2;
  }
  const auto violations = validate_config(config, name);
  if (!violations.empty()) {
    for (const auto& v : violations) fmt::print(stderr, "config error: {}\n", v);
    return 2;
  }
  if (inv.threads > 0) set_worker_count(inv.threads);

  try {
    const fs::path dir(config.output_dir);
    fs::create_directories(dir);
    Outputs outputs(dir);
    {
      auto out = open_output(outputs.add("config.toml"));
      out << to_text(config);
    }
    commands().at(name).first(config, outputs);
    const double wall =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const std::string text = to_text(config);
    write_manifest(dir / "manifest.json", {config.scenario, fmt::format("{:016x}", fnv1a(text)),
                                           outputs.files(), config.seed, wall});
    fmt::print("wrote {} files to {}\n", outputs.files().size() + 1, dir.string());
    return 0;
  } catch (const std::invalid_argument& e) {
    fmt::print(stderr, "invalid input: {}\n", e.what());
    return 2;
  } catch (const NumericalError& e) {
    fmt::print(stderr, "numerical failure: {}\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return 1;
  }
}

}  // namespace

int run_subcommand(int argc, const char* const* argv) {
  CLI::App app{"Leader-follower mean-field control experiments"};
  app.require_subcommand(1);
  Invocation inv;
  std::map<std::string, CLI::App*> subs;
  std::string scenarios;
  for (const auto& s : scenario_names()) scenarios += (scenarios.empty() ? "" : ", ") + s;
  for (const auto& [name, entry] : commands()) {
    auto* sub = app.add_subcommand(name, entry.second);
    sub->add_option("-c,--config", inv.config_path, "key = value config file")
        ->check(CLI::ExistingFile);
    sub->add_option("-s,--scenario", inv.scenario, "default parameter set: " + scenarios);
    sub->add_option("-o,--out", inv.out_dir, "output directory (overrides output_dir)");
    sub->add_option("--set", inv.overrides, "override a config key, key=value");
    sub->add_option("-t,--threads", inv.threads, "worker thread cap (default: all cores)")
        ->check(CLI::NonNegativeNumber);
    subs[name] = sub;
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }
  for (const auto& [name, sub] : subs) {
    if (sub->parsed()) return execute(name, inv);
  }
  return 2;
}

}  // namespace mfc
