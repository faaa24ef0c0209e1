#include <fmt/format.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

#include "mfc/cli.hpp"
#include "mfc/meanfield.hpp"

namespace mfc {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

double to_double(std::string_view s) {
  s = trim(s);
  double v = 0.0;
  const auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || end != s.data() + s.size() || s.empty())
    throw ConfigError(fmt::format("expected a number, got '{}'", s));
  return v;
}

std::uint64_t to_unsigned(std::string_view s) {
  s = trim(s);
  std::uint64_t v = 0;
  const auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || end != s.data() + s.size() || s.empty()) {
    // Accept integral values written in exponent form, e.g. 1e4.
    const double d = to_double(s);
    if (!(d >= 0) || d != std::floor(d) || d > 9.007199254740992e15)
      throw ConfigError(fmt::format("expected a non-negative integer, got '{}'", s));
    return static_cast<std::uint64_t>(d);
  }
  return v;
}

bool to_bool(std::string_view s) {
  s = trim(s);
  if (s == "true") return true;
  if (s == "false") return false;
  throw ConfigError(fmt::format("expected true or false, got '{}'", s));
}

std::string to_string_value(std::string_view s) {
  s = trim(s);
  if (s.size() < 2 || s.front() != '"' || s.back() != '"')
    throw ConfigError(fmt::format("expected a quoted string, got '{}'", s));
  s = s.substr(1, s.size() - 2);
  if (s.find('"') != std::string_view::npos) throw ConfigError("embedded quotes are not supported");
  return std::string(s);
}

template <class T, class Convert>
std::vector<T> to_list(std::string_view s, Convert convert) {
  s = trim(s);
  if (s.size() < 2 || s.front() != '[' || s.back() != ']')
    throw ConfigError(fmt::format("expected a [list], got '{}'", s));
  s = trim(s.substr(1, s.size() - 2));
  std::vector<T> out;
  if (s.empty()) return out;
  while (true) {
    const auto comma = s.find(',');
    const auto item = trim(s.substr(0, comma));
    if (item.empty()) {
      if (comma == std::string_view::npos) break;  // trailing comma
      throw ConfigError("empty list element");
    }
    out.push_back(static_cast<T>(convert(item)));
    if (comma == std::string_view::npos) break;
    s = s.substr(comma + 1);
  }
  return out;
}

std::string fmt_double(double v) { return fmt::format("{:.17g}", v); }

template <class T>
std::string fmt_list(const std::vector<T>& v) {
  std::string out = "[";
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ", ";
    if constexpr (std::is_floating_point_v<T>)
      out += fmt_double(v[i]);
    else
      out += std::to_string(v[i]);
  }
  return out + "]";
}

struct Key {
  std::string name;
  std::function<void(ExperimentConfig&, std::string_view)> set;
  std::function<std::string(const ExperimentConfig&)> get;
};

#define MFC_DOUBLE(name, field)                                                      \
  Key {                                                                              \
    name, [](ExperimentConfig& c, std::string_view v) { c.field = to_double(v); },   \
        [](const ExperimentConfig& c) { return fmt_double(c.field); }                \
  }
#define MFC_SIZE(name, field)                                                        \
  Key {                                                                              \
    name, [](ExperimentConfig& c, std::string_view v) { c.field = to_unsigned(v); }, \
        [](const ExperimentConfig& c) { return std::to_string(c.field); }            \
  }
#define MFC_BOOL(name, field)                                                        \
  Key {                                                                              \
    name, [](ExperimentConfig& c, std::string_view v) { c.field = to_bool(v); },     \
        [](const ExperimentConfig& c) { return std::string(c.field ? "true" : "false"); } \
  }
#define MFC_STRING(name, field)                                                          \
  Key {                                                                                  \
    name, [](ExperimentConfig& c, std::string_view v) { c.field = to_string_value(v); }, \
        [](const ExperimentConfig& c) { return "\"" + c.field + "\""; }                  \
  }

const std::vector<Key>& keys() {
  static const std::vector<Key> table = {
      MFC_STRING("scenario", scenario),
      MFC_DOUBLE("k", params.k),
      MFC_DOUBLE("k_leader", params.k_leader),
      MFC_DOUBLE("sigma", params.sigma),
      MFC_DOUBLE("radius", params.radius),
      MFC_DOUBLE("lambda", params.lambda),
      MFC_DOUBLE("horizon", params.horizon),
      MFC_SIZE("n_followers", params.n_followers),
      MFC_DOUBLE("kernel_width", params.kernel_width),
      MFC_DOUBLE("dt", dt),
      MFC_SIZE("intervals", intervals),
      Key{"breakpoints",
          [](ExperimentConfig& c, std::string_view v) { c.breakpoints = to_list<double>(v, to_double); },
          [](const ExperimentConfig& c) { return fmt_list(c.breakpoints); }},
      Key{"coefficients",
          [](ExperimentConfig& c, std::string_view v) {
            c.coefficients = to_list<double>(v, to_double);
          },
          [](const ExperimentConfig& c) { return fmt_list(c.coefficients); }},
      MFC_DOUBLE("leader0", leader0),
      MFC_SIZE("seed", seed),
      MFC_STRING("output_dir", output_dir),
      MFC_SIZE("mc_paths", mc_paths),
      MFC_SIZE("sim_paths", sim_paths),
      MFC_SIZE("replications", replications),
      MFC_SIZE("newton_max_iter", newton_max_iter),
      MFC_DOUBLE("newton_tol", newton_tol),
      MFC_SIZE("cells", cells),
      Key{"chaos_n",
          [](ExperimentConfig& c, std::string_view v) {
            c.chaos_n = to_list<std::size_t>(v, to_unsigned);
          },
          [](const ExperimentConfig& c) { return fmt_list(c.chaos_n); }},
      MFC_SIZE("chaos_reps", chaos_reps),
      MFC_SIZE("chaos_cells", chaos_cells),
      MFC_SIZE("bootstrap", bootstrap),
      MFC_DOUBLE("fd_step", fd_step),
      Key{"fd_sweep",
          [](ExperimentConfig& c, std::string_view v) { c.fd_sweep = to_list<double>(v, to_double); },
          [](const ExperimentConfig& c) { return fmt_list(c.fd_sweep); }},
      MFC_BOOL("zero_running_cost", zero_running_cost),
      MFC_STRING("control_term", control_term),
      MFC_STRING("hessian_form", hessian_form),
      MFC_BOOL("baseline", baseline),
  };
  return table;
}

#undef MFC_DOUBLE
#undef MFC_SIZE
#undef MFC_BOOL
#undef MFC_STRING

const Key& find_key(std::string_view name) {
  for (const auto& k : keys()) {
    if (k.name == name) return k;
  }
  throw ConfigError(fmt::format("unknown configuration key '{}'", name));
}

struct Assignment {
  std::string key;
  std::string value;
  std::size_t line = 0;
};

std::string strip_comment(std::string_view line) {
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (line[i] == '"') quoted = !quoted;
    if (line[i] == '#' && !quoted) return std::string(line.substr(0, i));
  }
  return std::string(line);
}

std::vector<Assignment> split_assignments(std::string_view text) {
  std::vector<Assignment> out;
  std::set<std::string> seen;
  std::istringstream in{std::string(text)};
  std::string raw;
  std::size_t number = 0;
  while (std::getline(in, raw)) {
    ++number;
    const std::string line = strip_comment(raw);
    const auto body = trim(line);
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string_view::npos)
      throw ConfigError(fmt::format("line {}: expected 'key = value'", number));
    const std::string key(trim(body.substr(0, eq)));
    const std::string value(trim(body.substr(eq + 1)));
    if (key.empty() || value.empty())
      throw ConfigError(fmt::format("line {}: expected 'key = value'", number));
    if (!seen.insert(key).second)
      throw ConfigError(fmt::format("line {}: duplicate key '{}'", number, key));
    out.push_back({key, value, number});
  }
  return out;
}

void apply(ExperimentConfig& config, const Assignment& a) {
  try {
    find_key(a.key).set(config, a.value);
  } catch (const ConfigError& e) {
    throw ConfigError(a.line ? fmt::format("line {}: {}", a.line, e.what()) : e.what());
  }
}

}  // namespace

TimeGrid ExperimentConfig::grid() const { return TimeGrid::with_step(params.horizon, dt); }

PiecewiseConstantControl ExperimentConfig::basis() const {
  if (breakpoints.empty()) return PiecewiseConstantControl::uniform(params.horizon, intervals);
  return {breakpoints, std::vector<double>(breakpoints.size() - 1, 0.0)};
}

PiecewiseConstantControl ExperimentConfig::control() const {
  const auto b = basis();
  if (coefficients.empty()) return b;
  return b.with_coefficients(coefficients);
}

Eigen::VectorXd ExperimentConfig::start() const {
  const auto ctl = control();
  const auto c = ctl.coefficients();
  return Eigen::Map<const Eigen::VectorXd>(c.data(), static_cast<Eigen::Index>(c.size()));
}

EstimatorOptions ExperimentConfig::estimator() const {
  EstimatorOptions o;
  o.baseline = baseline;
  o.control_term = control_term == "analytic" ? ControlTerm::kAnalytic : ControlTerm::kGirsanov;
  o.hessian_form = hessian_form == "printed" ? HessianForm::kPrinted : HessianForm::kExact;
  return o;
}

NewtonOptions ExperimentConfig::newton() const {
  NewtonOptions o;
  o.max_iter = newton_max_iter;
  o.tol = newton_tol;
  return o;
}

std::vector<std::string> scenario_names() {
  return {"fig1", "fig2-3", "fig4-sigma01", "fig4-sigma02", "fig5", "chaos"};
}

ExperimentConfig default_config(std::string_view scenario) {
  ExperimentConfig c;
  c.scenario = std::string(scenario);
  c.output_dir = "out/" + c.scenario;
  if (scenario == "fig2-3") return c;
  if (scenario == "fig1") {
    // Uncontrolled follower dynamics without a leader.
    c.params.k_leader = 0.0;
    return c;
  }
  if (scenario == "fig4-sigma01") {
    c.params.sigma = 0.1;
    return c;
  }
  if (scenario == "fig4-sigma02") {
    c.params.sigma = 0.2;
    return c;
  }
  if (scenario == "fig5") {
    c.cells = 64;
    c.replications = 10;
    return c;
  }
  if (scenario == "chaos") {
    c.chaos_cells = 128;
    return c;
  }
  throw ConfigError(fmt::format("unknown scenario '{}'", scenario));
}

ExperimentConfig parse_config(std::string_view text, ExperimentConfig base) {
  for (const auto& a : split_assignments(text)) apply(base, a);
  return base;
}

ExperimentConfig load_config(const std::filesystem::path& path, std::string_view fallback_scenario) {
  std::ifstream in(path);
  if (!in) throw ConfigError(fmt::format("cannot read config file {}", path.string()));
  std::stringstream buffer;
  buffer << in.rdbuf();
  const std::string text = buffer.str();
  const auto assignments = split_assignments(text);
  std::string scenario(fallback_scenario);
  for (const auto& a : assignments) {
    if (a.key == "scenario") {
      try {
        scenario = to_string_value(a.value);
      } catch (const ConfigError& e) {
        throw ConfigError(fmt::format("line {}: {}", a.line, e.what()));
      }
    }
  }
  ExperimentConfig config = default_config(scenario);
  for (const auto& a : assignments) apply(config, a);
  return config;
}

void apply_override(ExperimentConfig& config, std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos)
    throw ConfigError(fmt::format("override '{}' is not key=value", assignment));
  apply(config, {std::string(trim(assignment.substr(0, eq))),
                 std::string(trim(assignment.substr(eq + 1))), 0});
}

std::string to_text(const ExperimentConfig& config) {
  std::string out;
  for (const auto& k : keys()) out += k.name + " = " + k.get(config) + "\n";
  return out;
}

std::vector<std::string> validate_config(const ExperimentConfig& c, std::string_view command) {
  std::vector<std::string> v = c.params.violations();
  auto add = [&v](std::string s) { v.push_back(std::move(s)); };

  bool grid_ok = false;
  TimeGrid grid;
  if (!(c.dt > 0) || !std::isfinite(c.dt)) {
    add("dt must be > 0");
  } else if (std::isfinite(c.params.horizon) && c.params.horizon > 0) {
    try {
      grid = c.grid();
      grid_ok = true;
    } catch (const std::exception& e) {
      add(e.what());
    }
  }

  if (!c.breakpoints.empty()) {
    if (c.breakpoints.size() < 2) add("breakpoints need >= 2 entries");
  } else if (c.intervals == 0) {
    add("intervals must be >= 1");
  }
  try {
    const auto control = c.control();
    if (std::abs(control.horizon() - c.params.horizon) > 1e-12 * c.params.horizon)
      add("breakpoints must end at the horizon");
    if (grid_ok) {
      for (std::size_t k = 0; k < control.intervals(); ++k) {
        const double t = control.breakpoints()[k];
        const double steps = t / grid.dt;
        if (std::abs(steps - std::round(steps)) > 1e-9)
          add(fmt::format("breakpoint {} is not a multiple of dt", t));
      }
    }
  } catch (const std::exception& e) {
    add(e.what());
  }

  if (!(c.leader0 >= 0.0 && c.leader0 < 1.0)) add("leader0 must lie in [0, 1)");
  if (c.mc_paths < 2) add("mc_paths must be >= 2");
  if (c.sim_paths < 1) add("sim_paths must be >= 1");
  if (c.replications < 2) add("replications must be >= 2");
  if (c.newton_max_iter < 1) add("newton_max_iter must be >= 1");
  if (!std::isfinite(c.newton_tol)) add("newton_tol must be finite");

  auto check_cfl = [&](std::size_t cells, const char* what) {
    if (cells < 2) {
      add(fmt::format("{} must be >= 2", what));
      return;
    }
    if (!c.params.violations().empty() || !(c.dt > 0)) return;
    const double bound = cfl_max_dt(c.params, 1.0 / static_cast<double>(cells));
    if (c.dt > bound * (1.0 + 1e-12))
      add(fmt::format("dt = {} violates the CFL bound {:.6g} for {} = {}", c.dt, bound, what, cells));
  };
  // The Fokker-Planck grids only matter for the commands that solve on them.
  const bool mean_field = command.empty() ? c.scenario == "fig5"
                                          : (command == "meanfield" || command == "mf-optimize");
  const bool chaos = command.empty() ? c.scenario == "chaos" : command == "chaos";
  if (mean_field) check_cfl(c.cells, "cells");
  if (chaos) check_cfl(c.chaos_cells, "chaos_cells");

  if (c.chaos_n.empty()) add("chaos_n must not be empty");
  for (std::size_t i = 0; i < c.chaos_n.size(); ++i) {
    if (c.chaos_n[i] == 0) add("chaos_n entries must be >= 1");
    if (i > 0 && c.chaos_n[i] <= c.chaos_n[i - 1]) add("chaos_n must be strictly ascending");
  }
  if (c.chaos_reps < 5) add("chaos_reps must be >= 5");

  if (!(c.fd_step > 0)) add("fd_step must be > 0");
  for (double h : c.fd_sweep) {
    if (!(h > 0)) add("fd_sweep entries must be > 0");
  }
  if (c.control_term != "girsanov" && c.control_term != "analytic")
    add("control_term must be \"girsanov\" or \"analytic\"");
  if (c.hessian_form != "exact" && c.hessian_form != "printed")
    add("hessian_form must be \"exact\" or \"printed\"");
  if (c.output_dir.empty()) add("output_dir must not be empty");
  return v;
}

}  // namespace mfc
