// qlink: budget, Monte Carlo, visibility curves and parameter sweeps for a
// fiber-multiplexed entangled-photon link.
//
// exit codes: 0 ok, 1 configuration or usage error, 2 runtime error

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "qlink/engine.hpp"
#include "qlink/report.hpp"
#include "qlink/scenario_io.hpp"

namespace fs = std::filesystem;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitRuntime = 2;

struct Options {
  std::string scenario;
  std::string output;
  std::optional<std::uint64_t> seed;
  std::optional<double> duration;
  std::string mode;  // curve/sweep: "budget" or "mc"
  std::string basis = "D";
  std::size_t points = 37;
  std::string param;
  std::string values;
  unsigned threads = 0;
  bool strict = false;
};

fs::path resolve_scenario(const std::string& name) {
  const fs::path direct(name);
  if (fs::exists(direct)) return direct;
  const fs::path bundled = fs::path(QLINK_SCENARIO_DIR) / name;
  if (fs::exists(bundled)) return bundled;
  if (fs::exists(fs::path(bundled).concat(".scn"))) return fs::path(bundled).concat(".scn");
  throw qlink::ConfigError({name + ": scenario file not found (also looked in " + std::string(QLINK_SCENARIO_DIR) + ")"});
}

std::vector<double> parse_values(const std::string& spec) {
  // a:b:step, inclusive of b up to rounding
  std::vector<std::string> parts;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= spec.size(); ++i)
    if (i == spec.size() || spec[i] == ':') {
      parts.push_back(spec.substr(start, i - start));
      start = i + 1;
    }
  if (parts.size() != 3) throw qlink::ConfigError({"--values: expected a:b:step, got '" + spec + "'"});
  double a = 0, b = 0, step = 0;
  try {
    a = qlink::parse_double(parts[0]);
    b = qlink::parse_double(parts[1]);
    step = qlink::parse_double(parts[2]);
  } catch (const std::invalid_argument& e) {
    throw qlink::ConfigError({std::string("--values: ") + e.what()});
  }
  if (!(step > 0.0) || b < a) throw qlink::ConfigError({"--values: need step > 0 and b >= a"});
  const auto n = static_cast<std::size_t>(std::floor((b - a) / step + 1e-9)) + 1;
  if (n > 100000) throw qlink::ConfigError({"--values: too many sweep points"});
  std::vector<double> v;
  for (std::size_t i = 0; i < n; ++i) v.push_back(a + step * static_cast<double>(i));
  return v;
}

qlink::RunSettings run_settings(const qlink::Scenario& s, const Options& o, std::optional<qlink::RunMode> mode) {
  auto rs = s.run;
  if (mode) rs.mode = *mode;
  if (o.seed) rs.seed = *o.seed;
  if (o.duration) {
    if (!(*o.duration > 0.0)) throw qlink::ConfigError({"--duration: must be > 0"});
    rs.duration_s = *o.duration;
  }
  return rs;
}

std::optional<qlink::RunMode> mode_option(const std::string& m) {
  if (m.empty()) return std::nullopt;
  if (m == "budget") return qlink::RunMode::budget;
  if (m == "mc" || m == "monte-carlo") return qlink::RunMode::monte_carlo;
  throw qlink::ConfigError({"--mode: expected budget or mc, got '" + m + "'"});
}

void write_text(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error(path + ": cannot open for writing");
  out << text;
}

void print_warnings(const std::vector<std::string>& warnings) {
  for (const auto& w : warnings) std::cerr << "warning: " << w << '\n';
}

int run_report(const Options& o, qlink::RunMode mode) {
  const auto s = qlink::load_scenario_file(resolve_scenario(o.scenario));
  auto rs = run_settings(s, o, mode);
  const auto report = qlink::run(s, rs);
  print_warnings(report.warnings);
  write_text(o.output, qlink::run_report_json(s, report).dump(2) + "\n");
  if (o.strict && !report.warnings.empty()) return kExitRuntime;
  return kExitOk;
}

int run_curve(const Options& o) {
  const auto s = qlink::load_scenario_file(resolve_scenario(o.scenario));
  const auto rs = run_settings(s, o, mode_option(o.mode).value_or(qlink::RunMode::budget));
  const auto state = qlink::signal_state_from_string(o.basis);
  if (!state || *state == qlink::SignalState::open) throw qlink::ConfigError({"--basis: expected H, V, D or A"});
  if (!s.signal_analyzer || !s.idler_analyzer)
    throw qlink::ConfigError({"curve: scenario needs both signal and idler analyzers"});
  const auto grid = qlink::angle_grid(o.points);
  const auto curve = qlink::visibility_curve(s, *state, grid, rs);

  std::ostringstream csv;
  qlink::write_curve_csv(csv, curve);
  const std::string json = qlink::curve_report_json(s, curve, rs).dump(2) + "\n";
  if (o.output.empty() || o.output == "-") {
    std::cout << csv.str();
    std::cerr << json;
  } else {
    write_text(o.output, csv.str());
    write_text(o.output + ".json", json);
  }
  return kExitOk;
}

int run_sweep(const Options& o) {
  const auto s = qlink::load_scenario_file(resolve_scenario(o.scenario));
  const auto rs = run_settings(s, o, mode_option(o.mode).value_or(qlink::RunMode::budget));
  const auto values = parse_values(o.values);
  {
    auto probe = s;
    try {
      qlink::set_numeric_field(probe, o.param, values.front());
    } catch (const std::invalid_argument& e) {
      std::string known;
      for (const auto& p : qlink::numeric_field_paths(s)) known += "\n  " + p;
      throw qlink::ConfigError({std::string("--param: ") + e.what() + "; sweepable fields:" + known});
    }
  }
  for (double v : values) {
    auto probe = s;
    qlink::set_numeric_field(probe, o.param, v);
    const auto violations = qlink::validate_components(probe);
    if (!violations.empty())
      throw qlink::ConfigError({"--param " + o.param + " = " + qlink::format_double(v) + ": " +
                                violations.front().field + ": " + violations.front().message});
  }
  const unsigned threads = o.threads ? o.threads : std::max(1u, std::thread::hardware_concurrency());
  const auto points = qlink::sweep(s, o.param, values, rs, threads);
  std::vector<std::string> warnings;
  for (const auto& p : points)
    for (const auto& w : p.report.warnings) warnings.push_back(qlink::format_double(p.value) + ": " + w);
  print_warnings(warnings);
  std::ostringstream csv;
  qlink::write_sweep_csv(csv, points);
  write_text(o.output, csv.str());
  if (o.strict && !warnings.empty()) return kExitRuntime;
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"qlink - entangled-photon fiber link simulator"};
  app.require_subcommand(1);
  Options o;

  const auto common = [&](CLI::App* sub) {
    sub->add_option("-s,--scenario", o.scenario, "scenario file or bundled scenario name")->required();
    sub->add_option("-o,--output", o.output, "output file (default stdout)");
    sub->add_option("--seed", o.seed, "master seed (overrides the scenario)");
    sub->add_option("--duration", o.duration, "simulated seconds per setting");
    sub->add_flag("--strict", o.strict, "exit 2 when a warning such as a sync failure is raised");
  };
  auto* budget = app.add_subcommand("budget", "closed-form link budget");
  common(budget);
  auto* sim = app.add_subcommand("sim", "event-level Monte Carlo");
  common(sim);
  auto* curve = app.add_subcommand("curve", "coincidence rate against Bob's analyzer angle");
  common(curve);
  curve->add_option("--basis", o.basis, "signal state H|V|D|A")->check(CLI::IsMember({"H", "V", "D", "A"}));
  curve->add_option("--points", o.points, "grid points over 0..180 degrees")->check(CLI::Range(8, 100000));
  curve->add_option("--mode", o.mode, "budget or mc");
  auto* sw = app.add_subcommand("sweep", "vary one numeric scenario field");
  common(sw);
  sw->add_option("--param", o.param, "field path, e.g. channel[1].length_km")->required();
  sw->add_option("--values", o.values, "a:b:step")->required();
  sw->add_option("--mode", o.mode, "budget or mc");
  sw->add_option("--threads", o.threads, "worker threads (default: all cores)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  try {
    if (budget->parsed()) return run_report(o, qlink::RunMode::budget);
    if (sim->parsed()) return run_report(o, qlink::RunMode::monte_carlo);
    if (curve->parsed()) return run_curve(o);
    if (sw->parsed()) return run_sweep(o);
  } catch (const qlink::ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const qlink::EventGuardError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitConfig;
}
