// sasctl: identify / tune / run / report / suite over the simulated plant.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "sasctl/error.hpp"
#include "sasctl/harness.hpp"

namespace fs = std::filesystem;
using namespace sasctl;

namespace {

// A scenario argument is a file path if one exists, otherwise a builtin name.
harness::ScenarioSpec resolve_scenario(const std::string& arg) {
  if (fs::exists(arg)) return harness::load_scenario(arg);
  for (const auto& n : harness::builtin_names())
    if (n == arg) return harness::builtin_scenario(n);
  throw Error(ErrorCategory::Io, "scenario '" + arg + "' is neither a file nor a builtin");
}

struct Common {
  std::string scenario = "gsc-vs-linear";
  std::optional<std::uint64_t> seed;
  std::string out = "out";
  std::string controller;
};

harness::ScenarioSpec scenario_for(const Common& c) {
  auto spec = resolve_scenario(c.scenario);
  if (c.seed) spec.rng_seed = *c.seed;
  if (!c.controller.empty()) spec.controller = harness::parse_controller(c.controller);
  spec.validate();
  return spec;
}

void print_run(const harness::RunResult& run, const harness::Artifact& art) {
  std::vector<std::pair<std::string, metrics::MetricsReport>> cols{{"whole", run.whole}};
  for (const auto& p : run.phases) cols.push_back(p);
  std::cout << harness::report_table({std::string(harness::controller_name(run.spec.controller))}, {cols});
  std::cout << "trace " << art.trace_csv.string() << "  hash " << harness::hex64(art.hash) << "\n";
}

int cmd_identify(const Common& c, int cluster, std::optional<int> region, int na, int nb, bool mimo, bool full) {
  const auto spec = scenario_for(c);
  const auto cfg = spec.identification_plant();
  fs::create_directories(c.out);
  if (mimo || full) {
    const auto m = harness::identify_mimo(cfg, spec.mimo, spec.control_period, full);
    const auto path = fs::path(c.out) / (full ? "fullsystem-model.json" : "mimo-model.json");
    harness::write_file(path, harness::mimo_model_to_json(m, full));
    std::printf("%s fit %.2f%% -> %s\n", m.name.c_str(), m.report.fit_percent, path.c_str());
    return 0;
  }
  const auto models = harness::identify_siso(cfg, cluster, region, spec.pi, spec.control_period, {na, nb});
  const auto path = fs::path(c.out) / "models.json";
  harness::write_file(path, harness::models_to_json(models));
  for (const auto& m : models)
    std::printf("%-8s fit %6.2f%%  resid %.3g  n=%zu\n", m.name.c_str(), m.report.fit_percent,
                m.report.residual_variance, m.report.samples);
  std::printf("-> %s\n", path.c_str());
  return 0;
}

int cmd_tune(const Common& c, const std::string& models_path, std::optional<double> crossover,
             std::optional<double> full_crossover) {
  auto spec = scenario_for(c);
  if (crossover) spec.pi.crossover = *crossover;
  if (full_crossover) spec.pi.full_crossover = *full_crossover;
  const auto cfg = spec.effective_plant();
  fs::create_directories(c.out);
  const auto text = harness::read_file(models_path);
  if (text.find("\"siso\"") == std::string::npos) {
    const auto [model, full] = harness::mimo_model_from_json(text);
    const auto d = harness::tune_mimo(model, spec.mimo, spec.control_period, full);
    const auto path = fs::path(c.out) / "mimo-gains.json";
    harness::write_file(path, harness::mimo_gains_to_json(d));
    std::printf("qos_oriented rho=%.4f  power_oriented rho=%.4f -> %s\n", d.qos_oriented.closed_loop_radius,
                d.power_oriented.closed_loop_radius, path.c_str());
    return 0;
  }
  const auto models = harness::models_from_json(text);
  const auto d = harness::tune_siso(models, cfg.clusters.at(0).vf, spec.pi, spec.control_period);
  const auto path = fs::path(c.out) / "schedule.json";
  harness::write_file(path, harness::schedule_to_json(d));
  std::printf("full  kp=%.2f ki=%.2f offset=%.1f\n", d.full_gains.kp, d.full_gains.ki, d.full_gains.offset);
  for (const auto& r : d.schedule.regions)
    std::printf("region%d [%d-%d] kp=%.2f ki=%.2f offset=%.1f\n", r.region.id, r.region.lo_mhz, r.region.hi_mhz,
                r.gains.kp, r.gains.ki, r.gains.offset);
  std::printf("-> %s\n", path.c_str());
  return 0;
}

int cmd_run(const Common& c) {
  const auto spec = scenario_for(c);
  const auto run = harness::run_scenario(spec);
  const auto art = harness::write_artifact(run, c.out);
  print_run(run, art);
  return 0;
}

int cmd_report(const std::vector<std::string>& dirs, const std::string& out) {
  std::vector<fs::path> paths(dirs.begin(), dirs.end());
  const auto rep = harness::report(paths);
  std::cout << rep.table;
  if (!out.empty()) {
    fs::create_directories(out);
    harness::write_file(fs::path(out) / "plot.csv", rep.plot_csv);
    std::cout << "plot data -> " << (fs::path(out) / "plot.csv").string() << "\n";
  }
  return 0;
}

// Every builtin scenario under each controller it is meant to compare.
int cmd_suite(const Common& c) {
  const std::vector<std::pair<std::string, std::vector<harness::ControllerKind>>> plan{
      {"gsc-vs-linear", {harness::ControllerKind::PiFull, harness::ControllerKind::PiGsc}},
      {"spectr-three-phase",
       {harness::ControllerKind::MimoFixedQos, harness::ControllerKind::MimoFixedPower,
        harness::ControllerKind::MimoFullSystem, harness::ControllerKind::Spectr}},
  };
  for (const auto& [name, kinds] : plan) {
    std::vector<fs::path> dirs;
    for (auto k : kinds) {
      auto spec = harness::builtin_scenario(name);
      spec.controller = k;
      if (c.seed) spec.rng_seed = *c.seed;
      const auto run = harness::run_scenario(spec);
      dirs.push_back(harness::write_artifact(run, fs::path(c.out) / name).dir);
    }
    const auto rep = harness::report(dirs);
    std::cout << "== " << name << "\n" << rep.table;
    harness::write_file(fs::path(c.out) / name / "plot.csv", rep.plot_csv);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Simulated big.LITTLE power/QoS control harness"};
  app.require_subcommand(1);

  Common c;
  auto add_common = [&](CLI::App* s) {
    s->add_option("-s,--scenario", c.scenario, "scenario file or builtin name");
    s->add_option("--seed", c.seed, "override the scenario rng seed");
    s->add_option("-o,--out", c.out, "output directory");
  };

  auto* identify = app.add_subcommand("identify", "fit ARX models from staircase experiments");
  add_common(identify);
  int cluster = 0, na = 1, nb = 1;
  std::optional<int> region;
  bool mimo = false, full = false;
  identify->add_option("--cluster", cluster, "cluster index (0 = Big)");
  identify->add_option("--region", region, "single voltage region id");
  identify->add_option("--na", na);
  identify->add_option("--nb", nb);
  identify->add_flag("--mimo", mimo, "identify the 2x2 (frequency, cores) -> (qos, power) model");
  identify->add_flag("--full-system", full, "identify the 4x2 model including the Little cluster");

  auto* tune = app.add_subcommand("tune", "derive PI schedules or LQ gain pairs from model files");
  add_common(tune);
  std::string models;
  std::optional<double> crossover, full_crossover;
  tune->add_option("-m,--models", models, "model file from identify")->required();
  tune->add_option("--crossover", crossover, "region controller crossover");
  tune->add_option("--full-crossover", full_crossover, "full-range controller crossover");

  auto* run = app.add_subcommand("run", "run one scenario and write its artifact");
  add_common(run);
  run->add_option("-c,--controller", c.controller, "override the controller");

  auto* rep = app.add_subcommand("report", "compare artifact directories");
  std::vector<std::string> dirs;
  std::string rep_out;
  rep->add_option("runs", dirs, "artifact directories")->required();
  rep->add_option("-o,--out", rep_out, "directory for plot.csv");

  auto* suite = app.add_subcommand("suite", "run every builtin scenario and comparison");
  add_common(suite);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    if (rc != 0) std::fprintf(stderr, "error: usage\n");
    return rc == 0 ? 0 : 2;
  }

  try {
    if (*identify) return cmd_identify(c, cluster, region, na, nb, mimo, full);
    if (*tune) return cmd_tune(c, models, crossover, full_crossover);
    if (*run) return cmd_run(c);
    if (*rep) return cmd_report(dirs, rep_out);
    if (*suite) return cmd_suite(c);
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s: %s\n", std::string(category_name(e.category())).c_str(), e.what());
    return exit_code(e.category());
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: internal: %s\n", e.what());
    return 1;
  }
  return 0;
}
