#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "sasctl/metrics.hpp"
#include "sasctl/mimo.hpp"
#include "sasctl/pi.hpp"
#include "sasctl/plant.hpp"
#include "sasctl/supervisor.hpp"
#include "sasctl/sysid.hpp"

namespace sasctl::harness {

enum class ControllerKind { PiFull, PiGsc, MimoFixedQos, MimoFixedPower, MimoFullSystem, Spectr };
std::string_view controller_name(ControllerKind k) noexcept;
ControllerKind parse_controller(std::string_view name);

struct ReferencePoint {
  double t = 0.0;
  double power_ref = 0.0;  // W
  double qos_ref = 0.0;    // QoS units
  double tdp = 0.0;        // W
};

struct PhaseWindow {
  std::string name;
  double t0 = 0.0;
  double t1 = 0.0;
};

enum class StimulusKind { Staircase, Sine };

struct PiSettings {
  double crossover = 0.32;       // region controllers
  double full_crossover = 0.32;  // full-range controller (and GSC global gains)
  double guardband = 0.3;
  int steps_per_level = 2;
  StimulusKind stimulus = StimulusKind::Staircase;
  int initial_mhz = 1100;
};

struct MimoSettings {
  std::vector<double> q_qos{30.0, 1.0};    // (qos, power) weights of the QoS-oriented set
  std::vector<double> q_power{1.0, 30.0};  // ... of the power-oriented set
  std::vector<double> r{1.0, 2.0};         // (frequency, cores)
  std::vector<double> r_full{1.0, 2.0, 1.0, 2.0};
  double effort_scale = 100.0;
  double state_weight = 1e-4;
  double leak = 0.98;
  double qos_scale = 60.0;  // output normalization
  double power_scale = 5.0;
  std::vector<int> ident_freqs;  // empty: 900-2000 MHz
  std::vector<int> ident_cores{2, 3, 4};
  std::vector<int> ident_little_freqs{200, 800, 1400};
  std::vector<int> ident_little_cores{1, 4};
  int ident_repeats = 3;
  int full_ident_repeats = 1;
  std::uint64_t ident_seed = 3;
  std::uint64_t full_ident_seed = 5;
  int initial_mhz = 1000;
  int initial_cores = 4;
  int little_mhz = 1400;  // Little setting while only the Big cluster is controlled
  int little_cores = 4;
};

struct ScenarioSpec {
  std::string name = "scenario";
  std::string plant_ref = "default";        // "default" or a config file path
  std::optional<plant::PlantConfig> plant;  // resolved config
  ControllerKind controller = ControllerKind::PiGsc;
  double control_period = 0.05;
  double supervisor_period = 0.10;
  double duration = 0.0;
  std::vector<ReferencePoint> references;
  std::optional<std::vector<plant::WorkloadPhase>> workload;
  std::uint64_t rng_seed = 1;
  bool identify_with_noise = false;
  PiSettings pi;
  MimoSettings mimo;
  supervisor::Thresholds supervisor;
  metrics::Options metrics;
  std::vector<PhaseWindow> phases;

  // Throws Error(Config) naming the offending field.
  void validate() const;
  const ReferencePoint& reference_at(double t) const;
  // Plant config with the workload override and seed applied.
  plant::PlantConfig effective_plant() const;
  // Same, without sensor noise unless identify_with_noise is set.
  plant::PlantConfig identification_plant() const;
};

// Builtin scenarios: "gsc-vs-linear" (pi_gsc) and "spectr-three-phase" (spectr).
std::vector<std::string> builtin_names();
ScenarioSpec builtin_scenario(const std::string& name);

// ---- designs ---------------------------------------------------------------

struct IdentifiedModel {
  sysid::ArxModel model;
  sysid::FitReport report;
  std::string name;  // "full" or "region<N>"
};

struct PiDesign {
  IdentifiedModel full;
  std::vector<IdentifiedModel> regions;
  pi::PiGains full_gains;
  pi::GainSchedule schedule;
};

struct MimoDesign {
  IdentifiedModel model;
  sysid::StateSpaceModel ss;
  mimo::MimoGains qos_oriented;
  mimo::MimoGains power_oriented;
  bool full_system = false;
};

// Identification of the Big cluster's frequency -> power models
// (full range plus one per voltage region).
std::vector<IdentifiedModel> identify_siso(const plant::PlantConfig& cfg, int cluster, std::optional<int> region_id,
                                           const PiSettings& s, double dt, sysid::ArxOrder order = {});
PiDesign tune_siso(const std::vector<IdentifiedModel>& models, const plant::VfTable& vf, const PiSettings& s,
                   double dt);
PiDesign design_pi(const plant::PlantConfig& cfg, const PiSettings& s, double dt);

IdentifiedModel identify_mimo(const plant::PlantConfig& cfg, const MimoSettings& s, double dt, bool full_system);
MimoDesign tune_mimo(const IdentifiedModel& model, const MimoSettings& s, double dt, bool full_system);
MimoDesign design_mimo(const plant::PlantConfig& cfg, const MimoSettings& s, double dt, bool full_system);

// ---- runs ------------------------------------------------------------------

struct RunResult {
  ScenarioSpec spec;
  metrics::Trace trace;
  metrics::MetricsReport whole;
  std::vector<std::pair<std::string, metrics::MetricsReport>> phases;
  std::uint64_t scenario_hash = 0;
  std::size_t controller_invocations = 0;
  std::size_t supervisor_invocations = 0;
  std::optional<PiDesign> pi_design;
  std::optional<MimoDesign> mimo_design;
};

// Runs the simulated-clock loop; metrics are filled in by evaluate() unless
// the trace is empty.
RunResult run_scenario(const ScenarioSpec& spec);
// Whole-run and per-phase reports. Throws Error(Metrics) on an empty trace.
void evaluate(RunResult& run);

// FNV-1a over the canonical scenario text (includes the seed).
std::uint64_t scenario_hash(const ScenarioSpec& spec);
// Same, over the reference schedule, duration and phases only.
std::uint64_t protocol_hash(const ScenarioSpec& spec);
std::uint64_t fnv1a(std::string_view bytes);
std::string hex64(std::uint64_t v);

// ---- serialization -------------------------------------------------------

std::string scenario_to_json(const ScenarioSpec& spec);
ScenarioSpec scenario_from_json(const std::string& text, const std::filesystem::path& base_dir = {});
ScenarioSpec load_scenario(const std::filesystem::path& path);

std::string plant_config_to_json(const plant::PlantConfig& cfg);
plant::PlantConfig plant_config_from_json(const std::string& text);

std::string models_to_json(const std::vector<IdentifiedModel>& models);
std::vector<IdentifiedModel> models_from_json(const std::string& text);
std::string mimo_model_to_json(const IdentifiedModel& model, bool full_system);
std::pair<IdentifiedModel, bool> mimo_model_from_json(const std::string& text);

std::string schedule_to_json(const PiDesign& design);
pi::GainSchedule schedule_from_json(const std::string& text, pi::PiGains* full_gains = nullptr);
std::string mimo_gains_to_json(const MimoDesign& design);

std::string trace_to_csv(const metrics::Trace& trace);
metrics::Trace trace_from_csv(const std::string& text);

std::string report_to_json(const RunResult& run);
std::string report_table(const std::vector<std::string>& names,
                         const std::vector<std::vector<std::pair<std::string, metrics::MetricsReport>>>& reports);

// ---- file workflows used by the CLI -----------------------------------------

std::string read_file(const std::filesystem::path& p);
void write_file(const std::filesystem::path& p, const std::string& text);

struct Artifact {
  std::filesystem::path dir;
  std::filesystem::path trace_csv;
  std::filesystem::path metrics_json;
  std::uint64_t hash = 0;
};

// Writes trace.csv, metrics.json and scenario.json under out_dir/<name>.
Artifact write_artifact(const RunResult& run, const std::filesystem::path& out_dir);

struct ReportOutput {
  std::string table;
  std::string plot_csv;
};

// Side-by-side per-phase comparison of artifact directories. Throws
// Error(IncompatibleRuns) when their protocols differ.
ReportOutput report(const std::vector<std::filesystem::path>& artifact_dirs);

}  // namespace sasctl::harness
