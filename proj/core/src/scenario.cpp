#include <cmath>
#include <cstdio>

#include "sasctl/error.hpp"
#include "sasctl/harness.hpp"

namespace sasctl::harness {

namespace {

[[noreturn]] void bad(const std::string& field, const std::string& msg) {
  throw Error(ErrorCategory::Config, "scenario." + field + ": " + msg);
}

}  // namespace

std::string_view controller_name(ControllerKind k) noexcept {
  switch (k) {
    case ControllerKind::PiFull: return "pi_full";
    case ControllerKind::PiGsc: return "pi_gsc";
    case ControllerKind::MimoFixedQos: return "mimo_fixed_qos";
    case ControllerKind::MimoFixedPower: return "mimo_fixed_power";
    case ControllerKind::MimoFullSystem: return "mimo_fullsystem";
    case ControllerKind::Spectr: return "spectr";
  }
  return "pi_gsc";
}

ControllerKind parse_controller(std::string_view name) {
  for (auto k : {ControllerKind::PiFull, ControllerKind::PiGsc, ControllerKind::MimoFixedQos,
                 ControllerKind::MimoFixedPower, ControllerKind::MimoFullSystem, ControllerKind::Spectr})
    if (controller_name(k) == name) return k;
  bad("controller", "unknown controller '" + std::string(name) + "'");
}

void ScenarioSpec::validate() const {
  if (!(control_period > 0.0)) bad("control_period", "must be > 0");
  if (!(supervisor_period > 0.0)) bad("supervisor_period", "must be > 0");
  const double ratio = supervisor_period / control_period;
  if (std::abs(ratio - std::round(ratio)) > 1e-9 || std::round(ratio) < 1.0)
    bad("supervisor_period", "must be an integer multiple of control_period");
  if (!(duration >= 0.0) || !std::isfinite(duration)) bad("duration", "must be >= 0");
  if (references.empty()) bad("references", "at least one entry required");
  if (references.front().t != 0.0) bad("references[0].t", "first entry must be at t=0");
  for (std::size_t i = 0; i < references.size(); ++i) {
    const auto& r = references[i];
    const std::string f = "references[" + std::to_string(i) + "]";
    if (i > 0 && !(r.t > references[i - 1].t)) bad(f + ".t", "times must be strictly increasing");
    if (r.t > duration && duration > 0.0) bad(f + ".t", "outside the scenario duration");
    if (r.power_ref < 0.0) bad(f + ".power_ref", "must be >= 0");
    if (r.qos_ref < 0.0) bad(f + ".qos_ref", "must be >= 0");
    if (!(r.tdp > 0.0)) bad(f + ".tdp", "must be > 0");
  }
  for (std::size_t i = 0; i < phases.size(); ++i) {
    const auto& p = phases[i];
    const std::string f = "phases[" + std::to_string(i) + "]";
    if (!(p.t1 > p.t0)) bad(f, "t1 must exceed t0");
    if (p.t0 < 0.0 || p.t1 > duration + 1e-9) bad(f, "outside the scenario duration");
  }
  if (!(pi.crossover > 0.0 && pi.crossover <= 1.0)) bad("pi.crossover", "must be in (0, 1]");
  if (!(pi.full_crossover > 0.0 && pi.full_crossover <= 1.0)) bad("pi.full_crossover", "must be in (0, 1]");
  if (pi.guardband < 0.0) bad("pi.guardband", "must be >= 0");
  if (pi.steps_per_level < 1) bad("pi.steps_per_level", "must be >= 1");
  if (mimo.q_qos.size() != 2 || mimo.q_power.size() != 2) bad("mimo.q", "need (qos, power) weights");
  if (mimo.r.size() != 2) bad("mimo.r", "need (frequency, cores) weights");
  if (mimo.r_full.size() != 4) bad("mimo.r_full", "need four input weights");
  if (!(mimo.qos_scale > 0.0) || !(mimo.power_scale > 0.0)) bad("mimo", "output scales must be > 0");
  if (mimo.ident_repeats < 1 || mimo.full_ident_repeats < 1) bad("mimo.ident_repeats", "must be >= 1");
  if (supervisor.persistence < 1) bad("supervisor.persistence", "must be >= 1");
  if (supervisor.window < 1) bad("supervisor.window", "must be >= 1");
  if (metrics.dwell < 1) bad("metrics.dwell", "must be >= 1");
  if (metrics.smoothing < 1) bad("metrics.smoothing", "must be >= 1");
  if (workload) {
    auto cfg = effective_plant();
    try {
      cfg.validate();
    } catch (const Error& e) {
      bad("workload", e.what());
    }
  }
}

const ReferencePoint& ScenarioSpec::reference_at(double t) const {
  const ReferencePoint* cur = &references.front();
  for (const auto& r : references) {
    if (r.t <= t + 1e-9) cur = &r;
    else break;
  }
  return *cur;
}

plant::PlantConfig ScenarioSpec::effective_plant() const {
  plant::PlantConfig cfg = plant ? *plant : plant::default_plant_config();
  if (workload) cfg.workload.phases = *workload;
  cfg.rng_seed = rng_seed;
  return cfg;
}

plant::PlantConfig ScenarioSpec::identification_plant() const {
  plant::PlantConfig cfg = effective_plant();
  if (!identify_with_noise) cfg.power_noise_std = cfg.qos_noise_std = 0.0;
  return cfg;
}

std::vector<std::string> builtin_names() { return {"gsc-vs-linear", "spectr-three-phase"}; }

ScenarioSpec builtin_scenario(const std::string& name) {
  ScenarioSpec s;
  s.name = name;
  if (name == "gsc-vs-linear") {
    s.controller = ControllerKind::PiGsc;
    s.duration = 65.0;
    // 1.1 W during the warm-up so that every reference sees a change.
    s.references = {{0.0, 1.1, 0.0, 5.0}, {5.0, 3.5, 0.0, 5.0}, {25.0, 0.5, 0.0, 5.0}, {45.0, 1.5, 0.0, 5.0}};
    s.phases = {{"ref1", 5.0, 25.0}, {"ref2", 25.0, 45.0}, {"ref3", 45.0, 65.0}};
    s.metrics.warmup_s = 5.0;
    return s;
  }
  if (name == "spectr-three-phase") {
    s.controller = ControllerKind::Spectr;
    s.duration = 15.0;
    s.references = {{0.0, 5.0, 60.0, 5.0}, {5.0, 2.0, 60.0, 2.0}, {10.0, 5.0, 60.0, 5.0}};
    s.workload = std::vector<plant::WorkloadPhase>{{0.0, 0.0, 1.0}, {10.0, 0.4, 1.0}};
    s.phases = {{"safe", 0.0, 5.0}, {"emergency", 5.0, 10.0}, {"disturbance", 10.0, 15.0}};
    s.metrics.warmup_s = 0.0;
    return s;
  }
  throw Error(ErrorCategory::Config, "unknown builtin scenario '" + name + "'");
}

std::uint64_t fnv1a(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

}  // namespace sasctl::harness
