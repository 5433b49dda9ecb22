#include <algorithm>
#include <cmath>

#include "sasctl/error.hpp"
#include "sasctl/harness.hpp"

namespace sasctl::harness {

namespace {

plant::Actuation full_cores_base(const plant::PlantConfig& cfg) {
  plant::Actuation a;
  for (const auto& c : cfg.clusters) a.push_back({c.vf.max_mhz(), c.core_count});
  return a;
}

int quantize_cores(double u, int core_count) {
  if (std::isnan(u)) return 1;
  return std::clamp(static_cast<int>(std::floor(u + 0.5)), 1, core_count);
}

std::vector<int> mimo_freqs(const plant::VfTable& vf, const MimoSettings& s) {
  std::vector<int> out;
  if (s.ident_freqs.empty()) {
    for (int f : vf.frequencies())
      if (f >= 900) out.push_back(f);
  } else {
    for (int f : s.ident_freqs) {
      if (!vf.contains(f)) throw Error(ErrorCategory::Config, "mimo.ident_freqs: " + std::to_string(f) + " MHz not in table");
      out.push_back(f);
    }
  }
  return out;
}

}  // namespace

std::vector<IdentifiedModel> identify_siso(const plant::PlantConfig& cfg, int cluster, std::optional<int> region_id,
                                           const PiSettings& s, double dt, sysid::ArxOrder order) {
  cfg.validate();
  if (cluster < 0 || cluster >= static_cast<int>(cfg.clusters.size()))
    throw Error(ErrorCategory::Config, "identify: cluster index out of range");
  const auto& vf = cfg.clusters[static_cast<std::size_t>(cluster)].vf;
  const auto regions = plant::regions_by_voltage(vf);

  sysid::ExperimentSpec ex;
  ex.inputs = {{cluster, sysid::Channel::Knob::Frequency}};
  ex.outputs = {sysid::OutputKind::ClusterPower};
  ex.output_cluster = cluster;
  ex.base = full_cores_base(cfg);
  ex.dt = dt;

  auto fit = [&](const std::optional<plant::OperatingRegion>& r, std::string name) {
    const auto levels = s.stimulus == StimulusKind::Staircase
                            ? sysid::staircase_stimulus(vf, r, s.steps_per_level)
                            : sysid::sine_stimulus(vf, r,
                                                   2 * s.steps_per_level *
                                                       static_cast<int>(r ? plant::region_frequencies(vf, *r).size()
                                                                          : vf.size()),
                                                   2);
    std::vector<sysid::MimoPoint> stim;
    for (int f : levels) stim.push_back({f});
    const auto w = sysid::run_experiment(cfg, ex, stim);
    sysid::FitOptions fo;
    fo.order = order;
    fo.guardband = s.guardband;
    if (r) fo.region = r->id;
    auto [m, rep] = sysid::fit_arx(w, fo);
    return IdentifiedModel{std::move(m), rep, std::move(name)};
  };

  std::vector<IdentifiedModel> out;
  if (region_id) {
    const auto r = plant::find_region(regions, *region_id);
    if (!r) throw Error(ErrorCategory::Config, "identify: region id " + std::to_string(*region_id) + " does not exist");
    out.push_back(fit(r, "region" + std::to_string(r->id)));
    return out;
  }
  out.push_back(fit(std::nullopt, "full"));
  if (regions.size() > 1)
    for (const auto& r : regions) out.push_back(fit(r, "region" + std::to_string(r.id)));
  return out;
}

PiDesign tune_siso(const std::vector<IdentifiedModel>& models, const plant::VfTable& vf, const PiSettings& s,
                   double dt) {
  PiDesign d;
  bool have_full = false;
  for (const auto& m : models) {
    if (m.name == "full") {
      d.full = m;
      have_full = true;
    } else {
      d.regions.push_back(m);
    }
  }
  if (!have_full) throw Error(ErrorCategory::Untunable, "tune: no full-range model");
  d.full_gains = pi::tune_pi(d.full.model, s.full_crossover, dt, d.full.report.guardband);
  d.schedule.global = d.full_gains;
  const auto regions = plant::regions_by_voltage(vf);
  if (d.regions.empty()) {
    // Single-region table: the full-range model is the region model.
    d.schedule.regions.push_back({regions.at(0), pi::tune_pi(d.full.model, s.crossover, dt, d.full.report.guardband)});
  }
  for (const auto& m : d.regions) {
    if (!m.model.region) throw Error(ErrorCategory::Untunable, "tune: model '" + m.name + "' has no region id");
    const auto r = plant::find_region(regions, *m.model.region);
    if (!r) throw Error(ErrorCategory::ScheduleCoverage, "tune: region " + std::to_string(*m.model.region) + " unknown");
    d.schedule.regions.push_back({*r, pi::tune_pi(m.model, s.crossover, dt, m.report.guardband)});
  }
  d.schedule.validate(vf);
  return d;
}

PiDesign design_pi(const plant::PlantConfig& cfg, const PiSettings& s, double dt) {
  return tune_siso(identify_siso(cfg, 0, std::nullopt, s, dt), cfg.clusters.at(0).vf, s, dt);
}

IdentifiedModel identify_mimo(const plant::PlantConfig& cfg, const MimoSettings& s, double dt, bool full_system) {
  cfg.validate();
  if (full_system && cfg.clusters.size() < 2)
    throw Error(ErrorCategory::Config, "identify: the full-system model needs two clusters");
  const auto& big = cfg.clusters[0];
  sysid::ExperimentSpec ex;
  ex.inputs = {{0, sysid::Channel::Knob::Frequency}, {0, sysid::Channel::Knob::Cores}};
  ex.outputs = {sysid::OutputKind::Qos, sysid::OutputKind::TotalPower};
  ex.base = full_cores_base(cfg);
  if (cfg.clusters.size() > 1) ex.base[1] = {s.little_mhz, s.little_cores};
  ex.dt = dt;

  std::vector<std::vector<int>> sets{mimo_freqs(big.vf, s), s.ident_cores};
  Eigen::VectorXd us(full_system ? 4 : 2);
  us(0) = big.vf.max_mhz() - big.vf.min_mhz();
  us(1) = std::max(1, big.core_count - 1);
  int repeats = s.ident_repeats;
  std::uint64_t seed = s.ident_seed;
  if (full_system) {
    const auto& little = cfg.clusters[1];
    ex.inputs.push_back({1, sysid::Channel::Knob::Frequency});
    ex.inputs.push_back({1, sysid::Channel::Knob::Cores});
    sets.push_back(s.ident_little_freqs);
    sets.push_back(s.ident_little_cores);
    us(2) = little.vf.max_mhz() - little.vf.min_mhz();
    us(3) = std::max(1, little.core_count - 1);
    repeats = s.full_ident_repeats;
    seed = s.full_ident_seed;
  }
  const auto stim = sysid::shuffled_grid(sets, repeats, seed);
  const auto w = sysid::run_experiment(cfg, ex, stim);
  sysid::FitOptions fo;
  fo.input_scale = us;
  fo.output_scale = Eigen::Vector2d(s.qos_scale, s.power_scale);
  auto [m, rep] = sysid::fit_arx(w, fo);
  return IdentifiedModel{std::move(m), rep, full_system ? "fullsystem" : "mimo"};
}

MimoDesign tune_mimo(const IdentifiedModel& model, const MimoSettings& s, double dt, bool full_system) {
  MimoDesign d;
  d.model = model;
  d.full_system = full_system;
  d.ss = sysid::arx_to_statespace(model.model);
  const auto& r = full_system ? s.r_full : s.r;
  auto weights = [&](const std::vector<double>& q) {
    mimo::WeightSpec w;
    w.q = Eigen::Map<const Eigen::VectorXd>(q.data(), static_cast<Eigen::Index>(q.size()));
    w.r = Eigen::Map<const Eigen::VectorXd>(r.data(), static_cast<Eigen::Index>(r.size()));
    w.state_weight = s.state_weight;
    w.effort_scale = s.effort_scale;
    w.leak = s.leak;
    return w;
  };
  d.qos_oriented = mimo::synthesize_lqr(d.ss, weights(s.q_qos), dt, mimo::GainLabel::QosOriented);
  d.power_oriented = mimo::synthesize_lqr(d.ss, weights(s.q_power), dt, mimo::GainLabel::PowerOriented);
  return d;
}

MimoDesign design_mimo(const plant::PlantConfig& cfg, const MimoSettings& s, double dt, bool full_system) {
  return tune_mimo(identify_mimo(cfg, s, dt, full_system), s, dt, full_system);
}

RunResult run_scenario(const ScenarioSpec& spec) {
  spec.validate();
  const plant::PlantConfig cfg = spec.effective_plant();
  cfg.validate();
  const plant::PlantConfig ident_cfg = spec.identification_plant();

  const double dt = spec.control_period;
  const auto steps = static_cast<std::size_t>(std::llround(spec.duration / dt));
  const auto sup_every = static_cast<std::size_t>(std::llround(spec.supervisor_period / dt));
  const auto& big = cfg.clusters.at(0);
  const bool is_pi = spec.controller == ControllerKind::PiFull || spec.controller == ControllerKind::PiGsc;
  const bool fs = spec.controller == ControllerKind::MimoFullSystem;
  const bool spectr = spec.controller == ControllerKind::Spectr;
  if (!is_pi && cfg.clusters.size() < 2) throw Error(ErrorCategory::Config, "scenario.plant: MIMO controllers need two clusters");

  RunResult res;
  res.spec = spec;
  res.scenario_hash = scenario_hash(spec);
  auto& tr = res.trace;
  tr.dt = dt;

  plant::Actuation act;
  for (const auto& c : cfg.clusters) act.push_back({c.vf.max_mhz(), c.core_count});
  if (cfg.clusters.size() > 1) act[1] = {spec.mimo.little_mhz, spec.mimo.little_cores};

  std::optional<pi::PiController> pic;
  mimo::MimoState ms;
  const mimo::MimoGains* active = nullptr;
  if (is_pi) {
    res.pi_design = design_pi(ident_cfg, spec.pi, dt);
    const pi::PiLimits lim{static_cast<double>(big.vf.min_mhz()), static_cast<double>(big.vf.max_mhz())};
    if (spec.controller == ControllerKind::PiGsc) pic.emplace(res.pi_design->schedule, lim);
    else pic.emplace(res.pi_design->full_gains, lim);
    act[0].mhz = spec.pi.initial_mhz;
    tr.output_names = {"power"};
    tr.input_names = {"big_mhz"};
  } else {
    res.mimo_design = design_mimo(ident_cfg, spec.mimo, dt, fs);
    ms = mimo::initial_state(res.mimo_design->ss);
    active = spec.controller == ControllerKind::MimoFixedQos || spectr ? &res.mimo_design->qos_oriented
                                                                       : &res.mimo_design->power_oriented;
    act[0] = {spec.mimo.initial_mhz, spec.mimo.initial_cores};
    tr.output_names = {"qos", "power"};
    tr.input_names = {"big_mhz", "big_cores"};
    if (fs) {
      tr.input_names.push_back("little_mhz");
      tr.input_names.push_back("little_cores");
    }
  }

  plant::PlantState st = plant::make_state(cfg, act);
  st.sim_time = -dt;
  auto sr = plant::plant_step(st, cfg, act, dt);
  st = sr.state;
  plant::SensorReading reading = sr.reading;

  const double little_floor =
      cfg.clusters.size() > 1 ? plant::model_power(cfg.clusters[1], spec.mimo.little_mhz, spec.mimo.little_cores) : 0.0;
  const auto& r0 = spec.reference_at(0.0);
  supervisor::HighLevelModel hl;
  supervisor::SupervisorState sst;
  supervisor::Directive directive;
  std::vector<supervisor::Measurement> batch;
  if (spectr) {
    hl = supervisor::make_model(r0.tdp, r0.qos_ref, little_floor,
                                plant::model_power(big, big.vf.min_mhz(), 1) + little_floor, spec.supervisor);
    directive.power_ref = r0.tdp;
    directive.qos_ref = r0.qos_ref;
  }

  tr.samples.reserve(steps);
  for (std::size_t k = 0; k < steps; ++k) {
    const double t = static_cast<double>(k) * dt;
    const auto& rp = spec.reference_at(t);
    metrics::TraceSample row;
    row.t = t;
    row.supervisor_state = "-";

    if (is_pi) {
      const double y = reading.power[0];
      const double u = pic->step(rp.power_ref, y, act[0].mhz, dt);
      act[0].mhz = pi::quantize_actuation(u, big.vf);
      row.references = {rp.power_ref};
      row.measured = {y};
      row.actuation = {static_cast<double>(act[0].mhz)};
      row.gain_label = pic->label();
    } else {
      const double qos = reading.qos, power = reading.total_power();
      Eigen::Vector2d refs(rp.qos_ref, rp.power_ref);
      if (spectr) {
        batch.push_back({t, qos, power});
        if (k % sup_every == 0) {
          supervisor::Events ev;
          if (rp.tdp != hl.tdp) ev.tdp = rp.tdp;
          if (rp.qos_ref != hl.qos_ref) ev.qos_ref = rp.qos_ref;
          hl = supervisor::update_model(hl, batch, spec.supervisor);
          batch.clear();
          auto out = supervisor::supervisor_step(hl, sst, ev, spec.supervisor);
          hl = out.model;
          sst = out.state;
          directive = out.directive;
          ++res.supervisor_invocations;
          const auto* next = directive.gains == mimo::GainLabel::QosOriented ? &res.mimo_design->qos_oriented
                                                                             : &res.mimo_design->power_oriented;
          if (next != active) {
            ms = mimo::swap_gains(ms, *active, *next);
            active = next;
          }
        }
        refs = Eigen::Vector2d(directive.qos_ref, directive.power_ref);
        row.supervisor_state = std::string(supervisor::state_name(sst.state));
      }
      auto out = mimo::mimo_step(*active, res.mimo_design->ss, ms, refs, Eigen::Vector2d(qos, power), dt);
      ms = std::move(out.state);
      act[0].mhz = pi::quantize_actuation(out.inputs(0), big.vf);
      act[0].active_cores = quantize_cores(out.inputs(1), big.core_count);
      if (fs) {
        act[1].mhz = pi::quantize_actuation(out.inputs(2), cfg.clusters[1].vf);
        act[1].active_cores = quantize_cores(out.inputs(3), cfg.clusters[1].core_count);
      }
      row.references = {refs(0), refs(1)};
      row.measured = {qos, power};
      row.actuation = {static_cast<double>(act[0].mhz), static_cast<double>(act[0].active_cores)};
      if (fs) {
        row.actuation.push_back(act[1].mhz);
        row.actuation.push_back(act[1].active_cores);
      }
      row.gain_label = std::string(mimo::label_name(active->label));
    }
    ++res.controller_invocations;
    tr.samples.push_back(std::move(row));

    sr = plant::plant_step(st, cfg, act, dt);
    st = sr.state;
    reading = sr.reading;
  }

  if (!tr.samples.empty()) evaluate(res);
  return res;
}

void evaluate(RunResult& run) {
  if (run.trace.samples.empty()) throw Error(ErrorCategory::Metrics, "metrics: empty trace");
  run.whole = metrics::compute_report(run.trace, run.spec.metrics);
  run.phases.clear();
  for (const auto& p : run.spec.phases)
    run.phases.emplace_back(p.name, metrics::compute_report(run.trace, run.spec.metrics, p.t0, p.t1));
}

}  // namespace sasctl::harness
