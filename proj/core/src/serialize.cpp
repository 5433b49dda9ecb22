#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <sstream>

#include <json.hpp>

#include "sasctl/error.hpp"
#include "sasctl/harness.hpp"

namespace sasctl::harness {

using json = nlohmann::json;

namespace {

[[noreturn]] void bad(const std::string& path, const std::string& msg) {
  throw Error(ErrorCategory::Config, path + ": " + msg);
}

json parse(const std::string& text, const std::string& what) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    bad(what, std::string("invalid JSON: ") + e.what());
  }
}

template <class T>
T get(const json& j, const std::string& key, const std::string& path) {
  if (!j.is_object() || !j.contains(key)) bad(path + "." + key, "missing");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    bad(path + "." + key, std::string("wrong type (") + e.what() + ")");
  }
}

template <class T>
T get_or(const json& j, const std::string& key, T def, const std::string& path) {
  if (!j.is_object() || !j.contains(key)) return def;
  return get<T>(j, key, path);
}

json mat(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(row);
  }
  return rows;
}

Eigen::MatrixXd mat_from(const json& j, const std::string& path) {
  if (!j.is_array()) bad(path, "expected an array of rows");
  const auto rows = static_cast<Eigen::Index>(j.size());
  const auto cols = rows ? static_cast<Eigen::Index>(j[0].size()) : 0;
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const auto& row = j[static_cast<std::size_t>(r)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols) bad(path, "ragged matrix");
    for (Eigen::Index c = 0; c < cols; ++c) {
      if (!row[static_cast<std::size_t>(c)].is_number()) bad(path, "non-numeric entry");
      m(r, c) = row[static_cast<std::size_t>(c)].get<double>();
    }
  }
  return m;
}

json vec(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Eigen::VectorXd vec_from(const json& j, const std::string& path) {
  if (!j.is_array()) bad(path, "expected an array");
  std::vector<double> v;
  try {
    v = j.get<std::vector<double>>();
  } catch (const json::exception&) {
    bad(path, "expected numbers");
  }
  return Eigen::Map<Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

json plant_json(const plant::PlantConfig& cfg) {
  json j;
  for (const auto& c : cfg.clusters) {
    json vf = json::array();
    for (const auto& e : c.vf.entries()) vf.push_back({e.mhz, e.volts});
    j["clusters"].push_back({{"name", c.name},
                             {"vf_table", vf},
                             {"core_count", c.core_count},
                             {"power_coeff", c.power_coeff},
                             {"static_power", c.static_power},
                             {"utilization", c.utilization}});
  }
  json phases = json::array();
  for (const auto& p : cfg.workload.phases)
    phases.push_back({{"start_s", p.start_s}, {"background_load", p.background_load}, {"qos_scale", p.qos_scale}});
  j["workload"] = {{"qos_per_ghz", cfg.workload.qos_per_ghz},
                   {"parallel_fraction", cfg.workload.parallel_fraction},
                   {"qos_cluster", cfg.workload.qos_cluster},
                   {"phases", phases}};
  j["power_noise_std"] = cfg.power_noise_std;
  j["qos_noise_std"] = cfg.qos_noise_std;
  j["rng_seed"] = cfg.rng_seed;
  return j;
}

std::vector<plant::WorkloadPhase> phases_from(const json& j, const std::string& path) {
  if (!j.is_array()) bad(path, "expected an array");
  std::vector<plant::WorkloadPhase> out;
  for (std::size_t i = 0; i < j.size(); ++i) {
    const std::string p = path + "[" + std::to_string(i) + "]";
    out.push_back({get<double>(j[i], "start_s", p), get_or<double>(j[i], "background_load", 0.0, p),
                   get_or<double>(j[i], "qos_scale", 1.0, p)});
  }
  return out;
}

plant::PlantConfig plant_from(const json& j, const std::string& path) {
  plant::PlantConfig cfg;
  if (!j.contains("clusters") || !j["clusters"].is_array()) bad(path + ".clusters", "missing");
  for (std::size_t i = 0; i < j["clusters"].size(); ++i) {
    const auto& c = j["clusters"][i];
    const std::string p = path + ".clusters[" + std::to_string(i) + "]";
    std::vector<plant::VfPoint> pts;
    if (!c.contains("vf_table") || !c["vf_table"].is_array()) bad(p + ".vf_table", "missing");
    for (const auto& e : c["vf_table"]) {
      if (!e.is_array() || e.size() != 2) bad(p + ".vf_table", "entries must be [mhz, volts]");
      pts.push_back({e[0].get<int>(), e[1].get<double>()});
    }
    plant::ClusterConfig cc;
    cc.name = get_or<std::string>(c, "name", "cluster" + std::to_string(i), p);
    try {
      cc.vf = plant::VfTable(std::move(pts));
    } catch (const Error& e) {
      bad(p + ".vf_table", e.what());
    }
    cc.core_count = get_or<int>(c, "core_count", 4, p);
    cc.power_coeff = get<double>(c, "power_coeff", p);
    cc.static_power = get_or<double>(c, "static_power", 0.0, p);
    cc.utilization = get_or<double>(c, "utilization", 1.0, p);
    cfg.clusters.push_back(std::move(cc));
  }
  if (j.contains("workload")) {
    const auto& w = j["workload"];
    const std::string p = path + ".workload";
    cfg.workload.qos_per_ghz = get_or<double>(w, "qos_per_ghz", cfg.workload.qos_per_ghz, p);
    cfg.workload.parallel_fraction = get_or<double>(w, "parallel_fraction", cfg.workload.parallel_fraction, p);
    cfg.workload.qos_cluster = get_or<int>(w, "qos_cluster", 0, p);
    if (w.contains("phases")) cfg.workload.phases = phases_from(w["phases"], p + ".phases");
  }
  cfg.power_noise_std = get_or<double>(j, "power_noise_std", cfg.power_noise_std, path);
  cfg.qos_noise_std = get_or<double>(j, "qos_noise_std", cfg.qos_noise_std, path);
  cfg.rng_seed = get_or<std::uint64_t>(j, "rng_seed", cfg.rng_seed, path);
  try {
    cfg.validate();
  } catch (const Error& e) {
    bad(path, e.what());
  }
  return cfg;
}

json scenario_json(const ScenarioSpec& s, bool protocol_only) {
  json j;
  json refs = json::array();
  for (const auto& r : s.references)
    refs.push_back({{"t", r.t}, {"power_ref", r.power_ref}, {"qos_ref", r.qos_ref}, {"tdp", r.tdp}});
  json phases = json::array();
  for (const auto& p : s.phases) phases.push_back({{"name", p.name}, {"t0", p.t0}, {"t1", p.t1}});
  j["duration"] = s.duration;
  j["control_period"] = s.control_period;
  j["references"] = refs;
  j["phases"] = phases;
  if (s.workload) {
    json w = json::array();
    for (const auto& p : *s.workload)
      w.push_back({{"start_s", p.start_s}, {"background_load", p.background_load}, {"qos_scale", p.qos_scale}});
    j["workload"] = w;
  }
  if (protocol_only) return j;

  j["name"] = s.name;
  j["controller"] = std::string(controller_name(s.controller));
  j["plant"] = s.plant ? plant_json(*s.plant) : json(s.plant_ref);
  j["supervisor_period"] = s.supervisor_period;
  j["rng_seed"] = s.rng_seed;
  j["identify_with_noise"] = s.identify_with_noise;
  j["pi"] = {{"crossover", s.pi.crossover},
             {"full_crossover", s.pi.full_crossover},
             {"guardband", s.pi.guardband},
             {"steps_per_level", s.pi.steps_per_level},
             {"stimulus", s.pi.stimulus == StimulusKind::Sine ? "sine" : "staircase"},
             {"initial_mhz", s.pi.initial_mhz}};
  const auto& m = s.mimo;
  j["mimo"] = {{"q_qos", m.q_qos},
               {"q_power", m.q_power},
               {"r", m.r},
               {"r_full", m.r_full},
               {"effort_scale", m.effort_scale},
               {"state_weight", m.state_weight},
               {"leak", m.leak},
               {"qos_scale", m.qos_scale},
               {"power_scale", m.power_scale},
               {"ident_freqs", m.ident_freqs},
               {"ident_cores", m.ident_cores},
               {"ident_little_freqs", m.ident_little_freqs},
               {"ident_little_cores", m.ident_little_cores},
               {"ident_repeats", m.ident_repeats},
               {"full_ident_repeats", m.full_ident_repeats},
               {"ident_seed", m.ident_seed},
               {"full_ident_seed", m.full_ident_seed},
               {"initial_mhz", m.initial_mhz},
               {"initial_cores", m.initial_cores},
               {"little_mhz", m.little_mhz},
               {"little_cores", m.little_cores}};
  const auto& t = s.supervisor;
  j["supervisor"] = {{"qos_tolerance", t.qos_tolerance}, {"power_margin", t.power_margin},
                     {"persistence", t.persistence},     {"headroom", t.headroom},
                     {"over_tolerance", t.over_tolerance}, {"window", t.window}};
  j["metrics"] = {{"warmup_s", s.metrics.warmup_s},
                  {"band_pct", s.metrics.band_pct},
                  {"dwell", s.metrics.dwell},
                  {"smoothing", s.metrics.smoothing}};
  return j;
}

json metrics_json(const metrics::MetricsReport& r) {
  json j{{"t0", r.t0}, {"t1", r.t1}, {"samples", r.samples}, {"actuation_count", r.actuation_count}};
  for (const auto& o : r.outputs) {
    json st = json::array();
    for (const auto& s : o.settling)
      st.push_back({{"change_time", s.change_time}, {"time_s", s.time_s}, {"settled", s.settled},
                    {"overshoot_pct", s.overshoot_pct}});
    j["outputs"][o.name] = {{"mse", o.mse},
                            {"steady_state_error_pct", o.steady_state_error_pct},
                            {"mean_measured", o.mean_measured},
                            {"mean_reference", o.mean_reference},
                            {"over_target", o.over},
                            {"under_target", o.under},
                            {"avg_response_time", o.avg_response_time},
                            {"max_overshoot_pct", o.max_overshoot_pct},
                            {"settling", st}};
  }
  return j;
}

json arx_json(const IdentifiedModel& m) {
  json a = json::array(), b = json::array();
  for (const auto& x : m.model.a) a.push_back(mat(x));
  for (const auto& x : m.model.b) b.push_back(mat(x));
  json j{{"name", m.name},
         {"na", m.model.order.na},
         {"nb", m.model.order.nb},
         {"a", a},
         {"b", b},
         {"input_offset", vec(m.model.input_offset)},
         {"output_offset", vec(m.model.output_offset)},
         {"input_scale", vec(m.model.input_scale)},
         {"output_scale", vec(m.model.output_scale)},
         {"input_labels", m.model.input_labels},
         {"output_labels", m.model.output_labels},
         {"fit", {{"fit_percent", m.report.fit_percent},
                  {"residual_variance", m.report.residual_variance},
                  {"guardband", m.report.guardband},
                  {"samples", m.report.samples}}}};
  j["region"] = m.model.region ? json(*m.model.region) : json(nullptr);
  return j;
}

IdentifiedModel arx_from(const json& j, const std::string& path) {
  IdentifiedModel m;
  m.name = get<std::string>(j, "name", path);
  m.model.order.na = get<int>(j, "na", path);
  m.model.order.nb = get<int>(j, "nb", path);
  for (const auto& x : j.at("a")) m.model.a.push_back(mat_from(x, path + ".a"));
  for (const auto& x : j.at("b")) m.model.b.push_back(mat_from(x, path + ".b"));
  m.model.input_offset = vec_from(j.at("input_offset"), path + ".input_offset");
  m.model.output_offset = vec_from(j.at("output_offset"), path + ".output_offset");
  m.model.input_scale = vec_from(j.at("input_scale"), path + ".input_scale");
  m.model.output_scale = vec_from(j.at("output_scale"), path + ".output_scale");
  m.model.input_labels = get_or<std::vector<std::string>>(j, "input_labels", {}, path);
  m.model.output_labels = get_or<std::vector<std::string>>(j, "output_labels", {}, path);
  if (j.contains("region") && !j["region"].is_null()) m.model.region = j["region"].get<int>();
  if (static_cast<int>(m.model.a.size()) != m.model.order.na || static_cast<int>(m.model.b.size()) != m.model.order.nb)
    throw Error(ErrorCategory::Dimension, path + ": coefficient blocks do not match the order");
  if (j.contains("fit")) {
    const auto& f = j["fit"];
    m.report.fit_percent = get_or<double>(f, "fit_percent", 0.0, path + ".fit");
    m.report.residual_variance = get_or<double>(f, "residual_variance", 0.0, path + ".fit");
    m.report.guardband = get_or<double>(f, "guardband", 0.3, path + ".fit");
    m.report.samples = get_or<std::size_t>(f, "samples", 0, path + ".fit");
  }
  return m;
}

json gains_json(const pi::PiGains& g) { return {{"kp", g.kp}, {"ki", g.ki}, {"offset", g.offset}}; }

pi::PiGains gains_from(const json& j, const std::string& path) {
  return {get<double>(j, "kp", path), get<double>(j, "ki", path), get<double>(j, "offset", path)};
}

json mimo_gain_json(const mimo::MimoGains& g) {
  return {{"label", std::string(mimo::label_name(g.label))},
          {"K", mat(g.K)},
          {"dt", g.dt},
          {"leak", g.leak},
          {"dare_residual", g.dare_residual},
          {"closed_loop_radius", g.closed_loop_radius},
          {"iterations", g.iterations}};
}

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

}  // namespace

std::string scenario_to_json(const ScenarioSpec& spec) { return scenario_json(spec, false).dump(2); }

ScenarioSpec scenario_from_json(const std::string& text, const std::filesystem::path& base_dir) {
  const json j = parse(text, "scenario");
  const std::string P = "scenario";
  ScenarioSpec s;
  s.name = get_or<std::string>(j, "name", s.name, P);
  if (j.contains("controller")) s.controller = parse_controller(get<std::string>(j, "controller", P));
  if (j.contains("plant")) {
    if (j["plant"].is_string()) {
      s.plant_ref = j["plant"].get<std::string>();
      if (s.plant_ref != "default") {
        std::filesystem::path p = s.plant_ref;
        if (p.is_relative() && !base_dir.empty()) p = base_dir / p;
        s.plant = plant_from(parse(read_file(p), p.string()), P + ".plant");
      }
    } else {
      s.plant_ref = "inline";
      s.plant = plant_from(j["plant"], P + ".plant");
    }
  }
  s.control_period = get_or<double>(j, "control_period", s.control_period, P);
  s.supervisor_period = get_or<double>(j, "supervisor_period", s.supervisor_period, P);
  s.duration = get<double>(j, "duration", P);
  s.rng_seed = get_or<std::uint64_t>(j, "rng_seed", s.rng_seed, P);
  s.identify_with_noise = get_or<bool>(j, "identify_with_noise", false, P);
  if (!j.contains("references") || !j["references"].is_array()) bad(P + ".references", "missing");
  for (std::size_t i = 0; i < j["references"].size(); ++i) {
    const auto& r = j["references"][i];
    const std::string p = P + ".references[" + std::to_string(i) + "]";
    s.references.push_back({get<double>(r, "t", p), get_or<double>(r, "power_ref", 0.0, p),
                            get_or<double>(r, "qos_ref", 0.0, p), get_or<double>(r, "tdp", 5.0, p)});
  }
  if (j.contains("workload")) s.workload = phases_from(j["workload"], P + ".workload");
  if (j.contains("phases")) {
    for (std::size_t i = 0; i < j["phases"].size(); ++i) {
      const auto& r = j["phases"][i];
      const std::string p = P + ".phases[" + std::to_string(i) + "]";
      s.phases.push_back({get<std::string>(r, "name", p), get<double>(r, "t0", p), get<double>(r, "t1", p)});
    }
  }
  if (j.contains("pi")) {
    const auto& x = j["pi"];
    const std::string p = P + ".pi";
    s.pi.crossover = get_or(x, "crossover", s.pi.crossover, p);
    s.pi.full_crossover = get_or(x, "full_crossover", s.pi.full_crossover, p);
    s.pi.guardband = get_or(x, "guardband", s.pi.guardband, p);
    s.pi.steps_per_level = get_or(x, "steps_per_level", s.pi.steps_per_level, p);
    s.pi.initial_mhz = get_or(x, "initial_mhz", s.pi.initial_mhz, p);
    const auto stim = get_or<std::string>(x, "stimulus", "staircase", p);
    if (stim == "sine") s.pi.stimulus = StimulusKind::Sine;
    else if (stim != "staircase") bad(p + ".stimulus", "expected 'staircase' or 'sine'");
  }
  if (j.contains("mimo")) {
    const auto& x = j["mimo"];
    const std::string p = P + ".mimo";
    auto& m = s.mimo;
    m.q_qos = get_or(x, "q_qos", m.q_qos, p);
    m.q_power = get_or(x, "q_power", m.q_power, p);
    m.r = get_or(x, "r", m.r, p);
    m.r_full = get_or(x, "r_full", m.r_full, p);
    m.effort_scale = get_or(x, "effort_scale", m.effort_scale, p);
    m.state_weight = get_or(x, "state_weight", m.state_weight, p);
    m.leak = get_or(x, "leak", m.leak, p);
    m.qos_scale = get_or(x, "qos_scale", m.qos_scale, p);
    m.power_scale = get_or(x, "power_scale", m.power_scale, p);
    m.ident_freqs = get_or(x, "ident_freqs", m.ident_freqs, p);
    m.ident_cores = get_or(x, "ident_cores", m.ident_cores, p);
    m.ident_little_freqs = get_or(x, "ident_little_freqs", m.ident_little_freqs, p);
    m.ident_little_cores = get_or(x, "ident_little_cores", m.ident_little_cores, p);
    m.ident_repeats = get_or(x, "ident_repeats", m.ident_repeats, p);
    m.full_ident_repeats = get_or(x, "full_ident_repeats", m.full_ident_repeats, p);
    m.ident_seed = get_or(x, "ident_seed", m.ident_seed, p);
    m.full_ident_seed = get_or(x, "full_ident_seed", m.full_ident_seed, p);
    m.initial_mhz = get_or(x, "initial_mhz", m.initial_mhz, p);
    m.initial_cores = get_or(x, "initial_cores", m.initial_cores, p);
    m.little_mhz = get_or(x, "little_mhz", m.little_mhz, p);
    m.little_cores = get_or(x, "little_cores", m.little_cores, p);
  }
  if (j.contains("supervisor")) {
    const auto& x = j["supervisor"];
    const std::string p = P + ".supervisor";
    auto& t = s.supervisor;
    t.qos_tolerance = get_or(x, "qos_tolerance", t.qos_tolerance, p);
    t.power_margin = get_or(x, "power_margin", t.power_margin, p);
    t.persistence = get_or(x, "persistence", t.persistence, p);
    t.headroom = get_or(x, "headroom", t.headroom, p);
    t.over_tolerance = get_or(x, "over_tolerance", t.over_tolerance, p);
    t.window = get_or(x, "window", t.window, p);
  }
  if (j.contains("metrics")) {
    const auto& x = j["metrics"];
    const std::string p = P + ".metrics";
    s.metrics.warmup_s = get_or(x, "warmup_s", s.metrics.warmup_s, p);
    s.metrics.band_pct = get_or(x, "band_pct", s.metrics.band_pct, p);
    s.metrics.dwell = get_or(x, "dwell", s.metrics.dwell, p);
    s.metrics.smoothing = get_or(x, "smoothing", s.metrics.smoothing, p);
  }
  s.validate();
  return s;
}

ScenarioSpec load_scenario(const std::filesystem::path& path) {
  return scenario_from_json(read_file(path), path.parent_path());
}

std::uint64_t scenario_hash(const ScenarioSpec& spec) { return fnv1a(scenario_json(spec, false).dump()); }
std::uint64_t protocol_hash(const ScenarioSpec& spec) { return fnv1a(scenario_json(spec, true).dump()); }

std::string plant_config_to_json(const plant::PlantConfig& cfg) { return plant_json(cfg).dump(2); }
plant::PlantConfig plant_config_from_json(const std::string& text) { return plant_from(parse(text, "plant"), "plant"); }

std::string models_to_json(const std::vector<IdentifiedModel>& models) {
  json j{{"kind", "siso"}, {"models", json::array()}};
  for (const auto& m : models) j["models"].push_back(arx_json(m));
  return j.dump(2);
}

std::vector<IdentifiedModel> models_from_json(const std::string& text) {
  const json j = parse(text, "models");
  if (get_or<std::string>(j, "kind", "siso", "models") != "siso") bad("models.kind", "expected 'siso'");
  std::vector<IdentifiedModel> out;
  if (!j.contains("models")) bad("models.models", "missing");
  for (std::size_t i = 0; i < j["models"].size(); ++i)
    out.push_back(arx_from(j["models"][i], "models[" + std::to_string(i) + "]"));
  return out;
}

std::string mimo_model_to_json(const IdentifiedModel& model, bool full_system) {
  json j{{"kind", full_system ? "fullsystem" : "mimo"}, {"model", arx_json(model)}};
  return j.dump(2);
}

std::pair<IdentifiedModel, bool> mimo_model_from_json(const std::string& text) {
  const json j = parse(text, "models");
  const auto kind = get<std::string>(j, "kind", "models");
  if (kind != "mimo" && kind != "fullsystem") bad("models.kind", "expected 'mimo' or 'fullsystem'");
  if (!j.contains("model")) bad("models.model", "missing");
  return {arx_from(j["model"], "models.model"), kind == "fullsystem"};
}

std::string schedule_to_json(const PiDesign& d) {
  json regions = json::array();
  for (const auto& r : d.schedule.regions)
    regions.push_back({{"id", r.region.id}, {"lo_mhz", r.region.lo_mhz}, {"hi_mhz", r.region.hi_mhz},
                       {"gains", gains_json(r.gains)}});
  json j{{"kind", "pi_schedule"}, {"global", gains_json(d.schedule.global)}, {"full_range", gains_json(d.full_gains)},
         {"regions", regions}};
  return j.dump(2);
}

pi::GainSchedule schedule_from_json(const std::string& text, pi::PiGains* full_gains) {
  const json j = parse(text, "gains");
  pi::GainSchedule s;
  s.global = gains_from(j.at("global"), "gains.global");
  if (full_gains) *full_gains = j.contains("full_range") ? gains_from(j["full_range"], "gains.full_range") : s.global;
  for (std::size_t i = 0; i < j.at("regions").size(); ++i) {
    const auto& r = j["regions"][i];
    const std::string p = "gains.regions[" + std::to_string(i) + "]";
    s.regions.push_back({{get<int>(r, "id", p), get<int>(r, "lo_mhz", p), get<int>(r, "hi_mhz", p)},
                         gains_from(r.at("gains"), p + ".gains")});
  }
  return s;
}

std::string mimo_gains_to_json(const MimoDesign& d) {
  json j{{"kind", d.full_system ? "fullsystem_gains" : "mimo_gains"},
         {"A", mat(d.ss.A)},
         {"B", mat(d.ss.B)},
         {"C", mat(d.ss.C)},
         {"D", mat(d.ss.D)},
         {"input_offset", vec(d.ss.input_offset)},
         {"output_offset", vec(d.ss.output_offset)},
         {"input_scale", vec(d.ss.input_scale)},
         {"output_scale", vec(d.ss.output_scale)},
         {"gains", {mimo_gain_json(d.qos_oriented), mimo_gain_json(d.power_oriented)}}};
  return j.dump(2);
}

std::string trace_to_csv(const metrics::Trace& tr) {
  std::string out = "t";
  for (const auto& n : tr.output_names) out += ",ref_" + n;
  for (const auto& n : tr.output_names) out += ",meas_" + n;
  for (const auto& n : tr.input_names) out += ",act_" + n;
  out += ",gain_label,supervisor_state\n";
  char tbuf[32];
  for (const auto& s : tr.samples) {
    std::snprintf(tbuf, sizeof tbuf, "%.3f", s.t);
    out += tbuf;
    for (double v : s.references) out += "," + num(v);
    for (double v : s.measured) out += "," + num(v);
    for (double v : s.actuation) out += "," + num(v);
    out += "," + s.gain_label + "," + s.supervisor_state + "\n";
  }
  return out;
}

metrics::Trace trace_from_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorCategory::Io, "trace: missing header");
  std::vector<std::string> cols;
  {
    std::istringstream h(line);
    std::string c;
    while (std::getline(h, c, ',')) cols.push_back(c);
  }
  if (cols.size() < 3 || cols.front() != "t" || cols[cols.size() - 2] != "gain_label" || cols.back() != "supervisor_state")
    throw Error(ErrorCategory::Io, "trace: unexpected header");
  metrics::Trace tr;
  std::size_t nref = 0, nmeas = 0, nact = 0;
  for (std::size_t i = 1; i + 2 < cols.size(); ++i) {
    if (cols[i].rfind("ref_", 0) == 0) { tr.output_names.push_back(cols[i].substr(4)); ++nref; }
    else if (cols[i].rfind("meas_", 0) == 0) ++nmeas;
    else if (cols[i].rfind("act_", 0) == 0) { tr.input_names.push_back(cols[i].substr(4)); ++nact; }
    else throw Error(ErrorCategory::Io, "trace: unknown column '" + cols[i] + "'");
  }
  if (nref != nmeas) throw Error(ErrorCategory::Io, "trace: ref/meas column mismatch");
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::istringstream ls(line);
    std::string c;
    while (std::getline(ls, c, ',')) f.push_back(c);
    if (!line.empty() && line.back() == ',') f.emplace_back();
    if (f.size() != cols.size()) throw Error(ErrorCategory::Io, "trace: line " + std::to_string(lineno) + " has the wrong width");
    metrics::TraceSample s;
    auto d = [&](std::size_t i) {
      char* end = nullptr;
      const double v = std::strtod(f[i].c_str(), &end);
      if (end == f[i].c_str()) throw Error(ErrorCategory::Io, "trace: bad number on line " + std::to_string(lineno));
      return v;
    };
    s.t = d(0);
    for (std::size_t i = 0; i < nref; ++i) s.references.push_back(d(1 + i));
    for (std::size_t i = 0; i < nmeas; ++i) s.measured.push_back(d(1 + nref + i));
    for (std::size_t i = 0; i < nact; ++i) s.actuation.push_back(d(1 + nref + nmeas + i));
    s.gain_label = f[f.size() - 2];
    s.supervisor_state = f.back();
    tr.samples.push_back(std::move(s));
  }
  if (tr.samples.size() >= 2) tr.dt = tr.samples[1].t - tr.samples[0].t;
  return tr;
}

std::string report_to_json(const RunResult& run) {
  json j{{"scenario", run.spec.name},
         {"controller", std::string(controller_name(run.spec.controller))},
         {"rng_seed", run.spec.rng_seed},
         {"scenario_hash", hex64(run.scenario_hash)},
         {"protocol_hash", hex64(protocol_hash(run.spec))},
         {"controller_invocations", run.controller_invocations},
         {"supervisor_invocations", run.supervisor_invocations},
         {"whole", metrics_json(run.whole)}};
  json phases = json::array();
  for (const auto& [name, rep] : run.phases) {
    json p = metrics_json(rep);
    p["name"] = name;
    phases.push_back(p);
  }
  j["phases"] = phases;
  return j.dump(2);
}

std::string report_table(const std::vector<std::string>& names,
                         const std::vector<std::vector<std::pair<std::string, metrics::MetricsReport>>>& reports) {
  std::ostringstream os;
  char buf[160];
  int width = 14;
  for (const auto& n : names) width = std::max(width, static_cast<int>(std::min<std::size_t>(n.size(), 120)));
  std::snprintf(buf, sizeof buf, "%-34s", "metric");
  os << buf;
  for (const auto& n : names) {
    std::snprintf(buf, sizeof buf, " %*s", width, n.substr(0, 120).c_str());
    os << buf;
  }
  os << "\n";
  if (reports.empty()) return os.str();
  for (std::size_t ph = 0; ph < reports[0].size(); ++ph) {
    const auto& first = reports[0][ph].second;
    auto row = [&](const std::string& label, auto getter) {
      std::snprintf(buf, sizeof buf, "%-34s", label.c_str());
      os << buf;
      for (const auto& r : reports) {
        std::snprintf(buf, sizeof buf, " %*.6g", width, getter(r[ph].second));
        os << buf;
      }
      os << "\n";
    };
    const std::string pn = reports[0][ph].first;
    row(pn + " actuations", [](const metrics::MetricsReport& r) { return static_cast<double>(r.actuation_count); });
    for (std::size_t o = 0; o < first.outputs.size(); ++o) {
      const std::string on = pn + " " + first.outputs[o].name;
      row(on + " mean", [o](const metrics::MetricsReport& r) { return r.outputs[o].mean_measured; });
      row(on + " mse", [o](const metrics::MetricsReport& r) { return r.outputs[o].mse; });
      row(on + " sse%", [o](const metrics::MetricsReport& r) { return r.outputs[o].steady_state_error_pct; });
      row(on + " over", [o](const metrics::MetricsReport& r) { return r.outputs[o].over; });
      row(on + " under", [o](const metrics::MetricsReport& r) { return r.outputs[o].under; });
      row(on + " resp(s)", [o](const metrics::MetricsReport& r) { return r.outputs[o].avg_response_time; });
    }
  }
  return os.str();
}

}  // namespace sasctl::harness
