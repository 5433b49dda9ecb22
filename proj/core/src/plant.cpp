#include "sasctl/plant.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "sasctl/error.hpp"

namespace sasctl::plant {

namespace {

[[noreturn]] void invalid(const std::string& msg) {
  throw Error(ErrorCategory::InvalidActuation, msg);
}

[[noreturn]] void bad_config(const std::string& msg) { throw Error(ErrorCategory::Config, msg); }

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

double to_unit(std::uint64_t bits) {
  // 53 random mantissa bits, strictly inside (0, 1).
  return (static_cast<double>(bits >> 11) + 0.5) * 0x1.0p-53;
}

}  // namespace

VfTable::VfTable(std::vector<VfPoint> entries) : entries_(std::move(entries)) {
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    if (entries_[i].volts <= 0.0) bad_config("vf table: voltage must be positive");
    if (i == 0) continue;
    if (entries_[i].mhz <= entries_[i - 1].mhz)
      bad_config("vf table: frequencies must be strictly increasing");
    if (entries_[i].volts < entries_[i - 1].volts)
      bad_config("vf table: voltage must be non-decreasing in frequency");
  }
}

bool VfTable::contains(int mhz) const noexcept {
  return std::any_of(entries_.begin(), entries_.end(), [&](const VfPoint& p) { return p.mhz == mhz; });
}

double VfTable::voltage(int mhz) const {
  auto it = std::lower_bound(entries_.begin(), entries_.end(), mhz,
                             [](const VfPoint& p, int f) { return p.mhz < f; });
  if (it == entries_.end() || it->mhz != mhz) {
    std::ostringstream os;
    os << "frequency " << mhz << " MHz is not in the VF table";
    invalid(os.str());
  }
  return it->volts;
}

int VfTable::min_mhz() const {
  if (entries_.empty()) bad_config("vf table is empty");
  return entries_.front().mhz;
}

int VfTable::max_mhz() const {
  if (entries_.empty()) bad_config("vf table is empty");
  return entries_.back().mhz;
}

std::vector<int> VfTable::frequencies() const {
  std::vector<int> out;
  out.reserve(entries_.size());
  for (const auto& e : entries_) out.push_back(e.mhz);
  return out;
}

VfTable big_vf_table() {
  std::vector<VfPoint> e;
  for (int f = 200; f <= 2000; f += 100) {
    double v = f <= 800 ? 0.90 : f <= 1200 ? 1.00 : f <= 1500 ? 1.10 : 1.25;
    e.push_back({f, v});
  }
  return VfTable(std::move(e));
}

VfTable little_vf_table() {
  std::vector<VfPoint> e;
  for (int f = 200; f <= 1400; f += 100) e.push_back({f, 1.00});
  return VfTable(std::move(e));
}

std::vector<OperatingRegion> regions_by_voltage(const VfTable& table) {
  std::vector<OperatingRegion> groups;
  for (const auto& e : table.entries()) {
    if (groups.empty() || table.voltage(groups.back().hi_mhz) != e.volts)
      groups.push_back({0, e.mhz, e.mhz});
    else
      groups.back().hi_mhz = e.mhz;
  }
  // Highest voltage first.
  std::reverse(groups.begin(), groups.end());
  for (std::size_t i = 0; i < groups.size(); ++i) groups[i].id = static_cast<int>(i) + 1;
  return groups;
}

std::optional<OperatingRegion> find_region(const std::vector<OperatingRegion>& regions, int id) {
  for (const auto& r : regions)
    if (r.id == id) return r;
  return std::nullopt;
}

std::vector<int> region_frequencies(const VfTable& table, const OperatingRegion& region) {
  std::vector<int> out;
  for (const auto& e : table.entries())
    if (region.contains(e.mhz)) out.push_back(e.mhz);
  return out;
}

const WorkloadPhase& WorkloadModel::phase_at(double t) const {
  if (phases.empty()) bad_config("workload: empty phase schedule");
  const WorkloadPhase* cur = &phases.front();
  for (const auto& p : phases) {
    if (p.start_s <= t + 1e-12) cur = &p;
    else break;
  }
  return *cur;
}

void PlantConfig::validate() const {
  if (clusters.empty()) bad_config("plant: at least one cluster required");
  for (const auto& c : clusters) {
    if (c.vf.empty()) bad_config("plant: cluster '" + c.name + "' has an empty vf table");
    if (c.core_count < 1) bad_config("plant: core_count must be >= 1");
    if (!(c.power_coeff > 0.0)) bad_config("plant: power_coeff must be > 0");
    if (c.static_power < 0.0) bad_config("plant: static_power must be >= 0");
    if (c.utilization < 0.0 || c.utilization > 1.0) bad_config("plant: utilization must be in [0,1]");
  }
  if (power_noise_std < 0.0 || qos_noise_std < 0.0) bad_config("plant: noise_std must be >= 0");
  const auto& w = workload;
  if (!(w.qos_per_ghz > 0.0)) bad_config("workload: qos_per_ghz must be > 0");
  if (w.parallel_fraction < 0.0 || w.parallel_fraction > 1.0)
    bad_config("workload: parallel_fraction must be in [0,1]");
  if (w.qos_cluster < 0 || w.qos_cluster >= static_cast<int>(clusters.size()))
    bad_config("workload: qos_cluster out of range");
  if (w.phases.empty() || w.phases.front().start_s != 0.0)
    bad_config("workload: phase schedule must start at t=0");
  for (std::size_t i = 0; i < w.phases.size(); ++i) {
    const auto& p = w.phases[i];
    if (p.background_load < 0.0 || p.background_load > 1.0)
      bad_config("workload: background_load must be in [0,1]");
    if (i > 0 && p.start_s <= w.phases[i - 1].start_s)
      bad_config("workload: phase times must be strictly increasing");
  }
}

double SensorReading::total_power() const {
  double s = 0.0;
  for (double p : power) s += p;
  return s;
}

double amdahl_speedup(int cores, double parallel_fraction) {
  return 1.0 / ((1.0 - parallel_fraction) + parallel_fraction / static_cast<double>(cores));
}

void check_state(const PlantState& state, const PlantConfig& config) {
  if (state.clusters.size() != config.clusters.size())
    invalid("state has " + std::to_string(state.clusters.size()) + " clusters, config has " +
            std::to_string(config.clusters.size()));
  for (std::size_t i = 0; i < state.clusters.size(); ++i) {
    const auto& s = state.clusters[i];
    const auto& c = config.clusters[i];
    if (!c.vf.contains(s.mhz))
      invalid("cluster '" + c.name + "': " + std::to_string(s.mhz) + " MHz is not a VF table level");
    if (s.active_cores < 1 || s.active_cores > c.core_count)
      invalid("cluster '" + c.name + "': active_cores " + std::to_string(s.active_cores) +
              " outside [1, " + std::to_string(c.core_count) + "]");
  }
}

double model_power(const ClusterConfig& c, int mhz, int cores) {
  const double v = c.vf.voltage(mhz);
  const double ghz = mhz / 1000.0;
  return cores * (c.power_coeff * v * v * ghz * c.utilization + c.static_power);
}

std::vector<double> plant_power(const PlantState& state, const PlantConfig& config) {
  check_state(state, config);
  std::vector<double> out(config.clusters.size());
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = model_power(config.clusters[i], state.clusters[i].mhz, state.clusters[i].active_cores);
  return out;
}

double plant_qos(const PlantState& state, const PlantConfig& config, double t) {
  check_state(state, config);
  const auto& w = config.workload;
  const auto& phase = w.phase_at(t);
  const auto& s = state.clusters[static_cast<std::size_t>(w.qos_cluster)];
  return phase.qos_scale * w.qos_per_ghz * (s.mhz / 1000.0) *
         amdahl_speedup(s.active_cores, w.parallel_fraction) * (1.0 - phase.background_load);
}

double standard_normal(std::uint64_t seed, std::uint64_t counter, std::uint64_t channel) {
  const std::uint64_t base = splitmix64(seed ^ splitmix64(counter * 0x100000001B3ULL + channel));
  const double u1 = to_unit(splitmix64(base));
  const double u2 = to_unit(splitmix64(base ^ 0xD1B54A32D192ED03ULL));
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

PlantState make_state(const PlantConfig& config, const Actuation& actuation) {
  PlantState s;
  s.clusters = actuation;
  check_state(s, config);
  return s;
}

StepResult plant_step(const PlantState& state, const PlantConfig& config, const Actuation& actuation,
                      double dt) {
  if (!(dt > 0.0)) bad_config("plant_step: dt must be > 0");
  StepResult r;
  r.state.clusters = actuation;
  r.state.sim_time = state.sim_time + dt;
  r.state.step_index = state.step_index + 1;
  check_state(r.state, config);

  r.reading.power = plant_power(r.state, config);
  r.reading.qos = plant_qos(r.state, config, r.state.sim_time);
  const std::uint64_t k = r.state.step_index;
  if (config.power_noise_std > 0.0)
    for (std::size_t i = 0; i < r.reading.power.size(); ++i)
      r.reading.power[i] += config.power_noise_std * standard_normal(config.rng_seed, k, 1 + i);
  if (config.qos_noise_std > 0.0)
    r.reading.qos += config.qos_noise_std * standard_normal(config.rng_seed, k, 0);
  return r;
}

}  // namespace sasctl::plant
