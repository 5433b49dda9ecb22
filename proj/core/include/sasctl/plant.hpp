#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace sasctl::plant {

struct VfPoint {
  int mhz = 0;
  double volts = 0.0;
};

// Discrete frequency/voltage lattice of one cluster.
class VfTable {
 public:
  VfTable() = default;
  explicit VfTable(std::vector<VfPoint> entries);

  const std::vector<VfPoint>& entries() const noexcept { return entries_; }
  std::size_t size() const noexcept { return entries_.size(); }
  bool empty() const noexcept { return entries_.empty(); }
  bool contains(int mhz) const noexcept;
  // Throws Error(InvalidActuation) for frequencies outside the table.
  double voltage(int mhz) const;
  int min_mhz() const;
  int max_mhz() const;
  std::vector<int> frequencies() const;

 private:
  std::vector<VfPoint> entries_;
};

// Big cluster table: 200-2000 MHz at 100 MHz steps with four voltage levels.
VfTable big_vf_table();
// Little cluster table: 200-1400 MHz at a single voltage level.
VfTable little_vf_table();

struct OperatingRegion {
  int id = 0;
  int lo_mhz = 0;
  int hi_mhz = 0;
  bool contains(int mhz) const noexcept { return mhz >= lo_mhz && mhz <= hi_mhz; }
};

// Groups table entries that share a voltage. Region 1 is the highest-voltage
// group, so the default Big table yields 1: 1600-2000, 2: 1300-1500,
// 3: 900-1200, 4: 200-800.
std::vector<OperatingRegion> regions_by_voltage(const VfTable& table);
std::optional<OperatingRegion> find_region(const std::vector<OperatingRegion>& regions, int id);
std::vector<int> region_frequencies(const VfTable& table, const OperatingRegion& region);

struct ClusterConfig {
  std::string name;
  VfTable vf;
  int core_count = 4;
  double power_coeff = 0.5;   // W / (V^2 * GHz) per core
  double static_power = 0.0;  // W per active core
  double utilization = 1.0;   // busy fraction of each active core
};

struct WorkloadPhase {
  double start_s = 0.0;
  double background_load = 0.0;
  double qos_scale = 1.0;
};

struct WorkloadModel {
  double qos_per_ghz = 14.4;
  double parallel_fraction = 0.95;
  std::vector<WorkloadPhase> phases{WorkloadPhase{}};
  int qos_cluster = 0;

  const WorkloadPhase& phase_at(double t) const;
};

struct PlantConfig {
  std::vector<ClusterConfig> clusters;
  WorkloadModel workload;
  double power_noise_std = 0.03;
  double qos_noise_std = 0.5;
  std::uint64_t rng_seed = 1;

  // Throws Error(Config) when an invariant is violated.
  void validate() const;
};

struct ClusterState {
  int mhz = 0;
  int active_cores = 1;
};

struct PlantState {
  std::vector<ClusterState> clusters;
  double sim_time = 0.0;
  std::uint64_t step_index = 0;
};

using Actuation = std::vector<ClusterState>;

struct SensorReading {
  std::vector<double> power;  // per cluster, W
  double qos = 0.0;
  double total_power() const;
};

struct StepResult {
  PlantState state;
  SensorReading reading;
};

double amdahl_speedup(int cores, double parallel_fraction);

// Throws Error(InvalidActuation) if the state is not valid for the config.
void check_state(const PlantState& state, const PlantConfig& config);

// Noiseless per-cluster power, W.
std::vector<double> plant_power(const PlantState& state, const PlantConfig& config);
// Noiseless QoS of the workload cluster at time t.
double plant_qos(const PlantState& state, const PlantConfig& config, double t);

// Applies the actuation at the step boundary, advances time by dt and returns
// the sensor reading of the new state. Noise depends only on
// (rng_seed, step index, channel).
StepResult plant_step(const PlantState& state, const PlantConfig& config,
                      const Actuation& actuation, double dt);

// Zero-mean unit Gaussian drawn from a counter-based generator.
double standard_normal(std::uint64_t seed, std::uint64_t counter, std::uint64_t channel);

PlantState make_state(const PlantConfig& config, const Actuation& actuation);

// ---- calibration -------------------------------------------------------

struct CalibrationPoint {
  int mhz = 0;
  double watts = 0.0;
};

// Plotted cluster power at full load, four cores.
const std::vector<CalibrationPoint>& big_power_points();
const std::vector<CalibrationPoint>& little_power_points();

enum class Weighting { Absolute, Relative };

struct PowerFit {
  double power_coeff = 0.0;
  double static_power = 0.0;
  double max_rel_error = 0.0;
  double rms_rel_error = 0.0;
};

// Least-squares fit of P = cores * (k * V^2 * f_GHz * util + s) to the points.
// Relative weighting minimizes squared relative error. With
// nonnegative_static the fit is constrained to s >= 0.
PowerFit calibrate_power(const std::vector<CalibrationPoint>& points, const VfTable& vf,
                         int cores, double utilization, Weighting weighting,
                         bool nonnegative_static = false);

double model_power(const ClusterConfig& cluster, int mhz, int cores);

// Calibrated Big + Little configuration used by the builtin scenarios.
PlantConfig default_plant_config();

}  // namespace sasctl::plant
