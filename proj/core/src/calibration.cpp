#include <algorithm>
#include <cmath>

#include "sasctl/error.hpp"
#include "sasctl/plant.hpp"

namespace sasctl::plant {

const std::vector<CalibrationPoint>& big_power_points() {
  static const std::vector<CalibrationPoint> pts{
      {200, 0.4},  {300, 0.6},  {400, 0.8},  {500, 1.0},  {600, 1.1},  {700, 1.3},  {800, 1.6},
      {900, 1.9},  {1000, 2.2}, {1100, 2.6}, {1200, 3.0}, {1300, 3.4}, {1400, 3.8}, {1500, 4.3},
      {1600, 5.0}, {1700, 5.7}, {1800, 6.6}, {1900, 7.6}, {2000, 9.4}};
  return pts;
}

const std::vector<CalibrationPoint>& little_power_points() {
  static const std::vector<CalibrationPoint> pts{
      {200, 0.04},  {300, 0.06},  {400, 0.07},  {500, 0.08},  {600, 0.10},
      {700, 0.12},  {800, 0.14},  {900, 0.20},  {1000, 0.22}, {1100, 0.26},
      {1200, 0.30}, {1300, 0.36}, {1400, 0.42}};
  return pts;
}

PowerFit calibrate_power(const std::vector<CalibrationPoint>& points, const VfTable& vf, int cores,
                         double utilization, Weighting weighting, bool nonnegative_static) {
  if (points.size() < 2) throw Error(ErrorCategory::Config, "calibration: need at least two points");
  if (cores < 1) throw Error(ErrorCategory::Config, "calibration: cores must be >= 1");

  // P = a * x + b * cores with x = cores * V^2 * f * util; solve the 2x2
  // weighted normal equations.
  double sxx = 0, sx1 = 0, s11 = 0, sxy = 0, s1y = 0;
  for (const auto& p : points) {
    if (!(p.watts > 0.0)) throw Error(ErrorCategory::Config, "calibration: watts must be > 0");
    const double v = vf.voltage(p.mhz);
    const double x = cores * v * v * (p.mhz / 1000.0) * utilization;
    const double one = cores;
    const double w = weighting == Weighting::Relative ? 1.0 / (p.watts * p.watts) : 1.0;
    sxx += w * x * x;
    sx1 += w * x * one;
    s11 += w * one * one;
    sxy += w * x * p.watts;
    s1y += w * one * p.watts;
  }
  const double det = sxx * s11 - sx1 * sx1;
  if (std::abs(det) < 1e-12 * std::max(1.0, sxx * s11))
    throw Error(ErrorCategory::Config, "calibration: points do not determine both coefficients");

  PowerFit fit;
  fit.power_coeff = (sxy * s11 - sx1 * s1y) / det;
  fit.static_power = (sxx * s1y - sx1 * sxy) / det;
  if (nonnegative_static && fit.static_power < 0.0) {
    fit.static_power = 0.0;
    fit.power_coeff = sxy / sxx;
  }

  ClusterConfig c{"fit", vf, cores, fit.power_coeff, fit.static_power, utilization};
  double sq = 0.0;
  for (const auto& p : points) {
    const double rel = std::abs(model_power(c, p.mhz, cores) - p.watts) / p.watts;
    fit.max_rel_error = std::max(fit.max_rel_error, rel);
    sq += rel * rel;
  }
  fit.rms_rel_error = std::sqrt(sq / static_cast<double>(points.size()));
  return fit;
}

PlantConfig default_plant_config() {
  PlantConfig cfg;
  auto big_vf = big_vf_table();
  auto little_vf = little_vf_table();
  const auto bf = calibrate_power(big_power_points(), big_vf, 4, 1.0, Weighting::Relative);
  // The Little points favor a negative leakage term; keep s >= 0 and weight
  // absolute error so the high-frequency end stays close.
  const auto lf = calibrate_power(little_power_points(), little_vf, 4, 1.0, Weighting::Absolute, true);
  cfg.clusters.push_back({"big", big_vf, 4, bf.power_coeff, bf.static_power, 1.0});
  cfg.clusters.push_back({"little", little_vf, 4, lf.power_coeff, lf.static_power, 1.0});
  cfg.workload.qos_cluster = 0;
  return cfg;
}

}  // namespace sasctl::plant
