#pragma once

#include <complex>
#include <optional>
#include <utility>
#include <vector>

#include "sasctl/plant.hpp"
#include "sasctl/sysid.hpp"

namespace sasctl::pi {

struct PiGains {
  double kp = 0.0;      // MHz / W
  double ki = 0.0;      // MHz / (W s)
  double offset = 0.0;  // MHz
};

struct RegionGains {
  plant::OperatingRegion region;
  PiGains gains;
};

struct GainSchedule {
  std::vector<RegionGains> regions;
  PiGains global;

  // Throws Error(ScheduleCoverage) unless the regions are disjoint and cover
  // every table frequency.
  void validate(const plant::VfTable& vf) const;
};

// Integral clamp keeping offset + ki * integral inside [u_min, u_max].
struct PiLimits {
  double u_min = 0.0;
  double u_max = 0.0;
};

struct PiState {
  double integral = 0.0;  // W s
  std::optional<double> last_reference;
  std::optional<double> last_error;  // W
};

struct PiOutput {
  PiState state;
  double control = 0.0;  // MHz, continuous
};

PiOutput pi_step(const PiState& state, const PiGains& gains, double reference, double measured,
                 double dt, const std::optional<PiLimits>& limits = std::nullopt);

// Re-expresses the integral for new gains so the control computed from the
// last error is unchanged.
PiState rebase(const PiState& state, const PiGains& from, const PiGains& to);

// Global gains on the period the reference changes, otherwise the gains of
// the region containing f.
const PiGains& schedule_gains(const GainSchedule& schedule, int f_mhz, double ref_prev, double ref_next);

// Nearest table frequency, ties rounding up, saturating at the ends.
int quantize_actuation(double control_mhz, const plant::VfTable& vf);

// Crossover (fraction of Nyquist) to the closed-loop pole of the tuned loop.
double crossover_pole(double crossover);

// Pole-placement tuning of a PI loop around a first-order model: the PI zero
// cancels the model pole and the remaining closed-loop pole sits at
// crossover_pole(crossover), pushed toward 1 by the guardband.
PiGains tune_pi(const sysid::ArxModel& model, double crossover, double dt, double guardband = 0.0);

// Roots of the nominal closed-loop characteristic polynomial
// (z - 1)(z - a) + b (K z - kp), K = kp + ki dt.
std::pair<std::complex<double>, std::complex<double>> closed_loop_poles(const sysid::ArxModel& model,
                                                                         const PiGains& gains, double dt);

// Stateful wrapper used by the harness: fixed gains or a gain schedule with
// bumpless switching.
class PiController {
 public:
  PiController(PiGains fixed, PiLimits limits);
  PiController(GainSchedule schedule, PiLimits limits);

  // current_mhz is the applied frequency used by the scheduler.
  double step(double reference, double measured, int current_mhz, double dt);

  const PiGains& active() const noexcept { return active_; }
  const PiState& state() const noexcept { return state_; }
  bool scheduled() const noexcept { return schedule_.has_value(); }
  // Label of the active gain set: "global", "region<N>" or "fixed".
  const std::string& label() const noexcept { return label_; }

 private:
  std::optional<GainSchedule> schedule_;
  PiGains active_;
  PiLimits limits_;
  PiState state_;
  std::string label_;
};

}  // namespace sasctl::pi
