#include "sasctl/pi.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "sasctl/error.hpp"

namespace sasctl::pi {

void GainSchedule::validate(const plant::VfTable& vf) const {
  for (int f : vf.frequencies()) {
    int hits = 0;
    for (const auto& r : regions) hits += r.region.contains(f) ? 1 : 0;
    if (hits != 1)
      throw Error(ErrorCategory::ScheduleCoverage,
                  std::to_string(f) + " MHz is covered by " + std::to_string(hits) + " regions (need exactly 1)");
  }
}

PiOutput pi_step(const PiState& state, const PiGains& gains, double reference, double measured, double dt,
                 const std::optional<PiLimits>& limits) {
  if (!(dt > 0.0)) throw Error(ErrorCategory::Config, "pi_step: dt must be > 0");
  const double e = reference - measured;
  PiOutput out;
  out.state = state;
  out.state.integral += e * dt;
  if (limits && gains.ki > 0.0) {
    const double lo = (limits->u_min - gains.offset) / gains.ki;
    const double hi = (limits->u_max - gains.offset) / gains.ki;
    out.state.integral = std::clamp(out.state.integral, std::min(lo, hi), std::max(lo, hi));
  }
  out.state.last_reference = reference;
  out.state.last_error = e;
  out.control = gains.offset + gains.kp * e + gains.ki * out.state.integral;
  return out;
}

PiState rebase(const PiState& state, const PiGains& from, const PiGains& to) {
  PiState s = state;
  if (to.ki == 0.0) return s;
  const double e = state.last_error.value_or(0.0);
  const double base = from.offset + from.kp * e + from.ki * state.integral;
  s.integral = (base - to.offset - to.kp * e) / to.ki;
  return s;
}

const PiGains& schedule_gains(const GainSchedule& schedule, int f_mhz, double ref_prev, double ref_next) {
  if (ref_next != ref_prev) return schedule.global;
  for (const auto& r : schedule.regions)
    if (r.region.contains(f_mhz)) return r.gains;
  throw Error(ErrorCategory::ScheduleCoverage, std::to_string(f_mhz) + " MHz is outside every scheduled region");
}

int quantize_actuation(double control_mhz, const plant::VfTable& vf) {
  const auto& e = vf.entries();
  if (e.empty()) throw Error(ErrorCategory::Config, "quantize_actuation: empty table");
  if (std::isnan(control_mhz) || control_mhz <= e.front().mhz) return e.front().mhz;
  if (control_mhz >= e.back().mhz) return e.back().mhz;
  auto hi = std::lower_bound(e.begin(), e.end(), control_mhz,
                             [](const plant::VfPoint& p, double u) { return p.mhz < u; });
  auto lo = std::prev(hi);
  return (control_mhz - lo->mhz < hi->mhz - control_mhz) ? lo->mhz : hi->mhz;
}

double crossover_pole(double crossover) {
  if (!(crossover > 0.0) || crossover > 1.0)
    throw Error(ErrorCategory::Untunable, "crossover must be in (0, 1]");
  // Closed loop (1 - p) / (z - p) with its -3 dB point at w = crossover * pi.
  const double w = crossover * std::numbers::pi;
  const double m = 2.0 - std::cos(w);
  return m - std::sqrt(m * m - 1.0);
}

PiGains tune_pi(const sysid::ArxModel& model, double crossover, double dt, double guardband) {
  if (model.inputs() != 1 || model.outputs() != 1 || model.order.na != 1 || model.order.nb != 1)
    throw Error(ErrorCategory::Untunable, "tune_pi: needs a first-order SISO model");
  if (!(dt > 0.0)) throw Error(ErrorCategory::Config, "tune_pi: dt must be > 0");
  if (guardband < 0.0) throw Error(ErrorCategory::Config, "tune_pi: guardband must be >= 0");
  // Physical-unit coefficients.
  const double a = model.siso_a();
  const double b = model.siso_b() * model.output_scale(0) / model.input_scale(0);
  if (!std::isfinite(a) || !std::isfinite(b)) throw Error(ErrorCategory::Untunable, "tune_pi: non-finite model");
  if (std::abs(a) >= 1.0) throw Error(ErrorCategory::Untunable, "tune_pi: model pole outside the unit disk");
  if (std::abs(b) < 1e-15) throw Error(ErrorCategory::Untunable, "tune_pi: model has zero input gain");

  const double p = crossover_pole(crossover);
  const double K = (1.0 - p) / (b * (1.0 + guardband));
  PiGains g;
  g.kp = K * a;
  g.ki = K * (1.0 - a) / dt;
  g.offset = model.input_offset(0);
  return g;
}

std::pair<std::complex<double>, std::complex<double>> closed_loop_poles(const sysid::ArxModel& model,
                                                                         const PiGains& gains, double dt) {
  const double a = model.siso_a();
  const double b = model.siso_b() * model.output_scale(0) / model.input_scale(0);
  const double K = gains.kp + gains.ki * dt;
  // z^2 - (1 + a - bK) z + (a - b kp) = 0
  const double c1 = -(1.0 + a - b * K), c0 = a - b * gains.kp;
  const std::complex<double> disc = std::sqrt(std::complex<double>(c1 * c1 - 4.0 * c0));
  return {(-c1 + disc) / 2.0, (-c1 - disc) / 2.0};
}

PiController::PiController(PiGains fixed, PiLimits limits)
    : active_(fixed), limits_(limits), label_("fixed") {}

PiController::PiController(GainSchedule schedule, PiLimits limits)
    : schedule_(std::move(schedule)), active_(schedule_->global), limits_(limits), label_("global") {}

double PiController::step(double reference, double measured, int current_mhz, double dt) {
  if (schedule_) {
    const double prev = state_.last_reference.value_or(reference);
    const PiGains& next = schedule_gains(*schedule_, current_mhz, prev, reference);
    if (&next == &schedule_->global) {
      label_ = "global";
    } else {
      for (const auto& r : schedule_->regions)
        if (&r.gains == &next) label_ = "region" + std::to_string(r.region.id);
    }
    state_ = rebase(state_, active_, next);
    active_ = next;
  }
  auto out = pi_step(state_, active_, reference, measured, dt, limits_);
  state_ = out.state;
  return out.control;
}

}  // namespace sasctl::pi
