#include <cmath>
#include <complex>
#include <limits>

#include <Eigen/Dense>
#include <gtest/gtest.h>

#include "sasctl/error.hpp"
#include "sasctl/pi.hpp"

using namespace sasctl;
using namespace sasctl::pi;

namespace {

GainSchedule big_schedule() {
  GainSchedule s;
  s.global = {1.0, 10.0, 1100.0};
  int id = 0;
  for (const auto& r : plant::regions_by_voltage(plant::big_vf_table())) {
    ++id;
    s.regions.push_back({r, {static_cast<double>(id), 100.0 * id, static_cast<double>(r.lo_mhz)}});
  }
  return s;
}

template <class Fn>
void expect_error(ErrorCategory cat, Fn&& fn) {
  try {
    fn();
    ADD_FAILURE() << "no error thrown";
  } catch (const Error& e) {
    EXPECT_EQ(e.category(), cat) << e.what();
  }
}

// Roots of z^2 + c1 z + c0 from the companion matrix.
std::vector<std::complex<double>> roots2(double c1, double c0) {
  Eigen::Matrix2d M;
  M << -c1, -c0, 1.0, 0.0;
  Eigen::EigenSolver<Eigen::Matrix2d> es(M);
  return {es.eigenvalues()(0), es.eigenvalues()(1)};
}

// Characteristic polynomial of y(k+1) = a y(k) + b u(k) under
// u(k) = kp e(k) + ki dt sum e, written out from the loop equations.
std::vector<std::complex<double>> loop_poles(double a, double b, const PiGains& g, double dt) {
  // (z - 1)(z - a) + b ((kp + ki dt) z - kp)
  const double kidt = g.ki * dt;
  return roots2(-(1.0 + a) + b * (g.kp + kidt), a - b * g.kp);
}

}  // namespace

TEST(PiStep, ZeroErrorKeepsOffset) {
  PiGains g{3.0, 7.0, 1234.0};
  PiState s;
  for (int k = 0; k < 50; ++k) {
    auto o = pi_step(s, g, 2.0, 2.0, 0.05);
    EXPECT_EQ(o.control, 1234.0);
    EXPECT_EQ(o.state.integral, 0.0);
    s = o.state;
  }
}

TEST(PiStep, ProportionalArithmetic) {
  auto o = pi_step({}, {100.0, 0.0, 500.0}, 2.0, 1.0, 0.05);
  EXPECT_DOUBLE_EQ(o.control, 600.0);
}

TEST(PiStep, IntegralAccumulatesErrorTimesDt) {
  auto o = pi_step({}, {0.0, 10.0, 0.0}, 2.0, 1.0, 0.1);
  EXPECT_DOUBLE_EQ(o.state.integral, 0.1);
  EXPECT_DOUBLE_EQ(o.control, 1.0);
}

TEST(PiStep, RejectsNonPositiveDt) {
  expect_error(ErrorCategory::Config, [] { pi_step({}, {}, 1.0, 0.0, 0.0); });
}

TEST(PiStep, AntiWindupBoundsHoldUnderSaturation) {
  const PiGains g{5.0, 400.0, 1100.0};
  const PiLimits lim{200.0, 2000.0};
  PiState s;
  for (int k = 0; k < 1000000; ++k) s = pi_step(s, g, 10.0, 0.0, 0.05, lim).state;
  EXPECT_LE(g.offset + g.ki * s.integral, 2000.0 + 1e-9);
  for (int k = 0; k < 1000000; ++k) s = pi_step(s, g, 0.0, 10.0, 0.05, lim).state;
  EXPECT_GE(g.offset + g.ki * s.integral, 200.0 - 1e-9);
}

TEST(Rebase, ControlIsContinuousAcrossGainChange) {
  const PiGains from{250.0, 2000.0, 1100.0}, to{3.0, 3000.0, 1400.0};
  auto o = pi_step({}, from, 3.5, 2.9, 0.05);
  const auto s = rebase(o.state, from, to);
  const double e = *s.last_error;
  EXPECT_NEAR(to.offset + to.kp * e + to.ki * s.integral, o.control, 1e-9);
}

TEST(Schedule, Examples) {
  const auto s = big_schedule();
  EXPECT_EQ(&schedule_gains(s, 1000, 1.5, 1.5), &s.regions[2].gains);
  EXPECT_EQ(s.regions[2].region.id, 3);
  EXPECT_EQ(&schedule_gains(s, 1000, 3.5, 0.5), &s.global);
  EXPECT_EQ(&schedule_gains(s, 200, 1.0, 1.0), &s.regions[3].gains);
  EXPECT_EQ(s.regions[3].region.id, 4);
}

TEST(Schedule, OutsideEveryRegionIsACoverageError) {
  const auto s = big_schedule();
  expect_error(ErrorCategory::ScheduleCoverage, [&] { schedule_gains(s, 2100, 1.0, 1.0); });
}

TEST(Schedule, ValidateDetectsGapsAndOverlaps) {
  auto s = big_schedule();
  EXPECT_NO_THROW(s.validate(plant::big_vf_table()));
  s.regions.pop_back();
  expect_error(ErrorCategory::ScheduleCoverage, [&] { s.validate(plant::big_vf_table()); });
  s = big_schedule();
  s.regions[0].region.lo_mhz = 1500;
  expect_error(ErrorCategory::ScheduleCoverage, [&] { s.validate(plant::big_vf_table()); });
}

// Every frequency x {changed, unchanged}: global gains on a change, else the region of f.
TEST(Schedule, ExhaustiveSelection) {
  const auto s = big_schedule();
  for (int f : plant::big_vf_table().frequencies()) {
    EXPECT_EQ(&schedule_gains(s, f, 1.0, 2.0), &s.global) << f;
    const PiGains* expect = nullptr;
    if (f >= 1600) expect = &s.regions[0].gains;
    else if (f >= 1300) expect = &s.regions[1].gains;
    else if (f >= 900) expect = &s.regions[2].gains;
    else expect = &s.regions[3].gains;
    EXPECT_EQ(&schedule_gains(s, f, 2.0, 2.0), expect) << f;
  }
}

TEST(Quantize, Examples) {
  const auto vf = plant::big_vf_table();
  EXPECT_EQ(quantize_actuation(1840.0, vf), 1800);
  EXPECT_EQ(quantize_actuation(2500.0, vf), 2000);
  EXPECT_EQ(quantize_actuation(250.0, vf), 300);
  EXPECT_EQ(quantize_actuation(-50.0, vf), 200);
  EXPECT_EQ(quantize_actuation(std::numeric_limits<double>::quiet_NaN(), vf), 200);
  EXPECT_EQ(quantize_actuation(1349.999, vf), 1300);
}

TEST(Tune, ClosedLoopPoleRealAndInsideUnitInterval) {
  const auto m = sysid::ArxModel::first_order(0.5, 0.2);
  const auto g = tune_pi(m, 0.32, 0.05);
  for (const auto& z : loop_poles(0.5, 0.2, g, 0.05)) {
    EXPECT_NEAR(z.imag(), 0.0, 1e-12);
    EXPECT_GT(z.real(), 0.0);
    EXPECT_LT(z.real(), 1.0);
  }
  // Library pole helper agrees with the independent companion-matrix roots.
  const auto [p1, p2] = closed_loop_poles(m, g, 0.05);
  const auto r = loop_poles(0.5, 0.2, g, 0.05);
  EXPECT_NEAR(std::min(p1.real(), p2.real()), std::min(r[0].real(), r[1].real()), 1e-12);
  EXPECT_NEAR(std::max(p1.real(), p2.real()), std::max(r[0].real(), r[1].real()), 1e-12);
}

TEST(Tune, CrossoverIsTheClosedLoopHalfPowerPoint) {
  const double a = 0.5, b = 0.2, dt = 0.05;
  const auto g = tune_pi(sysid::ArxModel::first_order(a, b), 0.32, dt);
  const std::complex<double> z = std::polar(1.0, 0.32 * M_PI);
  const auto C = (g.kp + g.ki * dt - g.kp / z) / (1.0 - 1.0 / z);
  const auto P = b / (z - a);
  EXPECT_NEAR(std::abs(C * P / (1.0 + C * P)), 1.0 / std::sqrt(2.0), 1e-9);
}

TEST(Tune, HigherCrossoverGivesLargerGains) {
  const auto m = sysid::ArxModel::first_order(0.5, 0.2);
  const auto lo = tune_pi(m, 0.32, 0.05), hi = tune_pi(m, 0.8, 0.05);
  EXPECT_GT(hi.kp, lo.kp);
  EXPECT_GT(hi.ki, lo.ki);
}

TEST(Tune, NominalStepHasZeroOvershoot) {
  for (double c : {0.1, 0.32, 0.8, 1.0}) {
    const double a = 0.7, b = 0.05, dt = 0.05;
    const auto g = tune_pi(sysid::ArxModel::first_order(a, b), c, dt, 0.3);
    PiState s;
    double y = 0.0, prev = 0.0;
    for (int k = 0; k < 200; ++k) {
      auto o = pi_step(s, {g.kp, g.ki, 0.0}, 1.0, y, dt);
      s = o.state;
      y = a * y + b * o.control;
      EXPECT_LE(y, 1.0 + 1e-12) << "c=" << c << " k=" << k;
      EXPECT_GE(y, prev - 1e-12);
      prev = y;
    }
    EXPECT_NEAR(y, 1.0, 1e-6);
  }
}

TEST(Tune, UntunableModels) {
  expect_error(ErrorCategory::Untunable, [] { tune_pi(sysid::ArxModel::first_order(0.5, 0.0), 0.32, 0.05); });
  expect_error(ErrorCategory::Untunable, [] { tune_pi(sysid::ArxModel::first_order(1.2, 0.1), 0.32, 0.05); });
  expect_error(ErrorCategory::Untunable, [] { tune_pi(sysid::ArxModel::first_order(0.5, 0.1), 0.0, 0.05); });
}

TEST(Tune, RegionFourStepSettlesWithinFivePeriods) {
  auto cfg = plant::default_plant_config();
  cfg.power_noise_std = 0.0;
  const auto vf = cfg.clusters[0].vf;
  const auto r4 = *plant::find_region(plant::regions_by_voltage(vf), 4);
  sysid::ExperimentSpec ex;
  ex.inputs = {{0, sysid::Channel::Knob::Frequency}};
  ex.outputs = {sysid::OutputKind::ClusterPower};
  ex.base = {{2000, 4}, {1400, 4}};
  std::vector<sysid::MimoPoint> stim;
  for (int f : sysid::staircase_stimulus(vf, r4, 2)) stim.push_back({f});
  const auto [m, rep] = sysid::fit_arx(sysid::run_experiment(cfg, ex, stim));
  const auto g = tune_pi(m, 0.32, 0.05, 0.3);

  // Continuous-actuation loop around the identified model, 0.6 -> 1.2 W step.
  const double a = m.siso_a(), b = m.siso_b();
  const double y0 = m.output_offset(0), u0 = m.input_offset(0);
  PiState s;
  double y = 0.6;
  for (int k = 0; k < 100; ++k) {
    auto o = pi_step(s, g, 0.6, y, 0.05);
    s = o.state;
    y = y0 + a * (y - y0) + b * (o.control - u0);
  }
  int settled_at = -1;
  std::vector<double> ys;
  for (int k = 0; k < 40; ++k) {
    auto o = pi_step(s, g, 1.2, y, 0.05);
    s = o.state;
    y = y0 + a * (y - y0) + b * (o.control - u0);
    ys.push_back(y);
  }
  for (int k = static_cast<int>(ys.size()) - 1; k >= 0; --k)
    if (std::abs(ys[k] - 1.2) > 0.05 * 0.6) {
      settled_at = k + 1;
      break;
    }
  EXPECT_LE(settled_at + 1, 5) << "periods to enter the 5% band";
}

TEST(Controller, ZeroErrorNeverMovesActuation) {
  PiController c(big_schedule(), {200.0, 2000.0});
  double last = std::nan("");
  for (int k = 0; k < 100; ++k) {
    const double u = c.step(2.0, 2.0, 1000, 0.05);
    if (k > 1) EXPECT_EQ(u, last);
    last = u;
  }
}

TEST(Controller, LabelsFollowTheSchedule) {
  PiController c(big_schedule(), {200.0, 2000.0});
  c.step(1.0, 1.0, 1000, 0.05);
  EXPECT_EQ(c.label(), "region3");
  c.step(2.0, 1.0, 1000, 0.05);
  EXPECT_EQ(c.label(), "global");
  c.step(2.0, 1.0, 1700, 0.05);
  EXPECT_EQ(c.label(), "region1");
  PiController f(PiGains{1, 1, 1000}, {200.0, 2000.0});
  f.step(2.0, 1.0, 1000, 0.05);
  EXPECT_EQ(f.label(), "fixed");
}
