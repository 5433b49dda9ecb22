#include <cmath>
#include <random>
#include <set>

#include <gtest/gtest.h>

#include "sasctl/error.hpp"
#include "sasctl/sysid.hpp"

using namespace sasctl;
using namespace sasctl::sysid;

namespace {

// y(k+1) = a y(k) + b u(k), generated directly.
Waveform first_order_data(double a, double b, int n, unsigned seed) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  Waveform w;
  w.u.resize(n, 1);
  w.y.resize(n, 1);
  double y = 0.0;
  for (int k = 0; k < n; ++k) {
    w.u(k, 0) = U(rng);
    w.y(k, 0) = y;
    y = a * y + b * w.u(k, 0);
  }
  return w;
}

double training_sse(const ArxModel& m, const Waveform& w) {
  const Eigen::MatrixXd yhat = predict_one_step(m, w);
  const int lag = std::max(m.order.na, m.order.nb);
  const auto n = w.y.rows() - lag;
  return (w.y.bottomRows(n) - yhat.bottomRows(n)).squaredNorm();
}

plant::PlantConfig quiet_plant() {
  auto cfg = plant::default_plant_config();
  cfg.power_noise_std = cfg.qos_noise_std = 0.0;
  return cfg;
}

Waveform region_waveform(const plant::PlantConfig& cfg, const std::optional<plant::OperatingRegion>& r, int spl) {
  ExperimentSpec ex;
  ex.inputs = {{0, Channel::Knob::Frequency}};
  ex.outputs = {OutputKind::ClusterPower};
  ex.base = {{2000, 4}, {1400, 4}};
  std::vector<MimoPoint> stim;
  for (int f : staircase_stimulus(cfg.clusters[0].vf, r, spl)) stim.push_back({f});
  return run_experiment(cfg, ex, stim);
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

}  // namespace

TEST(Stimulus, RegionFourStaircaseCounts) {
  const auto vf = plant::big_vf_table();
  const auto r4 = *plant::find_region(plant::regions_by_voltage(vf), 4);
  const auto s = staircase_stimulus(vf, r4, 2);
  ASSERT_EQ(s.size(), 28u);
  EXPECT_EQ(s.front(), 200);
  EXPECT_EQ(s[12], 800);
  EXPECT_EQ(s[14], 800);
  EXPECT_EQ(s.back(), 200);
  for (int f : s) EXPECT_TRUE(r4.contains(f));
}

TEST(Stimulus, FullTableCoversEveryLevel) {
  const auto vf = plant::big_vf_table();
  const auto s = staircase_stimulus(vf, std::nullopt, 1);
  EXPECT_EQ(std::set<int>(s.begin(), s.end()).size(), 19u);
}

TEST(Stimulus, SingleLevelRegionIsConstant) {
  const plant::VfTable vf({{500, 1.0}, {600, 1.2}});
  const auto s = staircase_stimulus(vf, plant::OperatingRegion{1, 600, 600}, 3);
  ASSERT_EQ(s.size(), 6u);
  for (int f : s) EXPECT_EQ(f, 600);
}

TEST(Stimulus, EmptyRegionIsAnError) {
  expect_error(ErrorCategory::Config,
               [] { staircase_stimulus(plant::big_vf_table(), plant::OperatingRegion{9, 2100, 2500}, 2); });
}

TEST(Stimulus, SineCoversTheSpan) {
  const auto vf = plant::big_vf_table();
  const auto s = sine_stimulus(vf, std::nullopt, 40, 1);
  EXPECT_EQ(*std::min_element(s.begin(), s.end()), 200);
  EXPECT_EQ(*std::max_element(s.begin(), s.end()), 2000);
  for (int f : s) EXPECT_TRUE(vf.contains(f));
}

TEST(Stimulus, ShuffledGridIsAPermutationOfTheProduct) {
  const auto g = shuffled_grid({{1, 2, 3}, {10, 20}}, 2, 3);
  ASSERT_EQ(g.size(), 12u);
  std::multiset<std::pair<int, int>> seen;
  for (const auto& p : g) seen.insert({p[0], p[1]});
  for (int a : {1, 2, 3})
    for (int b : {10, 20}) EXPECT_EQ(seen.count({a, b}), 2u);
  EXPECT_EQ(g, shuffled_grid({{1, 2, 3}, {10, 20}}, 2, 3));
}

TEST(StimulusMimo, SweepsCoresAloneAndJointly) {
  const auto s = staircase_mimo({900, 1000, 1100}, {1, 2, 3, 4}, 1);
  bool cores_alone = false, joint = false;
  for (std::size_t i = 1; i < s.size(); ++i) {
    const bool df = s[i][0] != s[i - 1][0], dc = s[i][1] != s[i - 1][1];
    cores_alone |= dc && !df;
    joint |= dc && df;
  }
  EXPECT_TRUE(cores_alone);
  EXPECT_TRUE(joint);
}

TEST(FitArx, ExactFirstOrderRecovery) {
  const auto w = first_order_data(0.5, 0.2, 200, 1);
  const auto [m, rep] = fit_arx(w);
  EXPECT_NEAR(m.siso_a(), 0.5, 1e-9);
  EXPECT_NEAR(m.siso_b(), 0.2, 1e-9);
  EXPECT_NEAR(rep.fit_percent, 100.0, 1e-6);
}

TEST(FitArx, ExactSecondOrderMimoRecovery) {
  const int p = 2, q = 2, n = 400;
  std::vector<Eigen::MatrixXd> a(2), b(2);
  a[0] = (Eigen::MatrixXd(p, p) << 0.5, 0.1, -0.05, 0.3).finished();
  a[1] = (Eigen::MatrixXd(p, p) << -0.1, 0.02, 0.0, 0.15).finished();
  b[0] = (Eigen::MatrixXd(p, q) << 0.4, -0.2, 0.1, 0.7).finished();
  b[1] = (Eigen::MatrixXd(p, q) << 0.05, 0.0, -0.1, 0.2).finished();
  std::mt19937 rng(5);
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  Waveform w;
  w.u = Eigen::MatrixXd::Zero(n, q);
  w.y = Eigen::MatrixXd::Zero(n, p);
  for (int k = 0; k < n; ++k)
    for (int j = 0; j < q; ++j) w.u(k, j) = U(rng);
  for (int k = 1; k + 1 < n; ++k)
    w.y.row(k + 1) = (a[0] * w.y.row(k).transpose() + a[1] * w.y.row(k - 1).transpose() +
                      b[0] * w.u.row(k).transpose() + b[1] * w.u.row(k - 1).transpose())
                         .transpose();
  FitOptions fo;
  fo.order = {2, 2};
  const auto [m, rep] = fit_arx(w, fo);
  for (int i = 0; i < 2; ++i) {
    EXPECT_LT((m.a[i] - a[i]).cwiseAbs().maxCoeff(), 1e-6);
    EXPECT_LT((m.b[i] - b[i]).cwiseAbs().maxCoeff(), 1e-6);
  }
}

TEST(FitArx, OffsetsAreFoldedIntoTheEquilibrium) {
  // y(k+1) = 0.6 y(k) + 0.3 u(k) + 2 has equilibrium y = (0.3 u + 2) / 0.4.
  std::mt19937 rng(2);
  std::uniform_real_distribution<double> U(0.0, 4.0);
  Waveform w;
  w.u.resize(300, 1);
  w.y.resize(300, 1);
  double y = 5.0;
  for (int k = 0; k < 300; ++k) {
    w.u(k, 0) = U(rng);
    w.y(k, 0) = y;
    y = 0.6 * y + 0.3 * w.u(k, 0) + 2.0;
  }
  const auto [m, rep] = fit_arx(w);
  const double u0 = m.input_offset(0), y0 = m.output_offset(0);
  EXPECT_NEAR(y0, (0.3 * u0 + 2.0) / 0.4, 1e-8);
  EXPECT_NEAR(training_sse(m, w), 0.0, 1e-12);
}

TEST(FitArx, ConstantInputIsNotIdentifiable) {
  Waveform w;
  w.u = Eigen::MatrixXd::Constant(50, 1, 3.0);
  w.y = Eigen::MatrixXd::Constant(50, 1, 1.0);
  expect_error(ErrorCategory::NotIdentifiable, [&] { fit_arx(w); });
}

TEST(FitArx, TooShortIsNotIdentifiable) {
  const auto w = first_order_data(0.5, 0.2, 8, 1);
  expect_error(ErrorCategory::NotIdentifiable, [&] { fit_arx(w); });
}

TEST(FitArx, LeastSquaresOptimality) {
  auto cfg = plant::default_plant_config();
  const auto w = region_waveform(cfg, std::nullopt, 2);
  const auto [m, rep] = fit_arx(w);
  const double base = training_sse(m, w);
  for (double d : {-1e-3, 1e-3}) {
    auto ma = m;
    ma.a[0](0, 0) += d;
    EXPECT_GE(training_sse(ma, w), base);
    auto mb = m;
    mb.b[0](0, 0) += d;
    EXPECT_GE(training_sse(mb, w), base);
  }
}

TEST(FitArx, NoiselessRegionFourFit) {
  const auto cfg = quiet_plant();
  const auto r4 = plant::find_region(plant::regions_by_voltage(cfg.clusters[0].vf), 4);
  const auto [m, rep] = fit_arx(region_waveform(cfg, r4, 2));
  EXPECT_GE(rep.fit_percent, 95.0);
}

TEST(FitArx, RegionModelBeatsFullRangeOnItsRegion) {
  const auto cfg = plant::default_plant_config();
  const auto r4 = plant::find_region(plant::regions_by_voltage(cfg.clusters[0].vf), 4);
  const auto w4 = region_waveform(cfg, r4, 2);
  const auto [full, rf] = fit_arx(region_waveform(cfg, std::nullopt, 2));
  const auto [reg, rr] = fit_arx(w4);
  EXPECT_LT(prediction_rmse(reg, w4), prediction_rmse(full, w4));
}

TEST(StateSpace, FirstOrderCanonicalForm) {
  const auto ss = arx_to_statespace(ArxModel::first_order(0.5, 0.2));
  ASSERT_EQ(ss.states(), 1);
  EXPECT_EQ(ss.A(0, 0), 0.5);
  EXPECT_EQ(ss.B(0, 0), 0.2);
  EXPECT_EQ(ss.C(0, 0), 1.0);
  EXPECT_EQ(ss.D(0, 0), 0.0);
}

TEST(StateSpace, SecondOrderCompanionStructure) {
  ArxModel m = ArxModel::first_order(0.0, 0.0);
  m.order = {2, 1};
  m.a = {Eigen::MatrixXd::Constant(1, 1, 0.7), Eigen::MatrixXd::Constant(1, 1, -0.1)};
  m.b = {Eigen::MatrixXd::Constant(1, 1, 0.3)};
  const auto ss = arx_to_statespace(m);
  ASSERT_EQ(ss.states(), 2);
  EXPECT_EQ(ss.A(0, 0), 0.7);
  EXPECT_EQ(ss.A(0, 1), -0.1);
  EXPECT_EQ(ss.A(1, 0), 1.0);
  EXPECT_EQ(ss.A(1, 1), 0.0);
  EXPECT_EQ(ss.B(0, 0), 0.3);
  EXPECT_EQ(ss.B(1, 0), 0.0);
}

// Difference equation vs realization on a random input sequence.
TEST(StateSpace, RoundTripMatchesArxSimulation) {
  const int p = 2, q = 2, na = 2, nb = 3, n = 100;
  std::mt19937 rng(11);
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  ArxModel m;
  m.order = {na, nb};
  for (int i = 0; i < na; ++i) m.a.push_back(0.2 * Eigen::MatrixXd::NullaryExpr(p, p, [&] { return U(rng); }));
  for (int j = 0; j < nb; ++j) m.b.push_back(Eigen::MatrixXd::NullaryExpr(p, q, [&] { return U(rng); }));
  m.input_offset = Eigen::Vector2d(1000.0, 3.0);
  m.output_offset = Eigen::Vector2d(40.0, 2.5);
  m.input_scale = Eigen::Vector2d(1800.0, 3.0);
  m.output_scale = Eigen::Vector2d(60.0, 5.0);
  const auto ss = arx_to_statespace(m);

  Eigen::MatrixXd un(n, q), yn_arx = Eigen::MatrixXd::Zero(n + 1, p);
  for (int k = 0; k < n; ++k)
    for (int j = 0; j < q; ++j) un(k, j) = U(rng);
  for (int k = 0; k < n; ++k) {
    Eigen::VectorXd acc = Eigen::VectorXd::Zero(p);
    for (int i = 0; i < na; ++i)
      if (k - i >= 0) acc += m.a[i] * yn_arx.row(k - i).transpose();
    for (int j = 0; j < nb; ++j)
      if (k - j >= 0) acc += m.b[j] * un.row(k - j).transpose();
    yn_arx.row(k + 1) = acc.transpose();
  }
  Eigen::VectorXd x = Eigen::VectorXd::Zero(ss.states());
  double worst = 0.0;
  for (int k = 0; k < n; ++k) {
    x = ss.A * x + ss.B * un.row(k).transpose();
    const Eigen::VectorXd y_ss = ss.output_offset + ss.output_scale.cwiseProduct(ss.C * x);
    const Eigen::VectorXd y_arx = m.output_offset + m.output_scale.cwiseProduct(yn_arx.row(k + 1).transpose());
    worst = std::max(worst, (y_ss - y_arx).cwiseAbs().maxCoeff());
  }
  EXPECT_LT(worst, 1e-10);
}

TEST(StateSpace, ValidateCatchesShapeErrors) {
  auto ss = arx_to_statespace(ArxModel::first_order(0.5, 0.2));
  ss.B = Eigen::MatrixXd::Zero(2, 1);
  expect_error(ErrorCategory::Dimension, [&] { ss.validate(); });
}

TEST(Experiment, AlignsInputWithNextOutput) {
  const auto cfg = quiet_plant();
  ExperimentSpec ex;
  ex.inputs = {{0, Channel::Knob::Frequency}};
  ex.outputs = {OutputKind::ClusterPower};
  ex.base = {{2000, 4}, {1400, 4}};
  const auto w = run_experiment(cfg, ex, {{200}, {2000}, {1000}});
  ASSERT_EQ(w.size(), 3);
  EXPECT_NEAR(w.y(1, 0), plant::model_power(cfg.clusters[0], 200, 4), 1e-12);
  EXPECT_NEAR(w.y(2, 0), plant::model_power(cfg.clusters[0], 2000, 4), 1e-12);
}
