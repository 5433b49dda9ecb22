#include <benchmark/benchmark.h>

#include "sasctl/harness.hpp"

using namespace sasctl;

static void BM_PlantStep(benchmark::State& st) {
  const auto cfg = plant::default_plant_config();
  const plant::Actuation act{{1400, 4}, {1400, 4}};
  auto s = plant::make_state(cfg, act);
  for (auto _ : st) {
    auto r = plant::plant_step(s, cfg, act, 0.05);
    s = r.state;
    benchmark::DoNotOptimize(r.reading);
  }
}
BENCHMARK(BM_PlantStep);

static void BM_FitArx(benchmark::State& st) {
  const auto n = st.range(0);
  sysid::Waveform w;
  w.u = Eigen::MatrixXd::Random(n, 2);
  w.y = Eigen::MatrixXd::Zero(n, 2);
  for (Eigen::Index k = 1; k + 1 < n; ++k)
    w.y.row(k + 1) = 0.5 * w.y.row(k) + 0.2 * w.y.row(k - 1) + 0.3 * w.u.row(k) + 0.1 * w.u.row(k - 1);
  sysid::FitOptions opt;
  opt.order = {2, 2};
  for (auto _ : st) benchmark::DoNotOptimize(sysid::fit_arx(w, opt));
}
BENCHMARK(BM_FitArx)->Arg(200)->Arg(2000);

static void BM_Dare(benchmark::State& st) {
  const auto n = st.range(0);
  Eigen::MatrixXd A = 0.5 * Eigen::MatrixXd::Identity(n, n) + 0.05 * Eigen::MatrixXd::Random(n, n);
  Eigen::MatrixXd B = Eigen::MatrixXd::Random(n, 2);
  Eigen::MatrixXd Q = Eigen::MatrixXd::Identity(n, n), R = Eigen::MatrixXd::Identity(2, 2);
  for (auto _ : st) benchmark::DoNotOptimize(mimo::dare_solve(A, B, Q, R));
}
BENCHMARK(BM_Dare)->Arg(4)->Arg(12);

static void BM_RunScenario(benchmark::State& st) {
  const auto names = harness::builtin_names();
  const auto spec = harness::builtin_scenario(names.at(static_cast<std::size_t>(st.range(0))));
  for (auto _ : st) benchmark::DoNotOptimize(harness::run_scenario(spec));
  st.SetLabel(spec.name);
}
BENCHMARK(BM_RunScenario)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK_MAIN();
