#include "sasctl/sysid.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "sasctl/error.hpp"

namespace sasctl::sysid {

namespace {

[[noreturn]] void not_identifiable(const std::string& msg) {
  throw Error(ErrorCategory::NotIdentifiable, msg);
}

Eigen::VectorXd scale_or_ones(const Eigen::VectorXd& s, Eigen::Index n, const char* what) {
  if (s.size() == 0) return Eigen::VectorXd::Ones(n);
  if (s.size() != n) throw Error(ErrorCategory::Dimension, std::string("fit_arx: ") + what + " size mismatch");
  if ((s.array() <= 0.0).any()) throw Error(ErrorCategory::Config, std::string("fit_arx: ") + what + " must be > 0");
  return s;
}

std::vector<int> levels_for(const plant::VfTable& vf, const std::optional<plant::OperatingRegion>& region) {
  std::vector<int> levels = region ? plant::region_frequencies(vf, *region) : vf.frequencies();
  if (levels.empty()) throw Error(ErrorCategory::Config, "stimulus: region contains no frequency levels");
  return levels;
}

// Regressor row for predicting y(k+1): [y(k)..y(k-na+1), u(k)..u(k-nb+1)].
Eigen::RowVectorXd regressor(const Eigen::MatrixXd& yn, const Eigen::MatrixXd& un, Eigen::Index k,
                             const ArxOrder& o) {
  const Eigen::Index p = yn.cols(), m = un.cols();
  Eigen::RowVectorXd row(o.na * p + o.nb * m);
  Eigen::Index c = 0;
  for (int i = 0; i < o.na; ++i, c += p) row.segment(c, p) = yn.row(k - i);
  for (int j = 0; j < o.nb; ++j, c += m) row.segment(c, m) = un.row(k - j);
  return row;
}

}  // namespace

ArxModel ArxModel::first_order(double a, double b, double u0, double y0) {
  ArxModel m;
  m.a = {Eigen::MatrixXd::Constant(1, 1, a)};
  m.b = {Eigen::MatrixXd::Constant(1, 1, b)};
  m.input_offset = Eigen::VectorXd::Constant(1, u0);
  m.output_offset = Eigen::VectorXd::Constant(1, y0);
  m.input_scale = Eigen::VectorXd::Ones(1);
  m.output_scale = Eigen::VectorXd::Ones(1);
  return m;
}

std::pair<ArxModel, FitReport> fit_arx(const Waveform& w, const FitOptions& opt) {
  const ArxOrder o = opt.order;
  if (o.na < 1 || o.nb < 1) throw Error(ErrorCategory::Config, "fit_arx: na and nb must be >= 1");
  const Eigen::Index N = w.u.rows(), m = w.u.cols(), p = w.y.cols();
  if (w.y.rows() != N) throw Error(ErrorCategory::Dimension, "fit_arx: input/output length mismatch");
  if (m < 1 || p < 1) throw Error(ErrorCategory::Dimension, "fit_arx: need at least one input and output");
  const int lag = std::max(o.na, o.nb);
  if (N < 10 * lag || N - lag < o.na * p + o.nb * m + 1)
    not_identifiable("fit_arx: waveform too short for the requested order");

  const Eigen::VectorXd us = scale_or_ones(opt.input_scale, m, "input_scale");
  const Eigen::VectorXd ys = scale_or_ones(opt.output_scale, p, "output_scale");
  const Eigen::RowVectorXd umean = w.u.colwise().mean();
  const Eigen::RowVectorXd ymean = w.y.colwise().mean();
  const Eigen::MatrixXd un = (w.u.rowwise() - umean).array().rowwise() / us.transpose().array();
  const Eigen::MatrixXd yn = (w.y.rowwise() - ymean).array().rowwise() / ys.transpose().array();

  // Intercept column absorbs the mismatch between the sample means and the
  // model's equilibrium; it is folded back into the output offset below.
  const Eigen::Index rows = N - lag, cols = o.na * p + o.nb * m + 1;
  Eigen::MatrixXd X(rows, cols);
  Eigen::MatrixXd T(rows, p);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const Eigen::Index k = r + lag - 1;
    X.row(r).head(cols - 1) = regressor(yn, un, k, o);
    X(r, cols - 1) = 1.0;
    T.row(r) = yn.row(k + 1);
  }

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
  qr.setThreshold(1e-10);
  if (qr.rank() < cols) not_identifiable("fit_arx: regressor matrix is rank deficient (inputs not persistently exciting)");
  const Eigen::MatrixXd theta = qr.solve(T).transpose();  // p x cols

  ArxModel model;
  model.order = o;
  Eigen::Index c = 0;
  Eigen::MatrixXd asum = Eigen::MatrixXd::Zero(p, p);
  for (int i = 0; i < o.na; ++i, c += p) {
    model.a.push_back(theta.block(0, c, p, p));
    asum += model.a.back();
  }
  for (int j = 0; j < o.nb; ++j, c += m) model.b.push_back(theta.block(0, c, p, m));
  const Eigen::VectorXd intercept = theta.col(cols - 1);

  // y0 such that the intercept vanishes: (I - sum a) dy = intercept.
  Eigen::VectorXd shift = Eigen::VectorXd::Zero(p);
  const Eigen::MatrixXd gap = Eigen::MatrixXd::Identity(p, p) - asum;
  Eigen::FullPivLU<Eigen::MatrixXd> lu(gap);
  if (lu.isInvertible()) shift = lu.solve(intercept);

  model.input_offset = umean.transpose();
  model.output_offset = ymean.transpose() + (ys.array() * shift.array()).matrix();
  model.input_scale = us;
  model.output_scale = ys;
  model.input_labels = w.input_labels;
  model.output_labels = w.output_labels;
  model.region = opt.region;

  const Eigen::MatrixXd resid = T - X * theta.transpose();
  FitReport rep;
  rep.samples = static_cast<std::size_t>(rows);
  rep.guardband = opt.guardband;
  double fit_sum = 0.0, var_sum = 0.0;
  for (Eigen::Index j = 0; j < p; ++j) {
    const double e = resid.col(j).norm();
    const double d = (T.col(j).array() - T.col(j).mean()).matrix().norm();
    fit_sum += d > 0.0 ? 100.0 * (1.0 - e / d) : (e == 0.0 ? 100.0 : 0.0);
    const double mu = resid.col(j).mean();
    var_sum += (resid.col(j).array() - mu).square().mean() * ys(j) * ys(j);
  }
  rep.fit_percent = fit_sum / static_cast<double>(p);
  rep.residual_variance = var_sum / static_cast<double>(p);
  return {std::move(model), rep};
}

Eigen::MatrixXd predict_one_step(const ArxModel& m, const Waveform& w) {
  const Eigen::Index N = w.u.rows();
  if (w.u.cols() != m.inputs() || w.y.cols() != m.outputs())
    throw Error(ErrorCategory::Dimension, "predict_one_step: waveform does not match model");
  const Eigen::MatrixXd un =
      (w.u.rowwise() - m.input_offset.transpose()).array().rowwise() / m.input_scale.transpose().array();
  const Eigen::MatrixXd yn =
      (w.y.rowwise() - m.output_offset.transpose()).array().rowwise() / m.output_scale.transpose().array();
  Eigen::MatrixXd out = w.y;
  const int lag = std::max(m.order.na, m.order.nb);
  for (Eigen::Index k = lag - 1; k + 1 < N; ++k) {
    Eigen::VectorXd acc = Eigen::VectorXd::Zero(m.outputs());
    for (int i = 0; i < m.order.na; ++i) acc += m.a[static_cast<std::size_t>(i)] * yn.row(k - i).transpose();
    for (int j = 0; j < m.order.nb; ++j) acc += m.b[static_cast<std::size_t>(j)] * un.row(k - j).transpose();
    out.row(k + 1) = (acc.array() * m.output_scale.array() + m.output_offset.array()).transpose();
  }
  return out;
}

double prediction_rmse(const ArxModel& m, const Waveform& w, int output) {
  const Eigen::MatrixXd yhat = predict_one_step(m, w);
  const int lag = std::max(m.order.na, m.order.nb);
  const Eigen::Index n = w.y.rows() - lag;
  if (n <= 0) throw Error(ErrorCategory::NotIdentifiable, "prediction_rmse: waveform too short");
  const Eigen::VectorXd e = w.y.col(output).tail(n) - yhat.col(output).tail(n);
  return std::sqrt(e.squaredNorm() / static_cast<double>(n));
}

void StateSpaceModel::validate() const {
  const auto n = A.rows();
  auto fail = [](const char* msg) { throw Error(ErrorCategory::Dimension, msg); };
  if (A.cols() != n || n == 0) fail("state-space: A must be square and non-empty");
  if (B.rows() != n) fail("state-space: B row count must match A");
  if (C.cols() != n) fail("state-space: C column count must match A");
  if (D.rows() != C.rows() || D.cols() != B.cols()) fail("state-space: D must be outputs x inputs");
  if (input_offset.size() != B.cols() || input_scale.size() != B.cols())
    fail("state-space: input offset/scale size mismatch");
  if (output_offset.size() != C.rows() || output_scale.size() != C.rows())
    fail("state-space: output offset/scale size mismatch");
}

StateSpaceModel arx_to_statespace(const ArxModel& m) {
  const int p = m.outputs(), q = m.inputs(), na = m.order.na, nb = m.order.nb;
  const int ny = na * p, n = ny + (nb - 1) * q;
  StateSpaceModel ss;
  ss.A = Eigen::MatrixXd::Zero(n, n);
  ss.B = Eigen::MatrixXd::Zero(n, q);
  ss.C = Eigen::MatrixXd::Zero(p, n);
  ss.D = Eigen::MatrixXd::Zero(p, q);

  for (int i = 0; i < na; ++i) ss.A.block(0, i * p, p, p) = m.a[static_cast<std::size_t>(i)];
  for (int j = 1; j < nb; ++j) ss.A.block(0, ny + (j - 1) * q, p, q) = m.b[static_cast<std::size_t>(j)];
  ss.B.topRows(p) = m.b[0];
  for (int i = 1; i < na; ++i) ss.A.block(i * p, (i - 1) * p, p, p).setIdentity();
  if (nb > 1) {
    ss.B.block(ny, 0, q, q).setIdentity();
    for (int j = 2; j < nb; ++j) ss.A.block(ny + (j - 1) * q, ny + (j - 2) * q, q, q).setIdentity();
  }
  ss.C.leftCols(p).setIdentity();

  ss.input_offset = m.input_offset;
  ss.output_offset = m.output_offset;
  ss.input_scale = m.input_scale;
  ss.output_scale = m.output_scale;
  ss.input_labels = m.input_labels;
  ss.output_labels = m.output_labels;
  ss.output_lags = na;
  return ss;
}

std::vector<int> staircase_stimulus(const plant::VfTable& vf,
                                    const std::optional<plant::OperatingRegion>& region,
                                    int steps_per_level) {
  if (steps_per_level < 1) throw Error(ErrorCategory::Config, "staircase: steps_per_level must be >= 1");
  const auto levels = levels_for(vf, region);
  std::vector<int> out;
  out.reserve(levels.size() * 2 * static_cast<std::size_t>(steps_per_level));
  auto hold = [&](int f) { out.insert(out.end(), static_cast<std::size_t>(steps_per_level), f); };
  for (int f : levels) hold(f);
  for (auto it = levels.rbegin(); it != levels.rend(); ++it) hold(*it);
  return out;
}

std::vector<int> sine_stimulus(const plant::VfTable& vf, const std::optional<plant::OperatingRegion>& region,
                               int samples_per_period, int periods) {
  if (samples_per_period < 2 || periods < 1)
    throw Error(ErrorCategory::Config, "sine stimulus: need >= 2 samples per period and >= 1 period");
  const auto levels = levels_for(vf, region);
  const double span = static_cast<double>(levels.size() - 1);
  std::vector<int> out;
  for (int k = 0; k < samples_per_period * periods; ++k) {
    const double phase = 2.0 * std::numbers::pi * k / samples_per_period;
    const auto idx = static_cast<std::size_t>(std::lround(0.5 * span * (1.0 - std::cos(phase))));
    out.push_back(levels[idx]);
  }
  return out;
}

std::vector<MimoPoint> staircase_mimo(const std::vector<int>& freqs, const std::vector<int>& cores,
                                      int steps_per_level) {
  if (freqs.empty() || cores.empty()) throw Error(ErrorCategory::Config, "staircase_mimo: empty level set");
  if (steps_per_level < 1) throw Error(ErrorCategory::Config, "staircase_mimo: steps_per_level must be >= 1");
  auto there_and_back = [](std::vector<int> v) {
    std::vector<int> r = v;
    r.insert(r.end(), v.rbegin(), v.rend());
    return r;
  };
  const auto F = there_and_back(freqs), C = there_and_back(cores);
  const int cmax = *std::max_element(cores.begin(), cores.end());
  const int fmid = freqs[freqs.size() / 2];
  std::vector<MimoPoint> out;
  auto hold = [&](int f, int c) {
    for (int i = 0; i < steps_per_level; ++i) out.push_back({f, c});
  };
  for (int f : F) hold(f, cmax);
  for (int c : C) hold(fmid, c);
  for (std::size_t i = 0; i < F.size(); ++i) hold(F[i], C[i % C.size()]);
  return out;
}

std::vector<MimoPoint> shuffled_grid(const std::vector<std::vector<int>>& level_sets, int repeats,
                                     std::uint64_t seed) {
  if (level_sets.empty() || repeats < 1) throw Error(ErrorCategory::Config, "shuffled_grid: bad arguments");
  std::vector<MimoPoint> grid{{}};
  for (const auto& set : level_sets) {
    if (set.empty()) throw Error(ErrorCategory::Config, "shuffled_grid: empty level set");
    std::vector<MimoPoint> next;
    for (const auto& g : grid)
      for (int v : set) {
        auto e = g;
        e.push_back(v);
        next.push_back(std::move(e));
      }
    grid = std::move(next);
  }
  std::vector<MimoPoint> out;
  for (int r = 0; r < repeats; ++r) out.insert(out.end(), grid.begin(), grid.end());
  std::mt19937_64 rng(seed);
  std::shuffle(out.begin(), out.end(), rng);
  return out;
}

Waveform run_experiment(const plant::PlantConfig& cfg, const ExperimentSpec& spec,
                        const std::vector<MimoPoint>& stimulus) {
  if (stimulus.empty()) throw Error(ErrorCategory::Config, "experiment: empty stimulus");
  if (spec.inputs.empty() || spec.outputs.empty())
    throw Error(ErrorCategory::Config, "experiment: need at least one input and output");
  const auto m = static_cast<Eigen::Index>(spec.inputs.size());
  const auto p = static_cast<Eigen::Index>(spec.outputs.size());

  auto actuation = [&](const MimoPoint& row) {
    if (static_cast<Eigen::Index>(row.size()) != m)
      throw Error(ErrorCategory::Dimension, "experiment: stimulus row width does not match inputs");
    plant::Actuation a = spec.base;
    for (std::size_t i = 0; i < row.size(); ++i) {
      const auto& ch = spec.inputs[i];
      if (ch.cluster < 0 || ch.cluster >= static_cast<int>(a.size()))
        throw Error(ErrorCategory::Config, "experiment: input cluster out of range");
      auto& cs = a[static_cast<std::size_t>(ch.cluster)];
      (ch.knob == Channel::Knob::Frequency ? cs.mhz : cs.active_cores) = row[i];
    }
    return a;
  };
  auto extract = [&](const plant::SensorReading& r, Eigen::Index k, Waveform& w) {
    for (Eigen::Index j = 0; j < p; ++j) {
      switch (spec.outputs[static_cast<std::size_t>(j)]) {
        case OutputKind::ClusterPower: w.y(k, j) = r.power.at(static_cast<std::size_t>(spec.output_cluster)); break;
        case OutputKind::TotalPower: w.y(k, j) = r.total_power(); break;
        case OutputKind::Qos: w.y(k, j) = r.qos; break;
      }
    }
  };

  const auto N = static_cast<Eigen::Index>(stimulus.size());
  Waveform w;
  w.dt = spec.dt;
  w.u.resize(N, m);
  w.y.resize(N, p);
  for (const auto& ch : spec.inputs)
    w.input_labels.push_back(cfg.clusters.at(static_cast<std::size_t>(ch.cluster)).name +
                             (ch.knob == Channel::Knob::Frequency ? "_mhz" : "_cores"));
  for (auto o : spec.outputs)
    w.output_labels.push_back(o == OutputKind::Qos ? "qos" : o == OutputKind::TotalPower ? "power_total" : "power");

  auto state = plant::make_state(cfg, actuation(stimulus[0]));
  auto first = plant::plant_step(state, cfg, actuation(stimulus[0]), spec.dt);
  state = first.state;
  extract(first.reading, 0, w);
  for (Eigen::Index k = 0; k < N; ++k) {
    for (Eigen::Index i = 0; i < m; ++i) w.u(k, i) = stimulus[static_cast<std::size_t>(k)][static_cast<std::size_t>(i)];
    if (k + 1 < N) {
      auto r = plant::plant_step(state, cfg, actuation(stimulus[static_cast<std::size_t>(k)]), spec.dt);
      state = r.state;
      extract(r.reading, k + 1, w);
    }
  }
  return w;
}

}  // namespace sasctl::sysid
