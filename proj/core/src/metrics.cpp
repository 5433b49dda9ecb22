#include "sasctl/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "sasctl/error.hpp"

namespace sasctl::metrics {

namespace {

[[noreturn]] void fail(const std::string& msg) { throw Error(ErrorCategory::Metrics, msg); }

void check_output(const Trace& tr, int output) {
  if (output < 0 || output >= static_cast<int>(tr.output_names.size())) fail("output index out of range");
}

double meas(const Trace& tr, std::size_t i, int o) { return tr.samples[i].measured[static_cast<std::size_t>(o)]; }
double ref(const Trace& tr, std::size_t i, int o) { return tr.samples[i].references[static_cast<std::size_t>(o)]; }

std::size_t index_at(const Trace& tr, double t) {
  auto it = std::lower_bound(tr.samples.begin(), tr.samples.end(), t - 1e-9,
                             [](const TraceSample& s, double v) { return s.t < v; });
  return static_cast<std::size_t>(it - tr.samples.begin());
}

// Centered average of length len, clipped to samples [first, last].
double smoothed(const Trace& tr, std::size_t i, int o, int len, std::size_t first, std::size_t last) {
  const std::ptrdiff_t h = len / 2;
  const auto lo = std::max<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(first), static_cast<std::ptrdiff_t>(i) - h);
  const auto hi = std::min<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(last), static_cast<std::ptrdiff_t>(i) + (len - 1 - h));
  double s = 0.0;
  for (auto k = lo; k <= hi; ++k) s += meas(tr, static_cast<std::size_t>(k), o);
  return s / static_cast<double>(hi - lo + 1);
}

double second_half_mean(const Trace& tr, std::size_t b, std::size_t e, int o) {
  if (e <= b) fail("empty segment");
  const std::size_t mid = b + (e - b) / 2;
  double s = 0.0;
  for (std::size_t i = mid; i < e; ++i) s += meas(tr, i, o);
  return s / static_cast<double>(e - mid);
}

// Steady sample indices of one output.
std::vector<std::size_t> steady_indices(const Trace& tr, int o, const Options& opt) {
  const auto changes = reference_changes(tr, o);
  std::vector<std::size_t> bounds{0};
  bounds.insert(bounds.end(), changes.begin(), changes.end());
  bounds.push_back(tr.samples.size());
  std::vector<std::size_t> out;
  for (std::size_t s = 0; s + 1 < bounds.size(); ++s) {
    const std::size_t b = bounds[s], e = bounds[s + 1];
    if (e <= b) continue;
    std::size_t from = b;
    if (b > 0) {
      const auto st = settling_time(tr, o, tr.samples[b].t, opt);
      if (st.settled)
        from = b + static_cast<std::size_t>(std::lround(st.time_s / tr.dt));
      else
        from = b + (e - b) / 2;
    }
    for (std::size_t i = from; i < e; ++i)
      if (tr.samples[i].t >= opt.warmup_s - 1e-9) out.push_back(i);
  }
  return out;
}

}  // namespace

void Trace::validate() const {
  if (!(dt > 0.0)) fail("trace dt must be > 0");
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& s = samples[i];
    if (s.references.size() != output_names.size() || s.measured.size() != output_names.size() ||
        s.actuation.size() != input_names.size())
      fail("trace row " + std::to_string(i) + " has the wrong width");
    if (i > 0 && !(s.t > samples[i - 1].t)) fail("trace time not strictly increasing at row " + std::to_string(i));
  }
}

int Trace::output_index(const std::string& name) const {
  for (std::size_t i = 0; i < output_names.size(); ++i)
    if (output_names[i] == name) return static_cast<int>(i);
  fail("trace has no output named '" + name + "'");
}

std::vector<std::size_t> reference_changes(const Trace& trace, int output) {
  check_output(trace, output);
  std::vector<std::size_t> out;
  for (std::size_t i = 1; i < trace.samples.size(); ++i)
    if (ref(trace, i, output) != ref(trace, i - 1, output)) out.push_back(i);
  return out;
}

Settling settling_time(const Trace& tr, int o, double change_time, const Options& opt, const SettlingWindow& win) {
  check_output(tr, o);
  if (tr.samples.empty()) fail("settling_time: empty trace");
  if (opt.dwell < 1 || opt.smoothing < 1) fail("settling_time: dwell and smoothing must be >= 1");
  const std::size_t i0 = index_at(tr, change_time);
  if (i0 == 0 || i0 >= tr.samples.size()) fail("settling_time: change time must lie inside the trace");

  const auto changes = reference_changes(tr, o);
  std::size_t end = tr.samples.size(), pre = 0;
  for (auto c : changes) {
    if (c > i0) {
      end = c;
      break;
    }
  }
  for (auto c : changes)
    if (c < i0) pre = c;
  if (win.post_end) end = std::min(tr.samples.size(), index_at(tr, *win.post_end));
  if (win.pre_start) pre = index_at(tr, *win.pre_start);
  if (end <= i0 || pre >= i0) fail("settling_time: empty segment around the change");

  Settling r;
  r.change_time = tr.samples[i0].t;
  r.steady_before = second_half_mean(tr, pre, i0, o);
  r.steady_after = second_half_mean(tr, i0, end, o);
  const double step = r.steady_after - r.steady_before;
  const double scale = std::abs(step) > 1e-12 * std::max(1.0, std::abs(r.steady_after)) ? std::abs(step)
                                                                                        : std::abs(r.steady_after);
  const double band = opt.band_pct / 100.0 * scale;

  std::vector<double> s;
  for (std::size_t i = i0; i < end; ++i) s.push_back(smoothed(tr, i, o, opt.smoothing, i0, end - 1));
  const auto dwell = static_cast<std::size_t>(opt.dwell);

  if (std::abs(step) > 0.0) {
    const double sign = step > 0 ? 1.0 : -1.0;
    double worst = 0.0;
    for (double v : s) worst = std::max(worst, sign * (v - r.steady_after));
    r.overshoot_pct = 100.0 * worst / std::abs(step);
  }

  std::size_t run = 0;
  for (std::size_t j = 0; j < s.size(); ++j) {
    run = std::abs(s[j] - r.steady_after) <= band ? run + 1 : 0;
    if (run >= std::min(dwell, s.size())) {
      r.settled = true;
      r.time_s = static_cast<double>(j + 1 - run) * tr.dt;
      return r;
    }
  }
  r.time_s = static_cast<double>(s.size()) * tr.dt;
  return r;
}

double mse(const Trace& tr, int o, const Options& opt, const SampleFilter& keep) {
  check_output(tr, o);
  if (tr.samples.empty()) fail("mse: empty trace");
  double sum = 0.0;
  std::size_t n = 0;
  for (auto i : steady_indices(tr, o, opt)) {
    if (keep && !keep(tr.samples[i])) continue;
    const double e = ref(tr, i, o) - meas(tr, i, o);
    sum += e * e;
    ++n;
  }
  if (n == 0) fail("mse: no steady samples");
  return sum / static_cast<double>(n);
}

double steady_state_error_pct(const Trace& tr, int o, const Options& opt) {
  check_output(tr, o);
  if (tr.samples.empty()) fail("steady_state_error_pct: empty trace");
  double sum = 0.0;
  std::size_t n = 0;
  for (auto i : steady_indices(tr, o, opt)) {
    const double r = ref(tr, i, o);
    if (r == 0.0) continue;
    sum += 100.0 * (r - meas(tr, i, o)) / std::abs(r);
    ++n;
  }
  if (n == 0) fail("steady_state_error_pct: no steady samples");
  return sum / static_cast<double>(n);
}

std::pair<double, double> over_under_target(const Trace& tr, int o, double t0, double t1) {
  check_output(tr, o);
  double over = 0.0, under = 0.0;
  for (std::size_t i = 0; i < tr.samples.size(); ++i) {
    const double t = tr.samples[i].t;
    if (t < t0 - 1e-9 || t >= t1 - 1e-9) continue;
    const double d = meas(tr, i, o) - ref(tr, i, o);
    if (d > 0) over += d * tr.dt;
    else under -= d * tr.dt;
  }
  return {over, under};
}

std::size_t actuation_count(const Trace& tr, double t0, double t1) {
  std::size_t n = 0;
  for (std::size_t i = 1; i < tr.samples.size(); ++i) {
    if (tr.samples[i - 1].t < t0 - 1e-9 || tr.samples[i].t >= t1 - 1e-9) continue;
    if (tr.samples[i].actuation != tr.samples[i - 1].actuation) ++n;
  }
  return n;
}

MetricsReport compute_report(const Trace& tr, const Options& opt, double t0, double t1) {
  tr.validate();
  const std::size_t b = index_at(tr, t0), e = std::min(tr.samples.size(), index_at(tr, t1));
  if (e <= b) fail("compute_report: no samples in the window");
  MetricsReport rep;
  rep.t0 = tr.samples[b].t;
  rep.t1 = tr.samples[e - 1].t + tr.dt;
  rep.samples = e - b;
  rep.actuation_count = actuation_count(tr, t0, t1);

  // Steady metrics use the whole trace's segments restricted to the window.
  for (int o = 0; o < static_cast<int>(tr.output_names.size()); ++o) {
    OutputMetrics m;
    m.name = tr.output_names[static_cast<std::size_t>(o)];
    for (std::size_t i = b; i < e; ++i) {
      m.mean_measured += meas(tr, i, o);
      m.mean_reference += ref(tr, i, o);
    }
    m.mean_measured /= static_cast<double>(e - b);
    m.mean_reference /= static_cast<double>(e - b);
    std::tie(m.over, m.under) = over_under_target(tr, o, t0, t1);

    double sq = 0.0, pct = 0.0;
    std::size_t n = 0, np = 0;
    for (auto i : steady_indices(tr, o, opt)) {
      if (i < b || i >= e) continue;
      const double r = ref(tr, i, o), y = meas(tr, i, o);
      sq += (r - y) * (r - y);
      ++n;
      if (r != 0.0) {
        pct += 100.0 * (r - y) / std::abs(r);
        ++np;
      }
    }
    m.has_steady = n > 0;
    if (n > 0) m.mse = sq / static_cast<double>(n);
    if (np > 0) m.steady_state_error_pct = pct / static_cast<double>(np);

    for (auto c : reference_changes(tr, o)) {
      if (c < b || c >= e) continue;
      m.settling.push_back(settling_time(tr, o, tr.samples[c].t, opt));
    }
    if (!m.settling.empty()) {
      double s = 0.0;
      for (const auto& st : m.settling) {
        s += st.time_s;
        m.max_overshoot_pct = std::max(m.max_overshoot_pct, st.overshoot_pct);
      }
      m.avg_response_time = s / static_cast<double>(m.settling.size());
    }
    rep.outputs.push_back(std::move(m));
  }
  return rep;
}

}  // namespace sasctl::metrics
