#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace sasctl::metrics {

struct TraceSample {
  double t = 0.0;
  std::vector<double> references;  // per output
  std::vector<double> measured;    // per output
  std::vector<double> actuation;   // per input, quantized
  std::string gain_label;
  std::string supervisor_state;
};

struct Trace {
  double dt = 0.05;
  std::vector<std::string> output_names;
  std::vector<std::string> input_names;
  std::vector<TraceSample> samples;

  // Throws Error(Metrics) on non-increasing time or ragged rows.
  void validate() const;
  int output_index(const std::string& name) const;
};

struct Options {
  double warmup_s = 5.0;
  double band_pct = 5.0;
  int dwell = 10;      // samples the output must stay in band
  int smoothing = 3;   // centered moving-average length applied before the band test
};

struct Settling {
  double time_s = 0.0;
  bool settled = false;
  double change_time = 0.0;
  double steady_before = 0.0;
  double steady_after = 0.0;
  double overshoot_pct = 0.0;
};

struct SettlingWindow {
  std::optional<double> pre_start;  // start of the pre-change segment (default: previous change)
  std::optional<double> post_end;   // end of the post-change segment (default: next change)
};

// Time after change_time until the smoothed output enters band_pct of the
// step size around the post-change steady value (mean of the second half of
// the segment) and stays there for the dwell.
Settling settling_time(const Trace& trace, int output, double change_time, const Options& opt = {},
                       const SettlingWindow& win = {});

// Indices where the reference of the output differs from the previous sample.
std::vector<std::size_t> reference_changes(const Trace& trace, int output);

using SampleFilter = std::function<bool(const TraceSample&)>;

// Mean squared tracking error over steady samples: after warm-up, excluding
// each segment's settling transient (second half only if it never settles).
double mse(const Trace& trace, int output, const Options& opt = {}, const SampleFilter& keep = {});
// Same sample set, mean of (reference - measured) / reference in percent.
double steady_state_error_pct(const Trace& trace, int output, const Options& opt = {});

// Rectangle-rule integrals of the part above and below the reference.
std::pair<double, double> over_under_target(const Trace& trace, int output, double t0 = -1e300,
                                            double t1 = 1e300);

// Consecutive sample pairs whose actuation differs.
std::size_t actuation_count(const Trace& trace, double t0 = -1e300, double t1 = 1e300);

struct OutputMetrics {
  std::string name;
  double mse = 0.0;
  double steady_state_error_pct = 0.0;
  double mean_measured = 0.0;
  double mean_reference = 0.0;
  double over = 0.0;
  double under = 0.0;
  std::vector<Settling> settling;
  double avg_response_time = 0.0;
  double max_overshoot_pct = 0.0;
  bool has_steady = false;
};

struct MetricsReport {
  double t0 = 0.0;
  double t1 = 0.0;
  std::size_t samples = 0;
  std::size_t actuation_count = 0;
  std::vector<OutputMetrics> outputs;
};

// Metrics over samples with t in [t0, t1). Throws Error(Metrics) on an empty
// window.
MetricsReport compute_report(const Trace& trace, const Options& opt = {}, double t0 = -1e300,
                             double t1 = 1e300);

}  // namespace sasctl::metrics
