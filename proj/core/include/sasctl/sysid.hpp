#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "sasctl/plant.hpp"

namespace sasctl::sysid {

// Uniformly sampled input/output record. Row k holds u(k) and y(k); the
// plant answers u(k) at y(k+1).
struct Waveform {
  double dt = 0.05;
  Eigen::MatrixXd u;  // samples x inputs
  Eigen::MatrixXd y;  // samples x outputs
  std::vector<std::string> input_labels;
  std::vector<std::string> output_labels;

  Eigen::Index size() const { return u.rows(); }
};

struct ArxOrder {
  int na = 1;
  int nb = 1;
};

// y(k+1) = sum_i a[i] y(k-i) + sum_j b[j] u(k-j), all in deviation units
// ((value - offset) / scale).
struct ArxModel {
  ArxOrder order;
  std::vector<Eigen::MatrixXd> a;  // na blocks, outputs x outputs
  std::vector<Eigen::MatrixXd> b;  // nb blocks, outputs x inputs
  Eigen::VectorXd input_offset;
  Eigen::VectorXd output_offset;
  Eigen::VectorXd input_scale;
  Eigen::VectorXd output_scale;
  std::vector<std::string> input_labels;
  std::vector<std::string> output_labels;
  std::optional<int> region;

  int inputs() const { return static_cast<int>(input_offset.size()); }
  int outputs() const { return static_cast<int>(output_offset.size()); }

  // First-order SISO convenience: y(k+1) = a y(k) + b u(k).
  static ArxModel first_order(double a, double b, double u0 = 0.0, double y0 = 0.0);
  double siso_a() const { return a.at(0)(0, 0); }
  double siso_b() const { return b.at(0)(0, 0); }
};

struct FitReport {
  double fit_percent = 0.0;        // mean NRMSE fit over outputs
  double residual_variance = 0.0;  // mean over outputs, squared output units
  double guardband = 0.3;          // uncertainty multiplier handed to tuning
  std::size_t samples = 0;
};

struct FitOptions {
  ArxOrder order;
  // Deviation scales per input/output; empty means 1.
  Eigen::VectorXd input_scale;
  Eigen::VectorXd output_scale;
  double guardband = 0.3;
  std::optional<int> region;
};

// Least-squares one-step-ahead fit about the waveform means.
std::pair<ArxModel, FitReport> fit_arx(const Waveform& w, const FitOptions& opt = {});

// One-step-ahead prediction in physical units; rows before the model's
// memory is filled repeat the measurement.
Eigen::MatrixXd predict_one_step(const ArxModel& m, const Waveform& w);
double prediction_rmse(const ArxModel& m, const Waveform& w, int output = 0);

struct StateSpaceModel {
  Eigen::MatrixXd A, B, C, D;
  Eigen::VectorXd input_offset, output_offset;
  Eigen::VectorXd input_scale, output_scale;
  std::vector<std::string> input_labels;
  std::vector<std::string> output_labels;
  // Number of stacked output samples in the state; the rest are past inputs.
  int output_lags = 1;

  int states() const { return static_cast<int>(A.rows()); }
  int inputs() const { return static_cast<int>(B.cols()); }
  int outputs() const { return static_cast<int>(C.rows()); }
  // Throws Error(Dimension) on inconsistent shapes.
  void validate() const;
};

// Realization with x(k) = [y(k) .. y(k-na+1), u(k-1) .. u(k-nb+1)]: the state
// is built from measured history only. First order gives A=[a], B=[b], C=[1].
StateSpaceModel arx_to_statespace(const ArxModel& m);

// ---- stimuli ------------------------------------------------------------

// Levels ascending then descending, each held steps_per_level samples.
std::vector<int> staircase_stimulus(const plant::VfTable& vf,
                                    const std::optional<plant::OperatingRegion>& region,
                                    int steps_per_level);
// Sine sweep over the same levels, quantized to the table.
std::vector<int> sine_stimulus(const plant::VfTable& vf,
                               const std::optional<plant::OperatingRegion>& region,
                               int samples_per_period, int periods);

// (frequency, cores) pairs.
using MimoPoint = std::vector<int>;
// Frequency sweep at max cores, then cores at a mid frequency, then both.
std::vector<MimoPoint> staircase_mimo(const std::vector<int>& freqs, const std::vector<int>& cores,
                                      int steps_per_level);
// Every combination of the level sets, repeated and shuffled with a seeded
// permutation.
std::vector<MimoPoint> shuffled_grid(const std::vector<std::vector<int>>& level_sets, int repeats,
                                     std::uint64_t seed);

// ---- plant experiments ---------------------------------------------------

enum class OutputKind { ClusterPower, TotalPower, Qos };

struct Channel {
  int cluster = 0;
  enum class Knob { Frequency, Cores } knob = Knob::Frequency;
};

struct ExperimentSpec {
  std::vector<Channel> inputs;
  std::vector<OutputKind> outputs;
  int output_cluster = 0;  // for ClusterPower
  plant::Actuation base;   // values for knobs not driven by the stimulus
  double dt = 0.05;
};

// Drives the plant with the stimulus rows (one value per input channel) and
// records the aligned waveform.
Waveform run_experiment(const plant::PlantConfig& cfg, const ExperimentSpec& spec,
                        const std::vector<MimoPoint>& stimulus);

}  // namespace sasctl::sysid
