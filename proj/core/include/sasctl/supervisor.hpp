#pragma once

#include <deque>
#include <optional>
#include <string_view>
#include <vector>

#include "sasctl/mimo.hpp"

namespace sasctl::supervisor {

enum class State { Safe, Emergency, Disturbance };
std::string_view state_name(State s) noexcept;

struct Thresholds {
  double qos_tolerance = 0.10;  // trackable when filtered QoS >= (1 - tol) * ref
  double power_margin = 0.95;   // "at budget" when filtered power >= margin * tdp
  int persistence = 3;          // supervisor periods to confirm a guard
  double headroom = 1.10;       // SAFE power_ref = filtered power * headroom
  double over_tolerance = 0.05; // "over tdp" when filtered power > (1 + tol) * tdp
  int window = 4;               // moving-average length, samples
};

class MovingAverage {
 public:
  explicit MovingAverage(int window = 4);
  void push(double v);
  bool empty() const noexcept { return values_.empty(); }
  double value() const;  // 0 when empty
  int window() const noexcept { return window_; }

 private:
  int window_;
  std::deque<double> values_;
};

struct HighLevelModel {
  double tdp = 5.0;           // W, chip-level cap
  double qos_ref = 60.0;      // QoS units
  double little_floor = 0.0;  // W reserved for the Little cluster
  double min_power = 0.0;     // W, lowest reachable chip power
  MovingAverage qos{4};
  MovingAverage power{4};
  double measured_qos = 0.0;
  double measured_power = 0.0;
  bool qos_trackable = true;

  double big_budget() const { return tdp - little_floor; }
};

HighLevelModel make_model(double tdp, double qos_ref, double little_floor, double min_power,
                          const Thresholds& th = {});

struct Measurement {
  double t = 0.0;
  double qos = 0.0;
  double power = 0.0;  // chip total
};

// Feeds a batch of samples through the filters and re-estimates
// trackability. Throws Error(Config) if the timestamps go backwards.
HighLevelModel update_model(HighLevelModel model, const std::vector<Measurement>& batch,
                            const Thresholds& th = {});

struct Events {
  std::optional<double> tdp;      // new TDP, W
  std::optional<double> qos_ref;  // new QoS reference
};

struct Directive {
  mimo::GainLabel gains = mimo::GainLabel::QosOriented;
  double power_ref = 0.0;  // chip total, W
  double qos_ref = 0.0;
  double big_budget = 0.0;
  double little_budget = 0.0;

  bool operator==(const Directive&) const = default;
};

struct SupervisorState {
  State state = State::Safe;
  // Consecutive supervisor periods each guard condition has held.
  int over_run = 0;     // filtered power above tdp
  int starved_run = 0;  // QoS not trackable while power is at the budget
  int tracked_run = 0;  // QoS trackable
  int met_run = 0;      // QoS at or above the full reference
  bool released = true; // EMERGENCY may be left (tdp restored, or entered on overpower)
};

// Instantaneous guard outcomes for one supervisor period.
struct Guards {
  bool tdp_cut = false;
  bool tdp_raised = false;
  bool over = false;
  bool starved = false;
  bool tracked = false;
  bool met = false;
};

// Pure transition function shared by supervisor_step and the reachability
// check.
SupervisorState transition(const SupervisorState& s, const Guards& g, int persistence);

struct StepResult {
  HighLevelModel model;
  SupervisorState state;
  Directive directive;
};

StepResult supervisor_step(const HighLevelModel& model, const SupervisorState& state, const Events& events,
                           const Thresholds& th = {});

// Breadth-first search over the abstract FSM (guards treated as free
// choices): true if SAFE is reachable from every state.
bool safe_reachable_from_all();

}  // namespace sasctl::supervisor
