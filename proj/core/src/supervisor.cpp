#include "sasctl/supervisor.hpp"

#include <algorithm>
#include <queue>
#include <set>
#include <tuple>

#include "sasctl/error.hpp"

namespace sasctl::supervisor {

std::string_view state_name(State s) noexcept {
  switch (s) {
    case State::Safe: return "SAFE";
    case State::Emergency: return "EMERGENCY";
    case State::Disturbance: return "DISTURBANCE";
  }
  return "SAFE";
}

MovingAverage::MovingAverage(int window) : window_(window) {
  if (window < 1) throw Error(ErrorCategory::Config, "moving average window must be >= 1");
}

void MovingAverage::push(double v) {
  values_.push_back(v);
  while (static_cast<int>(values_.size()) > window_) values_.pop_front();
}

double MovingAverage::value() const {
  if (values_.empty()) return 0.0;
  double s = 0.0;
  for (double v : values_) s += v;
  return s / static_cast<double>(values_.size());
}

HighLevelModel make_model(double tdp, double qos_ref, double little_floor, double min_power,
                          const Thresholds& th) {
  if (!(tdp > 0.0) || little_floor < 0.0 || little_floor >= tdp)
    throw Error(ErrorCategory::Config, "supervisor: need tdp > little_floor >= 0");
  HighLevelModel m;
  m.tdp = tdp;
  m.qos_ref = qos_ref;
  m.little_floor = little_floor;
  m.min_power = min_power;
  m.qos = MovingAverage(th.window);
  m.power = MovingAverage(th.window);
  return m;
}

HighLevelModel update_model(HighLevelModel model, const std::vector<Measurement>& batch, const Thresholds& th) {
  for (std::size_t i = 1; i < batch.size(); ++i)
    if (batch[i].t < batch[i - 1].t) throw Error(ErrorCategory::Config, "update_model: timestamps not monotone");
  if (batch.empty()) return model;
  for (const auto& m : batch) {
    model.qos.push(m.qos);
    model.power.push(m.power);
  }
  model.measured_qos = model.qos.value();
  model.measured_power = model.power.value();
  model.qos_trackable = model.measured_qos >= (1.0 - th.qos_tolerance) * model.qos_ref;
  return model;
}

SupervisorState transition(const SupervisorState& s, const Guards& g, int persistence) {
  SupervisorState n = s;
  auto enter = [&](State st, bool released) {
    n = SupervisorState{};
    n.state = st;
    n.released = released;
  };
  if (g.tdp_cut) {
    enter(State::Emergency, false);
    return n;
  }
  n.over_run = g.over ? s.over_run + 1 : 0;
  n.starved_run = g.starved ? s.starved_run + 1 : 0;
  n.tracked_run = g.tracked ? s.tracked_run + 1 : 0;
  n.met_run = g.met ? s.met_run + 1 : 0;

  switch (s.state) {
    case State::Safe:
      if (n.over_run >= persistence) enter(State::Emergency, true);
      else if (n.starved_run >= persistence) enter(State::Disturbance, true);
      break;
    case State::Emergency:
      if (g.tdp_raised && !n.released) {
        n.released = true;
        n.over_run = n.starved_run = n.tracked_run = n.met_run = 0;
      } else if (n.released) {
        if (n.tracked_run >= persistence) enter(State::Safe, true);
        else if (n.starved_run >= persistence) enter(State::Disturbance, true);
      }
      break;
    case State::Disturbance:
      if (n.over_run >= persistence) enter(State::Emergency, true);
      else if (n.met_run >= persistence) enter(State::Safe, true);
      break;
  }
  return n;
}

StepResult supervisor_step(const HighLevelModel& model, const SupervisorState& state, const Events& events,
                           const Thresholds& th) {
  StepResult out;
  out.model = model;
  HighLevelModel& m = out.model;
  Guards g;
  if (events.qos_ref) m.qos_ref = *events.qos_ref;
  if (events.tdp) {
    if (!(*events.tdp > m.little_floor)) throw Error(ErrorCategory::Config, "supervisor: tdp below the Little floor");
    g.tdp_cut = *events.tdp < m.tdp;
    g.tdp_raised = *events.tdp > m.tdp;
    m.tdp = *events.tdp;
  }
  const bool have = !m.power.empty();
  const double fq = m.qos.value(), fp = m.power.value();
  m.qos_trackable = !have || fq >= (1.0 - th.qos_tolerance) * m.qos_ref;
  if (have) {
    g.over = fp > (1.0 + th.over_tolerance) * m.tdp;
    g.tracked = m.qos_trackable;
    g.starved = !m.qos_trackable && fp >= th.power_margin * m.tdp;
    g.met = fq >= m.qos_ref;
  }
  out.state = transition(state, g, th.persistence);

  Directive& d = out.directive;
  d.qos_ref = m.qos_ref;
  d.big_budget = m.big_budget();
  d.little_budget = m.little_floor;
  if (out.state.state == State::Safe) {
    d.gains = mimo::GainLabel::QosOriented;
    d.power_ref = have ? std::clamp(fp * th.headroom, std::min(m.min_power, m.tdp), m.tdp) : m.tdp;
  } else {
    d.gains = mimo::GainLabel::PowerOriented;
    d.power_ref = m.tdp;
  }
  return out;
}

bool safe_reachable_from_all() {
  // Abstract state: (state, released). Runs are saturated at the persistence
  // count, so persistence 1 with all guard combinations covers every edge.
  using Key = std::tuple<int, bool>;
  std::vector<Guards> inputs;
  for (int bits = 0; bits < 64; ++bits) {
    Guards g;
    g.tdp_cut = bits & 1;
    g.tdp_raised = (bits & 2) && !g.tdp_cut;
    g.over = bits & 4;
    g.starved = bits & 8;
    g.tracked = (bits & 16) && !g.starved;
    g.met = (bits & 32) && g.tracked;
    inputs.push_back(g);
  }
  for (State start : {State::Safe, State::Emergency, State::Disturbance}) {
    for (bool rel : {false, true}) {
      SupervisorState s0;
      s0.state = start;
      s0.released = rel;
      std::set<Key> seen;
      std::queue<SupervisorState> q;
      q.push(s0);
      bool found = false;
      while (!q.empty() && !found) {
        const auto s = q.front();
        q.pop();
        if (!seen.insert({static_cast<int>(s.state), s.released}).second) continue;
        for (const auto& g : inputs) {
          auto n = transition(s, g, 1);
          if (n.state == State::Safe) {
            found = true;
            break;
          }
          q.push(n);
        }
      }
      if (!found) return false;
    }
  }
  return true;
}

}  // namespace sasctl::supervisor
