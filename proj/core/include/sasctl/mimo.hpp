#pragma once

#include <string>
#include <string_view>

#include <Eigen/Dense>

#include "sasctl/sysid.hpp"

namespace sasctl::mimo {

enum class GainLabel { QosOriented, PowerOriented, Custom };
std::string_view label_name(GainLabel l) noexcept;

struct WeightSpec {
  Eigen::VectorXd q;  // per-output weight on the integrated tracking error
  Eigen::VectorXd r;  // per-input effort weight
  double state_weight = 1e-4;   // small weight on the model state
  double effort_scale = 100.0;  // multiplies r
  double leak = 0.98;           // integrator forgetting factor, 1 = pure integrator

  void validate(int outputs, int inputs) const;
};

struct DareResult {
  Eigen::MatrixXd P;
  int iterations = 0;
  double residual = 0.0;  // infinity norm of the DARE defect
};

// Backward Riccati recursion from P = Q until the update falls below tol.
// Throws Error(Synthesis) if it does not converge within max_iterations.
DareResult dare_solve(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B, const Eigen::MatrixXd& Q,
                      const Eigen::MatrixXd& R, double tol = 1e-10, int max_iterations = 10000);
double dare_residual(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B, const Eigen::MatrixXd& Q,
                     const Eigen::MatrixXd& R, const Eigen::MatrixXd& P);

double spectral_radius(const Eigen::MatrixXd& M);

struct MimoGains {
  Eigen::MatrixXd K;  // inputs x (states + outputs)
  GainLabel label = GainLabel::Custom;
  double dt = 0.05;
  double leak = 1.0;
  double dare_residual = 0.0;
  double closed_loop_radius = 0.0;
  int iterations = 0;
};

// Augmented pair [x; z] with z(k+1) = leak z(k) + dt (r - y(k)).
Eigen::MatrixXd augmented_A(const sysid::StateSpaceModel& model, double dt, double leak);
Eigen::MatrixXd augmented_B(const sysid::StateSpaceModel& model);

// LQ state feedback on the integrator-augmented model. Throws Error(Synthesis)
// if the recursion fails or the closed loop is not stable.
MimoGains synthesize_lqr(const sysid::StateSpaceModel& model, const WeightSpec& weights, double dt,
                         GainLabel label = GainLabel::Custom);

struct MimoState {
  Eigen::VectorXd z;       // normalized integrated error
  Eigen::MatrixXd y_hist;  // outputs x output_lags, newest first
  Eigen::MatrixXd u_hist;  // inputs x (input lags), newest first
  bool primed = false;
};

MimoState initial_state(const sysid::StateSpaceModel& model);

struct MimoOutput {
  MimoState state;
  Eigen::VectorXd inputs;  // physical units, continuous
};

// One control period: rebuild the state from measured history, update the
// integrator, u = offset + scale * (-K [x; z]).
MimoOutput mimo_step(const MimoGains& gains, const sysid::StateSpaceModel& model, const MimoState& state,
                     const Eigen::VectorXd& references, const Eigen::VectorXd& measured, double dt);

// Installs new gains for the next step. The integrator is re-expressed so the
// new gains reproduce the last control (bumpless transfer).
// Throws Error(Dimension) if the gain shape does not fit the state.
MimoState swap_gains(const MimoState& state, const MimoGains& current, const MimoGains& next);

}  // namespace sasctl::mimo
