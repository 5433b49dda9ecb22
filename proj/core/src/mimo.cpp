#include "sasctl/mimo.hpp"

#include <cmath>

#include <Eigen/Eigenvalues>

#include "sasctl/error.hpp"

namespace sasctl::mimo {

namespace {

[[noreturn]] void synthesis(const std::string& msg) { throw Error(ErrorCategory::Synthesis, msg); }

Eigen::MatrixXd riccati_update(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B, const Eigen::MatrixXd& Q,
                               const Eigen::MatrixXd& R, const Eigen::MatrixXd& P) {
  const Eigen::MatrixXd BtP = B.transpose() * P;
  const Eigen::MatrixXd S = R + BtP * B;
  const Eigen::MatrixXd next = A.transpose() * P * A - (BtP * A).transpose() * S.ldlt().solve(BtP * A) + Q;
  return 0.5 * (next + next.transpose());
}

}  // namespace

std::string_view label_name(GainLabel l) noexcept {
  switch (l) {
    case GainLabel::QosOriented: return "qos_oriented";
    case GainLabel::PowerOriented: return "power_oriented";
    case GainLabel::Custom: return "custom";
  }
  return "custom";
}

void WeightSpec::validate(int outputs, int inputs) const {
  if (q.size() != outputs || r.size() != inputs)
    throw Error(ErrorCategory::Dimension, "weights: q must have one entry per output and r one per input");
  if ((q.array() <= 0.0).any() || (r.array() <= 0.0).any())
    throw Error(ErrorCategory::Config, "weights: all q and r entries must be > 0");
  if (!(state_weight > 0.0) || !(effort_scale > 0.0))
    throw Error(ErrorCategory::Config, "weights: state_weight and effort_scale must be > 0");
  if (!(leak > 0.0) || leak > 1.0) throw Error(ErrorCategory::Config, "weights: leak must be in (0, 1]");
}

double dare_residual(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B, const Eigen::MatrixXd& Q,
                     const Eigen::MatrixXd& R, const Eigen::MatrixXd& P) {
  return (P - riccati_update(A, B, Q, R, P)).cwiseAbs().rowwise().sum().maxCoeff();
}

DareResult dare_solve(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B, const Eigen::MatrixXd& Q,
                      const Eigen::MatrixXd& R, double tol, int max_iterations) {
  const auto n = A.rows();
  if (A.cols() != n || B.rows() != n || Q.rows() != n || Q.cols() != n || R.rows() != B.cols() ||
      R.cols() != B.cols())
    throw Error(ErrorCategory::Dimension, "dare: inconsistent matrix shapes");
  DareResult out;
  out.P = Q;
  for (int it = 1; it <= max_iterations; ++it) {
    Eigen::MatrixXd next = riccati_update(A, B, Q, R, out.P);
    if (!next.allFinite()) synthesis("dare: recursion diverged");
    const double step = (next - out.P).cwiseAbs().maxCoeff();
    out.P = std::move(next);
    out.iterations = it;
    if (step <= tol * std::max(1.0, out.P.cwiseAbs().maxCoeff())) {
      out.residual = dare_residual(A, B, Q, R, out.P);
      return out;
    }
  }
  synthesis("dare: no convergence within " + std::to_string(max_iterations) + " iterations");
}

double spectral_radius(const Eigen::MatrixXd& M) {
  if (M.rows() != M.cols()) throw Error(ErrorCategory::Dimension, "spectral_radius: matrix must be square");
  if (M.size() == 0) return 0.0;
  Eigen::EigenSolver<Eigen::MatrixXd> es(M, false);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

Eigen::MatrixXd augmented_A(const sysid::StateSpaceModel& model, double dt, double leak) {
  const int n = model.states(), p = model.outputs();
  Eigen::MatrixXd Aa = Eigen::MatrixXd::Zero(n + p, n + p);
  Aa.topLeftCorner(n, n) = model.A;
  Aa.bottomLeftCorner(p, n) = -dt * model.C;
  Aa.bottomRightCorner(p, p) = leak * Eigen::MatrixXd::Identity(p, p);
  return Aa;
}

Eigen::MatrixXd augmented_B(const sysid::StateSpaceModel& model) {
  const int n = model.states(), p = model.outputs(), m = model.inputs();
  Eigen::MatrixXd Ba = Eigen::MatrixXd::Zero(n + p, m);
  Ba.topRows(n) = model.B;
  Ba.bottomRows(p) = Eigen::MatrixXd::Zero(p, m) - model.D;  // D = 0 for the ARX realization
  return Ba;
}

MimoGains synthesize_lqr(const sysid::StateSpaceModel& model, const WeightSpec& weights, double dt,
                         GainLabel label) {
  model.validate();
  weights.validate(model.outputs(), model.inputs());
  if (!(dt > 0.0)) throw Error(ErrorCategory::Config, "synthesize_lqr: dt must be > 0");
  const int n = model.states(), p = model.outputs();

  const Eigen::MatrixXd Aa = augmented_A(model, dt, weights.leak);
  const Eigen::MatrixXd Ba = augmented_B(model);
  Eigen::VectorXd qd(n + p);
  qd.head(n).setConstant(weights.state_weight);
  qd.tail(p) = weights.q / (dt * dt);
  // K is invariant under scaling of the cost; normalizing keeps P of order
  // one so the residual is meaningful in absolute terms.
  const double c = qd.maxCoeff();
  const Eigen::MatrixXd Q = (qd / c).asDiagonal();
  const Eigen::MatrixXd R = (weights.effort_scale * weights.r / c).asDiagonal();

  const auto dare = dare_solve(Aa, Ba, Q, R, 1e-13, 100000);
  MimoGains g;
  const Eigen::MatrixXd BtP = Ba.transpose() * dare.P;
  g.K = (R + BtP * Ba).ldlt().solve(BtP * Aa);
  g.label = label;
  g.dt = dt;
  g.leak = weights.leak;
  g.dare_residual = dare.residual;
  g.iterations = dare.iterations;
  g.closed_loop_radius = spectral_radius(Aa - Ba * g.K);
  if (!(g.closed_loop_radius < 1.0))
    synthesis("synthesize_lqr: closed loop not stable (spectral radius " + std::to_string(g.closed_loop_radius) +
              ")");
  return g;
}

MimoState initial_state(const sysid::StateSpaceModel& model) {
  model.validate();
  MimoState s;
  const int p = model.outputs(), m = model.inputs();
  const int ulags = (model.states() - model.output_lags * p) / std::max(m, 1);
  s.z = Eigen::VectorXd::Zero(p);
  s.y_hist = Eigen::MatrixXd::Zero(p, model.output_lags);
  s.u_hist = Eigen::MatrixXd::Zero(m, ulags);
  return s;
}

MimoOutput mimo_step(const MimoGains& gains, const sysid::StateSpaceModel& model, const MimoState& state,
                     const Eigen::VectorXd& references, const Eigen::VectorXd& measured, double dt) {
  const int p = model.outputs(), m = model.inputs(), n = model.states();
  if (references.size() != p || measured.size() != p)
    throw Error(ErrorCategory::Dimension, "mimo_step: references/measured must have one entry per output");
  if (gains.K.rows() != m || gains.K.cols() != n + p)
    throw Error(ErrorCategory::Dimension, "mimo_step: gain matrix does not fit the model");
  if (state.z.size() != p) throw Error(ErrorCategory::Dimension, "mimo_step: controller state does not fit the model");

  MimoOutput out;
  out.state = state;
  MimoState& s = out.state;
  const Eigen::VectorXd yn = (measured - model.output_offset).cwiseQuotient(model.output_scale);
  const Eigen::VectorXd rn = (references - model.output_offset).cwiseQuotient(model.output_scale);

  if (!s.primed) {
    for (Eigen::Index c = 0; c < s.y_hist.cols(); ++c) s.y_hist.col(c) = yn;
    s.primed = true;
  } else if (s.y_hist.cols() > 0) {
    for (Eigen::Index c = s.y_hist.cols() - 1; c > 0; --c) s.y_hist.col(c) = s.y_hist.col(c - 1);
    s.y_hist.col(0) = yn;
  }
  s.z = gains.leak * s.z + dt * (rn - yn);

  Eigen::VectorXd xa(n + p);
  xa.head(s.y_hist.size()) = Eigen::Map<const Eigen::VectorXd>(s.y_hist.data(), s.y_hist.size());
  if (s.u_hist.size() > 0)
    xa.segment(s.y_hist.size(), s.u_hist.size()) = Eigen::Map<const Eigen::VectorXd>(s.u_hist.data(), s.u_hist.size());
  xa.tail(p) = s.z;

  const Eigen::VectorXd un = -gains.K * xa;
  if (s.u_hist.cols() > 0) {
    for (Eigen::Index c = s.u_hist.cols() - 1; c > 0; --c) s.u_hist.col(c) = s.u_hist.col(c - 1);
    s.u_hist.col(0) = un;
  }
  out.inputs = model.input_offset + model.input_scale.cwiseProduct(un);
  return out;
}

MimoState swap_gains(const MimoState& state, const MimoGains& current, const MimoGains& next) {
  if (next.K.rows() != current.K.rows() || next.K.cols() != current.K.cols())
    throw Error(ErrorCategory::Dimension, "swap_gains: new gains have a different shape (" +
                                              std::to_string(next.K.rows()) + "x" + std::to_string(next.K.cols()) +
                                              " vs " + std::to_string(current.K.rows()) + "x" +
                                              std::to_string(current.K.cols()) + ")");
  const auto p = state.z.size();
  const auto nx = state.y_hist.size() + state.u_hist.size();
  if (nx + p != current.K.cols()) throw Error(ErrorCategory::Dimension, "swap_gains: gains do not fit the state");
  MimoState s = state;
  if (!state.primed) return s;
  // Re-solve the integrator so that the last control is reproduced by the
  // new gains (least squares when there are more inputs than outputs).
  Eigen::VectorXd xa(nx + p);
  xa.head(state.y_hist.size()) = Eigen::Map<const Eigen::VectorXd>(state.y_hist.data(), state.y_hist.size());
  if (state.u_hist.size() > 0)
    xa.segment(state.y_hist.size(), state.u_hist.size()) =
        Eigen::Map<const Eigen::VectorXd>(state.u_hist.data(), state.u_hist.size());
  xa.tail(p) = state.z;
  const Eigen::VectorXd rhs = current.K * xa - next.K.leftCols(nx) * xa.head(nx);
  s.z = next.K.rightCols(p).completeOrthogonalDecomposition().solve(rhs);
  return s;
}

}  // namespace sasctl::mimo
