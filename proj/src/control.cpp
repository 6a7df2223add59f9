#include "amsim/control.hpp"

#include <algorithm>
#include <cmath>

namespace amsim {

void BlendConfig::validate() const {
  if (!(d_min_m > 0.0) || !(d_min_m < d_max_m)) {
    throw ConfigError("blend config requires 0 < d_min < d_max");
  }
}

double blend_lambda(double d, const BlendConfig& cfg) {
  if (d <= cfg.d_min_m) return 1.0;
  if (d >= cfg.d_max_m) return 0.0;
  const double u = (d - cfg.d_min_m) / (cfg.d_max_m - cfg.d_min_m);
  return 0.5 * (1.0 + std::cos(u * M_PI));
}

void MotionConfig::validate() const {
  if (!(mass_kg > 0.0)) throw ConfigError("motion config: mass must be positive");
  if ((kp_v.array() < 0).any() || (ki_v.array() < 0).any() || (kd_v.array() < 0).any() ||
      (kp_att.array() < 0).any() || (kd_att.array() < 0).any()) {
    throw ConfigError("motion config: gains must be non-negative");
  }
  if (integral_limit_N < 0) throw ConfigError("motion config: integral limit must be >= 0");
  if (!std::isfinite(yaw_setpoint_rad)) throw ConfigError("motion config: yaw setpoint not finite");
}

MotionController::MotionController(const MotionConfig& cfg) : cfg_(cfg) { cfg_.validate(); }

void MotionController::reset() {
  integral_.setZero();
  prev_err_.setZero();
  has_prev_ = false;
}

Vec6 MotionController::tick(const Vec6& desired_twist_B, const Vec6& est_twist_B,
                            const Quat& q_WB, double dt) {
  const Vec3 e_v = desired_twist_B.head<3>() - est_twist_B.head<3>();

  Vec3 deriv = Vec3::Zero();
  if (dt > 0) {
    integral_ += cfg_.ki_v.cwiseProduct(e_v) * dt;
    integral_ = integral_.cwiseMax(-cfg_.integral_limit_N).cwiseMin(cfg_.integral_limit_N);
    if (has_prev_) deriv = (e_v - prev_err_) / dt;
    prev_err_ = e_v;
    has_prev_ = true;
  }

  // Force that cancels gravity exactly when the velocity loop is at rest.
  const Vec3 gravity_ff = -cfg_.mass_kg * (q_WB.conjugate() * cfg_.gravity_W);
  const Vec3 force =
      cfg_.kp_v.cwiseProduct(e_v) + integral_ + cfg_.kd_v.cwiseProduct(deriv) + gravity_ff;

  // Attitude PD toward level flight at the configured yaw, angular rate
  // damped to zero. e_R is the usual skew-symmetric attitude error.
  const Mat3 R = q_WB.toRotationMatrix();
  const Mat3 Rd = Eigen::AngleAxisd(cfg_.yaw_setpoint_rad, Vec3::UnitZ()).toRotationMatrix();
  const Mat3 E = Rd.transpose() * R - R.transpose() * Rd;
  const Vec3 e_R = 0.5 * Vec3(E(2, 1), E(0, 2), E(1, 0));
  const Vec3 torque =
      -cfg_.kp_att.cwiseProduct(e_R) - cfg_.kd_att.cwiseProduct(est_twist_B.tail<3>());

  Vec6 tau;
  tau.head<3>() = force;
  tau.tail<3>() = torque;
  return tau;
}

void ImpedanceConfig::validate() const {
  if (k_ep < 0 || k_ed < 0) throw ConfigError("impedance config: k_ep, k_ed must be >= 0");
  if (!(k_fp > 0) || !(k_fi > 0)) throw ConfigError("impedance config: k_fp, k_fi must be > 0");
  if (integral_limit_N < 0) throw ConfigError("impedance config: integral limit must be >= 0");
}

ImpedanceController::ImpedanceController(const ImpedanceConfig& cfg) : cfg_(cfg) {
  cfg_.validate();
}

void ImpedanceController::reset() {
  integral_Ns_ = 0;
  prev_ef_ = 0;
  has_prev_ = false;
}

double ImpedanceController::step(double measured_force_N, double e_x, double e_x_rate,
                                 double dt) {
  const double e_f = measured_force_N - cfg_.reference_force_N;
  if (dt > 0) {
    // Trapezoid with the signal treated as flat before the first sample.
    const double prev = has_prev_ ? prev_ef_ : e_f;
    integral_Ns_ += 0.5 * (prev + e_f) * dt;
    const double cap = cfg_.integral_limit_N / cfg_.k_fi;
    integral_Ns_ = std::clamp(integral_Ns_, -cap, cap);
  }
  prev_ef_ = e_f;
  has_prev_ = true;
  return cfg_.reference_force_N - cfg_.k_ep * e_x - cfg_.k_ed * e_x_rate - cfg_.k_fp * e_f -
         cfg_.k_fi * integral_Ns_;
}

double ImpedanceController::integral_term() const { return cfg_.k_fi * integral_Ns_; }

WrenchCommand compose_wrench(const Vec6& tau_vs_B, double F_f, double lambda,
                             const Mat3& R_BC) {
  WrenchCommand out;
  out.tau_vs_B = tau_vs_B;
  out.tau_f_C(0) = F_f;
  out.lambda = lambda;
  if (lambda == 0.0) {
    out.tau_B = tau_vs_B;
    return out;
  }
  // Work in the contact frame: blend the normal force DoF, keep the rest.
  Vec6 tau_C;
  tau_C.head<3>() = R_BC.transpose() * tau_vs_B.head<3>();
  tau_C.tail<3>() = R_BC.transpose() * tau_vs_B.tail<3>();
  tau_C(0) = (1.0 - lambda) * tau_C(0) + lambda * F_f;
  out.tau_B.head<3>() = R_BC * tau_C.head<3>();
  out.tau_B.tail<3>() = R_BC * tau_C.tail<3>();
  return out;
}

Mat3 contact_frame_from_normal(const Vec3& inward_normal_W, const Vec3& up_W) {
  const double n = inward_normal_W.norm();
  if (n < 1e-9) throw ConfigError("contact frame: surface normal is zero");
  const Vec3 x = inward_normal_W / n;
  Vec3 z = up_W - up_W.dot(x) * x;
  if (z.norm() < 1e-6) {
    throw ConfigError("contact frame: up vector is parallel to the surface normal");
  }
  z.normalize();
  Mat3 R;
  R.col(0) = x;
  R.col(1) = z.cross(x);
  R.col(2) = z;
  return R;
}

const char* phase_name(Phase p) {
  switch (p) {
    case Phase::Approach: return "approach";
    case Phase::Transition: return "transition";
    case Phase::ForceHold: return "force_hold";
  }
  return "unknown";
}

void PhaseConfig::validate() const {
  blend.validate();
  if (contact_dwell_s < 0) throw ConfigError("phase config: dwell must be >= 0");
}

PhaseState phase_update(const PhaseState& state, double d, bool contact, double t,
                        const PhaseConfig& cfg) {
  PhaseState next = state;
  if (contact) next.last_contact_t = t;
  switch (state.phase) {
    case Phase::Approach:
      if (d < cfg.blend.d_max_m) {
        next.phase = Phase::Transition;
        next.entered_t = t;
      }
      break;
    case Phase::Transition:
      if (contact) {
        next.phase = Phase::ForceHold;
        next.entered_t = t;
      }
      break;
    case Phase::ForceHold:
      if (!contact && next.last_contact_t >= 0 &&
          t - next.last_contact_t > cfg.contact_dwell_s) {
        next.phase = Phase::Transition;
        next.entered_t = t;
      }
      break;
  }
  return next;
}

LowPassDerivative::LowPassDerivative(double cutoff_hz) : cutoff_hz_(cutoff_hz) {
  if (!(cutoff_hz > 0)) throw ConfigError("derivative filter: cutoff must be positive");
}

void LowPassDerivative::reset() {
  prev_value_ = 0;
  state_ = 0;
  has_prev_ = false;
}

double LowPassDerivative::update(double value, double dt) {
  if (!has_prev_ || dt <= 0) {
    prev_value_ = value;
    has_prev_ = true;
    return state_;
  }
  const double raw = (value - prev_value_) / dt;
  const double tau = 1.0 / (2.0 * M_PI * cutoff_hz_);
  state_ += dt / (dt + tau) * (raw - state_);
  prev_value_ = value;
  return state_;
}

double LowPassDerivative::decay(double dt) {
  if (dt <= 0) return state_;
  const double tau = 1.0 / (2.0 * M_PI * cutoff_hz_);
  state_ += dt / (dt + tau) * (0.0 - state_);
  return state_;
}

void HybridConfig::validate() const {
  motion.validate();
  impedance.validate();
  phase.validate();
  if (!(derivative_cutoff_hz > 0)) {
    throw ConfigError("hybrid config: derivative cutoff must be positive");
  }
  contact_frame_from_normal(inward_normal_W);  // rejects degenerate normals
}

HybridController::HybridController(const HybridConfig& cfg)
    : cfg_(cfg),
      R_WC_(contact_frame_from_normal(cfg.inward_normal_W)),
      motion_(cfg.motion),
      impedance_(cfg.impedance),
      ex_rate_(cfg.derivative_cutoff_hz),
      last_depth_m_(1e9) {
  // Member constructors already reject bad motion/impedance/filter settings.
  cfg_.phase.validate();
}

void HybridController::reset() {
  motion_.reset();
  impedance_.reset();
  ex_rate_.reset();
  phase_ = PhaseState{};
  last_depth_m_ = 1e9;
  ex_sample_gap_s_ = 0;
  last_ex_px_ = 0;
}

ControlOutput HybridController::tick(const ControlInputs& in, double dt) {
  if (in.target_visible) {
    last_depth_m_ = in.depth_m;
    last_ex_px_ = in.e_x_px;
  }
  const double d = last_depth_m_;

  phase_ = phase_update(phase_, d, in.contact, in.t, cfg_.phase);

  double lambda = blend_lambda(d, cfg_.phase.blend);
  if (phase_.phase == Phase::ForceHold && !in.target_visible) lambda = 1.0;

  // e_x arrives at the camera rate while this loop runs much faster, so the
  // rate filter advances only when a fresh sample lands (over the elapsed
  // gap) and holds in between; differencing the held value every tick would
  // turn each camera update into a large spurious rate spike. Without sight
  // of the target the frozen e_x carries no rate and the filter relaxes.
  const double ex = last_ex_px_;
  ex_sample_gap_s_ += dt;
  double ex_rate = ex_rate_.value();
  if (in.target_visible && in.fresh_visual) {
    ex_rate = ex_rate_.update(ex, ex_sample_gap_s_);
    ex_sample_gap_s_ = 0;
  } else if (!in.target_visible) {
    ex_rate = ex_rate_.decay(dt);
  }

  // The force-error integral only runs while holding, otherwise the
  // out-of-contact error (-F_r) would rail it before touch-down.
  const double integ_dt = phase_.phase == Phase::ForceHold ? dt : 0.0;
  const double F_f = impedance_.step(in.normal_force_N, ex, ex_rate, integ_dt);

  const Vec6 tau_vs = motion_.tick(in.desired_twist_B, in.est_twist_B, in.q_WB, dt);
  const Mat3 R_BC = in.q_WB.toRotationMatrix().transpose() * R_WC_;

  ControlOutput out;
  out.wrench = compose_wrench(tau_vs, F_f, lambda, R_BC);
  out.phase = phase_;
  out.depth_used_m = d;
  out.force_setpoint_N = F_f;
  return out;
}

}  // namespace amsim
