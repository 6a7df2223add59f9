#pragma once

#include "amsim/errors.hpp"
#include "amsim/geometry.hpp"

namespace amsim {

/// Cosine confidence ramp that hands authority from motion control to force
/// control as the camera-derived surface distance shrinks.
struct BlendConfig {
  double d_min_m = 0.2;  // full force authority at or below this distance
  double d_max_m = 1.0;  // pure motion control at or beyond this distance

  /// Throws ConfigError unless 0 < d_min < d_max.
  void validate() const;
};

/// Blend weight lambda(d): exactly 1 for d <= d_min, exactly 0 for d >= d_max,
/// half-cosine in between. Continuous and monotone non-increasing in d.
double blend_lambda(double d, const BlendConfig& cfg);

/// Velocity PID with gravity feedforward plus an attitude PD that keeps the
/// platform level at a fixed yaw. The velocity gains map body-velocity error
/// directly to force, so the vehicle mass enters only the feedforward term.
struct MotionConfig {
  double mass_kg = 3.2;
  Vec3 gravity_W = Vec3(0, 0, -kGravity);
  Vec3 kp_v = Vec3(14, 14, 14);        // N per m/s
  Vec3 ki_v = Vec3(6, 6, 6);           // N per m
  Vec3 kd_v = Vec3::Zero();            // N per m/s^2
  double integral_limit_N = 5.0;       // per-axis clamp on the integral force
  double yaw_setpoint_rad = 0.0;
  Vec3 kp_att = Vec3(14, 14, 6);       // N m per rad
  Vec3 kd_att = Vec3(2.4, 2.4, 1.6);   // N m per rad/s

  /// Throws ConfigError on non-positive mass or negative gains/limits.
  void validate() const;
};

/// Body-frame wrench tracking a desired body twist. The angular part of the
/// desired twist is ignored: the attitude loop regulates level flight (zero
/// roll and pitch) at the configured yaw instead.
class MotionController {
 public:
  explicit MotionController(const MotionConfig& cfg);

  /// One control tick. Twists are [linear; angular] in the body frame; the
  /// returned wrench is [force; torque]. dt <= 0 skips the integral and
  /// derivative updates.
  Vec6 tick(const Vec6& desired_twist_B, const Vec6& est_twist_B, const Quat& q_WB,
            double dt);

  /// Accumulated integral force contribution [N], clamped per axis.
  const Vec3& integral_force() const { return integral_; }
  void reset();

 private:
  MotionConfig cfg_;
  Vec3 integral_ = Vec3::Zero();
  Vec3 prev_err_ = Vec3::Zero();
  bool has_prev_ = false;
};

/// Impedance law on the contact normal,
///   F_f = F_r - K_ep e_x - K_ed de_x/dt - K_fp e_f - K_fi integral(e_f dt)
/// with e_f = F - F_r the force error and e_x the third visual feature-error
/// component (pixel radius), which reflects the scale error.
struct ImpedanceConfig {
  double reference_force_N = 5.0;
  double k_ep = 0.0;              // N per px of scale error
  double k_ed = 0.0;              // N per px/s
  double k_fp = 0.5;              // dimensionless force gain
  double k_fi = 2.0;              // 1/s
  double integral_limit_N = 3.0;  // clamp on the K_fi * integral term

  /// Throws ConfigError unless k_ep, k_ed, integral limit >= 0 and
  /// k_fp, k_fi > 0.
  void validate() const;
};

class ImpedanceController {
 public:
  explicit ImpedanceController(const ImpedanceConfig& cfg);

  /// One trapezoidal update of the force-error integral followed by the
  /// impedance law. dt <= 0 leaves the integral unchanged, so callers can
  /// evaluate the law without accumulating (e.g. before contact).
  double step(double measured_force_N, double e_x, double e_x_rate, double dt);

  /// K_fi * integral(e_f dt) after clamping; enters the law with a minus sign.
  double integral_term() const;
  void reset();

 private:
  ImpedanceConfig cfg_;
  double integral_Ns_ = 0;  // integral of e_f dt
  double prev_ef_ = 0;
  bool has_prev_ = false;
};

/// Composed control wrench with the pieces that produced it, for logging and
/// for replaying the composition in tests.
struct WrenchCommand {
  Vec6 tau_B = Vec6::Zero();     // total body wrench [N, N m]
  Vec6 tau_vs_B = Vec6::Zero();  // motion component, body frame
  Vec6 tau_f_C = Vec6::Zero();   // force component, contact frame
  double lambda = 0;             // blend weight used
};

/// Selection-matrix blend of the motion wrench and the impedance force:
///   tau_B = blkdiag(R_BC, R_BC) ((I - L) blkdiag(R_CB, R_CB) tau_vs_B + L tau_f_C)
/// with L = diag(lambda, 0, 0, 0, 0, 0) and tau_f_C = [F_f, 0, 0, 0, 0, 0].
/// Only the contact-normal force DoF interpolates; every other DoF stays with
/// the motion controller. lambda == 0 returns tau_vs_B bit for bit. R_BC maps
/// contact-frame vectors into the body frame; lambda must lie in [0, 1].
WrenchCommand compose_wrench(const Vec6& tau_vs_B, double F_f, double lambda,
                             const Mat3& R_BC);

/// Right-handed contact frame from the inward surface normal: x along the
/// normal, z the up vector re-orthogonalised against x, y = z cross x. Columns
/// are the contact axes in world coordinates (world-from-contact). Throws
/// ConfigError when the normal is near zero or near parallel to up.
Mat3 contact_frame_from_normal(const Vec3& inward_normal_W,
                               const Vec3& up_W = Vec3(0, 0, 1));

/// Interaction phases: free approach on visual servoing, blended transition
/// near the surface, force regulation while touching.
enum class Phase { Approach, Transition, ForceHold };

const char* phase_name(Phase p);

struct PhaseConfig {
  BlendConfig blend;              // distance thresholds shared with the ramp
  double contact_dwell_s = 0.25;  // contact dropout tolerated before retreating

  void validate() const;
};

struct PhaseState {
  Phase phase = Phase::Approach;
  double entered_t = 0;        // when the current phase began
  double last_contact_t = -1;  // latest tick with the contact flag on, -1 never
};

/// Approach -> Transition once the surface distance drops below d_max,
/// Transition -> ForceHold on a contact event, ForceHold -> Transition after
/// contact has been absent for longer than the dwell. No other transitions.
PhaseState phase_update(const PhaseState& state, double d, bool contact, double t,
                        const PhaseConfig& cfg);

/// Derivative estimate smoothed by a first-order low-pass on the raw
/// finite difference.
class LowPassDerivative {
 public:
  explicit LowPassDerivative(double cutoff_hz = 10.0);

  double update(double value, double dt);
  double decay(double dt);  // relax toward zero without a new sample
  double value() const { return state_; }
  void reset();

 private:
  double cutoff_hz_;
  double prev_value_ = 0;
  double state_ = 0;
  bool has_prev_ = false;
};

struct HybridConfig {
  MotionConfig motion;
  ImpedanceConfig impedance;
  PhaseConfig phase;
  Vec3 inward_normal_W = Vec3(1, 0, 0);  // surface normal pointing into the wall
  double derivative_cutoff_hz = 10.0;    // for the e_x rate estimate

  void validate() const;
};

/// Immutable snapshot of the servo, estimator and force sensor outputs
/// consumed by one controller tick.
struct ControlInputs {
  double t = 0;
  Vec6 desired_twist_B = Vec6::Zero();  // from the visual servo
  bool target_visible = false;
  double depth_m = 0;         // servo area depth, meaningful when visible
  double e_x_px = 0;          // third feature-error component (radius)
  bool fresh_visual = false;  // e_x/depth carry a new camera sample this tick
  double normal_force_N = 0;  // measured force along the inward normal
  bool contact = false;       // contact detector flag
  Vec6 est_twist_B = Vec6::Zero();
  Quat q_WB = Quat::Identity();
};

struct ControlOutput {
  WrenchCommand wrench;
  PhaseState phase;
  double depth_used_m = 0;      // possibly frozen surface distance
  double force_setpoint_N = 0;  // impedance output F_f
};

/// Sequential hybrid force-motion controller ticked at a fixed rate. Each tick
/// advances the phase machine, blends lambda from the (possibly frozen)
/// surface distance, runs the velocity/attitude and impedance loops, and
/// composes the body wrench. When the target leaves the field of view during
/// ForceHold the distance freezes at its last value and lambda is held at 1.
/// The force-error integral accumulates only while in ForceHold.
class HybridController {
 public:
  explicit HybridController(const HybridConfig& cfg);

  ControlOutput tick(const ControlInputs& in, double dt);

  const PhaseState& phase() const { return phase_; }
  const HybridConfig& config() const { return cfg_; }
  void reset();

 private:
  HybridConfig cfg_;
  Mat3 R_WC_;  // contact axes in world coordinates
  MotionController motion_;
  ImpedanceController impedance_;
  LowPassDerivative ex_rate_;
  PhaseState phase_;
  double last_depth_m_;
  double ex_sample_gap_s_ = 0;  // time since the rate filter last advanced
  double last_ex_px_ = 0;
};

}  // namespace amsim
