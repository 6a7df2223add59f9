#pragma once

#include <deque>
#include <optional>
#include <vector>

#include "amsim/camera.hpp"
#include "amsim/contact_detector.hpp"
#include "amsim/window.hpp"

namespace amsim {

struct EstimatorConfig {
  PinholeIntrinsics intrinsics;
  RigidTransform T_BC = CameraModel::default_mount();
  PreintegrationParams imu;
  SolverSettings solver;
  ContactDetectorConfig detector;
  Vec3 gravity_W = Vec3(0, 0, -kGravity);
  Vec3 wall_normal_W = Vec3(-1, 0, 0);

  bool contact_factors_enabled = true;
  // maps the force-sample variance [N^2] onto the residual variance
  // [(m/s)^2]: a steady hold with 0.1 N sensor noise then binds the normal
  // velocity at the few-mm/s level, on par with dense visual tracking
  double contact_alpha = 1e-3;
  double contact_variance_floor = 1e-4;  // N^2
  int force_window = 50;

  double keyframe_min_dt = 0.05;
  int max_landmarks = 60;
  double min_parallax_rad = 0.015;  // below this, keep the nominal-depth fallback
  double fallback_depth_m = 1.5;
  double min_depth_m = 0.1, max_depth_m = 50.0;
  // seed the fallback depth from the projected target disc when it is visible
  bool use_circle_depth = true;
  double target_radius_m = 0.07;

  // 1-sigma of the prior pinning the first keyframe (position/yaw gauge)
  Eigen::Matrix<double, 15, 1> init_prior_sigma = [] {
    Eigen::Matrix<double, 15, 1> s;
    s << 0.01, 0.01, 0.01, 0.005, 0.005, 0.005, 0.1, 0.1, 0.1, 0.1, 0.1, 0.1, 0.01, 0.01, 0.01;
    return s;
  }();

  // bootstrap from a standstill stretch before the first keyframe: the
  // averaged gyro becomes the gyro bias and the averaged accelerometer
  // levels the attitude, while initialize() contributes only the pose hint
  // (position, velocity, yaw)
  bool use_static_initializer = false;
  int static_init_samples = 100;
};

struct EstimatorOutput {
  bool keyframe_created = false;
  NavState state;           // newest keyframe after the solve
  bool contact_active = false;
  double contact_weight = 0;  // information scalar of the factor added this keyframe
  SolveReport report;
  int tracked_landmarks = 0;
  int contact_factors = 0;  // currently in the window
};

/// Sliding-window estimator fed by the runner: predict() at IMU rate,
/// add_ft() at force sensor rate, step() at camera rate. step() decides
/// whether the frame becomes a keyframe, and if so preintegrates, updates
/// landmarks, adds a contact factor while the detector is ON, solves and
/// marginalizes.
class Estimator {
 public:
  explicit Estimator(const EstimatorConfig& cfg);

  void initialize(const NavState& x0);
  bool initialized() const { return initialized_; }

  /// IMU-rate state propagation from the newest keyframe (for control).
  const NavState& predict(const ImuSample& m);
  const NavState& propagated() const { return prop_; }

  void add_ft(const FtSample& s);
  bool contact_active() const { return detector_.active(); }

  std::optional<EstimatorOutput> step(const CameraObservation& obs);

  const FactorGraphWindow& graph() const { return window_; }

 private:
  void seed(const NavState& x0);
  std::vector<ImuSample> clip_samples(double t0, double t1) const;
  void rebase_propagation();
  void update_landmarks(long kf_id, const CameraObservation& obs);
  void triangulate_pending();
  double fallback_depth() const;

  EstimatorConfig cfg_;
  ContactDetector detector_;
  FactorGraphWindow window_;

  bool initialized_ = false;
  bool have_hint_ = false;
  NavState init_state_;
  long next_kf_id_ = 0;
  double last_kf_t_ = -1;

  std::deque<ImuSample> recent_imu_;  // covers at least the last keyframe interval
  std::deque<double> force_window_;
  double circle_depth_ = 0;  // most recent target-disc depth, 0 when unseen
  NavState prop_;
  bool have_prop_imu_ = false;
  ImuSample last_prop_imu_;

  int static_count_ = 0;
  Vec3 static_acc_sum_ = Vec3::Zero(), static_gyro_sum_ = Vec3::Zero();
};

}  // namespace amsim
