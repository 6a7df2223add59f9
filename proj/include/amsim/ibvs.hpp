#pragma once

#include <array>

#include "amsim/camera.hpp"
#include "amsim/geometry.hpp"
#include "amsim/sensors.hpp"

namespace amsim {

/// Circle-target image feature: centroid relative to the principal point and
/// the equivalent radius, all in pixels.
struct FeatureVector {
  double u = 0, v = 0;  // px
  double r = 1;         // px

  double area() const { return M_PI * r * r; }

  static FeatureVector from_circle(const CircleObservation& obs, const PinholeIntrinsics& k);
};

/// Range to the target plane from the projected area of a target of known
/// physical area.
double feature_depth(const FeatureVector& s, const PinholeIntrinsics& k, double target_area_m2);

struct ServoConfig {
  PinholeIntrinsics intrinsics;
  FeatureVector s_star;                         // desired feature
  double target_area_m2 = M_PI * 0.07 * 0.07;   // physical disc area
  double zeta = 0.5;                            // 1/s, feature error decay rate
  double mu = 1e-3;                             // pseudo-inverse damping
  double linear_limit_mps = 0.4;                // per-axis twist clamps
  double angular_limit_rps = 0.3;
  double lost_timeout_s = 0.5;
  RigidTransform T_BC = CameraModel::default_mount();
  // the platform flies level during servoing, so the rotational part of the
  // body command is zeroed unless explicitly requested
  bool command_angular = false;
};

Vec3 feature_error(const FeatureVector& s, const FeatureVector& s_star);

/// 3x6 matrix mapping the optical-frame camera twist (linear; angular) onto
/// the feature rates at the current feature and depth.
Eigen::Matrix<double, 3, 6> interaction_matrix(const FeatureVector& s, double depth,
                                               const PinholeIntrinsics& k);

struct ServoCommand {
  Vec6 twist_camera = Vec6::Zero();  // optical frame (v; w)
  Vec6 twist_body = Vec6::Zero();    // body frame, same layout
  std::array<bool, 6> clamped{};     // which camera-twist components hit a limit
  Vec3 e_s = Vec3::Zero();
  double depth = 0;
  bool valid = false;  // false while the target has never been seen or is lost
};

/// Damped least-squares servo law: v_c = -zeta * L^T (L L^T + mu^2 I)^-1 e_s,
/// clamped per component, then rotated into the body frame.
ServoCommand servo_twist(const Vec3& e_s, const Eigen::Matrix<double, 3, 6>& L,
                         const ServoConfig& cfg);

/// Stateful front end implementing the loss policy: a momentarily invalid
/// circle holds the last command; once it has been invalid for longer than
/// lost_timeout_s the output drops to zero and target_lost() latches until
/// the next valid sighting.
class VisualServo {
 public:
  explicit VisualServo(const ServoConfig& cfg);

  ServoCommand update(double t, const CircleObservation& obs);

  bool target_lost() const { return lost_; }
  const ServoConfig& config() const { return cfg_; }

 private:
  ServoConfig cfg_;
  ServoCommand last_cmd_;
  double last_valid_t_ = 0;
  bool seen_ = false;
  bool lost_ = false;
};

}  // namespace amsim
