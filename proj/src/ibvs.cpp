#include "amsim/ibvs.hpp"

#include <algorithm>
#include <cmath>

#include "amsim/errors.hpp"

namespace amsim {

FeatureVector FeatureVector::from_circle(const CircleObservation& obs,
                                         const PinholeIntrinsics& k) {
  FeatureVector s;
  s.u = obs.u - k.cx;
  s.v = obs.v - k.cy;
  s.r = obs.radius_px;
  return s;
}

double feature_depth(const FeatureVector& s, const PinholeIntrinsics& k, double target_area_m2) {
  const double area = s.area();
  if (!(area > 0)) throw std::invalid_argument("feature_depth: non-positive feature area");
  return std::sqrt(k.fx * k.fy * target_area_m2 / area);
}

Vec3 feature_error(const FeatureVector& s, const FeatureVector& s_star) {
  return Vec3(s.u - s_star.u, s.v - s_star.v, s.r - s_star.r);
}

Eigen::Matrix<double, 3, 6> interaction_matrix(const FeatureVector& s, double depth,
                                               const PinholeIntrinsics& k) {
  if (!(depth > 0)) throw std::invalid_argument("interaction_matrix: depth must be positive");
  const double u = s.u, v = s.v, r = s.r, d = depth;
  const double fx = k.fx, fy = k.fy;
  Eigen::Matrix<double, 3, 6> L;
  L << -fx / d, 0, u / d, u * v / fx, -(fx * fx + u * u) / fx, v,  //
      0, -fy / d, v / d, (fx * fx + v * v) / fy, -u * v / fy, -u,  //
      0, 0, r / d, -r * v / fy, r * u / fx, 0;
  return L;
}

ServoCommand servo_twist(const Vec3& e_s, const Eigen::Matrix<double, 3, 6>& L,
                         const ServoConfig& cfg) {
  ServoCommand cmd;
  cmd.e_s = e_s;

  const Mat3 gram = L * L.transpose() + cfg.mu * cfg.mu * Mat3::Identity();
  cmd.twist_camera = -cfg.zeta * (L.transpose() * gram.ldlt().solve(e_s));

  for (int i = 0; i < 6; ++i) {
    const double lim = i < 3 ? cfg.linear_limit_mps : cfg.angular_limit_rps;
    if (std::abs(cmd.twist_camera[i]) > lim) {
      cmd.twist_camera[i] = std::clamp(cmd.twist_camera[i], -lim, lim);
      cmd.clamped[i] = true;
    }
  }

  const Mat3 R_BC = cfg.T_BC.rotation_matrix();
  cmd.twist_body.head<3>() = R_BC * cmd.twist_camera.head<3>();
  if (cfg.command_angular) cmd.twist_body.tail<3>() = R_BC * cmd.twist_camera.tail<3>();
  cmd.valid = true;
  return cmd;
}

VisualServo::VisualServo(const ServoConfig& cfg) : cfg_(cfg) {
  if (!(cfg.zeta > 0)) throw ConfigError("visual servo: zeta must be positive");
  if (cfg.mu < 0) throw ConfigError("visual servo: mu must be non-negative");
  if (!(cfg.intrinsics.fx > 0) || !(cfg.intrinsics.fy > 0))
    throw ConfigError("visual servo: intrinsics must be positive");
  if (!(cfg.target_area_m2 > 0)) throw ConfigError("visual servo: target area must be positive");
}

ServoCommand VisualServo::update(double t, const CircleObservation& obs) {
  if (obs.valid && obs.radius_px > 0) {
    const FeatureVector s = FeatureVector::from_circle(obs, cfg_.intrinsics);
    const double d = feature_depth(s, cfg_.intrinsics, cfg_.target_area_m2);
    const Vec3 e = feature_error(s, cfg_.s_star);
    ServoCommand cmd = servo_twist(e, interaction_matrix(s, d, cfg_.intrinsics), cfg_);
    cmd.depth = d;
    last_cmd_ = cmd;
    last_valid_t_ = t;
    seen_ = true;
    lost_ = false;
    return cmd;
  }

  if (!seen_ || t - last_valid_t_ > cfg_.lost_timeout_s) {
    lost_ = true;
    ServoCommand zero;
    zero.valid = false;
    last_cmd_ = zero;
    return zero;
  }
  return last_cmd_;  // brief dropout, coast on the previous command
}

}  // namespace amsim
