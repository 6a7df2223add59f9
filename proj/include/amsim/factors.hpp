#pragma once

#include <vector>

#include "amsim/geometry.hpp"
#include "amsim/preintegration.hpp"
#include "amsim/sensors.hpp"

namespace amsim {

/// Keyframe state. Local coordinates for optimisation are the 15-vector
/// (dp, dtheta, dv, dba, dbg) with the attitude perturbed on the right:
/// q <- q * exp(dtheta).
struct NavState {
  double t = 0;
  Vec3 p_W = Vec3::Zero();
  Quat q_WB = Quat::Identity();
  Vec3 v_W = Vec3::Zero();
  Vec3 ba = Vec3::Zero();
  Vec3 bg = Vec3::Zero();

  NavState retract(const Eigen::Matrix<double, 15, 1>& dx) const;
  /// Local coordinates of *this relative to lin: this = lin.retract(result).
  Eigen::Matrix<double, 15, 1> local(const NavState& lin) const;
};

constexpr int kIdxP = 0, kIdxTheta = 3, kIdxV = 6, kIdxBa = 9, kIdxBg = 12;

/// Reprojection of an inverse-depth landmark anchored in keyframe i into
/// keyframe j. The anchor bearing comes from the (fixed) anchor pixel; gamma
/// is the inverse of the z-depth in the anchor camera. Residual is predicted
/// minus observed pixels.
struct VisualEval {
  Vec2 r = Vec2::Zero();
  Eigen::Matrix<double, 2, 6> J_pose_i = Eigen::Matrix<double, 2, 6>::Zero();  // (dp, dtheta)
  Eigen::Matrix<double, 2, 6> J_pose_j = Eigen::Matrix<double, 2, 6>::Zero();
  Eigen::Matrix<double, 2, 6> J_extrinsic = Eigen::Matrix<double, 2, 6>::Zero();
  Vec2 J_gamma = Vec2::Zero();
  bool valid = false;  // false when the point falls behind either camera
};

VisualEval eval_visual(const NavState& xi, const NavState& xj, const RigidTransform& T_BC,
                       const Vec2& anchor_px, double gamma, const Vec2& obs_px,
                       const PinholeIntrinsics& K);

/// Preintegrated inertial constraint between consecutive keyframes. The
/// attitude residual is 2 vec(delta_q_corrected^-1 * q_i^-1 * q_j) with the
/// scalar part kept non-negative; all Jacobians are exact at the evaluation
/// point (quaternion product matrices, no small-angle approximation).
struct ImuEval {
  Eigen::Matrix<double, 15, 1> r = Eigen::Matrix<double, 15, 1>::Zero();
  Eigen::Matrix<double, 15, 15> J_i = Eigen::Matrix<double, 15, 15>::Zero();
  Eigen::Matrix<double, 15, 15> J_j = Eigen::Matrix<double, 15, 15>::Zero();
};

ImuEval eval_imu(const NavState& xi, const NavState& xj, const Preintegrated& pre,
                 const Vec3& gravity_W);

/// Stationary-contact constraint between consecutive keyframes while the tool
/// presses on the surface: no motion and no velocity along the wall normal.
///   r = [ n^T (p_j - p_i) ;  n^T v_i ]
struct ContactEval {
  Vec2 r = Vec2::Zero();
  Eigen::Matrix<double, 2, 15> J_i = Eigen::Matrix<double, 2, 15>::Zero();
  Eigen::Matrix<double, 2, 15> J_j = Eigen::Matrix<double, 2, 15>::Zero();
};

ContactEval eval_contact(const NavState& xi, const NavState& xj, const Vec3& n_W);

/// Adaptive weight of the contact constraint from the spread of the last N
/// normal-force samples: steady force means trustworthy contact, chatter
/// means weak constraint. P = alpha * max(sample variance, eps); the
/// information matrix is (1/P) I2.
Mat2 contact_information(const std::vector<double>& force_window, double alpha, double eps);

}  // namespace amsim
