#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <stdexcept>
#include <string>

namespace amsim {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Vec4 = Eigen::Vector4d;
using Vec6 = Eigen::Matrix<double, 6, 1>;
using Mat2 = Eigen::Matrix2d;
using Mat3 = Eigen::Matrix3d;
using Mat4 = Eigen::Matrix4d;
using Mat6 = Eigen::Matrix<double, 6, 6>;
using MatX = Eigen::MatrixXd;
using VecX = Eigen::VectorXd;

// Quaternions are Hamilton convention, scalar part first at every interface
// (constructors, logs, configs). A state orientation q_WB maps body-frame
// vectors into the world frame: v_W = q_WB * v_B.
using Quat = Eigen::Quaterniond;

// Reference frames. World is z-up with x pointing at the wall and y left.
// Body is forward-left-up, Camera is right-down-forward (z along the optical
// axis), ForceSensor sits at the manipulator base with x along the tool axis,
// Contact has x along the inward surface normal.
enum class FrameId { World, Body, Camera, ForceSensor, Contact };

const char* frame_name(FrameId f);

struct FrameMismatch : std::runtime_error {
  FrameMismatch(FrameId expected, FrameId got, const std::string& what_op);
};

constexpr double kGravity = 9.81;  // m/s^2, world gravity is (0,0,-kGravity)

Mat3 skew(const Vec3& v);

/// Exponential map: rotation vector [rad] -> unit quaternion.
Quat quat_exp(const Vec3& omega);

/// Principal-branch log map, inverse of quat_exp; norm of the result <= pi.
/// q and -q map to the same rotation vector.
Vec3 quat_log(const Quat& q);

/// Canonical double-cover representative (non-negative scalar part).
Quat canonical(const Quat& q);

Vec4 quat_wxyz(const Quat& q);

/// 4x4 matrix of left multiplication in wxyz ordering:
/// quat_wxyz(p * q) == quat_left(p) * quat_wxyz(q).
Mat4 quat_left(const Quat& q);

/// 4x4 matrix of right multiplication: quat_wxyz(p * q) == quat_right(q) * quat_wxyz(p).
Mat4 quat_right(const Quat& q);

/// Right Jacobian of SO(3): Exp(phi + dphi) ~= Exp(phi) Exp(Jr(phi) dphi).
Mat3 so3_right_jacobian(const Vec3& phi);

/// Rigid transform mapping points expressed in `from` coordinates into `to`.
struct RigidTransform {
  Quat rotation = Quat::Identity();
  Vec3 translation = Vec3::Zero();
  FrameId from = FrameId::World;
  FrameId to = FrameId::World;

  static RigidTransform identity(FrameId frame) {
    return RigidTransform{Quat::Identity(), Vec3::Zero(), frame, frame};
  }

  RigidTransform inverse() const;
  Mat3 rotation_matrix() const { return rotation.toRotationMatrix(); }
};

/// a ∘ b: first apply b, then a. Requires b.to == a.from.
RigidTransform compose(const RigidTransform& a, const RigidTransform& b);

/// R*p + t, rejecting the call unless T was declared as mapping from -> to.
Vec3 transform_point(const RigidTransform& T, const Vec3& p, FrameId from, FrameId to);

}  // namespace amsim
