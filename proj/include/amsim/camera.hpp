#pragma once

#include <optional>
#include <vector>

#include "amsim/geometry.hpp"
#include "amsim/rng.hpp"
#include "amsim/sensors.hpp"

namespace amsim {

struct WallModel;

struct WorldLandmark {
  long id = -1;
  Vec3 p_W = Vec3::Zero();
};

/// Pinhole camera rigidly mounted on the body. The optical frame is
/// right-down-forward: x_O = -y_B, y_O = -z_B, z_O = +x_B.
struct CameraModel {
  PinholeIntrinsics intrinsics;
  RigidTransform T_body_camera;  // from Camera into Body
  double min_depth_m = 0.05;
  double max_incidence_rad = 60.0 * M_PI / 180.0;

  static RigidTransform default_mount(const Vec3& offset_B = Vec3(0.10, 0.0, 0.0));

  /// Optical-frame point -> absolute pixels. No FOV check.
  Vec2 project(const Vec3& p_O) const;
  bool in_image(const Vec2& px, double margin_px = 0.0) const;
};

/// Camera pose in the world given the body pose.
RigidTransform camera_pose(const CameraModel& cam, const Quat& q_WB, const Vec3& p_WB);

/// Ideal projection of a flat disk of radius `radius_m` lying on the wall
/// plane. The area uses the oblique-view scaling A = A_disk * fx * fy *
/// cos(incidence) / depth^2, which matches the pinhole Jacobian for a small
/// planar patch near the image centre. Invalid when the centre projects
/// outside the image, the depth is too small, or the view is too oblique.
CircleObservation project_circle(const CameraModel& cam, const RigidTransform& T_world_camera,
                                 const Vec3& circle_center_W, const Vec3& plane_normal_W,
                                 double radius_m);

std::optional<Vec2> project_landmark(const CameraModel& cam, const RigidTransform& T_world_camera,
                                     const Vec3& p_W, const Vec3& wall_normal_W,
                                     const Vec3& wall_point_W);

}  // namespace amsim
