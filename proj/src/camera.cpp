#include "amsim/camera.hpp"

#include <cmath>

#include "amsim/sim.hpp"

namespace amsim {

RigidTransform CameraModel::default_mount(const Vec3& offset_B) {
  Mat3 R_BO;
  // columns are the optical axes expressed in body coordinates
  R_BO.col(0) = Vec3(0, -1, 0);   // x_O: image right
  R_BO.col(1) = Vec3(0, 0, -1);   // y_O: image down
  R_BO.col(2) = Vec3(1, 0, 0);    // z_O: optical axis, body forward
  RigidTransform T;
  T.rotation = Quat(R_BO);
  T.translation = offset_B;
  T.from = FrameId::Camera;
  T.to = FrameId::Body;
  return T;
}

Vec2 CameraModel::project(const Vec3& p_O) const {
  return Vec2(intrinsics.fx * p_O.x() / p_O.z() + intrinsics.cx,
              intrinsics.fy * p_O.y() / p_O.z() + intrinsics.cy);
}

bool CameraModel::in_image(const Vec2& px, double margin_px) const {
  return px.x() >= margin_px && px.x() <= intrinsics.width - 1 - margin_px &&
         px.y() >= margin_px && px.y() <= intrinsics.height - 1 - margin_px;
}

RigidTransform camera_pose(const CameraModel& cam, const Quat& q_WB, const Vec3& p_WB) {
  RigidTransform T_WB;
  T_WB.rotation = q_WB;
  T_WB.translation = p_WB;
  T_WB.from = FrameId::Body;
  T_WB.to = FrameId::World;
  return compose(T_WB, cam.T_body_camera);
}

CircleObservation project_circle(const CameraModel& cam, const RigidTransform& T_world_camera,
                                 const Vec3& circle_center_W, const Vec3& plane_normal_W,
                                 double radius_m) {
  CircleObservation obs;
  const RigidTransform T_CW = T_world_camera.inverse();
  const Vec3 c_O = transform_point(T_CW, circle_center_W, FrameId::World, FrameId::Camera);
  if (c_O.z() < cam.min_depth_m) return obs;

  const Vec3 axis_W = T_world_camera.rotation * Vec3::UnitZ();
  // incidence between the viewing ray and the plane normal
  const double cos_inc = std::abs(axis_W.normalized().dot(plane_normal_W.normalized()));
  if (cos_inc < std::cos(cam.max_incidence_rad)) return obs;

  const Vec2 px = cam.project(c_O);
  if (!cam.in_image(px, 2.0)) return obs;

  const double area_m2 = M_PI * radius_m * radius_m;
  obs.area_px2 = area_m2 * cam.intrinsics.fx * cam.intrinsics.fy * cos_inc / (c_O.z() * c_O.z());
  obs.radius_px = std::sqrt(obs.area_px2 / M_PI);
  obs.u = px.x();
  obs.v = px.y();
  obs.valid = true;
  return obs;
}

std::optional<Vec2> project_landmark(const CameraModel& cam, const RigidTransform& T_world_camera,
                                     const Vec3& p_W, const Vec3& wall_normal_W,
                                     const Vec3& wall_point_W) {
  // points behind the wall surface are not visible
  if (wall_normal_W.dot(p_W - wall_point_W) < -1e-6) return std::nullopt;
  const RigidTransform T_CW = T_world_camera.inverse();
  const Vec3 p_O = transform_point(T_CW, p_W, FrameId::World, FrameId::Camera);
  if (p_O.z() < cam.min_depth_m) return std::nullopt;
  const Vec2 px = cam.project(p_O);
  if (!cam.in_image(px)) return std::nullopt;
  return px;
}

}  // namespace amsim
