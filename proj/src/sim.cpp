#include "amsim/sim.hpp"

#include <cmath>

namespace amsim {

void WallModel::validate() const {
  if (normal_W.norm() < 1e-9) throw ConfigError("wall: normal must be nonzero");
  if (std::abs(normal_W.norm() - 1.0) > 1e-6) throw ConfigError("wall: normal must be unit length");
  if (!(stiffness > 0)) throw ConfigError("wall: stiffness must be positive");
  if (damping < 0) throw ConfigError("wall: damping must be >= 0");
  if (tangential_friction < 0) throw ConfigError("wall: tangential friction must be >= 0");
  if (!(hole_radius_m > 0) || !(target_radius_m > hole_radius_m)) {
    throw ConfigError("wall: need 0 < hole radius < target radius");
  }
  if (std::abs(normal_W.dot(hole_center_W - plane_point_W)) > 1e-6) {
    throw ConfigError("wall: hole centre must lie on the plane");
  }
}

ContactWrench contact_wrench(const SimState& s, const WallModel& wall, const VehicleParams& veh) {
  ContactWrench w;
  const Vec3 p_ee_W = s.p_W + s.q_WB * veh.end_effector_offset_B;
  const double sd = wall.normal_W.dot(p_ee_W - wall.plane_point_W);  // >= 0 in free space
  if (sd >= 0.0) return w;

  w.active = true;
  w.penetration_m = -sd;
  const Vec3 v_ee_W = s.v_W + s.q_WB * (s.omega_B.cross(veh.end_effector_offset_B));
  const double vn = wall.normal_W.dot(v_ee_W);
  // compression-only spring-damper along the outward normal
  const double fn = std::max(0.0, wall.stiffness * w.penetration_m - wall.damping * vn);
  const Vec3 v_t = v_ee_W - vn * wall.normal_W;
  w.force_W = fn * wall.normal_W - wall.tangential_friction * v_t;

  const Vec3 f_B = s.q_WB.conjugate() * w.force_W;
  w.torque_B = veh.end_effector_offset_B.cross(f_B);
  // wrist sensor axes are parallel to the body frame
  w.force_S = f_B;
  w.torque_S = (veh.end_effector_offset_B - veh.ft_sensor_offset_B).cross(f_B);
  return w;
}

StepResult step_dynamics(const SimState& s, const Vec6& rotor_speed_cmd, const WallModel& wall,
                         const VehicleParams& veh, const Allocator& alloc, double dt,
                         const SimOptions& opt) {
  if (!(dt > 0)) throw ConfigError("step_dynamics: dt must be positive");

  StepResult out;
  out.state = s;
  SimState& n = out.state;

  Vec6 cmd = rotor_speed_cmd.cwiseMax(0.0).cwiseMin(veh.max_rotor_speed);
  if (opt.rotor_time_constant > 0) {
    const double a = std::exp(-dt / opt.rotor_time_constant);
    n.rotor_speeds = cmd + a * (s.rotor_speeds - cmd);
  } else {
    n.rotor_speeds = cmd;
  }

  out.contact = contact_wrench(s, wall, veh);

  const Vec6 rotor_wrench_B = alloc.wrench_of(n.rotor_speeds);
  const Vec3 g_W(0, 0, -kGravity);
  const Vec3 force_W = s.q_WB * rotor_wrench_B.head<3>() + veh.mass_kg * g_W + out.contact.force_W;
  out.accel_W = force_W / veh.mass_kg;

  const Vec3 Iw = veh.inertia_B * s.omega_B;
  const Vec3 torque_B = rotor_wrench_B.tail<3>() + out.contact.torque_B - s.omega_B.cross(Iw);
  const Vec3 omega_dot = veh.inertia_B.ldlt().solve(torque_B);

  n.v_W = s.v_W + out.accel_W * dt;
  n.p_W = s.p_W + n.v_W * dt;
  n.omega_B = s.omega_B + omega_dot * dt;
  n.q_WB = (s.q_WB * quat_exp(n.omega_B * dt)).normalized();
  n.t = s.t + dt;

  const bool finite = n.p_W.allFinite() && n.v_W.allFinite() && n.omega_B.allFinite() &&
                      std::isfinite(n.q_WB.norm());
  if (!finite || n.v_W.norm() > 50.0 || n.omega_B.norm() > 200.0 || n.p_W.norm() > 100.0) {
    throw NumericalDivergence("step_dynamics: state left the plausible envelope at t=" +
                              std::to_string(n.t));
  }
  return out;
}

std::vector<WorldLandmark> generate_landmarks(const WallModel& wall,
                                              const LandmarkFieldParams& p, SeededRng& rng) {
  std::vector<WorldLandmark> out;
  out.reserve(p.wall_count + p.scatter_count);

  const Vec3 n = wall.normal_W.normalized();
  Vec3 t1 = n.cross(Vec3::UnitZ());
  if (t1.norm() < 1e-6) t1 = n.cross(Vec3::UnitY());
  t1.normalize();
  const Vec3 t2 = t1.cross(n);  // "up" within the plane

  const Vec3 hole_offset = wall.hole_center_W - wall.plane_point_W;
  const double hole_u = t1.dot(hole_offset), hole_w = t2.dot(hole_offset);
  const double w_lo = p.wall_z_min - wall.plane_point_W.z();
  const double w_hi = p.wall_z_max - wall.plane_point_W.z();

  long id = 0;
  int placed = 0;
  int guard = 0;
  while (placed < p.wall_count && guard++ < 100 * p.wall_count) {
    const double u = rng.uniform(-p.wall_half_width, p.wall_half_width);
    const double w = rng.uniform(w_lo, w_hi);
    if (std::hypot(u - hole_u, w - hole_w) < p.target_clear_radius) continue;
    out.push_back({id++, wall.plane_point_W + u * t1 + w * t2});
    ++placed;
  }
  for (int i = 0; i < p.scatter_count; ++i) {
    const double depth = rng.uniform(p.scatter_depth_min, p.scatter_depth_max);
    const double u = rng.uniform(-1.2, 1.2);
    const double w = rng.uniform(-1.0, 1.0);
    out.push_back({id++, wall.plane_point_W + depth * n + u * t1 + w * t2});
  }
  return out;
}

ImuSample ImuSensor::sample(const SimState& s, const Vec3& accel_W, double dt_since_last) {
  if (dt_since_last > 0) {
    const double sq = std::sqrt(dt_since_last);
    acc_bias_ += bias_rng_.gaussian_vec3(params_.acc_bias_walk * sq);
    gyro_bias_ += bias_rng_.gaussian_vec3(params_.gyro_bias_walk * sq);
  }
  ImuSample m;
  m.t = s.t;
  const Vec3 g_W(0, 0, -kGravity);
  m.specific_force_B = s.q_WB.conjugate() * (accel_W - g_W) + acc_bias_ +
                       noise_rng_.gaussian_vec3(params_.acc_sigma);
  m.angular_rate_B = s.omega_B + gyro_bias_ + noise_rng_.gaussian_vec3(params_.gyro_sigma);
  return m;
}

FtSample FtSensor::sample(const ContactWrench& w, double t) {
  FtSample m;
  m.t = t;
  m.force_S = w.force_S + rng_.gaussian_vec3(params_.force_sigma);
  m.torque_S = w.torque_S + rng_.gaussian_vec3(params_.torque_sigma);
  return m;
}

CameraObservation CameraSensor::sample(const SimState& s, const WallModel& wall,
                                       const std::vector<WorldLandmark>& landmarks) {
  CameraObservation obs;
  obs.t = s.t;
  const RigidTransform T_WC = camera_pose(model_, s.q_WB, s.p_W);

  obs.landmarks.reserve(landmarks.size());
  for (const auto& lm : landmarks) {
    LandmarkPixel px;
    px.id = lm.id;
    if (auto ideal = project_landmark(model_, T_WC, lm.p_W, wall.normal_W, wall.plane_point_W)) {
      Vec2 noisy = *ideal + Vec2(rng_.gaussian(noise_.pixel_sigma), rng_.gaussian(noise_.pixel_sigma));
      px.u = noisy.x();
      px.v = noisy.y();
      px.valid = model_.in_image(noisy);
    }
    obs.landmarks.push_back(px);
  }

  CircleObservation c =
      project_circle(model_, T_WC, wall.hole_center_W, wall.normal_W, wall.target_radius_m);
  if (c.valid) {
    c.u += rng_.gaussian(noise_.circle_px_sigma);
    c.v += rng_.gaussian(noise_.circle_px_sigma);
    c.area_px2 = std::max(1.0, c.area_px2 * (1.0 + rng_.gaussian(noise_.circle_area_rel_sigma)));
    c.radius_px = std::sqrt(c.area_px2 / M_PI);
  }
  obs.circle = c;
  return obs;
}

}  // namespace amsim
