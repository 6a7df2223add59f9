#include <doctest.h>

#include <cmath>

#include "amsim/sim.hpp"

using namespace amsim;

namespace {

SimState hover_state(const Vec3& p) {
  SimState s;
  s.p_W = p;
  return s;
}

}  // namespace

TEST_CASE("free fall follows the discrete closed form exactly") {
  VehicleParams veh;
  WallModel wall;
  Allocator alloc(veh);
  SimOptions opt;
  opt.rotor_time_constant = 0.0;

  SimState s = hover_state(Vec3(0, 0, 50));
  const double dt = 1e-3;
  const int n = 1000;
  for (int k = 0; k < n; ++k) {
    s = step_dynamics(s, Vec6::Zero(), wall, veh, alloc, dt, opt).state;
  }
  const double t = n * dt;
  // semi-implicit Euler: v_k = g t, p_k = g dt (1 + ... + k) = g t (t + dt) / 2
  CHECK(std::abs(s.v_W.z() + kGravity * t) < 1e-9);
  CHECK(std::abs((s.p_W.z() - 50.0) + 0.5 * kGravity * t * (t + dt)) < 1e-9);
  CHECK(s.v_W.head<2>().norm() == 0.0);
  CHECK(s.omega_B.norm() == 0.0);
}

TEST_CASE("hover allocation holds position") {
  VehicleParams veh;
  WallModel wall;
  Allocator alloc(veh);
  SimOptions opt;
  opt.rotor_time_constant = 0.0;

  Vec6 hover;
  hover << 0, 0, veh.mass_kg * kGravity, 0, 0, 0;
  const Vec6 speeds = alloc.allocate(hover).rotor_speeds;

  SimState s = hover_state(Vec3(0.5, 0, 1.5));
  s.rotor_speeds = speeds;
  for (int k = 0; k < 5000; ++k) {
    s = step_dynamics(s, speeds, wall, veh, alloc, 1e-3, opt).state;
  }
  CHECK((s.p_W - Vec3(0.5, 0, 1.5)).norm() < 1e-6);
  CHECK(s.v_W.norm() < 1e-6);
  CHECK(quat_log(s.q_WB).norm() < 1e-9);
}

TEST_CASE("pure yaw torque integrates to the closed-form rate") {
  VehicleParams veh;
  WallModel wall;
  Allocator alloc(veh);
  SimOptions opt;
  opt.rotor_time_constant = 0.0;

  Vec6 w;
  const double tau_z = 0.05;
  w << 0, 0, veh.mass_kg * kGravity, 0, 0, tau_z;
  const Vec6 speeds = alloc.allocate(w).rotor_speeds;

  SimState s = hover_state(Vec3::Zero());
  s.rotor_speeds = speeds;
  const double dt = 1e-3;
  const int n = 2000;
  for (int k = 0; k < n; ++k) {
    s = step_dynamics(s, speeds, wall, veh, alloc, dt, opt).state;
  }
  const double expected_rate = tau_z * n * dt / veh.inertia_B(2, 2);
  CHECK(std::abs(s.omega_B.z() - expected_rate) < 1e-6);
  CHECK(s.omega_B.head<2>().norm() < 1e-9);
}

TEST_CASE("wall reaction is a compression-only spring-damper with viscous drag") {
  VehicleParams veh;
  WallModel wall;
  wall.validate();

  SimState s;
  s.p_W = Vec3(2.0 - veh.end_effector_offset_B.x() + 0.004, 0.1, 1.4);  // 4 mm penetration
  s.v_W = Vec3(0.02, 0.05, -0.03);

  const ContactWrench w = contact_wrench(s, wall, veh);
  CHECK(w.active);
  CHECK(w.penetration_m == doctest::Approx(0.004).epsilon(1e-9));
  // normal points along -x; approach velocity +x means the damper adds force
  const double vn = wall.normal_W.dot(s.v_W);
  const double fn = wall.stiffness * 0.004 - wall.damping * vn;
  CHECK(w.force_W.x() == doctest::Approx(-fn).epsilon(1e-9));
  CHECK(w.force_W.y() == doctest::Approx(-wall.tangential_friction * 0.05).epsilon(1e-9));
  CHECK(w.force_W.z() == doctest::Approx(-wall.tangential_friction * -0.03).epsilon(1e-9));
  // sensor frame is body-aligned here (identity attitude)
  CHECK((w.force_S - w.force_W).norm() < 1e-12);
  CHECK(w.torque_S.y() != 0.0);

  // fast separation while still inside: tension clamp zeroes the normal term
  s.v_W = Vec3(-1.0, 0, 0);
  const ContactWrench sep = contact_wrench(s, wall, veh);
  CHECK(sep.active);
  CHECK(sep.force_W.x() == 0.0);

  // outside the wall: nothing
  s.p_W.x() = 1.0;
  CHECK(!contact_wrench(s, wall, veh).active);
}

TEST_CASE("circle projection recovers depth from area") {
  CameraModel cam;
  cam.T_body_camera = CameraModel::default_mount();
  WallModel wall;

  SimState s = hover_state(Vec3(2.0 - 0.10 - 0.6, 0, 1.5));  // camera 0.6 m from the wall
  const RigidTransform T_WC = camera_pose(cam, s.q_WB, s.p_W);
  const CircleObservation c =
      project_circle(cam, T_WC, wall.hole_center_W, wall.normal_W, wall.target_radius_m);
  REQUIRE(c.valid);
  CHECK(c.u == doctest::Approx(cam.intrinsics.cx).epsilon(1e-12));
  CHECK(c.v == doctest::Approx(cam.intrinsics.cy).epsilon(1e-12));
  // fronto-parallel: r_px = fx * R / d
  CHECK(c.radius_px == doctest::Approx(cam.intrinsics.fx * wall.target_radius_m / 0.6).epsilon(1e-9));
  const double area_m2 = M_PI * wall.target_radius_m * wall.target_radius_m;
  const double d = std::sqrt(cam.intrinsics.fx * cam.intrinsics.fy * area_m2 / c.area_px2);
  CHECK(d == doctest::Approx(0.6).epsilon(1e-9));

  // too oblique: rotate the body 75 degrees about z
  SimState tilted = s;
  tilted.p_W = Vec3(1.0, 0, 1.5);
  tilted.q_WB = quat_exp(Vec3(0, 0, 75.0 * M_PI / 180.0));
  const RigidTransform T_WC2 = camera_pose(cam, tilted.q_WB, tilted.p_W);
  CHECK(!project_circle(cam, T_WC2, wall.hole_center_W, wall.normal_W, wall.target_radius_m).valid);
}

TEST_CASE("landmark projection culls points behind the plane and outside the image") {
  CameraModel cam;
  cam.T_body_camera = CameraModel::default_mount();
  WallModel wall;
  SimState s = hover_state(Vec3(0.5, 0, 1.5));
  const RigidTransform T_WC = camera_pose(cam, s.q_WB, s.p_W);

  CHECK(project_landmark(cam, T_WC, Vec3(2.0, 0.2, 1.6), wall.normal_W, wall.plane_point_W));
  CHECK(!project_landmark(cam, T_WC, Vec3(2.5, 0.2, 1.6), wall.normal_W, wall.plane_point_W));
  CHECK(!project_landmark(cam, T_WC, Vec3(0.4, 0, 1.5), wall.normal_W, wall.plane_point_W));
  CHECK(!project_landmark(cam, T_WC, Vec3(2.0, 5.0, 1.5), wall.normal_W, wall.plane_point_W));
}

TEST_CASE("landmark field respects the wall plane and the clear zone") {
  WallModel wall;
  LandmarkFieldParams p;
  SeededRng rng(3, RngStream::Landmarks);
  const auto lms = generate_landmarks(wall, p, rng);
  REQUIRE(static_cast<int>(lms.size()) == p.wall_count + p.scatter_count);
  for (int i = 0; i < p.wall_count; ++i) {
    CHECK(std::abs(wall.normal_W.dot(lms[i].p_W - wall.plane_point_W)) < 1e-12);
    CHECK((lms[i].p_W - wall.hole_center_W).norm() >= p.target_clear_radius - 1e-12);
  }
  for (size_t i = p.wall_count; i < lms.size(); ++i) {
    const double depth = wall.normal_W.dot(lms[i].p_W - wall.plane_point_W);
    CHECK(depth >= p.scatter_depth_min - 1e-12);
    CHECK(depth <= p.scatter_depth_max + 1e-12);
  }
  // same seed, same field
  SeededRng rng2(3, RngStream::Landmarks);
  const auto lms2 = generate_landmarks(wall, p, rng2);
  for (size_t i = 0; i < lms.size(); ++i) {
    CHECK((lms[i].p_W - lms2[i].p_W).norm() == 0.0);
  }
}

TEST_CASE("imu reports specific force and rate exactly when noise is off") {
  ImuNoiseParams noise;
  noise.acc_sigma = noise.gyro_sigma = 0.0;
  noise.acc_bias_walk = noise.gyro_bias_walk = 0.0;
  noise.acc_bias0 = Vec3(0.01, -0.02, 0.03);
  ImuSensor imu(noise, 5);

  SimState s = hover_state(Vec3::Zero());
  s.q_WB = quat_exp(Vec3(0.1, -0.2, 0.4));
  s.omega_B = Vec3(0.2, -0.1, 0.05);
  const Vec3 accel_W(0.5, -0.3, 0.1);

  const ImuSample m = imu.sample(s, accel_W, 0.002);
  const Vec3 expected =
      s.q_WB.conjugate() * (accel_W - Vec3(0, 0, -kGravity)) + noise.acc_bias0;
  CHECK((m.specific_force_B - expected).norm() < 1e-12);
  CHECK((m.angular_rate_B - s.omega_B).norm() < 1e-12);
}

TEST_CASE("sensor streams replay bit-identically for one seed") {
  ImuNoiseParams ip;
  FtNoiseParams fp;
  ImuSensor a(ip, 99), b(ip, 99);
  FtSensor fa(fp, 99), fb(fp, 99);

  SimState s = hover_state(Vec3(1, 2, 3));
  ContactWrench w;
  w.force_S = Vec3(-3, 0.1, 0.2);
  for (int k = 0; k < 100; ++k) {
    const ImuSample ma = a.sample(s, Vec3(0, 0, 0.1), 0.002);
    const ImuSample mb = b.sample(s, Vec3(0, 0, 0.1), 0.002);
    CHECK((ma.specific_force_B - mb.specific_force_B).norm() == 0.0);
    CHECK((ma.angular_rate_B - mb.angular_rate_B).norm() == 0.0);
    const FtSample sa = fa.sample(w, k * 0.005), sb = fb.sample(w, k * 0.005);
    CHECK((sa.force_S - sb.force_S).norm() == 0.0);
  }
}

TEST_CASE("camera sensor flags only in-image pixels as valid") {
  CameraModel model;
  model.T_body_camera = CameraModel::default_mount();
  CameraNoiseParams noise;
  WallModel wall;
  LandmarkFieldParams lfp;
  SeededRng lrng(3, RngStream::Landmarks);
  const auto lms = generate_landmarks(wall, lfp, lrng);

  CameraSensor cam(model, noise, 77);
  SimState s = hover_state(Vec3(0.5, 0, 1.5));
  const CameraObservation obs = cam.sample(s, wall, lms);
  REQUIRE(obs.landmarks.size() == lms.size());
  int valid = 0;
  for (const auto& px : obs.landmarks) {
    if (!px.valid) continue;
    ++valid;
    CHECK(px.u >= 0.0);
    CHECK(px.u <= model.intrinsics.width - 1);
    CHECK(px.v >= 0.0);
    CHECK(px.v <= model.intrinsics.height - 1);
  }
  CHECK(valid > 10);
  CHECK(obs.circle.valid);
}

TEST_CASE("divergent states are rejected") {
  VehicleParams veh;
  WallModel wall;
  Allocator alloc(veh);
  SimState s = hover_state(Vec3::Zero());
  s.v_W = Vec3(100, 0, 0);
  CHECK_THROWS_AS(step_dynamics(s, Vec6::Zero(), wall, veh, alloc, 1e-3), NumericalDivergence);
  CHECK_THROWS_AS(step_dynamics(s, Vec6::Zero(), wall, veh, alloc, 0.0), ConfigError);
}
