#include "amsim/runner.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <memory>
#include <vector>

#include "amsim/contact_detector.hpp"
#include "amsim/control.hpp"
#include "amsim/csv.hpp"
#include "amsim/estimator.hpp"
#include "amsim/ibvs.hpp"
#include "amsim/rng.hpp"
#include "amsim/sim.hpp"

namespace amsim {

namespace fs = std::filesystem;

namespace {

/// z-y-x (yaw-pitch-roll) angles of a body-to-world rotation, degrees.
Vec3 rpy_deg(const Quat& q) {
  const Mat3 R = q.toRotationMatrix();
  const double roll = std::atan2(R(2, 1), R(2, 2));
  const double pitch = -std::asin(std::clamp(R(2, 0), -1.0, 1.0));
  const double yaw = std::atan2(R(1, 0), R(0, 0));
  return Vec3(roll, pitch, yaw) * (180.0 / M_PI);
}

struct Logs {
  CsvWriter truth, imu, ft, camera, estimate, servo, control, feedback, events;

  explicit Logs(const fs::path& dir)
      : truth((dir / "truth.csv").string(),
              {"t", "px", "py", "pz", "vx", "vy", "vz", "roll_deg", "pitch_deg", "yaw_deg", "wx",
               "wy", "wz", "contact", "normal_force_N"}),
        imu((dir / "imu.csv").string(), {"t", "ax", "ay", "az", "gx", "gy", "gz"}),
        ft((dir / "ft.csv").string(),
           {"t", "fx_N", "fy_N", "fz_N", "tx_Nm", "ty_Nm", "tz_Nm", "normal_N"}),
        camera((dir / "camera.csv").string(),
               {"t", "circle_valid", "u_px", "v_px", "radius_px", "area_px2",
                "landmarks_visible"}),
        estimate((dir / "estimate.csv").string(),
                 {"t", "px", "py", "pz", "vx", "vy", "vz", "truth_px", "truth_py", "truth_pz",
                  "truth_vx", "truth_vy", "truth_vz", "contact", "contact_factors",
                  "tracked_landmarks", "iterations", "monotone", "final_cost"}),
        servo((dir / "servo.csv").string(),
              {"t", "valid", "lost", "e_u_px", "e_v_px", "e_r_px", "depth_m", "align_err_m",
               "cmd_vx", "cmd_vy", "cmd_vz", "clamped"}),
        control((dir / "control.csv").string(),
                {"t",        "phase",    "lambda",   "tau_vs_fx", "tau_vs_fy", "tau_vs_fz",
                 "tau_vs_tx", "tau_vs_ty", "tau_vs_tz", "F_f",      "tau_fx",   "tau_fy",
                 "tau_fz",   "tau_tx",   "tau_ty",   "tau_tz",    "rotor_0",   "rotor_1",
                 "rotor_2",  "rotor_3",  "rotor_4",  "rotor_5",   "saturated"}),
        feedback((dir / "feedback.csv").string(),
                 {"t", "source", "fb_vx", "fb_vy", "fb_vz", "truth_vx", "truth_vy", "truth_vz"}),
        events((dir / "events.csv").string(), {"t", "event", "value1", "value2"}) {}

  void event(double t, const std::string& name, double v1 = 0, double v2 = 0) {
    events.row({csv_time(t), name, csv_num(v1), csv_num(v2)});
  }

  void close_all() {
    truth.close();
    imu.close();
    ft.close();
    camera.close();
    estimate.close();
    servo.close();
    control.close();
    feedback.close();
    events.close();
  }
};

void write_run_info(const Scenario& scn, const fs::path& dir) {
  CsvWriter info((dir / "run_info.csv").string(),
                 {"name", "seed", "duration_s", "reference_force_N", "wall_nx", "wall_ny",
                  "wall_nz", "hole_radius_m", "estimator_enabled", "contact_factors_enabled"});
  info.row({scn.name, std::to_string(scn.seed), csv_num(scn.duration_s),
            csv_num(scn.control.impedance.reference_force_N), csv_num(scn.wall.normal_W.x()),
            csv_num(scn.wall.normal_W.y()), csv_num(scn.wall.normal_W.z()),
            csv_num(scn.wall.hole_radius_m), scn.estimator_enabled ? "1" : "0",
            scn.estimator.contact_factors_enabled ? "1" : "0"});
  info.close();
}

}  // namespace

RunResult run_scenario(const Scenario& scn, const RunOptions& opt) {
  scn.validate();
  if (opt.out_dir.empty()) throw ConfigError("runner: out_dir must not be empty");
  const fs::path dir(opt.out_dir);
  fs::create_directories(dir);
  write_run_info(scn, dir);
  Logs logs(dir);

  SeededRng lm_rng(scn.seed, RngStream::Landmarks);
  const std::vector<WorldLandmark> landmarks = generate_landmarks(scn.wall, scn.landmarks, lm_rng);
  const Allocator alloc(scn.vehicle);

  SimState s;
  s.p_W = scn.start_position_W;
  s.q_WB = Quat(Eigen::AngleAxisd(scn.start_yaw_rad, Vec3::UnitZ()));
  Vec6 hover_wrench = Vec6::Zero();
  hover_wrench(2) = scn.vehicle.mass_kg * kGravity;
  s.rotor_speeds = alloc.allocate(hover_wrench).rotor_speeds;

  ImuSensor imu(scn.imu_noise, scn.seed);
  FtSensor ft_sensor(scn.ft_noise, scn.seed);
  CameraModel cam_model;
  cam_model.T_body_camera = CameraModel::default_mount();
  CameraSensor cam(cam_model, scn.camera_noise, scn.seed);

  std::unique_ptr<Estimator> est;
  if (scn.estimator_enabled) {
    est = std::make_unique<Estimator>(scn.estimator);
    NavState x0;
    x0.t = 0;
    x0.p_W = s.p_W;
    x0.q_WB = s.q_WB;
    est->initialize(x0);
  }
  VisualServo servo(scn.servo);
  HybridController ctrl(scn.control);
  ContactDetector det(scn.estimator.detector);
  SeededRng inj(scn.seed, RngStream::VelocityInjection);

  const int physics_hz = scn.rates.physics_hz;
  const double dt = 1.0 / physics_hz;
  const long n_steps = std::lround(scn.duration_s * physics_hz);
  const int imu_every = physics_hz / scn.rates.imu_hz;
  const int ft_every = physics_hz / scn.rates.ft_hz;
  const int cam_every = physics_hz / scn.rates.camera_hz;
  const int ctrl_every = physics_hz / scn.rates.control_hz;
  const int truth_every = std::max(1, physics_hz / 100);
  const double dt_ctrl = 1.0 / scn.rates.control_hz;
  const double dt_imu = 1.0 / scn.rates.imu_hz;

  Vec3 last_accel_W = Vec3::Zero();
  Vec6 rotor_cmd = s.rotor_speeds;
  ServoCommand servo_cmd;
  bool circle_visible = false;
  FtSample last_ft;
  ImuSample last_imu;
  bool have_imu = false;
  Phase prev_phase = Phase::Approach;
  bool est_init_logged = false;
  bool first_contact_done = false;
  bool servo_lost_prev = false;
  bool diverged = false;
  std::string diagnostic;

  try {
    for (long k = 0; k < n_steps; ++k) {
      if (k % imu_every == 0) {
        last_imu = imu.sample(s, last_accel_W, dt_imu);
        have_imu = true;
        if (est) est->predict(last_imu);
        logs.imu.num_row(last_imu.t,
                         {last_imu.specific_force_B.x(), last_imu.specific_force_B.y(),
                          last_imu.specific_force_B.z(), last_imu.angular_rate_B.x(),
                          last_imu.angular_rate_B.y(), last_imu.angular_rate_B.z()});
      }

      if (k % ft_every == 0) {
        const ContactWrench cw = contact_wrench(s, scn.wall, scn.vehicle);
        last_ft = ft_sensor.sample(cw, s.t);
        det.update(last_ft);
        if (est) est->add_ft(last_ft);
        logs.ft.num_row(last_ft.t,
                        {last_ft.force_S.x(), last_ft.force_S.y(), last_ft.force_S.z(),
                         last_ft.torque_S.x(), last_ft.torque_S.y(), last_ft.torque_S.z(),
                         det.scalar_force(last_ft)});
      }

      if (k % cam_every == 0) {
        const CameraObservation obs = cam.sample(s, scn.wall, landmarks);
        circle_visible = obs.circle.valid;
        servo_fresh = obs.circle.valid;
        int visible = 0;
        for (const auto& lm : obs.landmarks) visible += lm.valid ? 1 : 0;
        logs.camera.num_row(obs.t, {obs.circle.valid ? 1.0 : 0.0, obs.circle.u, obs.circle.v,
                                    obs.circle.radius_px, obs.circle.area_px2,
                                    static_cast<double>(visible)});

        if (est) {
          const auto out = est->step(obs);
          if (est->initialized() && !est_init_logged) {
            est_init_logged = true;
            logs.event(s.t, "estimator_init");
          }
          if (out && out->keyframe_created) {
            const NavState& x = out->state;
            logs.estimate.num_row(
                x.t, {x.p_W.x(), x.p_W.y(), x.p_W.z(), x.v_W.x(), x.v_W.y(), x.v_W.z(),
                      s.p_W.x(), s.p_W.y(), s.p_W.z(), s.v_W.x(), s.v_W.y(), s.v_W.z(),
                      out->contact_active ? 1.0 : 0.0, static_cast<double>(out->contact_factors),
                      static_cast<double>(out->tracked_landmarks),
                      static_cast<double>(out->report.iterations),
                      out->report.monotone ? 1.0 : 0.0, out->report.final_cost});
          }
        }

        servo_cmd = servo.update(s.t, obs.circle);
        const double fx = scn.servo.intrinsics.fx, fy = scn.servo.intrinsics.fy;
        const double align =
            servo_cmd.depth * std::hypot(servo_cmd.e_s.x() / fx, servo_cmd.e_s.y() / fy);
        bool clamped_any = false;
        for (bool c : servo_cmd.clamped) clamped_any |= c;
        logs.servo.num_row(s.t, {servo_cmd.valid ? 1.0 : 0.0, servo.target_lost() ? 1.0 : 0.0,
                                 servo_cmd.e_s.x(), servo_cmd.e_s.y(), servo_cmd.e_s.z(),
                                 servo_cmd.depth, align, servo_cmd.twist_body(0),
                                 servo_cmd.twist_body(1), servo_cmd.twist_body(2),
                                 clamped_any ? 1.0 : 0.0});
        if (servo.target_lost() && !servo_lost_prev) logs.event(s.t, "target_lost");
        if (!servo.target_lost() && servo_lost_prev) logs.event(s.t, "target_reacquired");
        servo_lost_prev = servo.target_lost();
      }

      if (k % ctrl_every == 0) {
        // the injection stream advances every control tick no matter what
        // uses it, so toggles and feedback modes never shift later draws
        const Vec3 noise(inj.uniform(-scn.velocity_noise_bounds.x(), scn.velocity_noise_bounds.x()),
                         inj.uniform(-scn.velocity_noise_bounds.y(), scn.velocity_noise_bounds.y()),
                         inj.uniform(-scn.velocity_noise_bounds.z(), scn.velocity_noise_bounds.z()));
        const Vec3 v_B_truth = s.q_WB.conjugate() * s.v_W;
        Vec6 fb_twist = Vec6::Zero();
        bool src_est = false;
        if (scn.feedback == FeedbackSource::Estimator && est && est->initialized()) {
          const NavState& p = est->propagated();
          fb_twist.head<3>() = p.q_WB.conjugate() * p.v_W;
          fb_twist.tail<3>() = have_imu ? Vec3(last_imu.angular_rate_B - p.bg) : s.omega_B;
          src_est = true;
        } else {
          fb_twist.head<3>() = v_B_truth + noise;
          fb_twist.tail<3>() = s.omega_B;
        }

        ControlInputs in;
        in.t = s.t;
        in.desired_twist_B = s.t < scn.init_hold_s ? Vec6::Zero() : servo_cmd.twist_body;
        in.target_visible = circle_visible;
        in.depth_m = servo_cmd.depth;
        in.e_x_px = servo_cmd.e_s.z();
        in.normal_force_N = det.scalar_force(last_ft);
        in.contact = det.active();
        in.est_twist_B = fb_twist;
        in.q_WB = s.q_WB;
        const ControlOutput out = ctrl.tick(in, dt_ctrl);
        const AllocationResult ar = alloc.allocate(out.wrench.tau_B);
        rotor_cmd = ar.rotor_speeds;

        std::vector<std::string> row{csv_time(s.t), phase_name(out.phase.phase),
                                     csv_num(out.wrench.lambda)};
        for (int i = 0; i < 6; ++i) row.push_back(csv_num(out.wrench.tau_vs_B(i)));
        row.push_back(csv_num(out.force_setpoint_N));
        for (int i = 0; i < 6; ++i) row.push_back(csv_num(out.wrench.tau_B(i)));
        for (int i = 0; i < 6; ++i) row.push_back(csv_num(ar.rotor_speeds(i)));
        row.push_back(ar.saturated ? "1" : "0");
        logs.control.row(row);

        logs.feedback.num_row(s.t, {src_est ? 1.0 : 0.0, fb_twist(0), fb_twist(1), fb_twist(2),
                                    v_B_truth.x(), v_B_truth.y(), v_B_truth.z()});

        if (out.phase.phase != prev_phase) {
          if (out.phase.phase == Phase::ForceHold) logs.event(s.t, "hold_enter", out.wrench.lambda);
          if (prev_phase == Phase::ForceHold) logs.event(s.t, "hold_exit");
          prev_phase = out.phase.phase;
        }
      }

      if (k % truth_every == 0) {
        const ContactWrench cw = contact_wrench(s, scn.wall, scn.vehicle);
        const Vec3 rpy = rpy_deg(s.q_WB);
        FtSample clean;
        clean.force_S = cw.force_S;
        logs.truth.num_row(s.t, {s.p_W.x(), s.p_W.y(), s.p_W.z(), s.v_W.x(), s.v_W.y(), s.v_W.z(),
                                 rpy.x(), rpy.y(), rpy.z(), s.omega_B.x(), s.omega_B.y(),
                                 s.omega_B.z(), cw.active ? 1.0 : 0.0, det.scalar_force(clean)});
      }

      const StepResult res = step_dynamics(s, rotor_cmd, scn.wall, scn.vehicle, alloc, dt, scn.sim);
      if (res.contact.active && !first_contact_done) {
        first_contact_done = true;
        const Vec3 tip_W = s.p_W + s.q_WB * scn.vehicle.end_effector_offset_B;
        const Vec3 d = tip_W - scn.wall.hole_center_W;
        const Vec3 lateral = d - scn.wall.normal_W * scn.wall.normal_W.dot(d);
        const double off = lateral.norm();
        logs.event(s.t, "first_contact", off, off <= scn.wall.hole_radius_m ? 1.0 : 0.0);
      }
      last_accel_W = res.accel_W;
      s = res.state;
    }
  } catch (const NumericalDivergence& e) {
    diverged = true;
    diagnostic = e.what();
    logs.event(s.t, "diverged");
    if (!opt.quiet) std::fprintf(stderr, "runner: diverged at t=%.3f s: %s\n", s.t, e.what());
  }

  logs.close_all();

  RunResult rr;
  rr.diverged = diverged;
  rr.diagnostic = diagnostic;
  rr.metrics = compute_metrics(opt.out_dir);
  write_metrics(rr.metrics, opt.out_dir);
  emit_plots(opt.out_dir, opt.quiet);
  rr.exit_code = diverged ? 3 : (rr.metrics.success ? 0 : 1);
  return rr;
}

AblationResult run_ablation(const Scenario& scn, const RunOptions& opt, bool variant_a_on,
                            bool variant_b_on) {
  scn.validate();
  if (opt.out_dir.empty()) throw ConfigError("runner: out_dir must not be empty");
  fs::create_directories(opt.out_dir);

  Scenario a = scn, b = scn;
  a.estimator.contact_factors_enabled = variant_a_on;
  b.estimator.contact_factors_enabled = variant_b_on;

  RunOptions oa = opt, ob = opt;
  oa.out_dir = (fs::path(opt.out_dir) / "contact_on").string();
  ob.out_dir = (fs::path(opt.out_dir) / "contact_off").string();

  AblationResult res;
  res.a = run_scenario(a, oa);
  res.b = run_scenario(b, ob);
  res.improvement_pct = ablation_improvement(res.a.metrics, res.b.metrics);
  write_ablation(res.a.metrics, res.b.metrics, opt.out_dir);
  res.exit_code = std::max(res.a.exit_code, res.b.exit_code);
  return res;
}

}  // namespace amsim
