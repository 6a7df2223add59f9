#include "amsim/scenario.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace amsim {

namespace {

using nlohmann::json;

constexpr int kSchemaVersion = 1;

/// Wraps one JSON object: typed getters mark keys as consumed, finish()
/// rejects whatever was not consumed, so misspelled or unsupported keys
/// cannot silently pass.
class Reader {
 public:
  Reader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(path_ + ": expected an object");
  }

  bool has(const char* key) const { return j_.contains(key); }

  double num(const char* key, double def) {
    if (!mark(key)) return def;
    return fetch<double>(key, "a number");
  }

  int integer(const char* key, int def) {
    if (!mark(key)) return def;
    return fetch<int>(key, "an integer");
  }

  bool boolean(const char* key, bool def) {
    if (!mark(key)) return def;
    return fetch<bool>(key, "a boolean");
  }

  std::string str(const char* key, const std::string& def) {
    if (!mark(key)) return def;
    return fetch<std::string>(key, "a string");
  }

  std::string str_required(const char* key) {
    if (!mark(key)) throw ConfigError(at(key) + " is required");
    return fetch<std::string>(key, "a string");
  }

  std::uint64_t u64_required(const char* key) {
    if (!mark(key)) throw ConfigError(at(key) + " is required");
    return fetch<std::uint64_t>(key, "an unsigned integer");
  }

  int int_required(const char* key) {
    if (!mark(key)) throw ConfigError(at(key) + " is required");
    return fetch<int>(key, "an integer");
  }

  Vec3 vec3(const char* key, const Vec3& def) {
    if (!mark(key)) return def;
    const json& a = j_.at(key);
    if (!a.is_array() || a.size() != 3) {
      throw ConfigError(at(key) + " must be an array of 3 numbers");
    }
    try {
      return Vec3(a[0].get<double>(), a[1].get<double>(), a[2].get<double>());
    } catch (const json::exception&) {
      throw ConfigError(at(key) + " must be an array of 3 numbers");
    }
  }

  /// Child object reader; a missing key reads as an empty object so the
  /// defaults apply.
  Reader child(const char* key) {
    static const json empty = json::object();
    if (!mark(key)) return Reader(empty, at(key));
    if (!j_.at(key).is_object()) throw ConfigError(at(key) + " must be an object");
    return Reader(j_.at(key), at(key));
  }

  void finish() const {
    for (const auto& item : j_.items()) {
      if (!used_.count(item.key())) {
        throw ConfigError(at(item.key().c_str()) + " is not a recognised setting");
      }
    }
  }

 private:
  bool mark(const char* key) {
    if (!j_.contains(key)) return false;
    used_.insert(key);
    return true;
  }

  template <typename T>
  T fetch(const char* key, const char* kind) const {
    try {
      return j_.at(key).get<T>();
    } catch (const json::exception&) {
      throw ConfigError(at(key) + " must be " + kind);
    }
  }

  std::string at(const char* key) const { return path_ + "." + key; }

  const json& j_;
  std::string path_;
  std::set<std::string> used_;
};

double deg2rad(double d) { return d * M_PI / 180.0; }

Scenario parse(const json& root, const std::string& origin) {
  Scenario scn;
  Reader r(root, origin);

  const int version = r.int_required("schema_version");
  if (version != kSchemaVersion) {
    throw ConfigError(origin + ": schema_version " + std::to_string(version) +
                      " is not supported (expected " + std::to_string(kSchemaVersion) + ")");
  }
  scn.name = r.str_required("name");
  scn.seed = r.u64_required("seed");
  scn.duration_s = r.num("duration_s", scn.duration_s);

  {
    Reader c = r.child("rates");
    scn.rates.physics_hz = c.integer("physics_hz", scn.rates.physics_hz);
    scn.rates.imu_hz = c.integer("imu_hz", scn.rates.imu_hz);
    scn.rates.ft_hz = c.integer("ft_hz", scn.rates.ft_hz);
    scn.rates.camera_hz = c.integer("camera_hz", scn.rates.camera_hz);
    scn.rates.control_hz = c.integer("control_hz", scn.rates.control_hz);
    c.finish();
  }
  {
    Reader c = r.child("start");
    scn.start_position_W = c.vec3("position", scn.start_position_W);
    scn.start_yaw_rad = deg2rad(c.num("yaw_deg", scn.start_yaw_rad * 180.0 / M_PI));
    scn.init_hold_s = c.num("init_hold_s", scn.init_hold_s);
    c.finish();
  }
  {
    Reader c = r.child("feedback");
    const std::string source = c.str("source", "truth");
    if (source == "truth") {
      scn.feedback = FeedbackSource::Truth;
    } else if (source == "estimator") {
      scn.feedback = FeedbackSource::Estimator;
    } else {
      throw ConfigError(origin + ".feedback.source must be 'truth' or 'estimator'");
    }
    scn.velocity_noise_bounds = c.vec3("velocity_noise_bounds", scn.velocity_noise_bounds);
    c.finish();
  }
  {
    Reader c = r.child("vehicle");
    scn.vehicle.mass_kg = c.num("mass_kg", scn.vehicle.mass_kg);
    scn.vehicle.arm_length_m = c.num("arm_length_m", scn.vehicle.arm_length_m);
    scn.vehicle.rotor_tilt_rad =
        deg2rad(c.num("rotor_tilt_deg", scn.vehicle.rotor_tilt_rad * 180.0 / M_PI));
    scn.vehicle.max_rotor_speed = c.num("max_rotor_speed", scn.vehicle.max_rotor_speed);
    scn.sim.rotor_time_constant = c.num("rotor_time_constant_s", scn.sim.rotor_time_constant);
    scn.vehicle.end_effector_offset_B.x() =
        c.num("end_effector_x_m", scn.vehicle.end_effector_offset_B.x());
    scn.vehicle.ft_sensor_offset_B.x() =
        c.num("ft_sensor_x_m", scn.vehicle.ft_sensor_offset_B.x());
    c.finish();
  }
  {
    Reader c = r.child("wall");
    const double plane_x = c.num("plane_x_m", scn.wall.plane_point_W.x());
    const double hole_z = c.num("hole_z_m", scn.wall.hole_center_W.z());
    scn.wall.plane_point_W = Vec3(plane_x, 0.0, hole_z);
    scn.wall.hole_center_W = Vec3(plane_x, 0.0, hole_z);
    scn.wall.stiffness = c.num("stiffness", scn.wall.stiffness);
    scn.wall.damping = c.num("damping", scn.wall.damping);
    scn.wall.tangential_friction = c.num("tangential_friction", scn.wall.tangential_friction);
    scn.wall.hole_radius_m = c.num("hole_radius_m", scn.wall.hole_radius_m);
    scn.wall.target_radius_m = c.num("target_radius_m", scn.wall.target_radius_m);
    c.finish();
  }
  {
    Reader c = r.child("landmarks");
    scn.landmarks.wall_count = c.integer("wall_count", scn.landmarks.wall_count);
    scn.landmarks.scatter_count = c.integer("scatter_count", scn.landmarks.scatter_count);
    scn.landmarks.wall_half_width = c.num("wall_half_width_m", scn.landmarks.wall_half_width);
    scn.landmarks.target_clear_radius =
        c.num("clear_radius_m", scn.landmarks.target_clear_radius);
    c.finish();
  }
  {
    Reader c = r.child("sensors");
    {
      Reader imu = c.child("imu");
      scn.imu_noise.acc_sigma = imu.num("acc_sigma", scn.imu_noise.acc_sigma);
      scn.imu_noise.gyro_sigma = imu.num("gyro_sigma", scn.imu_noise.gyro_sigma);
      scn.imu_noise.acc_bias_walk = imu.num("acc_bias_walk", scn.imu_noise.acc_bias_walk);
      scn.imu_noise.gyro_bias_walk = imu.num("gyro_bias_walk", scn.imu_noise.gyro_bias_walk);
      scn.imu_noise.acc_bias0 = imu.vec3("acc_bias0", scn.imu_noise.acc_bias0);
      scn.imu_noise.gyro_bias0 = imu.vec3("gyro_bias0", scn.imu_noise.gyro_bias0);
      imu.finish();
    }
    {
      Reader ft = c.child("ft");
      scn.ft_noise.force_sigma = ft.num("force_sigma", scn.ft_noise.force_sigma);
      scn.ft_noise.torque_sigma = ft.num("torque_sigma", scn.ft_noise.torque_sigma);
      ft.finish();
    }
    {
      Reader camn = c.child("camera");
      scn.camera_noise.pixel_sigma = camn.num("pixel_sigma", scn.camera_noise.pixel_sigma);
      scn.camera_noise.circle_px_sigma =
          camn.num("circle_px_sigma", scn.camera_noise.circle_px_sigma);
      scn.camera_noise.circle_area_rel_sigma =
          camn.num("circle_area_rel_sigma", scn.camera_noise.circle_area_rel_sigma);
      camn.finish();
    }
    c.finish();
  }
  {
    Reader c = r.child("estimator");
    scn.estimator_enabled = c.boolean("enabled", scn.estimator_enabled);
    scn.estimator.contact_factors_enabled =
        c.boolean("contact_factors", scn.estimator.contact_factors_enabled);
    scn.estimator.contact_alpha = c.num("contact_alpha", scn.estimator.contact_alpha);
    scn.estimator.contact_variance_floor =
        c.num("contact_variance_floor", scn.estimator.contact_variance_floor);
    scn.estimator.solver.window_size =
        c.integer("window_size", scn.estimator.solver.window_size);
    scn.estimator.max_landmarks = c.integer("max_landmarks", scn.estimator.max_landmarks);
    scn.estimator.use_static_initializer =
        c.boolean("static_init", scn.estimator.use_static_initializer);
    c.finish();
  }
  {
    Reader c = r.child("servo");
    scn.servo.zeta = c.num("zeta", scn.servo.zeta);
    scn.servo.mu = c.num("mu", scn.servo.mu);
    scn.servo.linear_limit_mps = c.num("linear_limit_mps", scn.servo.linear_limit_mps);
    scn.servo.angular_limit_rps = c.num("angular_limit_rps", scn.servo.angular_limit_rps);
    scn.servo.lost_timeout_s = c.num("lost_timeout_s", scn.servo.lost_timeout_s);
    {
      Reader f = c.child("desired_feature");
      scn.servo.s_star.u = f.num("u", scn.servo.s_star.u);
      scn.servo.s_star.v = f.num("v", scn.servo.s_star.v);
      scn.servo.s_star.r = f.num("r", scn.servo.s_star.r);
      f.finish();
    }
    c.finish();
  }
  {
    Reader c = r.child("blend");
    scn.control.phase.blend.d_min_m = c.num("d_min_m", scn.control.phase.blend.d_min_m);
    scn.control.phase.blend.d_max_m = c.num("d_max_m", scn.control.phase.blend.d_max_m);
    c.finish();
  }
  {
    Reader c = r.child("impedance");
    ImpedanceConfig& imp = scn.control.impedance;
    imp.reference_force_N = c.num("reference_force_N", imp.reference_force_N);
    imp.k_ep = c.num("k_ep", imp.k_ep);
    imp.k_ed = c.num("k_ed", imp.k_ed);
    imp.k_fp = c.num("k_fp", imp.k_fp);
    imp.k_fi = c.num("k_fi", imp.k_fi);
    imp.integral_limit_N = c.num("integral_limit_N", imp.integral_limit_N);
    c.finish();
  }
  {
    Reader c = r.child("motion");
    MotionConfig& mot = scn.control.motion;
    mot.kp_v = c.vec3("kp_v", mot.kp_v);
    mot.ki_v = c.vec3("ki_v", mot.ki_v);
    mot.kd_v = c.vec3("kd_v", mot.kd_v);
    mot.integral_limit_N = c.num("integral_limit_N", mot.integral_limit_N);
    mot.kp_att = c.vec3("kp_att", mot.kp_att);
    mot.kd_att = c.vec3("kd_att", mot.kd_att);
    mot.yaw_setpoint_rad = deg2rad(c.num("yaw_setpoint_deg", mot.yaw_setpoint_rad * 180.0 / M_PI));
    c.finish();
  }
  {
    Reader c = r.child("phase");
    scn.control.phase.contact_dwell_s =
        c.num("contact_dwell_s", scn.control.phase.contact_dwell_s);
    c.finish();
  }
  r.finish();

  // Re-derive the couplings that depend on parsed values.
  scn.estimator.wall_normal_W = scn.wall.normal_W;
  scn.estimator.target_radius_m = scn.wall.target_radius_m;
  scn.servo.target_area_m2 = M_PI * scn.wall.target_radius_m * scn.wall.target_radius_m;
  scn.control.inward_normal_W = -scn.wall.normal_W;
  scn.control.motion.mass_kg = scn.vehicle.mass_kg;

  scn.validate();
  return scn;
}

}  // namespace

Scenario::Scenario() {
  // Task-shaped defaults on top of the library ones: servo pulls the ring to
  // the image centre at a radius just past the touch distance, force
  // authority ramps over the last 0.7 m of camera depth, and the impedance
  // law gets a bit of visual-scale damping so contact is established gently.
  servo.s_star = FeatureVector{0.0, 0.0, 80.0};
  servo.target_area_m2 = M_PI * wall.target_radius_m * wall.target_radius_m;
  control.phase.blend.d_min_m = 0.3;
  control.phase.blend.d_max_m = 1.0;
  control.inward_normal_W = -wall.normal_W;
  control.impedance.k_ep = 0.05;
  control.impedance.k_ed = 0.05;
  control.motion.mass_kg = vehicle.mass_kg;
  control.motion.kp_v = Vec3(20, 14, 14);
  estimator.use_static_initializer = true;
  estimator.init_prior_sigma.segment<3>(6).setConstant(0.01);
}

void Scenario::validate() const {
  if (name.empty()) throw ConfigError("scenario: name must not be empty");
  if (!(duration_s > 0)) throw ConfigError("scenario: duration_s must be positive");
  if (init_hold_s < 0) throw ConfigError("scenario: init_hold_s must be >= 0");
  if ((velocity_noise_bounds.array() < 0).any()) {
    throw ConfigError("scenario: velocity_noise_bounds must be >= 0");
  }
  const auto divides = [&](int num, const char* what) {
    if (num < 1 || rates.physics_hz % num != 0) {
      throw ConfigError(std::string("scenario: ") + what +
                        " must divide physics_hz (" + std::to_string(rates.physics_hz) + ")");
    }
  };
  if (rates.physics_hz < 1) throw ConfigError("scenario: physics_hz must be positive");
  divides(rates.imu_hz, "imu_hz");
  divides(rates.ft_hz, "ft_hz");
  divides(rates.camera_hz, "camera_hz");
  divides(rates.control_hz, "control_hz");
  vehicle.validate();
  wall.validate();
  control.validate();
  if (estimator_enabled && estimator.solver.window_size < 2) {
    throw ConfigError("scenario: estimator window_size must be at least 2");
  }
}

Scenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("scenario: cannot open " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_scenario_text(buf.str(), path);
}

Scenario parse_scenario_text(const std::string& text, const std::string& origin) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(origin + ": " + e.what());
  }
  return parse(root, origin);
}

}  // namespace amsim
