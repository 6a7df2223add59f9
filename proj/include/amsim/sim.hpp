#pragma once

#include <vector>

#include "amsim/camera.hpp"
#include "amsim/errors.hpp"
#include "amsim/geometry.hpp"
#include "amsim/rng.hpp"
#include "amsim/sensors.hpp"
#include "amsim/vehicle.hpp"

namespace amsim {

/// Vertical work surface with a circular visual target around a hole. The
/// tool face is wider than the hole bore, so the tip always seats against the
/// plane; the hole geometry only defines the visual target and alignment
/// metrics. Normal reaction is a spring-damper clamped to compression,
/// tangential reaction is viscous.
struct WallModel {
  Vec3 plane_point_W = Vec3(2.0, 0.0, 1.5);
  Vec3 normal_W = Vec3(-1.0, 0.0, 0.0);  // unit, pointing into free space
  double stiffness = 3000.0;             // N/m
  double damping = 250.0;                // N s/m, compression only
  double tangential_friction = 40.0;     // N s/m viscous
  Vec3 hole_center_W = Vec3(2.0, 0.0, 1.5);
  double hole_radius_m = 0.025;
  double target_radius_m = 0.07;  // visual ring tracked by the servo

  void validate() const;
};

struct SimState {
  double t = 0;
  Vec3 p_W = Vec3::Zero();
  Vec3 v_W = Vec3::Zero();
  Quat q_WB = Quat::Identity();
  Vec3 omega_B = Vec3::Zero();
  Vec6 rotor_speeds = Vec6::Zero();
};

struct ContactWrench {
  bool active = false;
  double penetration_m = 0;
  Vec3 force_W = Vec3::Zero();   // on the vehicle, world frame
  Vec3 torque_B = Vec3::Zero();  // about the centre of mass
  Vec3 force_S = Vec3::Zero();   // as seen by the wrist sensor
  Vec3 torque_S = Vec3::Zero();
};

/// Reaction wrench of the wall on the end-effector tip for the given state.
ContactWrench contact_wrench(const SimState& s, const WallModel& wall, const VehicleParams& veh);

struct StepResult {
  SimState state;
  Vec3 accel_W = Vec3::Zero();  // true acceleration over the step (for the IMU)
  ContactWrench contact;
};

struct SimOptions {
  double rotor_time_constant = 0.02;  // s, 0 disables the first-order lag
};

/// One semi-implicit Euler step of the rigid-body dynamics under rotor and
/// contact wrenches. Throws NumericalDivergence when the state leaves the
/// finite/plausible envelope.
StepResult step_dynamics(const SimState& s, const Vec6& rotor_speed_cmd, const WallModel& wall,
                         const VehicleParams& veh, const Allocator& alloc, double dt,
                         const SimOptions& opt = {});

struct LandmarkFieldParams {
  int wall_count = 50;      // on the wall plane around the target
  int scatter_count = 12;   // free-standing points between vehicle and wall
  double wall_half_width = 1.6;   // m, lateral extent on the wall
  double wall_z_min = 0.3, wall_z_max = 2.7;
  double target_clear_radius = 0.12;  // keep the visual ring uncluttered
  double scatter_depth_min = 0.6, scatter_depth_max = 1.7;  // distance in front of the wall
};

std::vector<WorldLandmark> generate_landmarks(const WallModel& wall,
                                              const LandmarkFieldParams& p, SeededRng& rng);

/// Accelerometer + gyro with additive gaussian noise and random-walk biases.
class ImuSensor {
 public:
  ImuSensor(const ImuNoiseParams& p, std::uint64_t seed)
      : params_(p), acc_bias_(p.acc_bias0), gyro_bias_(p.gyro_bias0),
        noise_rng_(seed, RngStream::ImuNoise), bias_rng_(seed, RngStream::ImuBias) {}

  ImuSample sample(const SimState& s, const Vec3& accel_W, double dt_since_last);

  const Vec3& acc_bias() const { return acc_bias_; }
  const Vec3& gyro_bias() const { return gyro_bias_; }

 private:
  ImuNoiseParams params_;
  Vec3 acc_bias_, gyro_bias_;
  SeededRng noise_rng_, bias_rng_;
};

class FtSensor {
 public:
  FtSensor(const FtNoiseParams& p, std::uint64_t seed)
      : params_(p), rng_(seed, RngStream::FtNoise) {}

  FtSample sample(const ContactWrench& w, double t);

 private:
  FtNoiseParams params_;
  SeededRng rng_;
};

class CameraSensor {
 public:
  CameraSensor(const CameraModel& model, const CameraNoiseParams& noise, std::uint64_t seed)
      : model_(model), noise_(noise), rng_(seed, RngStream::PixelNoise) {}

  CameraObservation sample(const SimState& s, const WallModel& wall,
                           const std::vector<WorldLandmark>& landmarks);

  const CameraModel& model() const { return model_; }

 private:
  CameraModel model_;
  CameraNoiseParams noise_;
  SeededRng rng_;
};

}  // namespace amsim
