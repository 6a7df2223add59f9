#pragma once

#include <array>

#include "amsim/errors.hpp"
#include "amsim/geometry.hpp"

namespace amsim {

/// Fully-actuated hexarotor with rotor axes tilted about each arm so the
/// platform can produce lateral force without pitching. Arms are spaced 60
/// degrees apart; tilt direction alternates around the ring.
struct VehicleParams {
  double mass_kg = 3.2;
  Mat3 inertia_B = (Vec3(0.12, 0.12, 0.20)).asDiagonal();  // kg m^2
  double arm_length_m = 0.48;
  double rotor_tilt_rad = 30.0 * M_PI / 180.0;
  double thrust_coeff = 1.2e-5;       // N per (rad/s)^2
  double drag_torque_coeff = 1.92e-7; // N m per (rad/s)^2
  std::array<int, 6> spin_dir = {+1, -1, +1, -1, +1, -1};  // +1 = CCW seen from above
  double max_rotor_speed = 1300.0;    // rad/s

  Vec3 end_effector_offset_B = Vec3(0.55, 0.0, 0.0);  // rigid tool tip
  Vec3 ft_sensor_offset_B = Vec3(0.15, 0.0, 0.0);     // sensor frame axes parallel to body

  /// Throws ConfigError on non-physical values (non-positive mass, inertia
  /// not positive definite, tilt outside (0, pi/2), ...).
  void validate() const;
};

/// Unit thrust axis of rotor i in the body frame.
Vec3 rotor_axis(const VehicleParams& p, int i);

/// Rotor position in the body frame.
Vec3 rotor_position(const VehicleParams& p, int i);

/// 6x6 map from squared rotor speeds to body wrench [force; torque].
/// Throws ConfigError if the geometry makes it rank deficient (e.g. zero tilt,
/// which removes lateral force authority).
Mat6 allocation_matrix(const VehicleParams& p);

struct AllocationResult {
  Vec6 rotor_speeds;  // rad/s, clamped to [0, max_rotor_speed]
  Vec6 thrusts;       // N per rotor, after clamping
  bool saturated = false;
};

/// Inverts the allocation map, clamping per-rotor commands into the feasible
/// range and reporting saturation instead of failing.
class Allocator {
 public:
  explicit Allocator(const VehicleParams& p);

  AllocationResult allocate(const Vec6& wrench_B) const;

  const Mat6& matrix() const { return B_; }
  /// Wrench actually produced by a set of rotor speeds.
  Vec6 wrench_of(const Vec6& rotor_speeds) const;

 private:
  VehicleParams params_;
  Mat6 B_;
  Mat6 B_inv_;
};

}  // namespace amsim
