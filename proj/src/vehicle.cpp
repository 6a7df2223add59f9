#include "amsim/vehicle.hpp"

#include <Eigen/Dense>
#include <cmath>

namespace amsim {

void VehicleParams::validate() const {
  if (!(mass_kg > 0)) throw ConfigError("vehicle: mass must be positive");
  if (!(arm_length_m > 0)) throw ConfigError("vehicle: arm length must be positive");
  if (!(thrust_coeff > 0)) throw ConfigError("vehicle: thrust coefficient must be positive");
  if (drag_torque_coeff < 0) throw ConfigError("vehicle: drag torque coefficient must be >= 0");
  if (!(max_rotor_speed > 0)) throw ConfigError("vehicle: max rotor speed must be positive");
  if (!(rotor_tilt_rad > 0) || !(rotor_tilt_rad < M_PI / 2)) {
    throw ConfigError("vehicle: rotor tilt must lie in (0, pi/2)");
  }
  if ((inertia_B - inertia_B.transpose()).norm() > 1e-9) {
    throw ConfigError("vehicle: inertia must be symmetric");
  }
  Eigen::SelfAdjointEigenSolver<Mat3> es(inertia_B);
  if (es.eigenvalues().minCoeff() <= 0) {
    throw ConfigError("vehicle: inertia must be positive definite");
  }
  for (int s : spin_dir) {
    if (s != 1 && s != -1) throw ConfigError("vehicle: spin directions must be +1 or -1");
  }
}

Vec3 rotor_axis(const VehicleParams& p, int i) {
  const double psi = i * M_PI / 3.0;
  const double tilt = (i % 2 == 0 ? 1.0 : -1.0) * p.rotor_tilt_rad;
  const Mat3 Rz = Eigen::AngleAxisd(psi, Vec3::UnitZ()).toRotationMatrix();
  const Mat3 Rx = Eigen::AngleAxisd(tilt, Vec3::UnitX()).toRotationMatrix();
  return Rz * Rx * Vec3::UnitZ();
}

Vec3 rotor_position(const VehicleParams& p, int i) {
  const double psi = i * M_PI / 3.0;
  return p.arm_length_m * Vec3(std::cos(psi), std::sin(psi), 0.0);
}

Mat6 allocation_matrix(const VehicleParams& p) {
  Mat6 B;
  for (int i = 0; i < 6; ++i) {
    const Vec3 t = rotor_axis(p, i);
    const Vec3 r = rotor_position(p, i);
    B.col(i).head<3>() = p.thrust_coeff * t;
    B.col(i).tail<3>() =
        p.thrust_coeff * r.cross(t) - p.spin_dir[i] * p.drag_torque_coeff * t;
  }
  Eigen::JacobiSVD<Mat6> svd(B);
  const double smin = svd.singularValues().minCoeff();
  const double smax = svd.singularValues().maxCoeff();
  if (!(smin > 1e-9 * smax)) {
    throw ConfigError("vehicle: allocation matrix is rank deficient (check rotor tilt)");
  }
  return B;
}

Allocator::Allocator(const VehicleParams& p) : params_(p) {
  params_.validate();
  B_ = allocation_matrix(params_);
  B_inv_ = B_.inverse();
}

AllocationResult Allocator::allocate(const Vec6& wrench_B) const {
  AllocationResult out;
  const Vec6 omega_sq_raw = B_inv_ * wrench_B;
  const double max_sq = params_.max_rotor_speed * params_.max_rotor_speed;
  for (int i = 0; i < 6; ++i) {
    double s = omega_sq_raw[i];
    if (s < 0.0) {
      s = 0.0;
      out.saturated = true;
    } else if (s > max_sq) {
      s = max_sq;
      out.saturated = true;
    }
    out.rotor_speeds[i] = std::sqrt(s);
    out.thrusts[i] = params_.thrust_coeff * s;
  }
  return out;
}

Vec6 Allocator::wrench_of(const Vec6& rotor_speeds) const {
  return B_ * rotor_speeds.cwiseProduct(rotor_speeds);
}

}  // namespace amsim
