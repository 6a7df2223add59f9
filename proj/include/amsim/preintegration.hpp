#pragma once

#include <vector>

#include "amsim/geometry.hpp"
#include "amsim/sensors.hpp"

namespace amsim {

struct PreintegrationParams {
  double acc_sigma = 0.02;        // m/s^2, per sample
  double gyro_sigma = 0.002;      // rad/s, per sample
  double acc_bias_walk = 0.0005;  // m/s^2 / sqrt(s)
  double gyro_bias_walk = 5e-5;   // rad/s / sqrt(s)
};

/// Relative motion increment between two keyframes, integrated in the frame
/// of the first one and independent of the global state. Linearized around
/// the biases (ba_lin, bg_lin); first-order bias Jacobians allow correcting
/// the deltas when the estimate moves without re-integrating.
///
/// With world gravity g = (0,0,-9.81):
///   delta_p = R_i^T (p_j - p_i - v_i dt - 1/2 g dt^2)
///   delta_v = R_i^T (v_j - v_i - g dt)
///   delta_q = q_i^-1 q_j
struct Preintegrated {
  double dt = 0;
  Vec3 delta_p = Vec3::Zero();
  Vec3 delta_v = Vec3::Zero();
  Quat delta_q = Quat::Identity();

  // covariance of (delta_p, delta_theta, delta_v) errors
  Eigen::Matrix<double, 9, 9> covariance = Eigen::Matrix<double, 9, 9>::Zero();

  // d(delta)/d(bias), evaluated at the linearization biases
  Mat3 dp_dba = Mat3::Zero(), dp_dbg = Mat3::Zero();
  Mat3 dv_dba = Mat3::Zero(), dv_dbg = Mat3::Zero();
  Mat3 dq_dbg = Mat3::Zero();

  Vec3 ba_lin = Vec3::Zero(), bg_lin = Vec3::Zero();
};

/// Pairwise midpoint integration over consecutive samples. Sample k..k+1
/// contributes one step of dt = t[k+1] - t[k]; a single sample yields the
/// identity increment with dt = 0. Throws std::invalid_argument on an empty
/// sequence or non-increasing timestamps.
Preintegrated preintegrate(const std::vector<ImuSample>& samples, const Vec3& ba_lin,
                           const Vec3& bg_lin, const PreintegrationParams& params);

/// First-order corrected deltas for biases (ba, bg) near the linearization point.
struct CorrectedDeltas {
  Vec3 delta_p, delta_v;
  Quat delta_q;
};
CorrectedDeltas correct_for_bias(const Preintegrated& pre, const Vec3& ba, const Vec3& bg);

}  // namespace amsim
