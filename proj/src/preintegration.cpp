#include "amsim/preintegration.hpp"

#include <stdexcept>

namespace amsim {

Preintegrated preintegrate(const std::vector<ImuSample>& samples, const Vec3& ba_lin,
                           const Vec3& bg_lin, const PreintegrationParams& params) {
  if (samples.empty()) throw std::invalid_argument("preintegrate: empty sample sequence");

  Preintegrated out;
  out.ba_lin = ba_lin;
  out.bg_lin = bg_lin;

  const double var_g = params.gyro_sigma * params.gyro_sigma;
  const double var_a = params.acc_sigma * params.acc_sigma;

  for (size_t k = 0; k + 1 < samples.size(); ++k) {
    const ImuSample& m0 = samples[k];
    const ImuSample& m1 = samples[k + 1];
    const double dt = m1.t - m0.t;
    if (!(dt > 0)) throw std::invalid_argument("preintegrate: non-increasing timestamps");
    const double dt2 = dt * dt;

    const Vec3 w_mid = 0.5 * (m0.angular_rate_B + m1.angular_rate_B) - bg_lin;
    const Vec3 a0_b = m0.specific_force_B - ba_lin;
    const Vec3 a1_b = m1.specific_force_B - ba_lin;

    const Vec3 phi = w_mid * dt;
    const Quat dq_step = quat_exp(phi);
    const Mat3 R0 = out.delta_q.toRotationMatrix();
    const Quat q_next = (out.delta_q * dq_step).normalized();
    const Mat3 R1 = q_next.toRotationMatrix();

    const Vec3 a_mid = 0.5 * (R0 * a0_b + R1 * a1_b);

    const Mat3 E = dq_step.toRotationMatrix().transpose();  // Exp(-phi)
    const Mat3 Jr = so3_right_jacobian(phi);
    const Mat3 dq_dbg_next = E * out.dq_dbg - Jr * dt;
    // d(a_mid)/d(bg) = -0.5 D, the attitude sensitivities chained through both rotations
    const Mat3 D = R0 * skew(a0_b) * out.dq_dbg + R1 * skew(a1_b) * dq_dbg_next;
    const Mat3 S = R0 * skew(a0_b) + R1 * skew(a1_b) * E;  // d(a_mid)/d(delta_theta) * -2

    // covariance first (uses pre-update rotations only)
    Eigen::Matrix<double, 9, 9> A = Eigen::Matrix<double, 9, 9>::Identity();
    A.block<3, 3>(0, 3) = -0.25 * S * dt2;
    A.block<3, 3>(0, 6) = Mat3::Identity() * dt;
    A.block<3, 3>(3, 3) = E;
    A.block<3, 3>(6, 3) = -0.5 * S * dt;

    Eigen::Matrix<double, 9, 6> B = Eigen::Matrix<double, 9, 6>::Zero();
    B.block<3, 3>(3, 0) = Jr * dt;
    B.block<3, 3>(6, 0) = -0.5 * R1 * skew(a1_b) * Jr * dt2;
    B.block<3, 3>(0, 0) = 0.5 * B.block<3, 3>(6, 0) * dt;
    B.block<3, 3>(6, 3) = 0.5 * (R0 + R1) * dt;
    B.block<3, 3>(0, 3) = 0.25 * (R0 + R1) * dt2;

    Vec6 noise_diag;
    noise_diag << var_g, var_g, var_g, var_a, var_a, var_a;
    out.covariance = A * out.covariance * A.transpose() +
                     B * noise_diag.asDiagonal() * B.transpose();

    // bias jacobians, old values on the right-hand sides
    out.dp_dba += out.dv_dba * dt - 0.25 * (R0 + R1) * dt2;
    out.dp_dbg += out.dv_dbg * dt - 0.25 * D * dt2;
    out.dv_dba += -0.5 * (R0 + R1) * dt;
    out.dv_dbg += -0.5 * D * dt;
    out.dq_dbg = dq_dbg_next;

    out.delta_p += out.delta_v * dt + 0.5 * a_mid * dt2;
    out.delta_v += a_mid * dt;
    out.delta_q = q_next;
    out.dt += dt;
  }
  return out;
}

CorrectedDeltas correct_for_bias(const Preintegrated& pre, const Vec3& ba, const Vec3& bg) {
  const Vec3 dba = ba - pre.ba_lin;
  const Vec3 dbg = bg - pre.bg_lin;
  CorrectedDeltas out;
  out.delta_p = pre.delta_p + pre.dp_dba * dba + pre.dp_dbg * dbg;
  out.delta_v = pre.delta_v + pre.dv_dba * dba + pre.dv_dbg * dbg;
  out.delta_q = (pre.delta_q * quat_exp(pre.dq_dbg * dbg)).normalized();
  return out;
}

}  // namespace amsim
