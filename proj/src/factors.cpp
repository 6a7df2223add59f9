#include "amsim/factors.hpp"

#include <stdexcept>

namespace amsim {

NavState NavState::retract(const Eigen::Matrix<double, 15, 1>& dx) const {
  NavState out = *this;
  out.p_W += dx.segment<3>(kIdxP);
  out.q_WB = (q_WB * quat_exp(dx.segment<3>(kIdxTheta))).normalized();
  out.v_W += dx.segment<3>(kIdxV);
  out.ba += dx.segment<3>(kIdxBa);
  out.bg += dx.segment<3>(kIdxBg);
  return out;
}

Eigen::Matrix<double, 15, 1> NavState::local(const NavState& lin) const {
  Eigen::Matrix<double, 15, 1> dx;
  dx.segment<3>(kIdxP) = p_W - lin.p_W;
  dx.segment<3>(kIdxTheta) = quat_log(lin.q_WB.conjugate() * q_WB);
  dx.segment<3>(kIdxV) = v_W - lin.v_W;
  dx.segment<3>(kIdxBa) = ba - lin.ba;
  dx.segment<3>(kIdxBg) = bg - lin.bg;
  return dx;
}

VisualEval eval_visual(const NavState& xi, const NavState& xj, const RigidTransform& T_BC,
                       const Vec2& anchor_px, double gamma, const Vec2& obs_px,
                       const PinholeIntrinsics& K) {
  VisualEval out;
  if (!(gamma > 0)) return out;

  const Vec3 m_a((anchor_px.x() - K.cx) / K.fx, (anchor_px.y() - K.cy) / K.fy, 1.0);
  const Mat3 R_BC = T_BC.rotation.toRotationMatrix();
  const Vec3& t_BC = T_BC.translation;
  const Mat3 R_i = xi.q_WB.toRotationMatrix();
  const Mat3 R_jT = xj.q_WB.conjugate().toRotationMatrix();

  const Vec3 p_Ca = m_a / gamma;
  const Vec3 p_Bi = R_BC * p_Ca + t_BC;
  const Vec3 p_W = R_i * p_Bi + xi.p_W;
  const Vec3 p_Bj = R_jT * (p_W - xj.p_W);
  const Vec3 p_Cj = R_BC.transpose() * (p_Bj - t_BC);

  const double Z = p_Cj.z();
  if (Z <= 1e-3) return out;
  out.valid = true;

  out.r = Vec2(K.fx * p_Cj.x() / Z + K.cx, K.fy * p_Cj.y() / Z + K.cy) - obs_px;

  Eigen::Matrix<double, 2, 3> dpi;
  dpi << K.fx / Z, 0, -K.fx * p_Cj.x() / (Z * Z),
         0, K.fy / Z, -K.fy * p_Cj.y() / (Z * Z);

  const Eigen::Matrix<double, 2, 3> A = dpi * R_BC.transpose();  // into p_Bj
  const Eigen::Matrix<double, 2, 3> B = A * R_jT;                // into p_W

  out.J_pose_j.leftCols<3>() = -B;
  out.J_pose_j.rightCols<3>() = A * skew(p_Bj);

  out.J_pose_i.leftCols<3>() = B;
  out.J_pose_i.rightCols<3>() = -B * R_i * skew(p_Bi);

  out.J_gamma = -B * R_i * R_BC * m_a / (gamma * gamma);

  // extrinsic enters on both the anchor and the observer side
  out.J_extrinsic.leftCols<3>() = B * R_i - dpi * R_BC.transpose();
  out.J_extrinsic.rightCols<3>() = -B * R_i * R_BC * skew(p_Ca) + dpi * skew(p_Cj);
  return out;
}

ImuEval eval_imu(const NavState& xi, const NavState& xj, const Preintegrated& pre,
                 const Vec3& gravity_W) {
  ImuEval out;
  const double T = pre.dt;
  const CorrectedDeltas corr = correct_for_bias(pre, xi.ba, xi.bg);

  const Mat3 R_iT = xi.q_WB.conjugate().toRotationMatrix();
  const Vec3 u = xj.p_W - xi.p_W - xi.v_W * T - 0.5 * gravity_W * T * T;
  const Vec3 w = xj.v_W - xi.v_W - gravity_W * T;

  Quat Q = corr.delta_q.conjugate() * xi.q_WB.conjugate() * xj.q_WB;
  if (Q.w() < 0) Q = Quat(-Q.w(), -Q.x(), -Q.y(), -Q.z());

  out.r.segment<3>(kIdxP) = R_iT * u - corr.delta_p;
  out.r.segment<3>(kIdxTheta) = 2.0 * Vec3(Q.x(), Q.y(), Q.z());
  out.r.segment<3>(kIdxV) = R_iT * w - corr.delta_v;
  out.r.segment<3>(kIdxBa) = xj.ba - xi.ba;
  out.r.segment<3>(kIdxBg) = xj.bg - xi.bg;

  // attitude rows: exact derivatives through the quaternion products
  const Mat3 G_right = quat_right(Q).block<3, 3>(1, 1);
  const Mat3 G_left = quat_left(Q).block<3, 3>(1, 1);
  const Mat3 R_delta = corr.delta_q.toRotationMatrix();
  // delta_q correction is exp(J db); its exact tangent needs the right Jacobian at J db
  const Mat3 Jr_corr = so3_right_jacobian(pre.dq_dbg * (xi.bg - pre.bg_lin));

  out.J_i.block<3, 3>(kIdxP, kIdxP) = -R_iT;
  out.J_i.block<3, 3>(kIdxP, kIdxTheta) = skew(R_iT * u);
  out.J_i.block<3, 3>(kIdxP, kIdxV) = -R_iT * T;
  out.J_i.block<3, 3>(kIdxP, kIdxBa) = -pre.dp_dba;
  out.J_i.block<3, 3>(kIdxP, kIdxBg) = -pre.dp_dbg;

  out.J_i.block<3, 3>(kIdxTheta, kIdxTheta) = -G_right * R_delta.transpose();
  out.J_i.block<3, 3>(kIdxTheta, kIdxBg) = -G_right * Jr_corr * pre.dq_dbg;

  out.J_i.block<3, 3>(kIdxV, kIdxTheta) = skew(R_iT * w);
  out.J_i.block<3, 3>(kIdxV, kIdxV) = -R_iT;
  out.J_i.block<3, 3>(kIdxV, kIdxBa) = -pre.dv_dba;
  out.J_i.block<3, 3>(kIdxV, kIdxBg) = -pre.dv_dbg;

  out.J_i.block<3, 3>(kIdxBa, kIdxBa) = -Mat3::Identity();
  out.J_i.block<3, 3>(kIdxBg, kIdxBg) = -Mat3::Identity();

  out.J_j.block<3, 3>(kIdxP, kIdxP) = R_iT;
  out.J_j.block<3, 3>(kIdxTheta, kIdxTheta) = G_left;
  out.J_j.block<3, 3>(kIdxV, kIdxV) = R_iT;
  out.J_j.block<3, 3>(kIdxBa, kIdxBa) = Mat3::Identity();
  out.J_j.block<3, 3>(kIdxBg, kIdxBg) = Mat3::Identity();
  return out;
}

ContactEval eval_contact(const NavState& xi, const NavState& xj, const Vec3& n_W) {
  ContactEval out;
  out.r[0] = n_W.dot(xj.p_W - xi.p_W);
  out.r[1] = n_W.dot(xi.v_W);
  out.J_i.block<1, 3>(0, kIdxP) = -n_W.transpose();
  out.J_j.block<1, 3>(0, kIdxP) = n_W.transpose();
  out.J_i.block<1, 3>(1, kIdxV) = n_W.transpose();
  return out;
}

Mat2 contact_information(const std::vector<double>& force_window, double alpha, double eps) {
  if (force_window.size() < 2) {
    throw std::invalid_argument("contact_information: need at least two force samples");
  }
  if (!(alpha > 0)) throw std::invalid_argument("contact_information: alpha must be positive");
  double mean = 0;
  for (double f : force_window) mean += f;
  mean /= force_window.size();
  double var = 0;
  for (double f : force_window) var += (f - mean) * (f - mean);
  var /= force_window.size();
  const double P = alpha * std::max(var, eps);
  return (1.0 / P) * Mat2::Identity();
}

}  // namespace amsim
