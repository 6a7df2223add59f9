#include "amsim/geometry.hpp"

#include <cmath>

namespace amsim {

const char* frame_name(FrameId f) {
  switch (f) {
    case FrameId::World: return "World";
    case FrameId::Body: return "Body";
    case FrameId::Camera: return "Camera";
    case FrameId::ForceSensor: return "ForceSensor";
    case FrameId::Contact: return "Contact";
  }
  return "?";
}

FrameMismatch::FrameMismatch(FrameId expected, FrameId got, const std::string& what_op)
    : std::runtime_error("frame mismatch in " + what_op + ": expected " +
                         frame_name(expected) + ", got " + frame_name(got)) {}

Mat3 skew(const Vec3& v) {
  Mat3 m;
  m << 0, -v.z(), v.y(),
       v.z(), 0, -v.x(),
       -v.y(), v.x(), 0;
  return m;
}

Quat quat_exp(const Vec3& omega) {
  const double theta = omega.norm();
  double w, s;
  if (theta < 1e-8) {
    // sin(t/2)/t and cos(t/2) to second order, accurate to ~1e-32 here
    w = 1.0 - theta * theta / 8.0;
    s = 0.5 - theta * theta / 48.0;
  } else {
    w = std::cos(0.5 * theta);
    s = std::sin(0.5 * theta) / theta;
  }
  Quat q(w, s * omega.x(), s * omega.y(), s * omega.z());
  q.normalize();
  return q;
}

Vec3 quat_log(const Quat& q_in) {
  const Quat q = canonical(q_in.normalized());
  const Vec3 v(q.x(), q.y(), q.z());
  const double n = v.norm();
  // w >= 0 after canonicalization, so the angle 2*atan2(n, w) lies in [0, pi]
  if (n < 1e-12) return 2.0 * v;
  return (2.0 * std::atan2(n, q.w()) / n) * v;
}

Quat canonical(const Quat& q) {
  if (q.w() < 0 || (q.w() == 0 && (q.x() < 0 || (q.x() == 0 && (q.y() < 0 || (q.y() == 0 && q.z() < 0)))))) {
    return Quat(-q.w(), -q.x(), -q.y(), -q.z());
  }
  return q;
}

Vec4 quat_wxyz(const Quat& q) { return Vec4(q.w(), q.x(), q.y(), q.z()); }

Mat4 quat_left(const Quat& q) {
  Mat4 m;
  m << q.w(), -q.x(), -q.y(), -q.z(),
       q.x(),  q.w(), -q.z(),  q.y(),
       q.y(),  q.z(),  q.w(), -q.x(),
       q.z(), -q.y(),  q.x(),  q.w();
  return m;
}

Mat4 quat_right(const Quat& q) {
  Mat4 m;
  m << q.w(), -q.x(), -q.y(), -q.z(),
       q.x(),  q.w(),  q.z(), -q.y(),
       q.y(), -q.z(),  q.w(),  q.x(),
       q.z(),  q.y(), -q.x(),  q.w();
  return m;
}

Mat3 so3_right_jacobian(const Vec3& phi) {
  const double t = phi.norm();
  const Mat3 S = skew(phi);
  if (t < 1e-6) {
    return Mat3::Identity() - 0.5 * S + (1.0 / 6.0) * S * S;
  }
  const double t2 = t * t;
  return Mat3::Identity() - ((1.0 - std::cos(t)) / t2) * S +
         ((t - std::sin(t)) / (t2 * t)) * S * S;
}

RigidTransform RigidTransform::inverse() const {
  RigidTransform out;
  out.rotation = rotation.conjugate();
  out.translation = -(out.rotation * translation);
  out.from = to;
  out.to = from;
  return out;
}

RigidTransform compose(const RigidTransform& a, const RigidTransform& b) {
  if (b.to != a.from) throw FrameMismatch(a.from, b.to, "compose");
  RigidTransform out;
  out.rotation = (a.rotation * b.rotation).normalized();
  out.translation = a.rotation * b.translation + a.translation;
  out.from = b.from;
  out.to = a.to;
  return out;
}

Vec3 transform_point(const RigidTransform& T, const Vec3& p, FrameId from, FrameId to) {
  if (T.from != from) throw FrameMismatch(T.from, from, "transform_point (source)");
  if (T.to != to) throw FrameMismatch(T.to, to, "transform_point (destination)");
  return T.rotation * p + T.translation;
}

}  // namespace amsim
