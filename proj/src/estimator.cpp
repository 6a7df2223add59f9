#include "amsim/estimator.hpp"

#include <algorithm>
#include <cmath>

#include "amsim/errors.hpp"
#include "amsim/preintegration.hpp"

namespace amsim {

namespace {

Vec3 unproject(const PinholeIntrinsics& k, const Vec2& px) {
  return Vec3((px.x() - k.cx) / k.fx, (px.y() - k.cy) / k.fy, 1.0);
}

ImuSample lerp_sample(const ImuSample& a, const ImuSample& b, double t) {
  ImuSample s;
  s.t = t;
  if (b.t <= a.t) {
    s.specific_force_B = b.specific_force_B;
    s.angular_rate_B = b.angular_rate_B;
    return s;
  }
  const double u = (t - a.t) / (b.t - a.t);
  s.specific_force_B = (1 - u) * a.specific_force_B + u * b.specific_force_B;
  s.angular_rate_B = (1 - u) * a.angular_rate_B + u * b.angular_rate_B;
  return s;
}

/// Interpolated sample inside the buffer, zero-order hold past either end.
ImuSample sample_at(const std::deque<ImuSample>& buf, double t) {
  if (t <= buf.front().t) {
    ImuSample s = buf.front();
    s.t = t;
    return s;
  }
  if (t >= buf.back().t) {
    ImuSample s = buf.back();
    s.t = t;
    return s;
  }
  const auto it = std::lower_bound(buf.begin(), buf.end(), t,
                                   [](const ImuSample& s, double tv) { return s.t < tv; });
  return lerp_sample(*(it - 1), *it, t);
}

// midpoint step from sample a to sample b, biases held at the current estimate
void integrate_imu(NavState& x, const ImuSample& a, const ImuSample& b, const Vec3& g) {
  const double dt = b.t - a.t;
  if (dt <= 0) return;
  const Vec3 w_mid = 0.5 * (a.angular_rate_B + b.angular_rate_B) - x.bg;
  const Quat q0 = x.q_WB;
  const Quat q1 = canonical(q0 * quat_exp(w_mid * dt));
  const Vec3 a_mid =
      0.5 * (q0 * (a.specific_force_B - x.ba) + q1 * (b.specific_force_B - x.ba)) + g;
  x.p_W += x.v_W * dt + 0.5 * a_mid * dt * dt;
  x.v_W += a_mid * dt;
  x.q_WB = q1;
  x.t = b.t;
}

}  // namespace

Estimator::Estimator(const EstimatorConfig& cfg) : cfg_(cfg), detector_(cfg.detector) {
  if (cfg.keyframe_min_dt <= 0) throw ConfigError("estimator: keyframe_min_dt must be positive");
  if (cfg.max_landmarks < 1) throw ConfigError("estimator: max_landmarks must be at least 1");
  if (cfg.fallback_depth_m <= 0) throw ConfigError("estimator: fallback_depth_m must be positive");
  if (cfg.force_window < 2) throw ConfigError("estimator: force_window must be at least 2");
  if (cfg.use_static_initializer && cfg.static_init_samples < 1)
    throw ConfigError("estimator: static_init_samples must be at least 1");
  window_.intrinsics = cfg.intrinsics;
  window_.T_BC = cfg.T_BC;
  window_.gravity_W = cfg.gravity_W;
  window_.imu_params = cfg.imu;
  window_.settings = cfg.solver;
}

void Estimator::initialize(const NavState& x0) {
  if (cfg_.use_static_initializer && !initialized_) {
    // pose hint only; attitude and gyro bias come from the standstill average
    init_state_ = x0;
    have_hint_ = true;
    return;
  }
  seed(x0);
}

void Estimator::seed(const NavState& x0) {
  init_state_ = x0;
  prop_ = x0;
  initialized_ = true;
}

const NavState& Estimator::predict(const ImuSample& m) {
  if (!initialized_) {
    if (!cfg_.use_static_initializer) return prop_;
    static_acc_sum_ += m.specific_force_B;
    static_gyro_sum_ += m.angular_rate_B;
    if (++static_count_ >= cfg_.static_init_samples) {
      // at rest the accelerometer reads R_WB^T * (-g) plus bias; level the
      // attitude from the mean reading, take the mean gyro as its bias, and
      // keep position, velocity and yaw from the hint
      NavState x0 = have_hint_ ? init_state_ : NavState{};
      x0.t = m.t;
      x0.bg = static_gyro_sum_ / static_count_;
      const Quat level =
          Quat::FromTwoVectors(static_acc_sum_ / static_count_, -cfg_.gravity_W);
      const Mat3 Rh = x0.q_WB.toRotationMatrix();
      const double yaw = std::atan2(Rh(1, 0), Rh(0, 0));
      x0.q_WB = canonical(Quat(Eigen::AngleAxisd(yaw, Vec3::UnitZ())) * level);
      seed(x0);
    }
    return prop_;
  }
  recent_imu_.push_back(m);
  if (!have_prop_imu_) {
    last_prop_imu_ = m;
    have_prop_imu_ = true;
    prop_.t = m.t;
    return prop_;
  }
  integrate_imu(prop_, last_prop_imu_, m, cfg_.gravity_W);
  last_prop_imu_ = m;
  return prop_;
}

void Estimator::add_ft(const FtSample& s) {
  detector_.update(s);
  force_window_.push_back(detector_.scalar_force(s));
  while (static_cast<int>(force_window_.size()) > cfg_.force_window) force_window_.pop_front();
}

std::vector<ImuSample> Estimator::clip_samples(double t0, double t1) const {
  std::vector<ImuSample> out;
  if (recent_imu_.empty() || t1 <= t0) return out;
  out.push_back(sample_at(recent_imu_, t0));
  for (const ImuSample& s : recent_imu_)
    if (s.t > t0 + 1e-12 && s.t < t1 - 1e-12) out.push_back(s);
  out.push_back(sample_at(recent_imu_, t1));
  return out;
}

double Estimator::fallback_depth() const {
  if (cfg_.use_circle_depth && circle_depth_ > cfg_.min_depth_m &&
      circle_depth_ < cfg_.max_depth_m) {
    return circle_depth_;
  }
  return cfg_.fallback_depth_m;
}

void Estimator::update_landmarks(long kf_id, const CameraObservation& obs) {
  if (obs.circle.valid && obs.circle.area_px2 > 0) {
    const double area_m2 = M_PI * cfg_.target_radius_m * cfg_.target_radius_m;
    circle_depth_ =
        std::sqrt(cfg_.intrinsics.fx * cfg_.intrinsics.fy * area_m2 / obs.circle.area_px2);
  }
  for (const LandmarkPixel& px : obs.landmarks) {
    if (!px.valid) continue;
    const auto it = window_.landmarks.find(px.id);
    if (it != window_.landmarks.end()) {
      it->second.obs[kf_id] = Vec2(px.u, px.v);
    } else if (static_cast<int>(window_.landmarks.size()) < cfg_.max_landmarks) {
      WindowLandmark lm;
      lm.id = px.id;
      lm.anchor_kf = kf_id;
      lm.anchor_px = Vec2(px.u, px.v);
      lm.gamma = 1.0 / fallback_depth();
      lm.obs[kf_id] = lm.anchor_px;
      window_.landmarks.emplace(px.id, std::move(lm));
    }
  }
}

void Estimator::triangulate_pending() {
  const Mat3 R_BC = cfg_.T_BC.rotation_matrix();
  const Vec3 t_BC = cfg_.T_BC.translation;
  for (auto& [id, lm] : window_.landmarks) {
    if (lm.triangulated || lm.obs.size() < 2) continue;
    const int ai = window_.index_of(lm.anchor_kf);
    if (ai < 0) continue;
    const NavState& xa = window_.keyframes[ai].x;
    const Mat3 R_a = xa.q_WB.toRotationMatrix();
    const Vec3 m_a = unproject(cfg_.intrinsics, lm.anchor_px);
    const Vec3 c_a = xa.p_W + R_a * t_BC;
    const Vec3 d_a = (R_a * R_BC * m_a).normalized();

    // pick the co-observation with the widest ray angle
    double best_angle = 0;
    Vec3 best_c = Vec3::Zero(), best_d = Vec3::UnitZ();
    for (const auto& [kf_id, px] : lm.obs) {
      if (kf_id == lm.anchor_kf) continue;
      const int ji = window_.index_of(kf_id);
      if (ji < 0) continue;
      const NavState& xj = window_.keyframes[ji].x;
      const Mat3 R_j = xj.q_WB.toRotationMatrix();
      const Vec3 c_j = xj.p_W + R_j * t_BC;
      const Vec3 d_j = (R_j * R_BC * unproject(cfg_.intrinsics, px)).normalized();
      const double angle = std::acos(std::clamp(d_a.dot(d_j), -1.0, 1.0));
      if (angle > best_angle) {
        best_angle = angle;
        best_c = c_j;
        best_d = d_j;
      }
    }
    if (best_angle < cfg_.min_parallax_rad) continue;

    // closest point on the anchor ray to the other ray: [d_a -d_j] [s;u] = c_j - c_a
    Eigen::Matrix<double, 3, 2> a;
    a.col(0) = d_a;
    a.col(1) = -best_d;
    const Vec2 su = a.colPivHouseholderQr().solve(best_c - c_a);
    const double range = su(0);
    if (!std::isfinite(range) || range <= 0) continue;
    const double z_depth = std::clamp(range / m_a.norm(), cfg_.min_depth_m, cfg_.max_depth_m);
    lm.gamma = 1.0 / z_depth;
    lm.triangulated = true;
  }
}

void Estimator::rebase_propagation() {
  prop_ = window_.keyframes.back().x;
  if (recent_imu_.empty()) {
    have_prop_imu_ = false;
    return;
  }
  last_prop_imu_ = sample_at(recent_imu_, prop_.t);
  have_prop_imu_ = true;
  for (const ImuSample& s : recent_imu_) {
    if (s.t <= prop_.t + 1e-12) continue;
    integrate_imu(prop_, last_prop_imu_, s, cfg_.gravity_W);
    last_prop_imu_ = s;
  }
}

std::optional<EstimatorOutput> Estimator::step(const CameraObservation& obs) {
  if (!initialized_) return std::nullopt;

  EstimatorOutput out;

  if (window_.keyframes.empty()) {
    WindowKeyframe kf;
    kf.id = next_kf_id_++;
    kf.x = have_prop_imu_ ? prop_ : init_state_;
    kf.x.t = obs.t;
    kf.contact = detector_.active();
    window_.keyframes.push_back(kf);
    window_.prior = MarginalPrior::diagonal(kf.id, kf.x, cfg_.init_prior_sigma.cwiseInverse());
    update_landmarks(kf.id, obs);
    last_kf_t_ = obs.t;
    out.keyframe_created = true;
    out.state = kf.x;
    out.contact_active = kf.contact;
    return out;
  }

  if (obs.t - last_kf_t_ < cfg_.keyframe_min_dt - 1e-9) return std::nullopt;
  if (recent_imu_.empty()) return std::nullopt;

  const WindowKeyframe& prev = window_.keyframes.back();
  const std::vector<ImuSample> segment = clip_samples(prev.x.t, obs.t);
  if (segment.size() < 2) return std::nullopt;
  const Preintegrated pre = preintegrate(segment, prev.x.ba, prev.x.bg, cfg_.imu);

  WindowKeyframe kf;
  kf.id = next_kf_id_++;
  kf.contact = detector_.active();
  const double dt = pre.dt;
  const Vec3 g = cfg_.gravity_W;
  const Mat3 r_i = prev.x.q_WB.toRotationMatrix();
  kf.x.t = obs.t;
  kf.x.p_W = prev.x.p_W + prev.x.v_W * dt + 0.5 * g * dt * dt + r_i * pre.delta_p;
  kf.x.v_W = prev.x.v_W + g * dt + r_i * pre.delta_v;
  kf.x.q_WB = canonical(prev.x.q_WB * pre.delta_q);
  kf.x.ba = prev.x.ba;
  kf.x.bg = prev.x.bg;

  if (cfg_.contact_factors_enabled && prev.contact && kf.contact &&
      static_cast<int>(force_window_.size()) >= 2) {
    WindowContactFactor c;
    c.kf_i = prev.id;
    c.kf_j = kf.id;
    c.n_W = cfg_.wall_normal_W;
    c.dt = dt;
    c.force_window.assign(force_window_.begin(), force_window_.end());
    c.information =
        contact_information(c.force_window, cfg_.contact_alpha, cfg_.contact_variance_floor);
    out.contact_weight = c.information(0, 0);
    window_.contacts.push_back(std::move(c));
  }

  window_.keyframes.push_back(kf);
  window_.imu_between.push_back(pre);
  update_landmarks(kf.id, obs);
  triangulate_pending();

  out.report = solve_window(window_);

  // a depth the solver pushed out of the plausible band is unobservable in
  // the current window; park it back on the fallback until parallax returns
  for (auto& [id, lm] : window_.landmarks) {
    if (!lm.triangulated) continue;
    if (!(lm.gamma > 1.0 / cfg_.max_depth_m) || !(lm.gamma < 1.0 / cfg_.min_depth_m)) {
      lm.gamma = 1.0 / fallback_depth();
      lm.triangulated = false;
    }
  }

  marginalize_oldest(window_);

  last_kf_t_ = obs.t;
  while (recent_imu_.size() > 1 && recent_imu_[1].t <= last_kf_t_) recent_imu_.pop_front();
  rebase_propagation();

  out.keyframe_created = true;
  out.state = window_.keyframes.back().x;
  out.contact_active = detector_.active();
  out.contact_factors = static_cast<int>(window_.contacts.size());
  for (const auto& [id, lm] : window_.landmarks)
    if (lm.obs.size() >= 2) ++out.tracked_landmarks;
  return out;
}

}  // namespace amsim
