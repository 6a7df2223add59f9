#pragma once

#include <map>
#include <vector>

#include "amsim/factors.hpp"
#include "amsim/sensors.hpp"

namespace amsim {

struct SolverSettings {
  int max_iterations = 15;
  double cost_rel_tol = 1e-6;
  double step_tol = 1e-8;
  double lambda_init = 1e-4;
  double lambda_max = 1e8;
  double huber_px = 1.0;
  double pixel_sigma = 1.0;
  int window_size = 10;  // keyframes kept after marginalization
  // When false, landmarks anchored at the departing keyframe are folded into
  // the marginal prior together with it, so their accumulated multi-frame
  // information keeps constraining velocity and biases; a tracked id is then
  // re-created with a fresh anchor on its next observation. When true they
  // are re-homed to the next observing keyframe instead, which keeps tracks
  // unbroken but feeds the prior nothing except the IMU chain.
  bool reanchor_landmarks = false;
};

struct WindowKeyframe {
  long id = -1;
  NavState x;
  bool contact = false;  // detector state when the keyframe was created
};

/// Inverse-depth landmark. The bearing is fixed by the anchor pixel; gamma is
/// the only optimised parameter. obs holds every keyframe observation
/// including the anchor's (which never becomes a factor).
struct WindowLandmark {
  long id = -1;
  long anchor_kf = -1;
  Vec2 anchor_px = Vec2::Zero();
  double gamma = 0.5;
  bool triangulated = false;  // still at the nominal-depth fallback when false
  std::map<long, Vec2> obs;
};

struct WindowContactFactor {
  long kf_i = -1, kf_j = -1;
  Vec3 n_W = Vec3::UnitX();
  Mat2 information = Mat2::Identity();
  double dt = 1.0;                   // keyframe spacing, scales the position row
  std::vector<double> force_window;  // samples behind `information`, kept for logs
};

/// Gaussian prior left behind by marginalization, linear in the local
/// coordinates of the keyframes it touches: r(x) = r0 + J * stack(x - lin).
/// A fresh window carries the initial-state prior in the same form.
struct MarginalPrior {
  bool valid = false;
  MatX J;
  VecX r0;
  std::vector<long> kf_ids;
  std::vector<NavState> lin;

  VecX eval(const std::vector<NavState>& states) const;

  /// Diagonal prior on a single state, the usual way to seed a window.
  static MarginalPrior diagonal(long kf_id, const NavState& x0,
                                const Eigen::Matrix<double, 15, 1>& sqrt_info);
};

struct FactorGraphWindow {
  std::vector<WindowKeyframe> keyframes;  // ascending id
  std::map<long, WindowLandmark> landmarks;
  std::vector<Preintegrated> imu_between;  // element i sits between keyframes i and i+1
  std::vector<WindowContactFactor> contacts;
  MarginalPrior prior;

  PinholeIntrinsics intrinsics;
  RigidTransform T_BC = RigidTransform::identity(FrameId::Body);
  Vec3 gravity_W = Vec3(0, 0, -kGravity);
  PreintegrationParams imu_params;
  SolverSettings settings;

  int index_of(long kf_id) const;  // -1 when absent
};

/// Dense Gauss-Newton system at the current linearization point. Layout:
/// 15 coordinates per keyframe in window order, then one gamma per landmark
/// with >= 2 observations, in ascending landmark id order.
struct NormalEquations {
  MatX H;
  VecX b;  // J^T r, so the descent step solves H dx = -b
  double cost = 0;
  std::vector<long> landmark_order;
  int state_dim = 0;
};

NormalEquations assemble_normal_equations(const FactorGraphWindow& w);

/// Robust total cost at the current states (same weighting as assembly).
double window_cost(const FactorGraphWindow& w);

struct SolveReport {
  double initial_cost = 0;
  double final_cost = 0;
  int iterations = 0;
  int accepted_steps = 0;
  bool converged = false;
  bool monotone = true;
  Eigen::Matrix<double, 15, 15> newest_covariance = Eigen::Matrix<double, 15, 15>::Zero();
};

/// Levenberg-Marquardt over the window. Accepts only cost-decreasing steps,
/// raises damping on rejection or non-finite trial costs, and stops on
/// relative cost decrease, step norm, or the iteration cap.
SolveReport solve_window(FactorGraphWindow& w);

/// Folds the oldest keyframe and its exclusively-anchored landmarks into the
/// marginal prior (Schur complement at the current linearization), after
/// re-anchoring landmarks that survive. No-op while the window is at or below
/// settings.window_size.
void marginalize_oldest(FactorGraphWindow& w);

}  // namespace amsim
