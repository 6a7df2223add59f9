#include "amsim/window.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "amsim/errors.hpp"

namespace amsim {

namespace {

using Mat15 = Eigen::Matrix<double, 15, 15>;
using Vec15 = Eigen::Matrix<double, 15, 1>;

constexpr double kInf = std::numeric_limits<double>::infinity();

// sqrt-information rows of one whitened factor: ||sqrt_info * r||^2 = r^T Info r
Mat15 imu_sqrt_info(const Preintegrated& pre, const PreintegrationParams& p) {
  Mat15 S = Mat15::Zero();
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix<double, 9, 9>> es(pre.covariance);
  const auto lam = es.eigenvalues().cwiseMax(1e-14);
  S.topLeftCorner<9, 9>() =
      lam.cwiseInverse().cwiseSqrt().asDiagonal() * es.eigenvectors().transpose();
  const double dt = std::max(pre.dt, 1e-6);
  const double wa = std::max(p.acc_bias_walk * std::sqrt(dt), 1e-8);
  const double wg = std::max(p.gyro_bias_walk * std::sqrt(dt), 1e-8);
  S.block<3, 3>(kIdxBa, kIdxBa) = Mat3::Identity() / wa;
  S.block<3, 3>(kIdxBg, kIdxBg) = Mat3::Identity() / wg;
  return S;
}

// one whitened factor: residual plus jacobian blocks at global column offsets
struct FactorRows {
  VecX r;
  std::vector<std::pair<int, MatX>> blocks;
};

struct Assembler {
  explicit Assembler(int dim, bool build) : build_matrices(build) {
    if (build) {
      H = MatX::Zero(dim, dim);
      b = VecX::Zero(dim);
    }
  }

  void add(const FactorRows& f) {
    cost += 0.5 * f.r.squaredNorm();
    if (!build_matrices) return;
    for (const auto& [ci, Ji] : f.blocks) {
      b.segment(ci, Ji.cols()) += Ji.transpose() * f.r;
      for (const auto& [cj, Jj] : f.blocks) {
        H.block(ci, cj, Ji.cols(), Jj.cols()) += Ji.transpose() * Jj;
      }
    }
  }

  MatX H;
  VecX b;
  double cost = 0;
  bool build_matrices;
};

struct Layout {
  std::map<long, int> kf_offset;     // keyframe id -> column
  std::vector<long> active_lms;      // landmarks contributing factors
  std::vector<long> landmark_order;  // subset with a free gamma column
  std::map<long, int> lm_offset;
  int state_dim = 0;
  int total_dim = 0;
};

Layout make_layout(const FactorGraphWindow& w) {
  Layout lay;
  for (size_t i = 0; i < w.keyframes.size(); ++i) {
    lay.kf_offset[w.keyframes[i].id] = static_cast<int>(15 * i);
  }
  lay.state_dim = static_cast<int>(15 * w.keyframes.size());
  int col = lay.state_dim;
  for (const auto& [id, lm] : w.landmarks) {
    if (lay.kf_offset.count(lm.anchor_kf) == 0) continue;
    int usable = 0;
    for (const auto& [kf, px] : lm.obs) {
      (void)px;
      if (kf != lm.anchor_kf && lay.kf_offset.count(kf)) ++usable;
    }
    if (usable == 0) continue;
    lay.active_lms.push_back(id);
    // a landmark still waiting for parallax keeps its nominal depth fixed,
    // otherwise the unobservable gamma direction absorbs the pixel noise
    if (lm.triangulated) {
      lay.landmark_order.push_back(id);
      lay.lm_offset[id] = col++;
    }
  }
  lay.total_dim = col;
  return lay;
}

// Assembles every factor; throws no exceptions. Returns false through
// *all_valid when a visual factor is unusable at this state (used to reject
// trial steps instead of silently changing the cost definition).
void assemble_into(const FactorGraphWindow& w, const Layout& lay, Assembler& acc,
                   bool* all_valid) {
  *all_valid = true;

  if (w.prior.valid) {
    FactorRows f;
    std::vector<NavState> states(w.prior.kf_ids.size());
    bool ok = true;
    for (size_t k = 0; k < w.prior.kf_ids.size(); ++k) {
      const int idx = w.index_of(w.prior.kf_ids[k]);
      if (idx < 0) { ok = false; break; }
      states[k] = w.keyframes[idx].x;
    }
    if (ok) {
      f.r = w.prior.eval(states);
      for (size_t k = 0; k < w.prior.kf_ids.size(); ++k) {
        f.blocks.push_back({lay.kf_offset.at(w.prior.kf_ids[k]),
                            w.prior.J.middleCols(15 * k, 15)});
      }
      acc.add(f);
    }
  }

  for (size_t i = 0; i + 1 < w.keyframes.size() && i < w.imu_between.size(); ++i) {
    const Preintegrated& pre = w.imu_between[i];
    if (!(pre.dt > 0)) continue;
    const ImuEval e = eval_imu(w.keyframes[i].x, w.keyframes[i + 1].x, pre, w.gravity_W);
    const Mat15 S = imu_sqrt_info(pre, w.imu_params);
    FactorRows f;
    f.r = S * e.r;
    f.blocks.push_back({lay.kf_offset.at(w.keyframes[i].id), S * e.J_i});
    f.blocks.push_back({lay.kf_offset.at(w.keyframes[i + 1].id), S * e.J_j});
    acc.add(f);
  }

  for (const auto& c : w.contacts) {
    const int ii = w.index_of(c.kf_i), ij = w.index_of(c.kf_j);
    if (ii < 0 || ij < 0) continue;
    const ContactEval e = eval_contact(w.keyframes[ii].x, w.keyframes[ij].x, c.n_W);
    Mat2 D = Mat2::Identity();
    D(0, 0) = 1.0 / std::max(c.dt, 1e-3);  // position row shares velocity units
    const Mat2 S = Eigen::LLT<Mat2>(c.information).matrixU() * D;
    FactorRows f;
    f.r = S * e.r;
    f.blocks.push_back({lay.kf_offset.at(c.kf_i), S * e.J_i});
    f.blocks.push_back({lay.kf_offset.at(c.kf_j), S * e.J_j});
    acc.add(f);
  }

  const double inv_sigma = 1.0 / std::max(w.settings.pixel_sigma, 1e-6);
  const double delta = w.settings.huber_px * inv_sigma;  // huber scale, whitened units
  for (long id : lay.active_lms) {
    const WindowLandmark& lm = w.landmarks.at(id);
    if (!(lm.gamma > 0)) { *all_valid = false; continue; }
    const int anchor_idx = w.index_of(lm.anchor_kf);
    const auto gamma_col = lay.lm_offset.find(id);
    for (const auto& [kf, px] : lm.obs) {
      if (kf == lm.anchor_kf) continue;
      const int obs_idx = w.index_of(kf);
      if (obs_idx < 0) continue;
      const VisualEval e = eval_visual(w.keyframes[anchor_idx].x, w.keyframes[obs_idx].x,
                                       w.T_BC, lm.anchor_px, lm.gamma, px, w.intrinsics);
      if (!e.valid) { *all_valid = false; continue; }

      const Vec2 rw = inv_sigma * e.r;
      const double nr = rw.norm();
      double sw = 1.0;  // sqrt of the IRLS weight
      if (nr > delta) {
        acc.cost += delta * nr - 0.5 * delta * delta - 0.5 * (delta / nr) * nr * nr;
        sw = std::sqrt(delta / nr);
      }
      FactorRows f;
      f.r = sw * rw;
      MatX Ji = MatX::Zero(2, 15), Jj = MatX::Zero(2, 15);
      Ji.leftCols<6>() = e.J_pose_i;
      Jj.leftCols<6>() = e.J_pose_j;
      f.blocks.push_back({lay.kf_offset.at(lm.anchor_kf), (sw * inv_sigma) * Ji});
      f.blocks.push_back({lay.kf_offset.at(kf), (sw * inv_sigma) * Jj});
      if (gamma_col != lay.lm_offset.end()) {
        f.blocks.push_back({gamma_col->second, (sw * inv_sigma) * MatX(e.J_gamma)});
      }
      acc.add(f);
    }
  }
}

void apply_step(FactorGraphWindow& w, const Layout& lay, const VecX& dx) {
  for (size_t i = 0; i < w.keyframes.size(); ++i) {
    w.keyframes[i].x = w.keyframes[i].x.retract(dx.segment<15>(15 * i));
  }
  for (long id : lay.landmark_order) {
    w.landmarks.at(id).gamma += dx[lay.lm_offset.at(id)];
  }
}

}  // namespace

VecX MarginalPrior::eval(const std::vector<NavState>& states) const {
  VecX dx(15 * kf_ids.size());
  for (size_t k = 0; k < kf_ids.size(); ++k) {
    dx.segment<15>(15 * k) = states[k].local(lin[k]);
  }
  return r0 + J * dx;
}

MarginalPrior MarginalPrior::diagonal(long kf_id, const NavState& x0,
                                      const Vec15& sqrt_info) {
  MarginalPrior p;
  p.valid = true;
  p.kf_ids = {kf_id};
  p.lin = {x0};
  p.J = MatX(sqrt_info.asDiagonal());
  p.r0 = VecX::Zero(15);
  return p;
}

int FactorGraphWindow::index_of(long kf_id) const {
  for (size_t i = 0; i < keyframes.size(); ++i) {
    if (keyframes[i].id == kf_id) return static_cast<int>(i);
  }
  return -1;
}

NormalEquations assemble_normal_equations(const FactorGraphWindow& w) {
  const Layout lay = make_layout(w);
  Assembler acc(lay.total_dim, true);
  bool all_valid = true;
  assemble_into(w, lay, acc, &all_valid);
  NormalEquations ne;
  ne.H = std::move(acc.H);
  ne.b = std::move(acc.b);
  ne.cost = acc.cost;
  ne.landmark_order = lay.landmark_order;
  ne.state_dim = lay.state_dim;
  return ne;
}

double window_cost(const FactorGraphWindow& w) {
  const Layout lay = make_layout(w);
  Assembler acc(lay.total_dim, false);
  bool all_valid = true;
  assemble_into(w, lay, acc, &all_valid);
  return all_valid ? acc.cost : kInf;
}

SolveReport solve_window(FactorGraphWindow& w) {
  SolveReport rep;
  if (w.keyframes.empty()) return rep;

  const Layout lay = make_layout(w);
  Assembler first(lay.total_dim, false);
  bool valid0 = true;
  assemble_into(w, lay, first, &valid0);
  rep.initial_cost = first.cost;

  double cost = first.cost;
  double lambda = w.settings.lambda_init;

  for (int iter = 0; iter < w.settings.max_iterations; ++iter) {
    const NormalEquations ne = assemble_normal_equations(w);
    rep.iterations = iter + 1;

    bool accepted = false;
    double new_cost = cost, step_norm = 0;
    FactorGraphWindow trial;
    while (lambda <= w.settings.lambda_max) {
      MatX Hd = ne.H;
      for (int i = 0; i < Hd.rows(); ++i) Hd(i, i) += lambda * std::max(ne.H(i, i), 1e-12);
      const VecX dx = Hd.ldlt().solve(-ne.b);
      if (!dx.allFinite()) {
        lambda *= 4.0;
        continue;
      }
      trial = w;
      apply_step(trial, lay, dx);
      const double c = window_cost(trial);
      if (std::isfinite(c) && c <= cost) {
        accepted = true;
        new_cost = c;
        step_norm = dx.norm();
        lambda = std::max(lambda / 3.0, 1e-12);
        break;
      }
      lambda *= 4.0;
    }
    if (!accepted) break;  // damping exhausted, keep the last finite iterate

    if (new_cost > cost) rep.monotone = false;
    const double rel = (cost - new_cost) / std::max(cost, 1e-12);
    w = std::move(trial);
    ++rep.accepted_steps;
    cost = new_cost;
    if (rel < w.settings.cost_rel_tol || step_norm < w.settings.step_tol) {
      rep.converged = true;
      break;
    }
  }
  rep.final_cost = cost;

  // marginal covariance of the newest keyframe from the final system
  const NormalEquations fin = assemble_normal_equations(w);
  MatX Hr = fin.H;
  for (int i = 0; i < Hr.rows(); ++i) Hr(i, i) += 1e-12 * std::max(fin.H(i, i), 1.0);
  const int off = static_cast<int>(15 * (w.keyframes.size() - 1));
  MatX rhs = MatX::Zero(Hr.rows(), 15);
  rhs.block<15, 15>(off, 0).setIdentity();
  const MatX cols = Hr.ldlt().solve(rhs);
  rep.newest_covariance = cols.block<15, 15>(off, 0);
  return rep;
}

void marginalize_oldest(FactorGraphWindow& w) {
  if (static_cast<int>(w.keyframes.size()) <= w.settings.window_size) return;
  if (w.keyframes.size() < 2) return;

  const long old_id = w.keyframes[0].id;
  const NavState& x0 = w.keyframes[0].x;

  // landmarks anchored in the departing keyframe move to their next observer
  // when enough observations remain; the departing observation is dropped
  if (w.settings.reanchor_landmarks) {
    for (auto& [id, lm] : w.landmarks) {
      if (lm.anchor_kf != old_id) continue;
      std::vector<long> observers;
      for (const auto& [kf, px] : lm.obs) {
        (void)px;
        if (kf != old_id && w.index_of(kf) >= 0) observers.push_back(kf);
      }
      if (observers.size() < 2) continue;
      const long next = *std::min_element(observers.begin(), observers.end());

      const Vec3 m_a((lm.anchor_px.x() - w.intrinsics.cx) / w.intrinsics.fx,
                     (lm.anchor_px.y() - w.intrinsics.cy) / w.intrinsics.fy, 1.0);
      const RigidTransform T_WB0{x0.q_WB, x0.p_W, FrameId::Body, FrameId::World};
      const RigidTransform T_WC0 = compose(T_WB0, w.T_BC);
      const Vec3 p_W = transform_point(T_WC0, m_a / lm.gamma, FrameId::Camera, FrameId::World);

      const NavState& xn = w.keyframes[w.index_of(next)].x;
      const RigidTransform T_WBn{xn.q_WB, xn.p_W, FrameId::Body, FrameId::World};
      const Vec3 p_Cn = transform_point(compose(T_WBn, w.T_BC).inverse(), p_W, FrameId::World,
                                        FrameId::Camera);
      if (p_Cn.z() < 1e-2) continue;  // cannot re-anchor behind the camera, let it die
      lm.anchor_kf = next;
      lm.anchor_px = lm.obs.at(next);
      lm.gamma = 1.0 / p_Cn.z();
      lm.obs.erase(old_id);
    }
  }

  // factor set to fold: everything still touching the old keyframe
  std::vector<long> dead_lms;
  for (const auto& [id, lm] : w.landmarks) {
    if (lm.anchor_kf == old_id) dead_lms.push_back(id);
  }

  std::set<long> kept_set;
  if (w.keyframes.size() >= 2) kept_set.insert(w.keyframes[1].id);
  for (const auto& c : w.contacts) {
    if (c.kf_i == old_id) kept_set.insert(c.kf_j);
    if (c.kf_j == old_id) kept_set.insert(c.kf_i);
  }
  for (long id : dead_lms) {
    for (const auto& [kf, px] : w.landmarks.at(id).obs) {
      (void)px;
      if (kf != old_id && w.index_of(kf) >= 0) kept_set.insert(kf);
    }
  }
  if (w.prior.valid) {
    for (long id : w.prior.kf_ids) {
      if (id != old_id) kept_set.insert(id);
    }
  }
  const std::vector<long> kept(kept_set.begin(), kept_set.end());

  // local layout: [old kf | dead gammas | kept kfs]
  std::map<long, int> col_of_kf, col_of_lm;
  col_of_kf[old_id] = 0;
  int col = 15;
  std::vector<long> dead_with_factor;
  for (long id : dead_lms) {
    int usable = 0;
    for (const auto& [kf, px] : w.landmarks.at(id).obs) {
      (void)px;
      if (kf != old_id && w.index_of(kf) >= 0) ++usable;
    }
    if (usable == 0) continue;  // unconstrained, just delete it
    dead_with_factor.push_back(id);
    if (w.landmarks.at(id).triangulated) col_of_lm[id] = col++;
  }
  const int elim_dim = col;
  for (long id : kept) {
    col_of_kf[id] = col;
    col += 15;
  }
  const int total = col;

  MatX H = MatX::Zero(total, total);
  VecX b = VecX::Zero(total);
  auto add_rows = [&](const FactorRows& f) {
    for (const auto& [ci, Ji] : f.blocks) {
      b.segment(ci, Ji.cols()) += Ji.transpose() * f.r;
      for (const auto& [cj, Jj] : f.blocks) {
        H.block(ci, cj, Ji.cols(), Jj.cols()) += Ji.transpose() * Jj;
      }
    }
  };

  if (w.prior.valid) {
    FactorRows f;
    std::vector<NavState> states(w.prior.kf_ids.size());
    for (size_t k = 0; k < w.prior.kf_ids.size(); ++k) {
      states[k] = w.keyframes[w.index_of(w.prior.kf_ids[k])].x;
    }
    f.r = w.prior.eval(states);
    for (size_t k = 0; k < w.prior.kf_ids.size(); ++k) {
      f.blocks.push_back({col_of_kf.at(w.prior.kf_ids[k]), w.prior.J.middleCols(15 * k, 15)});
    }
    add_rows(f);
  }

  if (!w.imu_between.empty() && w.imu_between[0].dt > 0) {
    const ImuEval e = eval_imu(w.keyframes[0].x, w.keyframes[1].x, w.imu_between[0], w.gravity_W);
    const Mat15 S = imu_sqrt_info(w.imu_between[0], w.imu_params);
    FactorRows f;
    f.r = S * e.r;
    f.blocks.push_back({col_of_kf.at(old_id), S * e.J_i});
    f.blocks.push_back({col_of_kf.at(w.keyframes[1].id), S * e.J_j});
    add_rows(f);
  }

  for (const auto& c : w.contacts) {
    if (c.kf_i != old_id && c.kf_j != old_id) continue;
    const ContactEval e =
        eval_contact(w.keyframes[w.index_of(c.kf_i)].x, w.keyframes[w.index_of(c.kf_j)].x, c.n_W);
    Mat2 D = Mat2::Identity();
    D(0, 0) = 1.0 / std::max(c.dt, 1e-3);
    const Mat2 S = Eigen::LLT<Mat2>(c.information).matrixU() * D;
    FactorRows f;
    f.r = S * e.r;
    f.blocks.push_back({col_of_kf.at(c.kf_i), S * e.J_i});
    f.blocks.push_back({col_of_kf.at(c.kf_j), S * e.J_j});
    add_rows(f);
  }

  const double inv_sigma = 1.0 / std::max(w.settings.pixel_sigma, 1e-6);
  const double delta = w.settings.huber_px * inv_sigma;
  for (long id : dead_with_factor) {
    const WindowLandmark& lm = w.landmarks.at(id);
    if (!(lm.gamma > 0)) continue;
    for (const auto& [kf, px] : lm.obs) {
      if (kf == old_id || w.index_of(kf) < 0) continue;
      const VisualEval e = eval_visual(x0, w.keyframes[w.index_of(kf)].x, w.T_BC, lm.anchor_px,
                                       lm.gamma, px, w.intrinsics);
      if (!e.valid) continue;
      const Vec2 rw = inv_sigma * e.r;
      const double nr = rw.norm();
      const double sw = nr > delta ? std::sqrt(delta / nr) : 1.0;
      FactorRows f;
      f.r = sw * rw;
      MatX Ji = MatX::Zero(2, 15), Jj = MatX::Zero(2, 15);
      Ji.leftCols<6>() = e.J_pose_i;
      Jj.leftCols<6>() = e.J_pose_j;
      f.blocks.push_back({col_of_kf.at(old_id), (sw * inv_sigma) * Ji});
      f.blocks.push_back({col_of_kf.at(kf), (sw * inv_sigma) * Jj});
      const auto gamma_col = col_of_lm.find(id);
      if (gamma_col != col_of_lm.end()) {
        f.blocks.push_back({gamma_col->second, (sw * inv_sigma) * MatX(e.J_gamma)});
      }
      add_rows(f);
    }
  }

  // Schur complement onto the kept block
  const int kept_dim = total - elim_dim;
  MatX Hee = H.topLeftCorner(elim_dim, elim_dim);
  const double damp = 1e-12 * std::max(Hee.diagonal().maxCoeff(), 1.0);
  Hee.diagonal().array() += damp;
  const MatX Hek = H.topRightCorner(elim_dim, kept_dim);
  const VecX be = b.head(elim_dim);
  const Eigen::LDLT<MatX> ldlt(Hee);
  const MatX S = H.bottomRightCorner(kept_dim, kept_dim) - Hek.transpose() * ldlt.solve(Hek);
  const VecX bs = b.tail(kept_dim) - Hek.transpose() * ldlt.solve(be);

  Eigen::SelfAdjointEigenSolver<MatX> es(0.5 * (S + S.transpose()));
  const double lam_max = std::max(es.eigenvalues().maxCoeff(), 1.0);
  std::vector<int> keep_idx;
  for (int i = 0; i < es.eigenvalues().size(); ++i) {
    if (es.eigenvalues()[i] > 1e-12 * lam_max) keep_idx.push_back(i);
  }
  MarginalPrior prior;
  prior.valid = true;
  prior.kf_ids = kept;
  prior.J = MatX::Zero(static_cast<int>(keep_idx.size()), kept_dim);
  prior.r0 = VecX::Zero(static_cast<int>(keep_idx.size()));
  for (size_t r = 0; r < keep_idx.size(); ++r) {
    const double lam = es.eigenvalues()[keep_idx[r]];
    const VecX v = es.eigenvectors().col(keep_idx[r]);
    prior.J.row(r) = std::sqrt(lam) * v.transpose();
    prior.r0[r] = v.dot(bs) / std::sqrt(lam);
  }
  for (long id : kept) prior.lin.push_back(w.keyframes[w.index_of(id)].x);

  // shrink the window
  w.prior = std::move(prior);
  w.keyframes.erase(w.keyframes.begin());
  if (!w.imu_between.empty()) w.imu_between.erase(w.imu_between.begin());
  w.contacts.erase(std::remove_if(w.contacts.begin(), w.contacts.end(),
                                  [&](const WindowContactFactor& c) {
                                    return c.kf_i == old_id || c.kf_j == old_id;
                                  }),
                   w.contacts.end());
  for (long id : dead_lms) w.landmarks.erase(id);
  for (auto& [id, lm] : w.landmarks) lm.obs.erase(old_id);
}

}  // namespace amsim
