#include <doctest.h>

#include <Eigen/Dense>
#include <cstring>
#include <vector>

#include "amsim/contact_detector.hpp"
#include "amsim/window.hpp"
#include "window_fixtures.hpp"

using namespace amsim;
using testutil::SyntheticOptions;
using testutil::make_synthetic_window;
using testutil::perturb_keyframe;

namespace {

using Vec15 = Eigen::Matrix<double, 15, 1>;

// copy of the window with one stacked coordinate nudged, following the
// column layout reported by assemble_normal_equations
FactorGraphWindow nudged(const FactorGraphWindow& w, const NormalEquations& ne, int k, double h) {
  FactorGraphWindow c = w;
  if (k < ne.state_dim) {
    Vec15 dx = Vec15::Zero();
    dx[k % 15] = h;
    c.keyframes[k / 15].x = c.keyframes[k / 15].x.retract(dx);
  } else {
    c.landmarks.at(ne.landmark_order[k - ne.state_dim]).gamma += h;
  }
  return c;
}

double rel_frobenius(const MatX& a, const MatX& b) {
  return (a - b).norm() / std::max(1.0, b.norm());
}

}  // namespace

TEST_CASE("marginal prior evaluates linearly in the local coordinates") {
  NavState x0;
  x0.p_W = Vec3(0.3, -0.2, 1.1);
  x0.q_WB = canonical(quat_exp(Vec3(0.2, -0.1, 0.4)));
  x0.v_W = Vec3(0.1, 0, -0.3);
  Vec15 sigma = Vec15::Constant(0.2);
  const MarginalPrior prior = MarginalPrior::diagonal(7, x0, sigma.cwiseInverse());

  Vec15 dx;
  for (int i = 0; i < 15; ++i) dx[i] = 0.01 * std::sin(1.0 + i);
  const NavState x = x0.retract(dx);
  CHECK((prior.eval({x}) - prior.J * dx).norm() < 1e-12);

  // the stored Jacobian is exact at the linearization point
  const double h = 1e-6;
  for (int k = 0; k < 15; ++k) {
    Vec15 e = Vec15::Zero();
    e[k] = h;
    const VecX rp = prior.eval({x0.retract(e)});
    const VecX rm = prior.eval({x0.retract(-e)});
    CHECK(((rp - rm) / (2 * h) - prior.J.col(k)).norm() < 1e-6);
  }
}

TEST_CASE("window built at the truth has vanishing cost and converges at once") {
  auto sw = make_synthetic_window(SyntheticOptions{});
  const SolveReport rep = solve_window(sw.w);
  CHECK(rep.initial_cost < 1e-8);
  CHECK(rep.final_cost <= rep.initial_cost);
  CHECK(rep.converged);
  CHECK(rep.iterations <= 2);
  CHECK(rep.monotone);
  for (size_t i = 0; i < sw.w.keyframes.size(); ++i) {
    CHECK((sw.w.keyframes[i].x.p_W - sw.truth[i].p_W).norm() < 1e-9);
  }
  // the covariance of the newest keyframe must come back symmetric positive
  const Eigen::Matrix<double, 15, 15> cov = rep.newest_covariance;
  CHECK((cov - cov.transpose()).norm() < 1e-9 * std::max(1.0, cov.norm()));
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix<double, 15, 15>> es(cov);
  CHECK(es.eigenvalues().minCoeff() > 0);
}

TEST_CASE("assembled gradient matches finite differences of the cost") {
  SyntheticOptions opt;
  opt.keyframes = 4;
  opt.grid_rows = 2;
  opt.grid_cols = 3;
  opt.pixel_noise = 2.0;  // drives several residuals past the robust kink
  opt.contact_factors = true;
  auto sw = make_synthetic_window(opt);
  perturb_keyframe(sw.w, 1, Vec3(0.01, -0.02, 0.015), Vec3(0.01, 0.005, -0.01),
                   Vec3(0.02, -0.01, 0.01));
  perturb_keyframe(sw.w, 3, Vec3(-0.01, 0.01, -0.005), Vec3(-0.008, 0.01, 0.006),
                   Vec3(-0.015, 0.02, -0.01));
  for (auto& [id, lm] : sw.w.landmarks) lm.gamma *= 1.0 + 0.01 * (id % 3);

  const NormalEquations ne = assemble_normal_equations(sw.w);
  const int dim = static_cast<int>(ne.b.size());
  VecX grad_fd(dim);
  const double h = 1e-6;
  for (int k = 0; k < dim; ++k) {
    const double cp = window_cost(nudged(sw.w, ne, k, h));
    const double cm = window_cost(nudged(sw.w, ne, k, -h));
    grad_fd[k] = (cp - cm) / (2 * h);
  }
  CHECK((grad_fd - ne.b).norm() / std::max(1.0, ne.b.norm()) < 1e-5);
  CHECK(rel_frobenius(ne.H, ne.H.transpose()) < 1e-12);
}

TEST_CASE("perturbed keyframes are pulled back to the truth") {
  auto sw = make_synthetic_window(SyntheticOptions{});
  sw.w.settings.max_iterations = 30;
  for (int i = 1; i < static_cast<int>(sw.w.keyframes.size()); ++i) {
    const double s = (i % 2 == 0) ? 1.0 : -1.0;
    perturb_keyframe(sw.w, i, s * Vec3(0.05, -0.03, 0.04), s * Vec3(0.02, 0.015, -0.02),
                     s * Vec3(0.02, -0.02, 0.01));
  }
  for (auto& [id, lm] : sw.w.landmarks) lm.gamma *= 1.1;

  const SolveReport rep = solve_window(sw.w);
  CHECK(rep.monotone);
  CHECK(rep.final_cost < 1e-10);
  for (size_t i = 0; i < sw.w.keyframes.size(); ++i) {
    CHECK((sw.w.keyframes[i].x.p_W - sw.truth[i].p_W).norm() < 1e-6);
    CHECK((sw.w.keyframes[i].x.v_W - sw.truth[i].v_W).norm() < 1e-6);
    const Quat dq = sw.truth[i].q_WB.conjugate() * sw.w.keyframes[i].x.q_WB;
    CHECK(quat_log(dq).norm() < 1e-6);
  }
  for (const auto& [id, lm] : sw.w.landmarks) {
    CHECK(lm.gamma == doctest::Approx(sw.true_gamma.at(id)).epsilon(1e-5));
  }
}

TEST_CASE("contact factors sharpen the wall-normal velocity estimate") {
  SyntheticOptions opt;
  opt.keyframes = 5;
  opt.grid_rows = 2;
  opt.grid_cols = 3;
  opt.pixel_noise = 1.5;
  opt.contact_factors = true;
  auto with = make_synthetic_window(opt);
  auto without = with;
  without.w.contacts.clear();

  for (auto* sw : {&with, &without}) {
    sw->w.settings.max_iterations = 30;
    for (int i = 1; i < static_cast<int>(sw->w.keyframes.size()); ++i) {
      perturb_keyframe(sw->w, i, Vec3(0.04, -0.02, 0.03), Vec3(0.01, -0.01, 0.01),
                       Vec3(0.08, 0.02, -0.03));
    }
    solve_window(sw->w);
  }

  double err_with = 0, err_without = 0;
  for (size_t i = 0; i < with.truth.size(); ++i) {
    err_with += std::abs(with.w.keyframes[i].x.v_W.x() - with.truth[i].v_W.x());
    err_without += std::abs(without.w.keyframes[i].x.v_W.x() - without.truth[i].v_W.x());
  }
  CAPTURE(err_with);
  CAPTURE(err_without);
  CHECK(err_with < err_without);
  CHECK(err_with < 0.5 * err_without + 1e-4);
}

TEST_CASE("dropping the contact factors reproduces the contact-free system bitwise") {
  SyntheticOptions opt;
  opt.contact_factors = true;
  opt.pixel_noise = 0.8;
  auto with = make_synthetic_window(opt);
  auto stripped = with;
  stripped.w.contacts.clear();

  opt.contact_factors = false;
  auto never = make_synthetic_window(opt);
  REQUIRE(never.w.contacts.empty());

  const NormalEquations a = assemble_normal_equations(stripped.w);
  const NormalEquations b = assemble_normal_equations(never.w);
  REQUIRE(a.H.size() == b.H.size());
  CHECK(std::memcmp(a.H.data(), b.H.data(), sizeof(double) * a.H.size()) == 0);
  CHECK(std::memcmp(a.b.data(), b.b.data(), sizeof(double) * a.b.size()) == 0);
}

TEST_CASE("marginalizing the oldest keyframe matches the dense schur complement") {
  SyntheticOptions opt;
  opt.keyframes = 3;
  opt.grid_rows = 2;
  opt.grid_cols = 2;
  auto sw = make_synthetic_window(opt);
  FactorGraphWindow& w = sw.w;
  w.settings.window_size = 2;
  w.settings.reanchor_landmarks = false;

  // re-home the last landmark so it survives: anchored in keyframe 1 and
  // never observed by the keyframe being removed
  WindowLandmark& surv = w.landmarks.at(3);
  surv.obs.erase(0L);
  surv.anchor_kf = 1;
  surv.anchor_px = surv.obs.at(1);
  surv.gamma = 1.0 / testutil::camera_depth(w, sw.truth[1], sw.lm_world.at(3));

  perturb_keyframe(w, 0, Vec3(0.004, -0.006, 0.005), Vec3(0.004, 0.003, -0.002),
                   Vec3(0.01, -0.01, 0.005));
  perturb_keyframe(w, 1, Vec3(-0.006, 0.004, -0.003), Vec3(-0.003, 0.005, 0.002),
                   Vec3(-0.01, 0.005, 0.01));
  perturb_keyframe(w, 2, Vec3(0.005, 0.005, -0.004), Vec3(0.002, -0.004, 0.003),
                   Vec3(0.005, 0.01, -0.01));
  for (auto& [id, lm] : w.landmarks) lm.gamma *= 1.0 + 0.02 * ((id % 2) ? 1 : -1);

  const NormalEquations full = assemble_normal_equations(w);
  REQUIRE(full.state_dim == 45);
  REQUIRE(full.landmark_order == std::vector<long>({0, 1, 2, 3}));

  // eliminate keyframe 0 and the three gammas anchored there
  std::vector<int> elim, keep;
  for (int i = 0; i < 15; ++i) elim.push_back(i);
  for (int i = 15; i < 45; ++i) keep.push_back(i);
  for (int i = 45; i < 48; ++i) elim.push_back(i);
  keep.push_back(48);

  const int ne_dim = static_cast<int>(elim.size());
  const int nk_dim = static_cast<int>(keep.size());
  MatX hee(ne_dim, ne_dim), hek(ne_dim, nk_dim), hkk(nk_dim, nk_dim);
  VecX be(ne_dim), bk(nk_dim);
  for (int i = 0; i < ne_dim; ++i) {
    be[i] = full.b[elim[i]];
    for (int j = 0; j < ne_dim; ++j) hee(i, j) = full.H(elim[i], elim[j]);
    for (int j = 0; j < nk_dim; ++j) hek(i, j) = full.H(elim[i], keep[j]);
  }
  for (int i = 0; i < nk_dim; ++i) {
    bk[i] = full.b[keep[i]];
    for (int j = 0; j < nk_dim; ++j) hkk(i, j) = full.H(keep[i], keep[j]);
  }
  const Eigen::LDLT<MatX> ldlt(hee);
  const MatX h_oracle = hkk - hek.transpose() * ldlt.solve(hek);
  const VecX b_oracle = bk - hek.transpose() * ldlt.solve(be);

  marginalize_oldest(w);
  REQUIRE(w.keyframes.size() == 2);
  REQUIRE(w.keyframes[0].id == 1);
  REQUIRE(w.landmarks.size() == 1);
  REQUIRE(w.prior.valid);
  REQUIRE(w.prior.kf_ids == std::vector<long>({1, 2}));
  REQUIRE(w.imu_between.size() == 1);

  const NormalEquations reduced = assemble_normal_equations(w);
  REQUIRE(reduced.H.rows() == 31);
  CHECK(rel_frobenius(reduced.H, h_oracle) < 1e-8);
  CHECK((reduced.b - b_oracle).norm() / std::max(1.0, b_oracle.norm()) < 1e-8);
}

TEST_CASE("re-anchoring keeps tracked landmarks alive across marginalization") {
  SyntheticOptions opt;
  opt.keyframes = 3;
  opt.grid_rows = 2;
  opt.grid_cols = 2;
  auto sw = make_synthetic_window(opt);
  FactorGraphWindow& w = sw.w;
  w.settings.window_size = 2;
  w.settings.reanchor_landmarks = true;

  std::map<long, Vec2> px_at_kf1;
  for (const auto& [id, lm] : w.landmarks) px_at_kf1[id] = lm.obs.at(1);

  marginalize_oldest(w);
  REQUIRE(w.keyframes.size() == 2);
  REQUIRE(w.landmarks.size() == 4);
  CHECK(w.prior.kf_ids == std::vector<long>({1}));

  for (const auto& [id, lm] : w.landmarks) {
    CHECK(lm.anchor_kf == 1);
    CHECK(lm.obs.count(0) == 0);
    CHECK((lm.anchor_px - px_at_kf1.at(id)).norm() == 0.0);
    // the fixture gammas are exact, so the re-homed inverse depth must match
    // the true depth seen from the new anchor
    const double depth = testutil::camera_depth(w, sw.truth[1], sw.lm_world.at(id));
    CHECK(lm.gamma == doctest::Approx(1.0 / depth).epsilon(1e-10));
  }
}

TEST_CASE("marginalization below the window size leaves the graph alone") {
  auto sw = make_synthetic_window(SyntheticOptions{});
  sw.w.settings.window_size = 10;
  const size_t kfs = sw.w.keyframes.size();
  const size_t lms = sw.w.landmarks.size();
  marginalize_oldest(sw.w);
  CHECK(sw.w.keyframes.size() == kfs);
  CHECK(sw.w.landmarks.size() == lms);
  CHECK(sw.w.prior.kf_ids == std::vector<long>({0}));
}

TEST_CASE("window without landmarks still solves and marginalizes") {
  SyntheticOptions opt;
  opt.keyframes = 3;
  opt.grid_rows = 0;
  opt.grid_cols = 0;
  opt.contact_factors = true;
  auto sw = make_synthetic_window(opt);
  sw.w.settings.window_size = 2;

  const SolveReport rep = solve_window(sw.w);
  CHECK(rep.converged);
  marginalize_oldest(sw.w);
  CHECK(sw.w.keyframes.size() == 2);
  CHECK(sw.w.contacts.size() == 1);
  CHECK(sw.w.prior.valid);
  const SolveReport rep2 = solve_window(sw.w);
  CHECK(rep2.final_cost <= rep2.initial_cost);
}

TEST_CASE("contact detector waits out the dwell before switching on") {
  ContactDetector det{ContactDetectorConfig{}};
  bool flipped_at = false;
  for (int k = 0; k <= 200; ++k) {
    FtSample s;
    s.t = k * 1e-3;
    s.force_S = s.t >= 0.1 ? Vec3(-5, 0, 0) : Vec3::Zero();
    det.update(s);
    if (s.t < 0.15 - 1e-12) {
      CHECK_FALSE(det.active());
    } else if (!flipped_at) {
      CHECK(det.active());
      CHECK(s.t == doctest::Approx(0.15));
      flipped_at = true;
    }
  }
  CHECK(flipped_at);
}

TEST_CASE("a one-millisecond spike never registers as contact") {
  ContactDetector det{ContactDetectorConfig{}};
  for (int k = 0; k <= 300; ++k) {
    FtSample s;
    s.t = k * 1e-3;
    const bool spike = s.t >= 0.1 && s.t < 0.102;
    s.force_S = spike ? Vec3(-6, 0, 0) : Vec3::Zero();
    det.update(s);
    CHECK_FALSE(det.active());
  }
}

TEST_CASE("oscillation inside the hysteresis band holds the contact state") {
  ContactDetector det{ContactDetectorConfig{}};
  int k = 0;
  for (; k <= 60; ++k) {
    FtSample s;
    s.t = k * 1e-3;
    s.force_S = Vec3(-5, 0, 0);
    det.update(s);
  }
  REQUIRE(det.active());
  for (; k <= 1000; ++k) {
    FtSample s;
    s.t = k * 1e-3;
    s.force_S = Vec3(k % 2 ? -1.9 : -2.1, 0, 0);
    det.update(s);
    CHECK(det.active());
  }
  // a clean release switches off only after the dwell
  for (; k <= 1100; ++k) {
    FtSample s;
    s.t = k * 1e-3;
    s.force_S = Vec3::Zero();
    det.update(s);
    CHECK(det.active() == (s.t < 1.001 + 0.05 - 1e-12));
  }
  CHECK_FALSE(det.active());
}
