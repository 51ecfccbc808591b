#include <doctest.h>

#include "skippy/harness.hpp"

using namespace skippy;

TEST_CASE("q_from_sequence identity and diagonal cases") {
  CHECK((q_from_sequence({}, 1.0, 2) - Mat::Identity(2, 2)).norm() <= 1e-12);

  std::vector<Vec> dirs = {(Vec(2) << 1.0, 0.0).finished()};
  Mat q = q_from_sequence(dirs, 1.0);
  CHECK(q(0, 0) == doctest::Approx(1.0 / std::sqrt(2.0)));
  CHECK(q(1, 1) == doctest::Approx(1.0));
  CHECK(std::abs(q(0, 1)) <= 1e-12);
}

TEST_CASE("q_from_sequence reconstructs its base matrix") {
  Rng rng(5);
  for (int trial = 0; trial < 30; ++trial) {
    const int d = 2 + static_cast<int>(rng.uniform() * 4);
    std::vector<Vec> dirs;
    const int n = 1 + static_cast<int>(rng.uniform() * 5);
    for (int i = 0; i < n; ++i) dirs.push_back(2.0 * rng.gaussian_vector(d));
    const double l2 = 0.5 + rng.uniform();
    Mat q = q_from_sequence(dirs, l2);
    Mat base = Mat::Identity(d, d) / (l2 * l2);
    for (const Vec& v : dirs) base += v * v.transpose();
    Mat q_inv = q.ldlt().solve(Mat::Identity(d, d));
    CHECK((q_inv * q_inv - base).norm() <= 1e-9);
  }
}

TEST_CASE("append_direction matches rebuilding from scratch") {
  Rng rng(7);
  const int d = 3;
  Preconditioning pc = Preconditioning::initial(d, 1, 1.0, 100.0);
  std::vector<Vec> raw;
  for (int i = 0; i < 4; ++i) {
    Vec w = rng.gaussian_vector(d);
    // append_direction stores Q^{-1} w; mirror that for the rebuild.
    raw.push_back(pc.q[0].ldlt().solve(w));
    pc.append_direction(0, w);
    Mat rebuilt = q_from_sequence(raw, 1.0);
    CHECK((rebuilt - pc.q[0]).norm() <= 1e-9);
  }
}

TEST_CASE("append_direction identity example and tiny direction") {
  Preconditioning pc = Preconditioning::initial(3, 1, 1.0, 100.0);
  pc.append_direction(0, Vec::Unit(3, 0));
  CHECK(pc.q[0](0, 0) == doctest::Approx(1.0 / std::sqrt(2.0)));
  CHECK(pc.q[0](1, 1) == doctest::Approx(1.0));

  Preconditioning tiny = Preconditioning::initial(3, 1, 1.0, 100.0);
  Mat before = tiny.q[0];
  tiny.append_direction(0, 1e-12 * Vec::Unit(3, 1));
  CHECK((tiny.q[0] - before).norm() <= 1e-9);
  CHECK_THROWS(tiny.append_direction(0, Vec::Zero(3)));
}

TEST_CASE("validate_preconditioning flags violations") {
  Instance inst = generate_instance({.name = "random_linear", .d = 2, .horizon = 2, .seed = 3});
  PolicyEnumeration en = enumerate_policies(inst.mdp, inst.features);
  ConstantSet cs = compute_constants(2, 2, 0.1, 0.1, 1.0, inst.features.l2_bound);

  Preconditioning pc =
      Preconditioning::initial(2, 2, inst.features.l2_bound, cs.l3);
  // Empty preconditioning is always valid.
  CHECK(validate_preconditioning(pc, en.thetas, cs.d1).empty());

  // A direction longer than L3 violates the third condition.
  Preconditioning bad = pc;
  bad.directions[0].push_back(Vec::Constant(2, bad.l3 + 1.0));
  auto report = validate_preconditioning(bad, en.thetas, cs.d1);
  bool found = false;
  for (const auto& r : report) {
    if (r.find("exceeds L3") != std::string::npos) found = true;
  }
  CHECK(found);
}

TEST_CASE("z_projector selects large-eigenvalue directions") {
  Preconditioning pc = Preconditioning::initial(2, 1, 1.0, 2.0);
  // Q = diag(a, b) with a >= L3^{-2} = 1/4 > b.
  pc.q[0] << 0.5, 0.0, 0.0, 0.1;
  Mat p = z_projector(pc, 0);
  CHECK(p(0, 0) == doctest::Approx(1.0));
  CHECK(p(1, 1) == doctest::Approx(0.0));

  // Identity Q with L3 >= 1 keeps everything.
  Preconditioning id = Preconditioning::initial(3, 1, 1.0, 2.0);
  CHECK((z_projector(id, 0) - Mat::Identity(3, 3)).norm() <= 1e-12);
}

TEST_CASE("projectors are idempotent and symmetric") {
  Rng rng(9);
  for (int trial = 0; trial < 30; ++trial) {
    const int d = 2 + static_cast<int>(rng.uniform() * 4);
    std::vector<Vec> dirs;
    for (int i = 0; i < 3; ++i) dirs.push_back(rng.gaussian_vector(d));
    Preconditioning pc = Preconditioning::initial(d, 1, 1.0, 1.5);
    for (const Vec& v : dirs) pc.append_direction(0, 0.3 * v);
    Mat p = z_projector(pc, 0);
    CHECK((p * p - p).norm() <= 1e-10);
    CHECK((p - p.transpose()).norm() <= 1e-10);
  }
}

TEST_CASE("single-point design") {
  std::vector<Vec> pts = {Vec::Unit(3, 0)};
  DesignSet ds = compute_near_optimal_design(pts, 16);
  CHECK(ds.support_size == 1);
  CHECK(static_cast<int>(ds.points.size()) == 16);
  CHECK(ds.weights.sum() == doctest::Approx(1.0));
  const double lev = quad_norm_sq(pts[0], ds.v_pinv);
  CHECK(lev == doctest::Approx(1.0));
  CHECK(lev <= 2.0 * 3 + 1e-6);
}

TEST_CASE("unit-circle design meets the leverage bound") {
  std::vector<Vec> pts;
  for (int i = 0; i < 40; ++i) {
    const double a = 2.0 * M_PI * i / 40.0;
    pts.push_back((Vec(2) << std::cos(a), std::sin(a)).finished());
  }
  DesignSet ds = compute_near_optimal_design(pts, 16);
  double max_lev = 0.0;
  for (const Vec& p : pts) max_lev = std::max(max_lev, quad_norm_sq(p, ds.v_pinv));
  CHECK(max_lev <= 4.0 + 1e-6);
}

TEST_CASE("kernel of the design matrix is orthogonal to the sample") {
  // Points spanning a 1-dimensional subspace of R^3.
  Rng rng(13);
  Vec dir = rng.unit_vector(3);
  std::vector<Vec> pts;
  for (int i = 0; i < 10; ++i) pts.push_back((rng.uniform() - 0.3) * dir);
  DesignSet ds = compute_near_optimal_design(pts, 16);
  Eigen::SelfAdjointEigenSolver<Mat> es(ds.v);
  for (int i = 0; i < 3; ++i) {
    if (es.eigenvalues()[i] < 1e-10) {
      const Vec kernel_vec = es.eigenvectors().col(i);
      for (const Vec& p : pts) CHECK(std::abs(kernel_vec.dot(p)) <= 1e-8);
    }
  }
}

TEST_CASE("degenerate all-zero sample yields an empty design") {
  std::vector<Vec> pts = {Vec::Zero(2), Vec::Zero(2)};
  DesignSet ds = compute_near_optimal_design(pts, 16);
  CHECK(ds.empty());
  CHECK(ds.v.norm() == 0.0);
  CHECK(ds.p_parallel.norm() == 0.0);
}

TEST_CASE("parallel and perp projectors split the identity") {
  SUBCASE("identity design matrix") {
    DesignSet ds;
    ds.v = Mat::Identity(2, 2);
    parallel_perp_projectors(ds, 0.5);
    CHECK((ds.p_parallel - Mat::Identity(2, 2)).norm() <= 1e-12);
    CHECK(ds.p_perp.norm() <= 1e-12);
  }
  SUBCASE("split diagonal") {
    DesignSet ds;
    ds.v = Mat::Zero(2, 2);
    ds.v.diagonal() << 1.0, 0.25;
    parallel_perp_projectors(ds, 0.5);
    CHECK(ds.p_parallel(0, 0) == doctest::Approx(1.0));
    CHECK(ds.p_parallel(1, 1) == doctest::Approx(0.0));
  }
  SUBCASE("random psd") {
    Rng rng(21);
    for (int trial = 0; trial < 20; ++trial) {
      const int d = 3;
      Mat a = Mat::Zero(d, d);
      for (int i = 0; i < 4; ++i) {
        Vec v = rng.gaussian_vector(d);
        a += v * v.transpose();
      }
      DesignSet ds;
      ds.v = a;
      parallel_perp_projectors(ds, 0.7);
      CHECK((ds.p_parallel + ds.p_perp - Mat::Identity(d, d)).norm() <= 1e-10);
      CHECK((ds.p_parallel * ds.p_parallel - ds.p_parallel).norm() <= 1e-10);
    }
  }
}

TEST_CASE("theory constants reproduce the closed forms") {
  ConstantSet cs = compute_constants(2, 3, 0.1, 0.1, 1.0, 1.0);
  CHECK(cs.gamma == doctest::Approx(1.0 / 16.0));

  // omega at d1 = 10.
  CHECK(7.0 * 11.0 + 7.0 / 3.0 == doctest::Approx(79.0 + 1.0 / 3.0));
  ConstantSet cs4 = compute_constants(4, 3, 0.1, 0.1, 1.0, 1.0);
  // d0 = ceil(4 * 4 * log log 4) + 16 with the d >= 3 clamp.
  CHECK(cs4.d0 == doctest::Approx(22.0));
  CHECK(cs.omega == doctest::Approx(7.0 * (cs.d1 + 1.0) + 7.0 / 3.0));
}

TEST_CASE("constant fixed point is stable under recomputation") {
  ConstantSet cs = compute_constants(2, 4, 0.2, 0.05, 1.0, 2.0);
  // Re-derive the integer-valued constants from the converged values; each
  // must reproduce itself within residual < 1.
  const double d = cs.d, h = cs.horizon;
  const double d1_check =
      std::ceil(4.0 * d * (std::log(16.0) + 4.0 * std::log(cs.l3 * cs.l2)));
  CHECK(std::abs(d1_check - cs.d1) < 1.0 + 1e-9);
  const double n_check =
      std::ceil(64.0 * std::pow(d * h * h * cs.omega / cs.eps, 2) * h * h *
                (2.0 * d * std::log(18.0 * d * h * h * h / cs.eps) +
                 std::log(2.0 * cs.mprime_max * h * h / cs.zeta)));
  CHECK(std::abs(n_check - cs.n) / std::max(1.0, cs.n) <= 1e-9);
  const double m_check =
      std::ceil(cs.beta * cs.beta *
                    std::log(1.0 + h * cs.m_max * cs.n * cs.l1 * cs.l1 / (d * cs.lambda)) +
                1.0);
  CHECK(std::abs(m_check - cs.m_max) < 1.0 + 1e-9);
  CHECK(cs.mprime_max == doctest::Approx(cs.m_max + h * cs.d1));
}

TEST_CASE("practical mode applies and reports the overrides") {
  PracticalOverrides ov;
  ov.n = 100;
  ov.beta = 3.0;
  ConstantSet cs = compute_constants(2, 5, 0.1, 0.1, 1.0, 1.0, ConstantMode::kPractical, ov);
  CHECK(cs.n == doctest::Approx(100));
  CHECK(cs.beta == doctest::Approx(3.0));
  CHECK(cs.omega == doctest::Approx(7.0 + 7.0 / 3.0));
  CHECK(cs.report().find("override.n") != std::string::npos);
  CHECK(cs.uncertainty_threshold ==
        doctest::Approx(ov.uncertainty_threshold_scale * 0.1 /
                        (2.0 * 25.0 * cs.beta * cs.omega)));
}

TEST_CASE("psd square root round-trips") {
  Rng rng(33);
  for (int trial = 0; trial < 30; ++trial) {
    const int d = 2 + static_cast<int>(rng.uniform() * 5);
    Mat a = Mat::Zero(d, d);
    for (int i = 0; i < d + 1; ++i) {
      Vec v = rng.gaussian_vector(d);
      a += v * v.transpose();
    }
    Mat r = psd_sqrt(a);
    CHECK((r * r - a).norm() <= 1e-9 * std::max(1.0, a.norm()));
  }
}

TEST_CASE("lemma: enclosing ellipsoid radius under valid appends") {
  // Directions scaled so sup_theta |<theta, v>| <= 1; the ellipsoid norm of
  // every sampled parameter stays within sqrt(d1+1).
  Instance inst =
      generate_instance({.name = "random_linear", .d = 3, .horizon = 3, .seed = 19});
  PolicyEnumeration en = enumerate_policies(inst.mdp, inst.features);
  ConstantSet cs = compute_constants(3, 3, 0.1, 0.1, 1.0, inst.features.l2_bound);
  Preconditioning pc =
      Preconditioning::initial(3, 3, inst.features.l2_bound, cs.l3);
  Rng rng(4);
  const double bound = std::sqrt(cs.d1 + 1.0);
  for (int h = 0; h < 3; ++h) {
    for (int attempt = 0; attempt < 40; ++attempt) {
      Vec u = rng.unit_vector(3);
      double sup_ip = 0.0;
      for (const Vec& theta : en.thetas.per_stage[h]) {
        sup_ip = std::max(sup_ip, std::abs(theta.dot(pc.q[h].ldlt().solve(u))));
      }
      if (sup_ip <= 1e-12) continue;
      // Scale to make the first condition tight, then test the second.
      const Vec w = u / sup_ip;
      const Vec v = pc.q[h].ldlt().solve(w);
      Mat prefix = pc.base_matrix(h);
      if ((psd_inv_sqrt(prefix) * v).squaredNorm() < 0.5 || v.norm() > cs.l3) continue;
      pc.append_direction(h, w);
      auto report = validate_preconditioning(pc, en.thetas, cs.d1);
      CHECK(report.empty());
      for (const Vec& theta : en.thetas.per_stage[h]) {
        CHECK(quad_norm(theta, pc.base_matrix(h)) <= bound + 1e-8);
      }
    }
    CHECK(static_cast<double>(pc.directions[h].size()) <= cs.d1);
  }
}
