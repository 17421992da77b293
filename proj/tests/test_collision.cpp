#include <jumpnav/collision.hpp>
#include <jumpnav/ip_solver.hpp>

#include <doctest.h>

#include <random>

using namespace jumpnav;

namespace {

std::vector<Vec2> square(double cx, double cz, double half) {
  return {Vec2(cx + half, cz - half), Vec2(cx + half, cz + half), Vec2(cx - half, cz + half),
          Vec2(cx - half, cz - half)};
}

std::vector<Vec2> to_vector(const std::array<Vec2, 4>& a) {
  return std::vector<Vec2>(a.begin(), a.end());
}

// Solves the box fit with the w^2 + h^2 objective and returns the solution.
IpResult solve_box_fit(const BoxFitProblem& fit, BoxFitProblem::Vars* vars_out = nullptr) {
  Nlp nlp;
  const auto vars = fit.add_to(nlp);
  nlp.add_cost({vars.w, vars.h},
               [](const auto* x, auto* r) { r[0] = x[0] * x[0] + x[1] * x[1]; });
  if (vars_out) *vars_out = vars;
  IpOptions opt;
  return ip_solve(nlp, opt);
}

}  // namespace

TEST_CASE("rectangle regions have unit normals and correct membership") {
  const ConvexRegion r = ConvexRegion::rectangle(Vec2(1.0, 2.0), 0.5, 0.25);
  REQUIRE(r.A.rows() == 4);
  for (int i = 0; i < 4; ++i) CHECK(r.A.row(i).norm() == doctest::Approx(1.0));
  CHECK(r.contains(Vec2(1.0, 2.0)));
  CHECK(r.contains(Vec2(1.5, 2.25)));
  CHECK(!r.contains(Vec2(1.6, 2.0)));
  CHECK(!r.contains(Vec2(1.0, 2.3)));
  for (const Vec2& v : r.verts) CHECK(r.contains(v, 1e-12));
}

TEST_CASE("bounding box vertices satisfy the half-plane form exactly") {
  std::mt19937 rng(7);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int t = 0; t < 50; ++t) {
    BoundingBox box;
    box.P = Vec2(2 * u(rng), 2 * u(rng));
    box.pitch = 1.5 * u(rng);
    box.w = 0.3 + 0.5 * std::abs(u(rng));
    box.h = 0.2 + 0.4 * std::abs(u(rng));
    const auto verts = box.vertices();
    const Mat2 Rt = box.rotation().transpose();
    const Eigen::Vector4d l = box.l();
    for (const Vec2& v : verts) {
      const Eigen::Vector4d resid = BoundingBox::L() * (Rt * (v - box.P)) - l;
      CHECK(resid.maxCoeff() <= 1e-10);
      // Each corner sits on two of the four faces.
      int active = 0;
      for (int i = 0; i < 4; ++i)
        if (std::abs(resid[i]) <= 1e-10) ++active;
      CHECK(active == 2);
    }
    const double det = box.rotation().determinant();
    CHECK(det == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("box center is the key point mean to machine precision") {
  std::mt19937 rng(9);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  std::array<Vec2, 6> kps;
  Vec2 mean = Vec2::Zero();
  for (auto& p : kps) {
    p = Vec2(u(rng), u(rng));
    mean += p;
  }
  mean /= 6.0;
  const BoxFitProblem fit = bounding_box_from_keypoints(kps, 0.3);
  CHECK((fit.P - mean).norm() <= 1e-15);
  std::array<Vec2, 6> same;
  same.fill(Vec2(1.0, 1.0));
  CHECK_THROWS_AS(bounding_box_from_keypoints(same, 0.0), DegenerateKeypoints);
}

TEST_CASE("exact rectangle key points recover their own width and height") {
  // Corners plus top/bottom edge midpoints of a 0.4 x 0.3 rectangle.
  std::array<Vec2, 6> kps = {Vec2(0.2, 0.15),  Vec2(-0.2, 0.15), Vec2(-0.2, -0.15),
                             Vec2(0.2, -0.15), Vec2(0.0, 0.15),  Vec2(0.0, -0.15)};
  const BoxFitProblem fit = bounding_box_from_keypoints(kps, 0.0);
  CHECK(fit.P.norm() <= 1e-15);
  BoxFitProblem::Vars vars;
  const IpResult res = solve_box_fit(fit, &vars);
  REQUIRE(res.ok());
  CHECK(res.x[vars.w] == doctest::Approx(0.4).epsilon(1e-6));
  CHECK(res.x[vars.h] == doctest::Approx(0.3).epsilon(1e-6));
}

TEST_CASE("minimal box extents match the rotated-extents oracle") {
  std::mt19937 rng(21);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int t = 0; t < 20; ++t) {
    std::array<Vec2, 6> kps;
    for (auto& p : kps) p = Vec2(0.6 * u(rng), 0.4 * u(rng));
    const double pitch = 0.9 * u(rng);
    const BoxFitProblem fit = bounding_box_from_keypoints(kps, pitch);
    const auto [w_min, h_min] = min_box_extents(fit);
    BoxFitProblem::Vars vars;
    const IpResult res = solve_box_fit(fit, &vars);
    REQUIRE(res.ok());
    CHECK(res.x[vars.w] == doctest::Approx(w_min).epsilon(1e-6));
    CHECK(res.x[vars.h] == doctest::Approx(h_min).epsilon(1e-6));
    // Recovered weights form convex combinations.
    for (int i = 0; i < 6; ++i) {
      double sum = 0.0;
      for (int j = 0; j < 4; ++j) {
        const double g = res.x[vars.gamma0 + 4 * i + j];
        CHECK(g >= -1e-9);
        sum += g;
      }
      CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
    }
  }
}

TEST_CASE("polygon distance oracle handles the textbook cases") {
  CHECK(signed_distance_oracle(square(0, 0, 0.5), square(3, 0, 0.5)) ==
        doctest::Approx(2.0).epsilon(1e-12));
  CHECK(signed_distance_oracle(square(0, 0, 0.5), square(0, 0, 0.5)) == 0.0);
  CHECK(signed_distance_oracle(square(0, 0, 0.5), square(0.8, 0, 0.5)) == 0.0);
  // Corner-to-corner gap.
  CHECK(signed_distance_oracle(square(0, 0, 0.5), square(2, 2, 0.5)) ==
        doctest::Approx(std::sqrt(2.0)).epsilon(1e-12));
  CHECK_THROWS_AS(signed_distance_oracle({Vec2(0, 0), Vec2(1, 0)}, square(0, 0, 1)),
                  MalformedPolygon);
  const std::vector<Vec2> bowtie = {Vec2(0, 0), Vec2(1, 1), Vec2(1, 0), Vec2(0, 1)};
  CHECK_THROWS_AS(signed_distance_oracle(bowtie, square(5, 5, 1)), MalformedPolygon);
}

TEST_CASE("separated box admits a dual witness, overlapping box does not") {
  BoundingBox box;
  box.P = Vec2(0, 0);
  box.w = 1.0;
  box.h = 1.0;
  const ConvexRegion far_obs = ConvexRegion::rectangle(Vec2(3, 0), 0.5, 0.5);
  const auto witness = find_dual_witness(box, far_obs, 0.5);
  REQUIRE(witness.has_value());
  CHECK((witness->lambda.array() >= -1e-12).all());
  CHECK((witness->mu.array() >= -1e-12).all());
  // The certified margin never exceeds the true distance.
  const double d = signed_distance_oracle(to_vector(box.vertices()), far_obs.verts);
  CHECK(d == doctest::Approx(2.0).epsilon(1e-12));
  const double value = dual_separation_value(
      far_obs, box.P.x(), box.P.y(), box.w, box.h, witness->lambda.data(), witness->mu.data());
  CHECK(value <= d + 1e-6);
  CHECK(value >= 0.5);

  const ConvexRegion overlap = ConvexRegion::rectangle(Vec2(0.5, 0), 0.5, 0.5);
  CHECK(!find_dual_witness(box, overlap, 0.0).has_value());
  CHECK(!find_dual_witness(box, overlap, 0.1).has_value());
}

TEST_CASE("touching boxes are boundary feasible within the strict slack") {
  BoundingBox box;
  box.P = Vec2(0, 0);
  box.w = 1.0;
  box.h = 1.0;
  const ConvexRegion touching = ConvexRegion::rectangle(Vec2(1, 0), 0.5, 0.5);
  const DualSeparationResult r = max_dual_separation(box, touching);
  CHECK(std::abs(r.value) <= 2e-6);
}

TEST_CASE("dual margin agrees with the brute-force distance on random pairs") {
  std::mt19937 rng(33);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  int separated = 0, intersecting = 0, witnesses = 0;
  for (int t = 0; t < 200; ++t) {
    BoundingBox box;
    box.P = Vec2(2 * u(rng), 2 * u(rng));
    box.pitch = 1.2 * u(rng);
    box.w = 0.2 + 0.6 * std::abs(u(rng));
    box.h = 0.2 + 0.6 * std::abs(u(rng));
    const ConvexRegion obs = ConvexRegion::rectangle(
        Vec2(2 * u(rng), 2 * u(rng)), 0.1 + 0.7 * std::abs(u(rng)),
        0.1 + 0.7 * std::abs(u(rng)));
    const double d = signed_distance_oracle(to_vector(box.vertices()), obs.verts);
    const DualSeparationResult r = max_dual_separation(box, obs);
    REQUIRE(r.converged);
    CHECK(std::abs(r.value - d) <= 1e-5);
    (d > 0 ? separated : intersecting) += 1;

    // Completeness: comfortably separated pairs always certify the margin.
    const double d_min = 0.03;
    const auto witness = find_dual_witness(box, obs, d_min);
    if (d >= d_min + 1e-4) {
      REQUIRE(witness.has_value());
      ++witnesses;
    }
    // Soundness: a found witness implies at least the claimed separation.
    if (witness.has_value()) CHECK(d >= d_min - 1e-6);
  }
  // The sweep must exercise both regimes to mean anything.
  CHECK(separated > 20);
  CHECK(intersecting > 20);
  CHECK(witnesses > 20);
}

TEST_CASE("avoidance rows embedded in an NLP move a box out of the way") {
  // Free box center, fixed size; the solver must slide the box to clear the
  // obstacle by the margin while staying near a preferred spot.
  Nlp nlp;
  AvoidanceVars seed;
  seed.px = nlp.add_variable("px", -kInf, kInf, 0.0);
  seed.pz = nlp.add_variable("pz", -kInf, kInf, 0.0);
  seed.w = nlp.add_variable("w", 0.4, 0.4, 0.4);
  seed.h = nlp.add_variable("h", 0.4, 0.4, 0.4);
  const ConvexRegion obs = ConvexRegion::rectangle(Vec2(0.6, 0), 0.3, 0.3);
  const double d_min = 0.05;
  const AvoidanceVars vars = add_dual_avoidance(nlp, seed, 0.0, obs, d_min);
  nlp.add_cost({vars.px, vars.pz}, [](const auto* x, auto* r) {
    r[0] = x[0] * x[0] + x[1] * x[1];
  });
  IpOptions opt;
  const IpResult res = ip_solve(nlp, opt);
  REQUIRE(res.ok());
  BoundingBox solved;
  solved.P = Vec2(res.x[vars.px], res.x[vars.pz]);
  solved.w = 0.4;
  solved.h = 0.4;
  const double d = signed_distance_oracle(to_vector(solved.vertices()), obs.verts);
  CHECK(d >= d_min - 1e-6);
  CHECK(res.x[vars.px] <= 0.0 + 1e-6);  // pushed away from the obstacle
}

TEST_CASE("window obstacle builds two disjoint aligned blocks") {
  const WindowObstacle w = WindowObstacle::make(2.0, 0.13, 0.7, 2.5, 0.05);
  CHECK(w.opening_height == 0.7);
  CHECK(signed_distance_oracle(w.lower.verts, w.upper.verts) ==
        doctest::Approx(0.7).epsilon(1e-12));
  // x_obs inside both x-extents.
  CHECK(w.lower.contains(Vec2(2.0, 0.05)));
  CHECK(w.upper.contains(Vec2(2.0, 1.5)));
  CHECK(!w.lower.contains(Vec2(2.0, 0.5)));
  CHECK_THROWS_AS(WindowObstacle::make(2.0, 0.13, -0.1, 2.5, 0.05), MalformedPolygon);
}
