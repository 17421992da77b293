#include <jumpnav/ip_solver.hpp>

#include <doctest.h>

#include <cmath>

using namespace jumpnav;

TEST_CASE("bound-constrained convex quadratic") {
  Nlp nlp;
  const int x = nlp.add_variables(3, "x");
  for (int i = 0; i < 3; ++i) nlp.set_bounds(x + i, 0.0, 10.0);
  nlp.add_cost({x + 0, x + 1, x + 2}, [](const auto* v, auto* r) {
    r[0] = square(v[0] - 2.0) + 2.0 * square(v[1] + 1.0) + square(v[2] - 0.5);
  });
  const IpResult res = ip_solve(nlp);
  REQUIRE(res.ok());
  CHECK(res.x[0] == doctest::Approx(2.0).epsilon(1e-6));
  CHECK(res.x[1] == doctest::Approx(0.0).epsilon(1e-5));  // clipped at the bound
  CHECK(res.x[2] == doctest::Approx(0.5).epsilon(1e-6));
  CHECK(res.x[1] >= 0.0);  // never outside the original bound
}

TEST_CASE("equality constrained quadratic has the analytic KKT solution") {
  Nlp nlp;
  const int x = nlp.add_variables(2, "x");
  nlp.add_cost({x + 0, x + 1},
               [](const auto* v, auto* r) { r[0] = square(v[0]) + square(v[1]); });
  nlp.add_equality({x + 0, x + 1}, 1,
                   [](const auto* v, auto* r) { r[0] = v[0] + v[1] - 1.0; }, "sum", true);
  const IpResult res = ip_solve(nlp);
  REQUIRE(res.ok());
  CHECK(res.x[0] == doctest::Approx(0.5).epsilon(1e-7));
  CHECK(res.x[1] == doctest::Approx(0.5).epsilon(1e-7));
  // grad f + y * grad c = 0 => (1,1) + y(1,1) = 0 at x=(0.5,0.5) => y = -1.
  CHECK(res.y[0] == doctest::Approx(-1.0).epsilon(1e-5));
}

TEST_CASE("rosenbrock inside a box") {
  Nlp nlp;
  const int x = nlp.add_variables(2, "x");
  nlp.set_bounds(x + 0, -10, 10);
  nlp.set_bounds(x + 1, -10, 10);
  nlp.set_start(x + 0, -1.2);
  nlp.set_start(x + 1, 1.0);
  nlp.add_cost({x + 0, x + 1}, [](const auto* v, auto* r) {
    r[0] = 100.0 * square(v[1] - v[0] * v[0]) + square(1.0 - v[0]);
  });
  const IpResult res = ip_solve(nlp);
  REQUIRE(res.ok());
  CHECK(res.x[0] == doctest::Approx(1.0).epsilon(1e-5));
  CHECK(res.x[1] == doctest::Approx(1.0).epsilon(1e-5));
}

TEST_CASE("classic four-variable benchmark with mixed constraints") {
  // min x0*x3*(x0+x1+x2) + x2,  s.t. x0*x1*x2*x3 >= 25, sum xi^2 = 40,
  // 1 <= x <= 5, start (1,5,5,1). Known optimum below.
  Nlp nlp;
  const int x = nlp.add_variables(4, "x");
  const double start[4] = {1, 5, 5, 1};
  for (int i = 0; i < 4; ++i) {
    nlp.set_bounds(x + i, 1.0, 5.0);
    nlp.set_start(x + i, start[i]);
  }
  nlp.add_cost({x + 0, x + 1, x + 2, x + 3}, [](const auto* v, auto* r) {
    r[0] = v[0] * v[3] * (v[0] + v[1] + v[2]) + v[2];
  });
  nlp.add_lower_bounded({x + 0, x + 1, x + 2, x + 3}, {25.0},
                        [](const auto* v, auto* r) { r[0] = v[0] * v[1] * v[2] * v[3]; },
                        "prod");
  nlp.add_constraint({x + 0, x + 1, x + 2, x + 3}, {40.0}, {40.0},
                     [](const auto* v, auto* r) {
                       r[0] = square(v[0]) + square(v[1]) + square(v[2]) + square(v[3]);
                     },
                     "normsq");
  const IpResult res = ip_solve(nlp);
  REQUIRE(res.ok());
  CHECK(res.f == doctest::Approx(17.0140173).epsilon(1e-5));
  CHECK(res.x[0] == doctest::Approx(1.0).epsilon(1e-4));
  CHECK(res.x[1] == doctest::Approx(4.7429994).epsilon(1e-4));
  CHECK(res.x[2] == doctest::Approx(3.8211500).epsilon(1e-4));
  CHECK(res.x[3] == doctest::Approx(1.3794083).epsilon(1e-4));
  CHECK(res.constraint_violation <= 1e-8);
}

TEST_CASE("nonconvex objective is pushed to a bound by inertia correction") {
  Nlp nlp;
  const int x = nlp.add_variables(2, "x");
  for (int i = 0; i < 2; ++i) {
    nlp.set_bounds(x + i, -1.0, 2.0);
    nlp.set_start(x + i, 0.3);
  }
  nlp.add_cost({x + 0, x + 1},
               [](const auto* v, auto* r) { r[0] = -square(v[0]) - square(v[1]); });
  const IpResult res = ip_solve(nlp);
  REQUIRE(res.ok());
  for (int i = 0; i < 2; ++i) {
    const double d = std::min(std::abs(res.x[i] - 2.0), std::abs(res.x[i] + 1.0));
    CHECK(d < 1e-5);
  }
}

TEST_CASE("contradictory constraints are reported as infeasible") {
  Nlp nlp;
  const int x = nlp.add_variables(1, "x");
  nlp.add_lower_bounded({x}, {1.0}, [](const auto* v, auto* r) { r[0] = v[0]; }, "ge1",
                        true);
  nlp.add_constraint({x}, {-kInf}, {-1.0}, [](const auto* v, auto* r) { r[0] = v[0]; },
                     "lem1", true);
  IpOptions opt;
  opt.max_iter = 120;
  const IpResult res = ip_solve(nlp, opt);
  CHECK(!res.ok());
  CHECK(res.constraint_violation > 0.1);
}

TEST_CASE("two sided rows act through slacks") {
  Nlp nlp;
  const int x = nlp.add_variables(2, "x");
  nlp.set_start(x + 0, 3.0);
  nlp.set_start(x + 1, 3.0);
  nlp.add_cost({x + 0, x + 1}, [](const auto* v, auto* r) {
    r[0] = square(v[0] - 4.0) + square(v[1] - 4.0);
  });
  // Keep the sum in [0, 5]: optimum projects onto the line x0+x1=5.
  nlp.add_constraint({x + 0, x + 1}, {0.0}, {5.0},
                     [](const auto* v, auto* r) { r[0] = v[0] + v[1]; }, "sum", true);
  const IpResult res = ip_solve(nlp);
  REQUIRE(res.ok());
  CHECK(res.x[0] == doctest::Approx(2.5).epsilon(1e-6));
  CHECK(res.x[1] == doctest::Approx(2.5).epsilon(1e-6));
}

TEST_CASE("quadratic with many variables stays sparse and fast") {
  // Chained structure: sum (x_i - t_i)^2 with coupling x_{i+1} - x_i = 0.1.
  Nlp nlp;
  const int nv = 200;
  const int x = nlp.add_variables(nv, "x");
  for (int i = 0; i < nv; ++i) {
    const double ti = 0.01 * i;
    nlp.add_cost({x + i}, [ti](const auto* v, auto* r) { r[0] = square(v[0] - ti); });
  }
  for (int i = 0; i + 1 < nv; ++i)
    nlp.add_equality({x + i, x + i + 1}, 1,
                     [](const auto* v, auto* r) { r[0] = v[1] - v[0] - 0.001; }, "chain",
                     true);
  const IpResult res = ip_solve(nlp);
  REQUIRE(res.ok());
  // Optimal profile is the mean-adjusted ramp; check stationarity transfers.
  CHECK(res.x[1] - res.x[0] == doctest::Approx(0.001).epsilon(1e-6));
  CHECK(res.iterations < 50);
}
