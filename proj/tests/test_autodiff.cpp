#include <jumpnav/autodiff.hpp>

#include <doctest.h>

#include <cmath>
#include <random>

using jumpnav::ad::Dual;
using jumpnav::ad::Dual2;
using jumpnav::ad::packed_index;

namespace {

// Test function with products, quotients and transcendentals in the mix.
template <class S>
S sample_fn(const S* x) {
  using jumpnav::sin;
  using jumpnav::cos;
  using jumpnav::sqrt;
  using jumpnav::exp;
  return sin(x[0]) * x[1] + x[2] / (x[0] + 3.0) + sqrt(x[1] * x[1] + 2.0) -
         exp(0.3 * x[2]) * cos(x[1]) + 2.0 * x[0] * x[0] * x[2];
}

double fd_grad(double (*f)(const double*), double* x, int i, double h = 1e-6) {
  const double xi = x[i];
  x[i] = xi + h;
  const double fp = f(x);
  x[i] = xi - h;
  const double fm = f(x);
  x[i] = xi;
  return (fp - fm) / (2 * h);
}

double sample_fn_d(const double* x) { return sample_fn<double>(x); }

}  // namespace

TEST_CASE("first-order dual gradient matches finite differences") {
  std::mt19937 rng(7);
  std::uniform_real_distribution<double> dist(-1.5, 1.5);
  for (int trial = 0; trial < 20; ++trial) {
    double x[3] = {dist(rng), dist(rng), dist(rng)};
    Dual xs[3];
    for (int i = 0; i < 3; ++i) xs[i] = Dual::variable(x[i], i, 3);
    const Dual r = sample_fn(xs);
    CHECK(r.v == doctest::Approx(sample_fn_d(x)));
    for (int i = 0; i < 3; ++i)
      CHECK(r.g[i] == doctest::Approx(fd_grad(sample_fn_d, x, i)).epsilon(1e-6));
  }
}

TEST_CASE("second-order dual hessian matches finite differences of the gradient") {
  std::mt19937 rng(12);
  std::uniform_real_distribution<double> dist(-1.2, 1.2);
  for (int trial = 0; trial < 10; ++trial) {
    double x[3] = {dist(rng), dist(rng), dist(rng)};
    Dual2 xs[3];
    for (int i = 0; i < 3; ++i) xs[i] = Dual2::variable(x[i], i, 3);
    const Dual2 r = sample_fn(xs);
    CHECK(r.v == doctest::Approx(sample_fn_d(x)));
    const double h = 1e-5;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j <= i; ++j) {
        // Central difference of the AD gradient in direction j.
        double xp[3] = {x[0], x[1], x[2]};
        xp[j] += h;
        Dual gp[3];
        for (int k = 0; k < 3; ++k) gp[k] = Dual::variable(xp[k], k, 3);
        const double gplus = sample_fn(gp).g[i];
        xp[j] -= 2 * h;
        for (int k = 0; k < 3; ++k) gp[k] = Dual::variable(xp[k], k, 3);
        const double gminus = sample_fn(gp).g[i];
        const double hfd = (gplus - gminus) / (2 * h);
        CHECK(r.h[packed_index(i, j)] == doctest::Approx(hfd).epsilon(5e-5));
      }
  }
}

TEST_CASE("product hessian has the exact cross term") {
  Dual2 a = Dual2::variable(3.0, 0, 2);
  Dual2 b = Dual2::variable(-2.0, 1, 2);
  const Dual2 p = a * b;
  CHECK(p.v == doctest::Approx(-6.0));
  CHECK(p.g[0] == doctest::Approx(-2.0));
  CHECK(p.g[1] == doctest::Approx(3.0));
  CHECK(p.h[packed_index(0, 0)] == doctest::Approx(0.0));
  CHECK(p.h[packed_index(1, 0)] == doctest::Approx(1.0));
  CHECK(p.h[packed_index(1, 1)] == doctest::Approx(0.0));
}

TEST_CASE("constants mix with actives without touching derivative storage") {
  Dual2 x = Dual2::variable(0.7, 0, 1);
  Dual2 c = 2.5;  // constant
  const Dual2 r = c * x + 1.0 - x / 2.0 + (3.0 - x) * c;
  CHECK(r.v == doctest::Approx(2.5 * 0.7 + 1.0 - 0.35 + (3.0 - 0.7) * 2.5));
  CHECK(r.g[0] == doctest::Approx(2.5 - 0.5 - 2.5));
  CHECK(r.h[0] == doctest::Approx(0.0));
}

TEST_CASE("division and sqrt second derivatives") {
  Dual2 x = Dual2::variable(2.0, 0, 1);
  const Dual2 inv = 1.0 / x;
  CHECK(inv.v == doctest::Approx(0.5));
  CHECK(inv.g[0] == doctest::Approx(-0.25));
  CHECK(inv.h[0] == doctest::Approx(0.25));  // 2/x^3 = 0.25
  const Dual2 rt = jumpnav::sqrt(x);
  CHECK(rt.v == doctest::Approx(std::sqrt(2.0)));
  CHECK(rt.g[0] == doctest::Approx(0.5 / std::sqrt(2.0)));
  CHECK(rt.h[0] == doctest::Approx(-0.25 / (std::sqrt(2.0) * 2.0)));
}

TEST_CASE("tanh derivatives") {
  Dual2 x = Dual2::variable(0.4, 0, 1);
  const Dual2 t = jumpnav::tanh(x);
  const double tv = std::tanh(0.4);
  CHECK(t.v == doctest::Approx(tv));
  CHECK(t.g[0] == doctest::Approx(1 - tv * tv));
  CHECK(t.h[0] == doctest::Approx(-2 * tv * (1 - tv * tv)));
}

TEST_CASE("eigen matrices of duals evaluate linear algebra correctly") {
  using Vec = Eigen::Matrix<Dual, 2, 1>;
  using Mat = Eigen::Matrix<Dual, 2, 2>;
  Mat A;
  A(0, 0) = Dual::variable(1.0, 0, 2);
  A(0, 1) = 2.0;
  A(1, 0) = 0.5;
  A(1, 1) = Dual::variable(3.0, 1, 2);
  Vec v;
  v[0] = 1.0;
  v[1] = -1.0;
  const Vec r = A * v;
  CHECK(jumpnav::val(r[0]) == doctest::Approx(-1.0));
  CHECK(r[0].g[0] == doctest::Approx(1.0));  // d(A00*1)/dA00
  CHECK(r[1].g[1] == doctest::Approx(-1.0));
  const Dual q = r[0] * v[0] + r[1] * v[1];
  CHECK(jumpnav::val(q) == doctest::Approx(1.5));
  CHECK(q.g[0] == doctest::Approx(1.0));
  CHECK(q.g[1] == doctest::Approx(1.0));
}

TEST_CASE("jacobian and weighted hessian harness") {
  auto f = [](const auto* x, auto* r) {
    r[0] = x[0] * x[1] + x[2];
    r[1] = jumpnav::sin(x[0]) - x[2] * x[2];
  };
  const double x[3] = {0.3, -1.1, 0.8};
  double r[2], J[6];
  jumpnav::ad::eval_jacobian(f, x, 3, 2, r, J);
  CHECK(r[0] == doctest::Approx(0.3 * -1.1 + 0.8));
  CHECK(r[1] == doctest::Approx(std::sin(0.3) - 0.64));
  CHECK(J[0] == doctest::Approx(-1.1));
  CHECK(J[1] == doctest::Approx(0.3));
  CHECK(J[2] == doctest::Approx(1.0));
  CHECK(J[3] == doctest::Approx(std::cos(0.3)));
  CHECK(J[4] == doctest::Approx(0.0));
  CHECK(J[5] == doctest::Approx(-1.6));

  const double w[2] = {2.0, -1.0};
  double H[6] = {0, 0, 0, 0, 0, 0};
  double r2[2], J2[6];
  jumpnav::ad::eval_hessian_acc(f, x, 3, 2, w, H, r2, J2);
  CHECK(r2[0] == doctest::Approx(r[0]));
  CHECK(J2[3] == doctest::Approx(J[3]));
  // H = 2*Hess(r0) - Hess(r1); Hess(r0) has (0,1)=1, Hess(r1) has (0,0)=-sin,
  // (2,2)=-2.
  CHECK(H[packed_index(0, 0)] == doctest::Approx(std::sin(0.3)));
  CHECK(H[packed_index(1, 0)] == doctest::Approx(2.0));
  CHECK(H[packed_index(2, 2)] == doctest::Approx(2.0));
  CHECK(H[packed_index(2, 0)] == doctest::Approx(0.0));
}
