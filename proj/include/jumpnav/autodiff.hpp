#pragma once

// Forward-mode automatic differentiation over a small set of local variables.
//
// Dual carries a value plus a gradient, Dual2 additionally a packed
// lower-triangular Hessian. Both use a fixed capacity (kMaxLocal) with a
// runtime active count n, so one type serves blocks of any local arity.
// n == 0 marks a constant (gradient storage untouched); all seeded variables
// inside one evaluation share the same n, which keeps the binary operators on
// two non-constants free of length juggling.

#include <Eigen/Core>
#include <cassert>
#include <cmath>
#include <cstring>
#include <vector>

namespace jumpnav {
namespace ad {

inline constexpr int kMaxLocal = 32;
inline constexpr int kMaxPacked = kMaxLocal * (kMaxLocal + 1) / 2;

// Index into a packed lower triangle, row i >= col j.
inline constexpr int packed_index(int i, int j) { return i * (i + 1) / 2 + j; }
inline constexpr int packed_size(int n) { return n * (n + 1) / 2; }

// ---------------------------------------------------------------------------
// First order
// ---------------------------------------------------------------------------

struct Dual {
  double v = 0.0;
  int n = 0;
  double g[kMaxLocal];

  Dual() = default;
  Dual(double value) : v(value), n(0) {}  // NOLINT: implicit for literals
  Dual(const Dual& o) : v(o.v), n(o.n) {
    for (int i = 0; i < n; ++i) g[i] = o.g[i];
  }
  Dual& operator=(const Dual& o) {
    v = o.v;
    n = o.n;
    for (int i = 0; i < n; ++i) g[i] = o.g[i];
    return *this;
  }
  Dual& operator=(double value) {
    v = value;
    n = 0;
    return *this;
  }

  static Dual variable(double value, int index, int active) {
    Dual d;
    d.v = value;
    d.n = active;
    for (int i = 0; i < active; ++i) d.g[i] = 0.0;
    d.g[index] = 1.0;
    return d;
  }
};

inline Dual operator+(const Dual& a, const Dual& b) {
  Dual r;
  r.v = a.v + b.v;
  if (a.n == 0) {
    r.n = b.n;
    for (int i = 0; i < b.n; ++i) r.g[i] = b.g[i];
  } else if (b.n == 0) {
    r.n = a.n;
    for (int i = 0; i < a.n; ++i) r.g[i] = a.g[i];
  } else {
    assert(a.n == b.n);
    r.n = a.n;
    for (int i = 0; i < a.n; ++i) r.g[i] = a.g[i] + b.g[i];
  }
  return r;
}

inline Dual operator-(const Dual& a, const Dual& b) {
  Dual r;
  r.v = a.v - b.v;
  if (a.n == 0) {
    r.n = b.n;
    for (int i = 0; i < b.n; ++i) r.g[i] = -b.g[i];
  } else if (b.n == 0) {
    r.n = a.n;
    for (int i = 0; i < a.n; ++i) r.g[i] = a.g[i];
  } else {
    assert(a.n == b.n);
    r.n = a.n;
    for (int i = 0; i < a.n; ++i) r.g[i] = a.g[i] - b.g[i];
  }
  return r;
}

inline Dual operator-(const Dual& a) {
  Dual r;
  r.v = -a.v;
  r.n = a.n;
  for (int i = 0; i < a.n; ++i) r.g[i] = -a.g[i];
  return r;
}

inline Dual operator*(const Dual& a, const Dual& b) {
  Dual r;
  r.v = a.v * b.v;
  if (a.n == 0) {
    r.n = b.n;
    for (int i = 0; i < b.n; ++i) r.g[i] = a.v * b.g[i];
  } else if (b.n == 0) {
    r.n = a.n;
    for (int i = 0; i < a.n; ++i) r.g[i] = b.v * a.g[i];
  } else {
    assert(a.n == b.n);
    r.n = a.n;
    for (int i = 0; i < a.n; ++i) r.g[i] = a.g[i] * b.v + b.g[i] * a.v;
  }
  return r;
}

inline Dual operator/(const Dual& a, const Dual& b) {
  Dual r;
  const double inv = 1.0 / b.v;
  r.v = a.v * inv;
  if (b.n == 0) {
    r.n = a.n;
    for (int i = 0; i < a.n; ++i) r.g[i] = a.g[i] * inv;
  } else if (a.n == 0) {
    r.n = b.n;
    const double s = -r.v * inv;
    for (int i = 0; i < b.n; ++i) r.g[i] = s * b.g[i];
  } else {
    assert(a.n == b.n);
    r.n = a.n;
    for (int i = 0; i < a.n; ++i) r.g[i] = (a.g[i] - r.v * b.g[i]) * inv;
  }
  return r;
}

inline Dual operator+(const Dual& a, double b) { return a + Dual(b); }
inline Dual operator+(double a, const Dual& b) { return Dual(a) + b; }
inline Dual operator-(const Dual& a, double b) { return a - Dual(b); }
inline Dual operator-(double a, const Dual& b) { return Dual(a) - b; }
inline Dual operator*(const Dual& a, double b) { return a * Dual(b); }
inline Dual operator*(double a, const Dual& b) { return Dual(a) * b; }
inline Dual operator/(const Dual& a, double b) { return a / Dual(b); }
inline Dual operator/(double a, const Dual& b) { return Dual(a) / b; }

inline Dual& operator+=(Dual& a, const Dual& b) { return a = a + b; }
inline Dual& operator-=(Dual& a, const Dual& b) { return a = a - b; }
inline Dual& operator*=(Dual& a, const Dual& b) { return a = a * b; }
inline Dual& operator/=(Dual& a, const Dual& b) { return a = a / b; }
inline Dual& operator+=(Dual& a, double b) { a.v += b; return a; }
inline Dual& operator-=(Dual& a, double b) { a.v -= b; return a; }
inline Dual& operator*=(Dual& a, double b) { return a = a * b; }
inline Dual& operator/=(Dual& a, double b) { return a = a / b; }

inline bool operator<(const Dual& a, const Dual& b) { return a.v < b.v; }
inline bool operator>(const Dual& a, const Dual& b) { return a.v > b.v; }
inline bool operator<=(const Dual& a, const Dual& b) { return a.v <= b.v; }
inline bool operator>=(const Dual& a, const Dual& b) { return a.v >= b.v; }
inline bool operator<(const Dual& a, double b) { return a.v < b; }
inline bool operator>(const Dual& a, double b) { return a.v > b; }
inline bool operator<(double a, const Dual& b) { return a < b.v; }
inline bool operator>(double a, const Dual& b) { return a > b.v; }
inline bool operator==(const Dual& a, const Dual& b) { return a.v == b.v; }
inline bool operator!=(const Dual& a, const Dual& b) { return a.v != b.v; }

// Unary smooth function with derivative d1 at a.v.
inline Dual chain1(const Dual& a, double f, double d1) {
  Dual r;
  r.v = f;
  r.n = a.n;
  for (int i = 0; i < a.n; ++i) r.g[i] = d1 * a.g[i];
  return r;
}

inline Dual sin(const Dual& a) { return chain1(a, std::sin(a.v), std::cos(a.v)); }
inline Dual cos(const Dual& a) { return chain1(a, std::cos(a.v), -std::sin(a.v)); }
inline Dual sqrt(const Dual& a) {
  const double s = std::sqrt(a.v);
  return chain1(a, s, 0.5 / s);
}
inline Dual exp(const Dual& a) {
  const double e = std::exp(a.v);
  return chain1(a, e, e);
}
inline Dual log(const Dual& a) { return chain1(a, std::log(a.v), 1.0 / a.v); }
inline Dual tanh(const Dual& a) {
  const double t = std::tanh(a.v);
  return chain1(a, t, 1.0 - t * t);
}
inline Dual abs(const Dual& a) { return a.v < 0.0 ? -a : a; }

// ---------------------------------------------------------------------------
// Second order
// ---------------------------------------------------------------------------

struct Dual2 {
  double v = 0.0;
  int n = 0;
  double g[kMaxLocal];
  double h[kMaxPacked];

  Dual2() = default;
  Dual2(double value) : v(value), n(0) {}  // NOLINT: implicit for literals
  Dual2(const Dual2& o) : v(o.v), n(o.n) {
    for (int i = 0; i < n; ++i) g[i] = o.g[i];
    const int m = packed_size(n);
    for (int i = 0; i < m; ++i) h[i] = o.h[i];
  }
  Dual2& operator=(const Dual2& o) {
    v = o.v;
    n = o.n;
    for (int i = 0; i < n; ++i) g[i] = o.g[i];
    const int m = packed_size(n);
    for (int i = 0; i < m; ++i) h[i] = o.h[i];
    return *this;
  }
  Dual2& operator=(double value) {
    v = value;
    n = 0;
    return *this;
  }

  static Dual2 variable(double value, int index, int active) {
    Dual2 d;
    d.v = value;
    d.n = active;
    for (int i = 0; i < active; ++i) d.g[i] = 0.0;
    d.g[index] = 1.0;
    const int m = packed_size(active);
    for (int i = 0; i < m; ++i) d.h[i] = 0.0;
    return d;
  }
};

inline Dual2 operator+(const Dual2& a, const Dual2& b) {
  Dual2 r;
  r.v = a.v + b.v;
  if (a.n == 0) {
    r.n = b.n;
    for (int i = 0; i < b.n; ++i) r.g[i] = b.g[i];
    const int m = packed_size(b.n);
    for (int i = 0; i < m; ++i) r.h[i] = b.h[i];
  } else if (b.n == 0) {
    r.n = a.n;
    for (int i = 0; i < a.n; ++i) r.g[i] = a.g[i];
    const int m = packed_size(a.n);
    for (int i = 0; i < m; ++i) r.h[i] = a.h[i];
  } else {
    assert(a.n == b.n);
    r.n = a.n;
    for (int i = 0; i < a.n; ++i) r.g[i] = a.g[i] + b.g[i];
    const int m = packed_size(a.n);
    for (int i = 0; i < m; ++i) r.h[i] = a.h[i] + b.h[i];
  }
  return r;
}

inline Dual2 operator-(const Dual2& a, const Dual2& b) {
  Dual2 r;
  r.v = a.v - b.v;
  if (a.n == 0) {
    r.n = b.n;
    for (int i = 0; i < b.n; ++i) r.g[i] = -b.g[i];
    const int m = packed_size(b.n);
    for (int i = 0; i < m; ++i) r.h[i] = -b.h[i];
  } else if (b.n == 0) {
    r.n = a.n;
    for (int i = 0; i < a.n; ++i) r.g[i] = a.g[i];
    const int m = packed_size(a.n);
    for (int i = 0; i < m; ++i) r.h[i] = a.h[i];
  } else {
    assert(a.n == b.n);
    r.n = a.n;
    for (int i = 0; i < a.n; ++i) r.g[i] = a.g[i] - b.g[i];
    const int m = packed_size(a.n);
    for (int i = 0; i < m; ++i) r.h[i] = a.h[i] - b.h[i];
  }
  return r;
}

inline Dual2 operator-(const Dual2& a) {
  Dual2 r;
  r.v = -a.v;
  r.n = a.n;
  for (int i = 0; i < a.n; ++i) r.g[i] = -a.g[i];
  const int m = packed_size(a.n);
  for (int i = 0; i < m; ++i) r.h[i] = -a.h[i];
  return r;
}

inline Dual2 operator*(const Dual2& a, const Dual2& b) {
  Dual2 r;
  r.v = a.v * b.v;
  if (a.n == 0) {
    r.n = b.n;
    for (int i = 0; i < b.n; ++i) r.g[i] = a.v * b.g[i];
    const int m = packed_size(b.n);
    for (int i = 0; i < m; ++i) r.h[i] = a.v * b.h[i];
  } else if (b.n == 0) {
    r.n = a.n;
    for (int i = 0; i < a.n; ++i) r.g[i] = b.v * a.g[i];
    const int m = packed_size(a.n);
    for (int i = 0; i < m; ++i) r.h[i] = b.v * a.h[i];
  } else {
    assert(a.n == b.n);
    r.n = a.n;
    for (int i = 0; i < a.n; ++i) r.g[i] = a.g[i] * b.v + b.g[i] * a.v;
    int idx = 0;
    for (int i = 0; i < a.n; ++i)
      for (int j = 0; j <= i; ++j, ++idx)
        r.h[idx] = a.h[idx] * b.v + b.h[idx] * a.v + a.g[i] * b.g[j] + a.g[j] * b.g[i];
  }
  return r;
}

// Unary smooth function: value f, first and second derivative at a.v.
inline Dual2 chain2(const Dual2& a, double f, double d1, double d2) {
  Dual2 r;
  r.v = f;
  r.n = a.n;
  for (int i = 0; i < a.n; ++i) r.g[i] = d1 * a.g[i];
  int idx = 0;
  for (int i = 0; i < a.n; ++i)
    for (int j = 0; j <= i; ++j, ++idx) r.h[idx] = d1 * a.h[idx] + d2 * a.g[i] * a.g[j];
  return r;
}

inline Dual2 operator/(const Dual2& a, const Dual2& b) {
  if (b.n == 0) return a * Dual2(1.0 / b.v);
  const double inv = 1.0 / b.v;
  // a / b = a * (1/b); 1/b via the unary chain.
  return a * chain2(b, inv, -inv * inv, 2.0 * inv * inv * inv);
}

inline Dual2 operator+(const Dual2& a, double b) { Dual2 r(a); r.v += b; return r; }
inline Dual2 operator+(double a, const Dual2& b) { Dual2 r(b); r.v += a; return r; }
inline Dual2 operator-(const Dual2& a, double b) { Dual2 r(a); r.v -= b; return r; }
inline Dual2 operator-(double a, const Dual2& b) { Dual2 r(-b); r.v += a; return r; }
inline Dual2 operator*(const Dual2& a, double b) { return a * Dual2(b); }
inline Dual2 operator*(double a, const Dual2& b) { return b * Dual2(a); }
inline Dual2 operator/(const Dual2& a, double b) { return a * Dual2(1.0 / b); }
inline Dual2 operator/(double a, const Dual2& b) { return Dual2(a) / b; }

inline Dual2& operator+=(Dual2& a, const Dual2& b) { return a = a + b; }
inline Dual2& operator-=(Dual2& a, const Dual2& b) { return a = a - b; }
inline Dual2& operator*=(Dual2& a, const Dual2& b) { return a = a * b; }
inline Dual2& operator/=(Dual2& a, const Dual2& b) { return a = a / b; }
inline Dual2& operator+=(Dual2& a, double b) { a.v += b; return a; }
inline Dual2& operator-=(Dual2& a, double b) { a.v -= b; return a; }
inline Dual2& operator*=(Dual2& a, double b) { return a = a * Dual2(b); }
inline Dual2& operator/=(Dual2& a, double b) { return a = a * Dual2(1.0 / b); }

inline bool operator<(const Dual2& a, const Dual2& b) { return a.v < b.v; }
inline bool operator>(const Dual2& a, const Dual2& b) { return a.v > b.v; }
inline bool operator<=(const Dual2& a, const Dual2& b) { return a.v <= b.v; }
inline bool operator>=(const Dual2& a, const Dual2& b) { return a.v >= b.v; }
inline bool operator<(const Dual2& a, double b) { return a.v < b; }
inline bool operator>(const Dual2& a, double b) { return a.v > b; }
inline bool operator<(double a, const Dual2& b) { return a < b.v; }
inline bool operator>(double a, const Dual2& b) { return a > b.v; }
inline bool operator==(const Dual2& a, const Dual2& b) { return a.v == b.v; }
inline bool operator!=(const Dual2& a, const Dual2& b) { return a.v != b.v; }

inline Dual2 sin(const Dual2& a) {
  const double s = std::sin(a.v), c = std::cos(a.v);
  return chain2(a, s, c, -s);
}
inline Dual2 cos(const Dual2& a) {
  const double s = std::sin(a.v), c = std::cos(a.v);
  return chain2(a, c, -s, -c);
}
inline Dual2 sqrt(const Dual2& a) {
  const double s = std::sqrt(a.v);
  return chain2(a, s, 0.5 / s, -0.25 / (s * a.v));
}
inline Dual2 exp(const Dual2& a) {
  const double e = std::exp(a.v);
  return chain2(a, e, e, e);
}
inline Dual2 log(const Dual2& a) {
  const double inv = 1.0 / a.v;
  return chain2(a, std::log(a.v), inv, -inv * inv);
}
inline Dual2 tanh(const Dual2& a) {
  const double t = std::tanh(a.v);
  const double sech2 = 1.0 - t * t;
  return chain2(a, t, sech2, -2.0 * t * sech2);
}
inline Dual2 abs(const Dual2& a) { return a.v < 0.0 ? -a : a; }

// ---------------------------------------------------------------------------
// Helpers shared by generic code
// ---------------------------------------------------------------------------

inline double val(double x) { return x; }
inline double val(const Dual& x) { return x.v; }
inline double val(const Dual2& x) { return x.v; }

template <class S>
inline S square(const S& x) {
  return x * x;
}

// Evaluate a callable f(const S* x, S* r) over nloc seeded locals.
template <class F>
void eval_value(const F& f, const double* x, int nloc, int nrows, double* r) {
  (void)nloc;
  f(x, r);
  (void)nrows;
}

// Rows and row-major Jacobian (nrows x nloc).
template <class F>
void eval_jacobian(const F& f, const double* x, int nloc, int nrows, double* r, double* J) {
  assert(nloc <= kMaxLocal);
  Dual xs[kMaxLocal];
  for (int i = 0; i < nloc; ++i) xs[i] = Dual::variable(x[i], i, nloc);
  std::vector<Dual> rs(nrows);
  f(xs, rs.data());
  for (int k = 0; k < nrows; ++k) {
    if (r) r[k] = rs[k].v;
    for (int i = 0; i < nloc; ++i) J[k * nloc + i] = rs[k].n ? rs[k].g[i] : 0.0;
  }
}

// Rows, row-major Jacobian, and the weighted Hessian sum_k w[k] * H(r_k),
// packed lower triangular of size nloc*(nloc+1)/2. H is accumulated into (not
// zeroed) so callers can sum several blocks into one buffer.
template <class F>
void eval_hessian_acc(const F& f, const double* x, int nloc, int nrows, const double* w,
                      double* Hpacked, double* r = nullptr, double* J = nullptr) {
  assert(nloc <= kMaxLocal);
  Dual2 xs[kMaxLocal];
  for (int i = 0; i < nloc; ++i) xs[i] = Dual2::variable(x[i], i, nloc);
  std::vector<Dual2> rs(nrows);
  f(xs, rs.data());
  const int m = packed_size(nloc);
  for (int k = 0; k < nrows; ++k) {
    if (r) r[k] = rs[k].v;
    if (J)
      for (int i = 0; i < nloc; ++i) J[k * nloc + i] = rs[k].n ? rs[k].g[i] : 0.0;
    if (w[k] != 0.0 && rs[k].n)
      for (int i = 0; i < m; ++i) Hpacked[i] += w[k] * rs[k].h[i];
  }
}

}  // namespace ad

// Model and constraint code is written against an unqualified scalar S; these
// bring the double overloads into the same namespace as the dual ones so the
// generic code resolves either way.
using ad::Dual;
using ad::Dual2;
using ad::square;
using ad::val;
inline double sin(double x) { return std::sin(x); }
inline double cos(double x) { return std::cos(x); }
inline double sqrt(double x) { return std::sqrt(x); }
inline double exp(double x) { return std::exp(x); }
inline double log(double x) { return std::log(x); }
inline double tanh(double x) { return std::tanh(x); }
inline double abs(double x) { return std::abs(x); }
using ad::sin;
using ad::cos;
using ad::sqrt;
using ad::exp;
using ad::log;
using ad::tanh;
using ad::abs;

}  // namespace jumpnav

namespace Eigen {

template <>
struct NumTraits<jumpnav::ad::Dual> : NumTraits<double> {
  typedef jumpnav::ad::Dual Real;
  typedef jumpnav::ad::Dual NonInteger;
  typedef jumpnav::ad::Dual Nested;
  typedef jumpnav::ad::Dual Literal;
  enum {
    IsComplex = 0,
    IsInteger = 0,
    IsSigned = 1,
    RequireInitialization = 1,
    ReadCost = jumpnav::ad::kMaxLocal,
    AddCost = jumpnav::ad::kMaxLocal,
    MulCost = 2 * jumpnav::ad::kMaxLocal,
  };
};

template <>
struct NumTraits<jumpnav::ad::Dual2> : NumTraits<double> {
  typedef jumpnav::ad::Dual2 Real;
  typedef jumpnav::ad::Dual2 NonInteger;
  typedef jumpnav::ad::Dual2 Nested;
  typedef jumpnav::ad::Dual2 Literal;
  enum {
    IsComplex = 0,
    IsInteger = 0,
    IsSigned = 1,
    RequireInitialization = 1,
    ReadCost = jumpnav::ad::kMaxPacked,
    AddCost = jumpnav::ad::kMaxPacked,
    MulCost = 2 * jumpnav::ad::kMaxPacked,
  };
};

template <typename BinaryOp>
struct ScalarBinaryOpTraits<jumpnav::ad::Dual, double, BinaryOp> {
  typedef jumpnav::ad::Dual ReturnType;
};
template <typename BinaryOp>
struct ScalarBinaryOpTraits<double, jumpnav::ad::Dual, BinaryOp> {
  typedef jumpnav::ad::Dual ReturnType;
};
template <typename BinaryOp>
struct ScalarBinaryOpTraits<jumpnav::ad::Dual2, double, BinaryOp> {
  typedef jumpnav::ad::Dual2 ReturnType;
};
template <typename BinaryOp>
struct ScalarBinaryOpTraits<double, jumpnav::ad::Dual2, BinaryOp> {
  typedef jumpnav::ad::Dual2 ReturnType;
};

}  // namespace Eigen
