#include <jumpnav/ip_solver.hpp>

#include <Eigen/SparseCholesky>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <vector>

namespace jumpnav {

const char* to_string(IpStatus s) {
  switch (s) {
    case IpStatus::Optimal: return "Optimal";
    case IpStatus::AlmostOptimal: return "AlmostOptimal";
    case IpStatus::MaxIterations: return "MaxIterations";
    case IpStatus::TimeLimit: return "TimeLimit";
    case IpStatus::Infeasible: return "Infeasible";
    case IpStatus::Diverged: return "Diverged";
    case IpStatus::LinearSolveFailure: return "LinearSolveFailure";
  }
  return "Unknown";
}

namespace {

using SpMat = Eigen::SparseMatrix<double>;
using Eigen::VectorXd;

double now_s() {
  using clock = std::chrono::steady_clock;
  return std::chrono::duration<double>(clock::now().time_since_epoch()).count();
}

int find_slot(const SpMat& K, int row, int col) {
  const int* outer = K.outerIndexPtr();
  const int* inner = K.innerIndexPtr();
  const int* begin = inner + outer[col];
  const int* end = inner + outer[col + 1];
  const int* it = std::lower_bound(begin, end, row);
  assert(it != end && *it == row);
  return static_cast<int>(it - inner);
}

// y += K v for a symmetric matrix stored as its lower triangle.
void sym_lower_mult(const SpMat& K, const VectorXd& v, VectorXd& y) {
  const int* outer = K.outerIndexPtr();
  const int* inner = K.innerIndexPtr();
  const double* val = K.valuePtr();
  for (int c = 0; c < K.outerSize(); ++c) {
    const double vc = v[c];
    double acc = 0.0;
    for (int p = outer[c]; p < outer[c + 1]; ++p) {
      const int r = inner[p];
      y[r] += val[p] * vc;
      if (r != c) acc += val[p] * v[r];
    }
    y[c] += acc;
  }
}

struct Solver {
  const Nlp& nlp;
  IpOptions opt;

  int n0 = 0, ns = 0, n = 0, m = 0, N = 0;
  std::vector<int> slack_of_row;  // -1 for equality rows
  std::vector<double> row_rhs;    // subtracted from equality rows
  VectorXd l, u;                  // extended, relaxed bounds
  VectorXd orig_lo, orig_hi;      // original variable bounds for the final clamp
  std::vector<bool> has_l, has_u;
  std::vector<bool> fixed;        // equal-bound variables held as parameters
  std::vector<int> fixed_zero_slots;  // K entries coupling fixed vars, forced to 0
  bool any_fixed = false;
  VectorXd row_scale;
  double cost_scale = 1.0;

  std::vector<int> joff;  // per constraint block offset into jvals
  std::vector<double> jvals;
  std::vector<int> coff;
  std::vector<double> cjvals;

  SpMat K;
  std::vector<int> slot_h_con;   // packed-entry slots, concatenated over constraint blocks
  std::vector<int> slot_h_cost;
  std::vector<int> slot_a;       // dense J entry slots, concatenated
  std::vector<int> slot_a_slack; // per slack row
  std::vector<int> slot_dx;      // n
  std::vector<int> slot_dc;      // m
  Eigen::SimplicialLDLT<SpMat, Eigen::Lower> ldlt;
  bool analyzed = false;

  // iterate
  VectorXd w;        // [x; s]
  VectorXd y;        // scaled row multipliers
  VectorXd zl, zu;   // bound multipliers (0 where bound infinite)
  VectorXd cval;     // scaled constraint residuals c~(w)
  VectorXd grad;     // scaled cost gradient (extended)
  VectorXd h_diag;   // Lagrangian Hessian diagonal as assembled (pre-barrier)
  double fval = 0.0; // scaled cost
  double delta_last = 0.0;
  double force_delta = 0.0;  // next factorization starts at least here

  explicit Solver(const Nlp& p, const IpOptions& o) : nlp(p), opt(o) {}

  // ---- problem setup -------------------------------------------------------

  void setup(const VectorXd& x_start) {
    n0 = nlp.num_vars();
    m = nlp.num_rows();
    slack_of_row.assign(m, -1);
    row_rhs.assign(m, 0.0);
    ns = 0;
    for (int r = 0; r < m; ++r) {
      const double lo = nlp.row_lo()[r], hi = nlp.row_hi()[r];
      if (lo == hi) {
        row_rhs[r] = lo;
      } else {
        slack_of_row[r] = ns++;
      }
    }
    n = n0 + ns;
    N = n + m;

    orig_lo = Eigen::Map<const VectorXd>(nlp.var_lo().data(), n0);
    orig_hi = Eigen::Map<const VectorXd>(nlp.var_hi().data(), n0);

    compute_scaling(x_start);

    l.resize(n);
    u.resize(n);
    has_l.assign(n, false);
    has_u.assign(n, false);
    for (int i = 0; i < n0; ++i) {
      l[i] = orig_lo[i];
      u[i] = orig_hi[i];
    }
    for (int r = 0; r < m; ++r) {
      const int s = slack_of_row[r];
      if (s >= 0) {
        l[n0 + s] = nlp.row_lo()[r] * row_scale[r];
        u[n0 + s] = nlp.row_hi()[r] * row_scale[r];
        if (row_scale[r] < 0) std::swap(l[n0 + s], u[n0 + s]);  // never happens, scales > 0
      }
    }
    fixed.assign(n, false);
    any_fixed = false;
    for (int i = 0; i < n; ++i) {
      if (l[i] == u[i] && std::isfinite(l[i])) {
        // Equal bounds make the variable a parameter: no barrier, no step.
        fixed[i] = true;
        any_fixed = true;
        has_l[i] = has_u[i] = false;
        continue;
      }
      has_l[i] = std::isfinite(l[i]);
      has_u[i] = std::isfinite(u[i]);
      if (has_l[i]) l[i] -= opt.bound_relax * std::max(1.0, std::abs(l[i]));
      if (has_u[i]) u[i] += opt.bound_relax * std::max(1.0, std::abs(u[i]));
    }

    joff.clear();
    int tot = 0;
    for (const auto& e : nlp.constraint_blocks()) {
      joff.push_back(tot);
      tot += e.nrows * static_cast<int>(e.vars.size());
    }
    jvals.assign(tot, 0.0);
    coff.clear();
    tot = 0;
    for (const auto& e : nlp.cost_blocks()) {
      coff.push_back(tot);
      tot += static_cast<int>(e.vars.size());
    }
    cjvals.assign(tot, 0.0);

    build_kkt_pattern();
  }

  void compute_scaling(const VectorXd& x_start) {
    row_scale = VectorXd::Ones(m);
    cost_scale = 1.0;
    if (!opt.scale_problem) return;
    VectorXd x0 = x_start;
    // Gradient-based scaling at the start point: push rows and the cost
    // toward a max gradient of 100.
    const double gmax = 100.0;
    double xl[ad::kMaxLocal];
    std::vector<double> J;
    std::vector<double> r;
    VectorXd g = VectorXd::Zero(n0);
    for (const auto& e : nlp.cost_blocks()) {
      const int nloc = static_cast<int>(e.vars.size());
      for (int i = 0; i < nloc; ++i) xl[i] = x0[e.vars[i]];
      J.resize(nloc);
      double rv;
      e.block->jacobian(xl, &rv, J.data());
      for (int i = 0; i < nloc; ++i) g[e.vars[i]] += J[i];
    }
    const double gn = g.lpNorm<Eigen::Infinity>();
    if (std::isfinite(gn) && gn > gmax) cost_scale = gmax / gn;
    int b = 0;
    for (const auto& e : nlp.constraint_blocks()) {
      const int nloc = static_cast<int>(e.vars.size());
      for (int i = 0; i < nloc; ++i) xl[i] = x0[e.vars[i]];
      J.resize(static_cast<size_t>(e.nrows) * nloc);
      r.resize(e.nrows);
      e.block->jacobian(xl, r.data(), J.data());
      for (int k = 0; k < e.nrows; ++k) {
        double rn = 0.0;
        for (int i = 0; i < nloc; ++i)
          rn = std::max(rn, std::abs(J[static_cast<size_t>(k) * nloc + i]));
        if (std::isfinite(rn) && rn > gmax) row_scale[e.row_offset + k] = gmax / rn;
      }
      ++b;
    }
    (void)b;
  }

  void build_kkt_pattern() {
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(static_cast<size_t>(N) * 4);
    auto add = [&](int r, int c) {
      if (r < c) std::swap(r, c);
      trip.emplace_back(r, c, 1.0);
    };
    for (const auto& e : nlp.constraint_blocks()) {
      const int nloc = static_cast<int>(e.vars.size());
      for (int i = 0; i < nloc; ++i) {
        if (!e.linear)
          for (int j = 0; j <= i; ++j) add(e.vars[i], e.vars[j]);
        for (int k = 0; k < e.nrows; ++k) add(n + e.row_offset + k, e.vars[i]);
      }
    }
    for (const auto& e : nlp.cost_blocks()) {
      const int nloc = static_cast<int>(e.vars.size());
      for (int i = 0; i < nloc; ++i)
        for (int j = 0; j <= i; ++j) add(e.vars[i], e.vars[j]);
    }
    for (int r = 0; r < m; ++r)
      if (slack_of_row[r] >= 0) add(n + r, n0 + slack_of_row[r]);
    for (int i = 0; i < n; ++i) add(i, i);
    for (int r = 0; r < m; ++r) add(n + r, n + r);

    K.resize(N, N);
    K.setFromTriplets(trip.begin(), trip.end());
    K.makeCompressed();

    slot_h_con.clear();
    slot_a.clear();
    for (const auto& e : nlp.constraint_blocks()) {
      const int nloc = static_cast<int>(e.vars.size());
      if (!e.linear)
        for (int i = 0; i < nloc; ++i)
          for (int j = 0; j <= i; ++j) {
            int r = e.vars[i], c = e.vars[j];
            if (r < c) std::swap(r, c);
            slot_h_con.push_back(find_slot(K, r, c));
          }
      for (int k = 0; k < e.nrows; ++k)
        for (int i = 0; i < nloc; ++i)
          slot_a.push_back(find_slot(K, n + e.row_offset + k, e.vars[i]));
    }
    slot_h_cost.clear();
    for (const auto& e : nlp.cost_blocks()) {
      const int nloc = static_cast<int>(e.vars.size());
      for (int i = 0; i < nloc; ++i)
        for (int j = 0; j <= i; ++j) {
          int r = e.vars[i], c = e.vars[j];
          if (r < c) std::swap(r, c);
          slot_h_cost.push_back(find_slot(K, r, c));
        }
    }
    slot_a_slack.assign(m, -1);
    for (int r = 0; r < m; ++r)
      if (slack_of_row[r] >= 0)
        slot_a_slack[r] = find_slot(K, n + r, n0 + slack_of_row[r]);
    slot_dx.resize(n);
    for (int i = 0; i < n; ++i) slot_dx[i] = find_slot(K, i, i);
    slot_dc.resize(m);
    for (int r = 0; r < m; ++r) slot_dc[r] = find_slot(K, n + r, n + r);

    fixed_zero_slots.clear();
    if (any_fixed) {
      const int* outer = K.outerIndexPtr();
      const int* inner = K.innerIndexPtr();
      for (int c = 0; c < K.outerSize(); ++c)
        for (int p = outer[c]; p < outer[c + 1]; ++p) {
          const int r = inner[p];
          if (r == c) continue;
          if ((r < n && fixed[r]) || (c < n && fixed[c])) fixed_zero_slots.push_back(p);
        }
    }
  }

  // ---- evaluations ---------------------------------------------------------

  // Values only: scaled cost and scaled constraint residuals.
  bool eval_values(const VectorXd& win, double& f, VectorXd& c) const {
    double xl[ad::kMaxLocal];
    f = 0.0;
    for (const auto& e : nlp.cost_blocks()) {
      for (size_t i = 0; i < e.vars.size(); ++i) xl[i] = win[e.vars[i]];
      double r;
      e.block->value(xl, &r);
      f += r;
    }
    f *= cost_scale;
    c.resize(m);
    for (const auto& e : nlp.constraint_blocks()) {
      for (size_t i = 0; i < e.vars.size(); ++i) xl[i] = win[e.vars[i]];
      e.block->value(xl, c.data() + e.row_offset);
    }
    for (int r = 0; r < m; ++r) {
      c[r] = row_scale[r] * (c[r] - row_rhs[r]);
      if (slack_of_row[r] >= 0) c[r] -= win[n0 + slack_of_row[r]];
    }
    return std::isfinite(f) && c.allFinite();
  }

  // Values, gradient, Jacobian buffers; optionally the Hessian scattered into
  // the KKT value array (weights = current y, cost_scale).
  bool eval_derivs(bool with_hessian) {
    double xl[ad::kMaxLocal];
    double wloc[ad::kMaxLocal];
    double hloc[ad::kMaxPacked];
    double* kv = K.valuePtr();
    if (with_hessian) std::fill(kv, kv + K.nonZeros(), 0.0);

    fval = 0.0;
    grad.setZero(n);
    cval.resize(m);

    int hpos = 0;
    size_t apos = 0;
    int b = 0;
    for (const auto& e : nlp.constraint_blocks()) {
      const int nloc = static_cast<int>(e.vars.size());
      for (int i = 0; i < nloc; ++i) xl[i] = w[e.vars[i]];
      double* Jb = jvals.data() + joff[b];
      if (with_hessian && !e.linear) {
        for (int k = 0; k < e.nrows; ++k)
          wloc[k] = y[e.row_offset + k] * row_scale[e.row_offset + k];
        const int psz = ad::packed_size(nloc);
        std::fill(hloc, hloc + psz, 0.0);
        e.block->hessian(xl, wloc, hloc, cval.data() + e.row_offset, Jb);
        for (int p = 0; p < psz; ++p) kv[slot_h_con[hpos + p]] += hloc[p];
        hpos += psz;
      } else {
        e.block->jacobian(xl, cval.data() + e.row_offset, Jb);
      }
      for (int k = 0; k < e.nrows; ++k) {
        const double rs = row_scale[e.row_offset + k];
        for (int i = 0; i < nloc; ++i) {
          Jb[k * nloc + i] *= rs;
          if (with_hessian) kv[slot_a[apos]] += Jb[k * nloc + i];
          ++apos;
        }
      }
      ++b;
    }
    for (int r = 0; r < m; ++r) {
      cval[r] = row_scale[r] * (cval[r] - row_rhs[r]);
      if (slack_of_row[r] >= 0) {
        cval[r] -= w[n0 + slack_of_row[r]];
        if (with_hessian) kv[slot_a_slack[r]] += -1.0;
      }
    }

    int cpos = 0;
    b = 0;
    for (const auto& e : nlp.cost_blocks()) {
      const int nloc = static_cast<int>(e.vars.size());
      for (int i = 0; i < nloc; ++i) xl[i] = w[e.vars[i]];
      double* Jb = cjvals.data() + coff[b];
      double rv;
      if (with_hessian) {
        const double wc = cost_scale;
        const int psz = ad::packed_size(nloc);
        std::fill(hloc, hloc + psz, 0.0);
        e.block->hessian(xl, &wc, hloc, &rv, Jb);
        for (int p = 0; p < psz; ++p) kv[slot_h_cost[cpos + p]] += hloc[p];
        cpos += psz;
      } else {
        e.block->jacobian(xl, &rv, Jb);
      }
      fval += rv;
      for (int i = 0; i < nloc; ++i) grad[e.vars[i]] += cost_scale * Jb[i];
      ++b;
    }
    fval *= cost_scale;
    if (with_hessian) {
      h_diag.resize(n);
      for (int i = 0; i < n; ++i) h_diag[i] = kv[slot_dx[i]];
    }
    return std::isfinite(fval) && cval.allFinite() && grad.allFinite();
  }

  // out += A^T v using the Jacobian buffers from the last eval_derivs.
  void at_mult(const VectorXd& v, VectorXd& out) const {
    int b = 0;
    for (const auto& e : nlp.constraint_blocks()) {
      const int nloc = static_cast<int>(e.vars.size());
      const double* Jb = jvals.data() + joff[b];
      for (int k = 0; k < e.nrows; ++k) {
        const double vk = v[e.row_offset + k];
        if (vk != 0.0)
          for (int i = 0; i < nloc; ++i) out[e.vars[i]] += Jb[k * nloc + i] * vk;
      }
      ++b;
    }
    for (int r = 0; r < m; ++r)
      if (slack_of_row[r] >= 0) out[n0 + slack_of_row[r]] -= v[r];
  }

  // out += A v.
  void a_mult(const VectorXd& v, VectorXd& out) const {
    int b = 0;
    for (const auto& e : nlp.constraint_blocks()) {
      const int nloc = static_cast<int>(e.vars.size());
      const double* Jb = jvals.data() + joff[b];
      for (int k = 0; k < e.nrows; ++k) {
        double acc = 0.0;
        for (int i = 0; i < nloc; ++i) acc += Jb[k * nloc + i] * v[e.vars[i]];
        out[e.row_offset + k] += acc;
      }
      ++b;
    }
    for (int r = 0; r < m; ++r)
      if (slack_of_row[r] >= 0) out[r] -= v[n0 + slack_of_row[r]];
  }

  // ---- barrier quantities ---------------------------------------------------

  double barrier_value(const VectorXd& win, double f, double mu) const {
    double phi = f;
    for (int i = 0; i < n; ++i) {
      if (has_l[i]) {
        const double d = win[i] - l[i];
        if (d <= 0) return kInf;
        phi -= mu * std::log(d);
      }
      if (has_u[i]) {
        const double d = u[i] - win[i];
        if (d <= 0) return kInf;
        phi -= mu * std::log(d);
      }
    }
    return phi;
  }

  void barrier_gradient(double mu, VectorXd& g) const {
    g = grad;
    for (int i = 0; i < n; ++i) {
      if (has_l[i]) g[i] -= mu / (w[i] - l[i]);
      if (has_u[i]) g[i] += mu / (u[i] - w[i]);
    }
  }

  double kkt_error(double mu, double* dual_inf = nullptr, double* compl_err = nullptr) const {
    VectorXd rd = grad;
    at_mult(y, rd);
    if (any_fixed)
      for (int i = 0; i < n; ++i)
        if (fixed[i]) rd[i] = 0.0;  // parameters carry no stationarity residual
    double comp = 0.0;
    double zsum = 0.0;
    int zcnt = 0;
    for (int i = 0; i < n; ++i) {
      if (has_l[i]) {
        rd[i] -= zl[i];
        comp = std::max(comp, std::abs((w[i] - l[i]) * zl[i] - mu));
        zsum += std::abs(zl[i]);
        ++zcnt;
      }
      if (has_u[i]) {
        rd[i] += zu[i];
        comp = std::max(comp, std::abs((u[i] - w[i]) * zu[i] - mu));
        zsum += std::abs(zu[i]);
        ++zcnt;
      }
    }
    const double smax = 100.0;
    double ysum = 0.0;
    for (int r = 0; r < m; ++r) ysum += std::abs(y[r]);
    const double sd =
        std::max(smax, (ysum + zsum) / std::max(1, m + zcnt)) / smax;
    const double sc = std::max(smax, zsum / std::max(1, zcnt)) / smax;
    const double di = rd.lpNorm<Eigen::Infinity>() / sd;
    const double ce = comp / sc;
    if (dual_inf) *dual_inf = di;
    if (compl_err) *compl_err = ce;
    const double pr = m ? cval.lpNorm<Eigen::Infinity>() : 0.0;
    return std::max({di, pr, ce});
  }

  // Unscaled violation of the original rows.
  double unscaled_violation() const {
    double v = 0.0;
    for (int r = 0; r < m; ++r) v = std::max(v, std::abs(cval[r]) / row_scale[r]);
    return v;
  }

  double frac_to_boundary(const VectorXd& win, const VectorXd& d, double tau) const {
    double a = 1.0;
    for (int i = 0; i < n; ++i) {
      if (has_l[i] && d[i] < 0) a = std::min(a, -tau * (win[i] - l[i]) / d[i]);
      if (has_u[i] && d[i] > 0) a = std::min(a, tau * (u[i] - win[i]) / d[i]);
    }
    return a;
  }

  // ---- KKT solve ------------------------------------------------------------

  // Fill barrier/regularization diagonals and factorize, correcting inertia
  // by growing delta_x. The Hessian and A entries are already in K.
  bool factorize(double mu, double delta_c) {
    double* kv = K.valuePtr();
    std::vector<double> base_diag(n);
    for (int i = 0; i < n; ++i) {
      double sig = 0.0;
      if (has_l[i]) sig += zl[i] / (w[i] - l[i]);
      if (has_u[i]) sig += zu[i] / (u[i] - w[i]);
      base_diag[i] = h_diag[i] + sig;
    }
    (void)mu;
    double delta = force_delta;
    double dc = delta_c;
    force_delta = 0.0;
    for (int attempt = 0; attempt < 70; ++attempt) {
      for (int i = 0; i < n; ++i) kv[slot_dx[i]] = base_diag[i] + delta;
      for (int r = 0; r < m; ++r) kv[slot_dc[r]] = -dc;
      if (any_fixed) {
        for (const int s : fixed_zero_slots) kv[s] = 0.0;
        for (int i = 0; i < n; ++i)
          if (fixed[i]) kv[slot_dx[i]] = 1.0;
      }
      if (!analyzed) {
        ldlt.analyzePattern(K);
        analyzed = true;
      }
      ldlt.factorize(K);
      bool ok = ldlt.info() == Eigen::Success;
      if (ok) {
        const auto& D = ldlt.vectorD();
        int neg = 0;
        for (int i = 0; i < N; ++i) {
          const double d = D[i];
          if (!std::isfinite(d) || d == 0.0) {
            ok = false;
            break;
          }
          if (d < 0) ++neg;
        }
        if (ok && neg != m) ok = false;
      }
      if (ok) {
        delta_last = delta;
        return true;
      }
      if (delta == 0.0) {
        delta = (delta_last > 0.0) ? std::max(1e-20, delta_last / 3.0) : 1e-4;
      } else if (delta > 1e12) {
        // A wrong inertia the primal shift cannot cure means the Jacobian
        // lost rank, or the dual pivots drowned in elimination noise. Relax
        // the dual block harder and rerun the primal ladder.
        if (dc >= 1e-2) break;
        dc = std::min(1e-2, dc * 1e3);
        delta = 1e-4;
      } else {
        delta *= 8.0;
      }
    }
    if (opt.verbosity >= 1) {
      bool finite = true;
      for (int i = 0; i < K.nonZeros(); ++i)
        if (!std::isfinite(K.valuePtr()[i])) {
          finite = false;
          break;
        }
      int neg = 0, zero = 0;
      if (ldlt.info() == Eigen::Success) {
        const auto& D = ldlt.vectorD();
        for (int i = 0; i < N; ++i) {
          if (D[i] < 0) ++neg;
          if (D[i] == 0.0 || !std::isfinite(D[i])) ++zero;
        }
      }
      std::printf("ip factorize failed: info %d neg %d zero %d m %d delta %.1e dc %.1e finite %d\n",
                  static_cast<int>(ldlt.info()), neg, zero, m, delta, dc, finite ? 1 : 0);
    }
    return false;
  }

  bool kkt_solve(const VectorXd& rhs, VectorXd& sol) const {
    sol = ldlt.solve(rhs);
    if (!sol.allFinite()) return false;
    // One round of iterative refinement.
    VectorXd res = -rhs;
    sym_lower_mult(K, sol, res);
    const double rn = res.lpNorm<Eigen::Infinity>();
    if (rn > 1e-11 * std::max(1.0, rhs.lpNorm<Eigen::Infinity>())) {
      const VectorXd corr = ldlt.solve(res);
      if (corr.allFinite()) sol -= corr;
    }
    return sol.allFinite();
  }

  // ---- main loop ------------------------------------------------------------

  IpResult run(VectorXd x_start) {
    const double t0 = now_s();
    IpResult out;

    setup(x_start);

    // Start point: push into the interior.
    w.resize(n);
    for (int i = 0; i < n0; ++i) w[i] = x_start[i];
    {
      VectorXd cr(m);
      double f0;
      // Temporary slacks at 0 to evaluate raw rows, then set s = scaled row.
      for (int i = n0; i < n; ++i) w[i] = 0.0;
      eval_values(w, f0, cr);
      for (int r = 0; r < m; ++r)
        if (slack_of_row[r] >= 0) w[n0 + slack_of_row[r]] = cr[r];
    }
    const double kap = opt.bound_push;
    for (int i = 0; i < n; ++i) {
      if (fixed[i]) {
        w[i] = l[i];
        continue;
      }
      if (has_l[i] && has_u[i]) {
        const double pl = std::min(kap * std::max(1.0, std::abs(l[i])), (u[i] - l[i]) / 4);
        const double pu = std::min(kap * std::max(1.0, std::abs(u[i])), (u[i] - l[i]) / 4);
        w[i] = std::min(std::max(w[i], l[i] + pl), u[i] - pu);
      } else if (has_l[i]) {
        w[i] = std::max(w[i], l[i] + kap * std::max(1.0, std::abs(l[i])));
      } else if (has_u[i]) {
        w[i] = std::min(w[i], u[i] - kap * std::max(1.0, std::abs(u[i])));
      }
    }

    y = VectorXd::Zero(m);
    zl = VectorXd::Zero(n);
    zu = VectorXd::Zero(n);
    for (int i = 0; i < n; ++i) {
      if (has_l[i]) zl[i] = 1.0;
      if (has_u[i]) zu[i] = 1.0;
    }

    double mu = opt.mu_init;
    double nu = 1e-6;  // merit penalty
    const double kappa_eps = 10.0, kappa_mu = 0.2, theta_mu = 1.5;
    const double eta = 1e-8;  // Armijo
    int ls_failures = 0;

    auto finish = [&](IpStatus st, const std::string& msg) {
      out.status = st;
      out.message = msg;
      out.x = w.head(n0).cwiseMax(orig_lo).cwiseMin(orig_hi);
      out.y.resize(m);
      for (int r = 0; r < m; ++r) out.y[r] = y[r] * row_scale[r] / cost_scale;
      out.zl = zl.head(n0) / cost_scale;
      out.zu = zu.head(n0) / cost_scale;
      out.f = fval / cost_scale;
      out.kkt_error = kkt_error(0.0);
      out.constraint_violation = unscaled_violation();
      if (m > 0) {
        int wr = 0;
        double wv = 0.0;
        for (int r = 0; r < m; ++r) {
          const double v = std::abs(cval[r]) / row_scale[r];
          if (v > wv) {
            wv = v;
            wr = r;
          }
        }
        out.worst_row_label = nlp.row_label(wr);
      }
      out.seconds = now_s() - t0;
      return out;
    };

    if (!eval_derivs(true)) return finish(IpStatus::Diverged, "non-finite start evaluation");

    for (int iter = 0;; ++iter) {
      out.iterations = iter;
      const double e0 = kkt_error(0.0);
      const double viol = unscaled_violation();
      if (opt.verbosity >= 2)
        std::printf("ip iter %3d mu %.1e f %.6e kkt %.3e viol %.3e\n", iter, mu,
                    fval / cost_scale, e0, viol);
      if (e0 <= opt.tol && viol <= opt.constraint_tol)
        return finish(IpStatus::Optimal, "converged");
      if (iter >= opt.max_iter)
        return finish(IpStatus::MaxIterations, "iteration limit");
      if (opt.time_limit_s > 0 && now_s() - t0 > opt.time_limit_s)
        return finish(IpStatus::TimeLimit, "time limit");

      // Shrink the barrier parameter as soon as the inner problem is solved.
      while (kkt_error(mu) <= kappa_eps * mu) {
        const double next =
            std::max(opt.tol / 100.0, std::min(kappa_mu * mu, std::pow(mu, theta_mu)));
        if (next >= mu) break;  // floor reached, only the outer test can stop us
        mu = next;
      }
      const double tau = std::max(0.99, 1.0 - mu);

      if (!factorize(mu, 1e-8))
        return finish(IpStatus::LinearSolveFailure, "inertia correction failed");

      VectorXd rhs(N);
      VectorXd gphi(n);
      barrier_gradient(mu, gphi);
      {
        VectorXd r1 = gphi;
        at_mult(y, r1);
        rhs.head(n) = -r1;
        rhs.tail(m) = -cval;
        if (any_fixed)
          for (int i = 0; i < n; ++i)
            if (fixed[i]) rhs[i] = 0.0;  // identity row keeps the parameter put
      }
      VectorXd sol;
      if (!kkt_solve(rhs, sol))
        return finish(IpStatus::LinearSolveFailure, "kkt solve produced non-finite step");
      VectorXd dw = sol.head(n);
      VectorXd dy = sol.tail(m);

      // Bound multiplier steps.
      VectorXd dzl = VectorXd::Zero(n), dzu = VectorXd::Zero(n);
      for (int i = 0; i < n; ++i) {
        if (has_l[i]) dzl[i] = mu / (w[i] - l[i]) - zl[i] - zl[i] / (w[i] - l[i]) * dw[i];
        if (has_u[i]) dzu[i] = mu / (u[i] - w[i]) - zu[i] + zu[i] / (u[i] - w[i]) * dw[i];
      }

      const double alpha_max = frac_to_boundary(w, dw, tau);
      double alpha_z = 1.0;
      for (int i = 0; i < n; ++i) {
        if (has_l[i] && dzl[i] < 0) alpha_z = std::min(alpha_z, -tau * zl[i] / dzl[i]);
        if (has_u[i] && dzu[i] < 0) alpha_z = std::min(alpha_z, -tau * zu[i] / dzu[i]);
      }

      // Merit function setup.
      const double cnorm = cval.norm();
      VectorXd cad = cval;
      a_mult(dw, cad);
      const double gtd = gphi.dot(dw);
      const double dred = cnorm - cad.norm();  // predicted two-norm reduction
      if (dred > 1e-14) {
        const double nu_req = gtd / (0.9 * dred);
        if (nu_req > nu) nu = std::min(1e10, nu_req + 1.0);
      }
      double dphi = gtd - nu * dred;
      if (dphi >= 0 && cnorm > 0) {
        nu = std::min(1e10, nu * 10.0);
        dphi = gtd - nu * dred;
      }

      const double phi0 = barrier_value(w, fval, mu) + nu * cnorm;
      double alpha = alpha_max;
      bool accepted = false;
      VectorXd wtrial;
      int soc_left = opt.max_soc;
      for (int ls = 0; ls < 60 && !accepted; ++ls) {
        wtrial = w + alpha * dw;
        double ft;
        VectorXd ct;
        bool finite = eval_values(wtrial, ft, ct);
        double phit = finite ? barrier_value(wtrial, ft, mu) + nu * ct.norm() : kInf;
        if (finite && phit <= phi0 + eta * alpha * std::min(dphi, 0.0)) {
          accepted = true;
          break;
        }
        // Second-order correction: retry the full step with a feasibility
        // correction computed from the constraint values at the trial point.
        if (soc_left > 0 && finite && ct.norm() >= cnorm) {
          --soc_left;
          VectorXd rhs2(N);
          rhs2.head(n).setZero();
          rhs2.tail(m) = -ct;
          VectorXd sol2;
          if (kkt_solve(rhs2, sol2)) {
            const VectorXd dsoc = sol2.head(n);
            const double beta = frac_to_boundary(wtrial, dsoc, tau);
            const VectorXd wsoc = wtrial + beta * dsoc;
            double fs;
            VectorXd cs;
            if (eval_values(wsoc, fs, cs)) {
              const double phis = barrier_value(wsoc, fs, mu) + nu * cs.norm();
              if (phis <= phi0 + eta * alpha * std::min(dphi, 0.0)) {
                wtrial = wsoc;
                accepted = true;
                break;
              }
            }
          }
        }
        alpha *= 0.5;
        if (alpha < 1e-12) break;
      }

      if (!accepted) {
        ++ls_failures;
        // A failing line search with a well-conditioned step usually means
        // the current basin cannot reduce infeasibility; retry once with a
        // heavily regularized (gradient-like) direction before giving up.
        if (ls_failures <= 3) {
          force_delta = std::max(delta_last * 64.0, 1e-2 * std::pow(100.0, ls_failures));
          continue;
        }
        VectorXd atc = VectorXd::Zero(n);
        at_mult(cval, atc);
        if (any_fixed)
          for (int i = 0; i < n; ++i)
            if (fixed[i]) atc[i] = 0.0;
        const double stat = atc.lpNorm<Eigen::Infinity>();
        if (viol > 10 * opt.constraint_tol && stat < 1e-4 * std::max(1.0, cnorm))
          return finish(IpStatus::Infeasible,
                        "stationary infeasible point (line search stalled)");
        if (e0 < 1e2 * opt.tol && viol <= 10 * opt.constraint_tol)
          return finish(IpStatus::AlmostOptimal, "line search stalled near optimum");
        return finish(IpStatus::Diverged, "line search failed");
      }
      ls_failures = 0;

      const double step_alpha = alpha;
      w = wtrial;
      y += step_alpha * dy;
      for (int i = 0; i < n; ++i) {
        if (has_l[i]) {
          zl[i] += alpha_z * dzl[i];
          const double lo = mu / (opt.kappa_sigma * (w[i] - l[i]));
          const double hi = opt.kappa_sigma * mu / (w[i] - l[i]);
          zl[i] = std::min(std::max(zl[i], lo), hi);
        }
        if (has_u[i]) {
          zu[i] += alpha_z * dzu[i];
          const double lo = mu / (opt.kappa_sigma * (u[i] - w[i]));
          const double hi = opt.kappa_sigma * mu / (u[i] - w[i]);
          zu[i] = std::min(std::max(zu[i], lo), hi);
        }
      }

      if (!eval_derivs(true)) return finish(IpStatus::Diverged, "non-finite evaluation");
    }
  }
};

}  // namespace

IpResult ip_solve(const Nlp& nlp, const IpOptions& options) {
  Eigen::Map<const VectorXd> x0(nlp.start().data(), nlp.num_vars());
  return ip_solve(nlp, VectorXd(x0), options);
}

IpResult ip_solve(const Nlp& nlp, const Eigen::VectorXd& x0, const IpOptions& options) {
  Solver s(nlp, options);
  return s.run(x0);
}

}  // namespace jumpnav
