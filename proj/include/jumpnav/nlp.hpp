#pragma once

// Block-structured nonlinear program:
//
//   min  sum of cost blocks
//   s.t. lo_r <= c_r(x) <= hi_r   for every constraint block row
//        xlo <= x <= xhi
//
// A block couples a short list of variables and evaluates a few rows through
// one generic callable, instantiated with plain doubles (values), first-order
// duals (Jacobians) and second-order duals (Hessians). The interior-point
// solver in ip_solver.hpp consumes this container directly; tests use the
// finite-difference checkers at the bottom to validate the analytic
// derivatives of whatever problem was assembled.

#include <jumpnav/autodiff.hpp>

#include <Eigen/Core>
#include <Eigen/SparseCore>
#include <limits>
#include <memory>
#include <string>
#include <vector>

namespace jumpnav {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

class NlpBlock {
 public:
  virtual ~NlpBlock() = default;
  virtual void value(const double* xl, double* r) const = 0;
  virtual void jacobian(const double* xl, double* r, double* J) const = 0;
  // Accumulates sum_k w[k] * Hess(r_k) into Hacc (packed lower triangular of
  // the local variables); optionally also writes rows and the Jacobian.
  virtual void hessian(const double* xl, const double* w, double* Hacc, double* r,
                       double* J) const = 0;
};

template <class F>
class GenericNlpBlock final : public NlpBlock {
 public:
  GenericNlpBlock(int nloc, int nrows, F f, bool linear)
      : nloc_(nloc), nrows_(nrows), f_(std::move(f)), linear_(linear) {}

  void value(const double* xl, double* r) const override { f_(xl, r); }
  void jacobian(const double* xl, double* r, double* J) const override {
    ad::eval_jacobian(f_, xl, nloc_, nrows_, r, J);
  }
  void hessian(const double* xl, const double* w, double* Hacc, double* r,
               double* J) const override {
    if (linear_) {
      if (r || J)
        ad::eval_jacobian(f_, xl, nloc_, nrows_, r, J);
      (void)w;
      (void)Hacc;
      return;
    }
    ad::eval_hessian_acc(f_, xl, nloc_, nrows_, w, Hacc, r, J);
  }

 private:
  int nloc_;
  int nrows_;
  F f_;
  bool linear_;
};

struct BlockEntry {
  std::unique_ptr<NlpBlock> block;
  std::vector<int> vars;
  int nrows = 0;
  int row_offset = 0;  // first global row (constraint blocks only)
  std::string label;
  bool linear = false;
};

class Nlp {
 public:
  int add_variables(int count, const std::string& prefix = "") {
    const int first = static_cast<int>(xlo_.size());
    for (int i = 0; i < count; ++i) {
      xlo_.push_back(-kInf);
      xhi_.push_back(kInf);
      x0_.push_back(0.0);
      names_.push_back(count > 1 ? prefix + "[" + std::to_string(i) + "]" : prefix);
    }
    return first;
  }
  int add_variable(const std::string& name, double lo = -kInf, double hi = kInf,
                   double start = 0.0) {
    const int i = add_variables(1, name);
    xlo_[i] = lo;
    xhi_[i] = hi;
    x0_[i] = start;
    return i;
  }
  void set_bounds(int i, double lo, double hi) {
    xlo_[i] = lo;
    xhi_[i] = hi;
  }
  void set_start(int i, double v) { x0_[i] = v; }

  template <class F>
  void add_cost(std::vector<int> vars, F f, const std::string& label = "cost") {
    const int nloc = static_cast<int>(vars.size());
    assert(nloc <= ad::kMaxLocal);
    BlockEntry e;
    e.block = std::make_unique<GenericNlpBlock<F>>(nloc, 1, std::move(f), false);
    e.vars = std::move(vars);
    e.nrows = 1;
    e.label = label;
    costs_.push_back(std::move(e));
  }

  // lo/hi are per-row; lo == hi makes the row an equality.
  template <class F>
  void add_constraint(std::vector<int> vars, std::vector<double> lo, std::vector<double> hi,
                      F f, const std::string& label = "c", bool linear = false) {
    const int nloc = static_cast<int>(vars.size());
    const int nrows = static_cast<int>(lo.size());
    assert(nloc <= ad::kMaxLocal);
    assert(lo.size() == hi.size());
    BlockEntry e;
    e.block = std::make_unique<GenericNlpBlock<F>>(nloc, nrows, std::move(f), linear);
    e.vars = std::move(vars);
    e.nrows = nrows;
    e.row_offset = nrows_total_;
    e.label = label;
    e.linear = linear;
    constraints_.push_back(std::move(e));
    for (int k = 0; k < nrows; ++k) {
      row_lo_.push_back(lo[k]);
      row_hi_.push_back(hi[k]);
    }
    nrows_total_ += nrows;
  }

  template <class F>
  void add_equality(std::vector<int> vars, int nrows, F f, const std::string& label = "eq",
                    bool linear = false) {
    add_constraint(std::move(vars), std::vector<double>(nrows, 0.0),
                   std::vector<double>(nrows, 0.0), std::move(f), label, linear);
  }
  // One-sided c(x) >= lo rows.
  template <class F>
  void add_lower_bounded(std::vector<int> vars, std::vector<double> lo, F f,
                         const std::string& label = "ineq", bool linear = false) {
    const int nrows = static_cast<int>(lo.size());
    add_constraint(std::move(vars), std::move(lo), std::vector<double>(nrows, kInf),
                   std::move(f), label, linear);
  }

  int num_vars() const { return static_cast<int>(xlo_.size()); }
  int num_rows() const { return nrows_total_; }
  const std::vector<double>& var_lo() const { return xlo_; }
  const std::vector<double>& var_hi() const { return xhi_; }
  const std::vector<double>& start() const { return x0_; }
  const std::vector<double>& row_lo() const { return row_lo_; }
  const std::vector<double>& row_hi() const { return row_hi_; }
  const std::vector<std::string>& var_names() const { return names_; }
  const std::vector<BlockEntry>& constraint_blocks() const { return constraints_; }
  const std::vector<BlockEntry>& cost_blocks() const { return costs_; }

  std::string row_label(int row) const;

  // Whole-problem evaluations (convenience for tests and reporting; the
  // solver uses its own workspace-backed versions).
  double eval_cost(const Eigen::VectorXd& x) const;
  Eigen::VectorXd eval_cost_gradient(const Eigen::VectorXd& x) const;
  Eigen::VectorXd eval_rows(const Eigen::VectorXd& x) const;
  Eigen::SparseMatrix<double> eval_jacobian(const Eigen::VectorXd& x) const;
  // Violation of [row_lo, row_hi] and variable bounds, infinity norm.
  double max_violation(const Eigen::VectorXd& x) const;
  int worst_row(const Eigen::VectorXd& x) const;

 private:
  std::vector<double> xlo_, xhi_, x0_;
  std::vector<double> row_lo_, row_hi_;
  std::vector<std::string> names_;
  std::vector<BlockEntry> constraints_;
  std::vector<BlockEntry> costs_;
  int nrows_total_ = 0;
};

// Central finite-difference reference derivatives, used to validate the
// analytic ones on random points.
Eigen::VectorXd fd_cost_gradient(const Nlp& nlp, const Eigen::VectorXd& x, double h = 1e-6);
Eigen::MatrixXd fd_jacobian(const Nlp& nlp, const Eigen::VectorXd& x, double h = 1e-6);

struct DerivativeCheckResult {
  double max_jac_err = 0.0;   // relative, against max(1, |entry|)
  double max_grad_err = 0.0;  // relative
  int jac_row = -1, jac_col = -1, grad_col = -1;
};
DerivativeCheckResult check_derivatives(const Nlp& nlp, const Eigen::VectorXd& x,
                                        double h = 1e-6);

}  // namespace jumpnav
