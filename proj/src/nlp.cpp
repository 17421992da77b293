#include <jumpnav/nlp.hpp>

#include <algorithm>
#include <cmath>

namespace jumpnav {

namespace {

void gather(const std::vector<int>& vars, const Eigen::VectorXd& x, double* xl) {
  for (size_t i = 0; i < vars.size(); ++i) xl[i] = x[vars[i]];
}

}  // namespace

std::string Nlp::row_label(int row) const {
  for (const auto& e : constraints_) {
    if (row >= e.row_offset && row < e.row_offset + e.nrows)
      return e.label + "[" + std::to_string(row - e.row_offset) + "]";
  }
  return "row" + std::to_string(row);
}

double Nlp::eval_cost(const Eigen::VectorXd& x) const {
  double f = 0.0;
  double xl[ad::kMaxLocal];
  for (const auto& e : costs_) {
    gather(e.vars, x, xl);
    double r;
    e.block->value(xl, &r);
    f += r;
  }
  return f;
}

Eigen::VectorXd Nlp::eval_cost_gradient(const Eigen::VectorXd& x) const {
  Eigen::VectorXd g = Eigen::VectorXd::Zero(num_vars());
  double xl[ad::kMaxLocal];
  double J[ad::kMaxLocal];
  for (const auto& e : costs_) {
    gather(e.vars, x, xl);
    double r;
    e.block->jacobian(xl, &r, J);
    for (size_t i = 0; i < e.vars.size(); ++i) g[e.vars[i]] += J[i];
  }
  return g;
}

Eigen::VectorXd Nlp::eval_rows(const Eigen::VectorXd& x) const {
  Eigen::VectorXd c(nrows_total_);
  double xl[ad::kMaxLocal];
  for (const auto& e : constraints_) {
    gather(e.vars, x, xl);
    e.block->value(xl, c.data() + e.row_offset);
  }
  return c;
}

Eigen::SparseMatrix<double> Nlp::eval_jacobian(const Eigen::VectorXd& x) const {
  std::vector<Eigen::Triplet<double>> trip;
  double xl[ad::kMaxLocal];
  std::vector<double> J;
  std::vector<double> r;
  for (const auto& e : constraints_) {
    gather(e.vars, x, xl);
    const int nloc = static_cast<int>(e.vars.size());
    J.resize(static_cast<size_t>(e.nrows) * nloc);
    r.resize(e.nrows);
    e.block->jacobian(xl, r.data(), J.data());
    for (int k = 0; k < e.nrows; ++k)
      for (int i = 0; i < nloc; ++i) {
        const double v = J[static_cast<size_t>(k) * nloc + i];
        if (v != 0.0) trip.emplace_back(e.row_offset + k, e.vars[i], v);
      }
  }
  Eigen::SparseMatrix<double> A(nrows_total_, num_vars());
  A.setFromTriplets(trip.begin(), trip.end());
  return A;
}

double Nlp::max_violation(const Eigen::VectorXd& x) const {
  double v = 0.0;
  const Eigen::VectorXd c = eval_rows(x);
  for (int r = 0; r < nrows_total_; ++r) {
    v = std::max(v, row_lo_[r] - c[r]);
    v = std::max(v, c[r] - row_hi_[r]);
  }
  for (int i = 0; i < num_vars(); ++i) {
    v = std::max(v, xlo_[i] - x[i]);
    v = std::max(v, x[i] - xhi_[i]);
  }
  return v;
}

int Nlp::worst_row(const Eigen::VectorXd& x) const {
  const Eigen::VectorXd c = eval_rows(x);
  double v = -1.0;
  int worst = -1;
  for (int r = 0; r < nrows_total_; ++r) {
    const double viol = std::max(row_lo_[r] - c[r], c[r] - row_hi_[r]);
    if (viol > v) {
      v = viol;
      worst = r;
    }
  }
  return worst;
}

Eigen::VectorXd fd_cost_gradient(const Nlp& nlp, const Eigen::VectorXd& x, double h) {
  Eigen::VectorXd g(nlp.num_vars());
  Eigen::VectorXd xp = x;
  for (int i = 0; i < nlp.num_vars(); ++i) {
    const double xi = x[i];
    xp[i] = xi + h;
    const double fp = nlp.eval_cost(xp);
    xp[i] = xi - h;
    const double fm = nlp.eval_cost(xp);
    xp[i] = xi;
    g[i] = (fp - fm) / (2.0 * h);
  }
  return g;
}

Eigen::MatrixXd fd_jacobian(const Nlp& nlp, const Eigen::VectorXd& x, double h) {
  Eigen::MatrixXd J(nlp.num_rows(), nlp.num_vars());
  Eigen::VectorXd xp = x;
  for (int i = 0; i < nlp.num_vars(); ++i) {
    const double xi = x[i];
    xp[i] = xi + h;
    const Eigen::VectorXd cp = nlp.eval_rows(xp);
    xp[i] = xi - h;
    const Eigen::VectorXd cm = nlp.eval_rows(xp);
    xp[i] = xi;
    J.col(i) = (cp - cm) / (2.0 * h);
  }
  return J;
}

DerivativeCheckResult check_derivatives(const Nlp& nlp, const Eigen::VectorXd& x, double h) {
  DerivativeCheckResult res;
  const Eigen::MatrixXd Jfd = fd_jacobian(nlp, x, h);
  const Eigen::MatrixXd Jan = Eigen::MatrixXd(nlp.eval_jacobian(x));
  for (int r = 0; r < Jfd.rows(); ++r)
    for (int c = 0; c < Jfd.cols(); ++c) {
      const double err =
          std::abs(Jan(r, c) - Jfd(r, c)) / std::max(1.0, std::abs(Jfd(r, c)));
      if (err > res.max_jac_err) {
        res.max_jac_err = err;
        res.jac_row = r;
        res.jac_col = c;
      }
    }
  const Eigen::VectorXd gfd = fd_cost_gradient(nlp, x, h);
  const Eigen::VectorXd gan = nlp.eval_cost_gradient(x);
  for (int c = 0; c < gfd.size(); ++c) {
    const double err = std::abs(gan[c] - gfd[c]) / std::max(1.0, std::abs(gfd[c]));
    if (err > res.max_grad_err) {
      res.max_grad_err = err;
      res.grad_col = c;
    }
  }
  return res;
}

}  // namespace jumpnav
