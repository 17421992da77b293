#pragma once

// Primal-dual interior-point solver for the block NLPs in nlp.hpp.
//
// Internally the problem is lifted to the canonical form
//
//   min f(x)  s.t.  c(x) = 0,  l <= x <= u
//
// by appending one slack variable per inequality row (rows where the two
// bounds differ). Bounds are handled with a log barrier, the barrier
// parameter follows the monotone Fiacco-McCormick schedule, search
// directions come from the condensed symmetric KKT system factorized with a
// sparse LDLT plus inertia correction, and steps are accepted through a
// merit-function backtracking line search with an optional second-order
// correction.

#include <jumpnav/nlp.hpp>

#include <Eigen/Core>
#include <string>

namespace jumpnav {

struct IpOptions {
  double tol = 1e-8;             // overall scaled KKT tolerance
  double constraint_tol = 1e-8;  // unscaled infeasibility tolerance
  double mu_init = 0.1;
  int max_iter = 400;
  double time_limit_s = 0.0;  // 0 disables the wall-clock limit
  bool scale_problem = true;  // gradient-based cost and row scaling
  double bound_push = 1e-2;   // relative push of the start point off its bounds
  double bound_relax = 1e-9;  // tiny absolute relaxation of variable bounds
  int verbosity = 0;          // 0 silent, 1 outer progress, 2 per-iteration
  int max_soc = 2;            // second-order correction attempts per iteration
  double kappa_sigma = 1e10;  // multiplier safeguard box
};

enum class IpStatus {
  Optimal,
  AlmostOptimal,  // acceptable tolerance (1e2 x tol) reached, progress stalled
  MaxIterations,
  TimeLimit,
  Infeasible,  // converged to a stationary point of infeasibility
  Diverged,
  LinearSolveFailure,
};

const char* to_string(IpStatus s);

struct IpResult {
  IpStatus status = IpStatus::Diverged;
  Eigen::VectorXd x;   // primal point, original variables only
  Eigen::VectorXd y;   // constraint multipliers per row (sign: grad f + J^T y = z)
  Eigen::VectorXd zl;  // bound multipliers, lower
  Eigen::VectorXd zu;  // bound multipliers, upper
  double f = 0.0;
  double kkt_error = 0.0;
  double constraint_violation = 0.0;
  int iterations = 0;
  double seconds = 0.0;
  std::string message;
  std::string worst_row_label;

  bool ok() const { return status == IpStatus::Optimal || status == IpStatus::AlmostOptimal; }
};

IpResult ip_solve(const Nlp& nlp, const IpOptions& options = {});
IpResult ip_solve(const Nlp& nlp, const Eigen::VectorXd& x0, const IpOptions& options = {});

}  // namespace jumpnav
