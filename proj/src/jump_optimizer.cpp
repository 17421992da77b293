#include <jumpnav/jump_optimizer.hpp>

#include <jumpnav/errors.hpp>

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <memory>
#include <random>
#include <utility>

namespace jumpnav {

namespace {

constexpr double kPi = 3.14159265358979323846;

template <class M>
void check_psd(const M& m, const char* what) {
  if (!m.isApprox(m.transpose(), 1e-12))
    throw InconsistentProblem(std::string(what) + " weight matrix is not symmetric");
  Eigen::SelfAdjointEigenSolver<M> es(m, Eigen::EigenvaluesOnly);
  if (es.eigenvalues().minCoeff() < -1e-10)
    throw InconsistentProblem(std::string(what) + " weight matrix is not positive semidefinite");
}

std::vector<int> range(int first, int count) {
  std::vector<int> v(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) v[static_cast<std::size_t>(i)] = first + i;
  return v;
}

void append_range(std::vector<int>& v, int first, int count) {
  for (int i = 0; i < count; ++i) v.push_back(first + i);
}

// Generic small quadratic x^T M x over the block's local variables.
template <int N>
auto quad_form(const Eigen::Matrix<double, N, N>& m) {
  return [m](const auto* x, auto* r) {
    using S = std::decay_t<decltype(x[0])>;
    S acc(0.0);
    for (int i = 0; i < N; ++i)
      for (int j = 0; j < N; ++j) acc += m(i, j) * x[i] * x[j];
    r[0] = acc;
  };
}

std::array<Vec2, 6> keypoints_of(const PlanarModel& model, const Vec7& q) {
  return model.keypoints(q);
}

// Rotated-extent box about the keypoint mean, slightly padded, with the exact
// bilinear corner weights of every keypoint. Used for warm starts and for the
// informational clearance of unconstrained nodes.
struct ExtentBox {
  Vec2 P;
  double w, h;
  Eigen::Matrix<double, 6, 4> gamma;
};

ExtentBox extent_box(const PlanarModel& model, const Vec7& q, double pad, double w_min) {
  const auto kps = keypoints_of(model, q);
  ExtentBox out;
  out.P = Vec2::Zero();
  for (const auto& p : kps) out.P += p / 6.0;
  const double c = std::cos(q[2]), s = std::sin(q[2]);
  double ex = 0.0, ez = 0.0;
  std::array<Vec2, 6> local;
  for (int i = 0; i < 6; ++i) {
    const Vec2 d = kps[static_cast<std::size_t>(i)] - out.P;
    local[static_cast<std::size_t>(i)] = Vec2(c * d.x() + s * d.y(), -s * d.x() + c * d.y());
    ex = std::max(ex, std::abs(local[static_cast<std::size_t>(i)].x()));
    ez = std::max(ez, std::abs(local[static_cast<std::size_t>(i)].y()));
  }
  out.w = std::max(2.0 * ex * pad, w_min);
  out.h = std::max(2.0 * ez * pad, w_min);
  for (int i = 0; i < 6; ++i) {
    const double sx = std::clamp(local[static_cast<std::size_t>(i)].x() / out.w + 0.5, 0.0, 1.0);
    const double sz = std::clamp(local[static_cast<std::size_t>(i)].y() / out.h + 0.5, 0.0, 1.0);
    out.gamma(i, 0) = sx * sz;              // (+,+)
    out.gamma(i, 1) = (1.0 - sx) * sz;      // (-,+)
    out.gamma(i, 2) = (1.0 - sx) * (1.0 - sz);
    out.gamma(i, 3) = sx * (1.0 - sz);
  }
  return out;
}

double region_top(const ConvexRegion& r) {
  double top = -kInf;
  for (const auto& v : r.verts) top = std::max(top, v.y());
  return top;
}

// Closed-form dual start: put almost all weight on the region face that
// separates best from the box, then balance the frame rows exactly. Small
// floors keep every multiplier interior to its bound.
void warm_duals(const ConvexRegion& reg, const Vec2& P, double w, double h, double theta,
                Vec4& lam, Vec4& mu) {
  const double floor = 1e-3;
  lam.setConstant(floor);
  const double c = std::cos(theta), s = std::sin(theta);
  int best = 0;
  double best_m = -kInf;
  const int nf = std::min<int>(4, static_cast<int>(reg.A.rows()));
  for (int i = 0; i < nf; ++i) {
    const Vec2 a(reg.A(i, 0), reg.A(i, 1));
    const Vec2 v(c * a.x() + s * a.y(), -s * a.x() + c * a.y());
    const double m =
        a.dot(P) - reg.b[i] - std::abs(v.x()) * w / 2.0 - std::abs(v.y()) * h / 2.0;
    if (m > best_m) {
      best_m = m;
      best = i;
    }
  }
  lam[best] = 0.9;
  Vec2 av = Vec2::Zero();
  for (int i = 0; i < nf; ++i) av += lam[i] * Vec2(reg.A(i, 0), reg.A(i, 1));
  const Vec2 v(c * av.x() + s * av.y(), -s * av.x() + c * av.y());
  mu[0] = std::max(-v.x(), 0.0) + floor;
  mu[1] = std::max(v.x(), 0.0) + floor;
  mu[2] = std::max(-v.y(), 0.0) + floor;
  mu[3] = std::max(v.y(), 0.0) + floor;
}

std::vector<Vec2> box_polygon(const BoundingBox& box) {
  const auto v = box.vertices();
  return std::vector<Vec2>(v.begin(), v.end());
}

}  // namespace

void PhaseGrid::validate() const {
  for (int i = 0; i < 4; ++i) {
    if (intervals[i] < 2)
      throw InconsistentProblem("phase " + std::to_string(i + 1) +
                                " needs at least 2 intervals");
    if (!(duration_lo[i] > 0.0) || !(duration_hi[i] >= duration_lo[i]))
      throw InconsistentProblem("phase " + std::to_string(i + 1) + " duration bounds invalid");
  }
}

CostWeights::CostWeights() {
  Vec7 d;
  d << 0.0, 100.0, 50.0, 20.0, 20.0, 20.0, 20.0;
  terminal = d.asDiagonal();
}

void CostWeights::validate() const {
  check_psd(terminal, "terminal");
  check_psd(velocity, "velocity");
  check_psd(acceleration, "acceleration");
  check_psd(force, "force");
  check_psd(torque, "torque");
  if (!(stance_time > 0.0) || !(rear_time > 0.0) || !(contact_relax > 0.0) || !(box_size > 0.0))
    throw InconsistentProblem("scalar cost weights must be positive");
}

void JumpProblem::validate() const {
  params.validate();
  grid.validate();
  weights.validate();
  if (!(d_min >= 0.0)) throw InconsistentProblem("d_min must be nonnegative");
  if (!(landing_mu_scale > 0.0 && landing_mu_scale <= 1.0))
    throw InconsistentProblem("landing_mu_scale must be in (0, 1]");
  if (avoid_before < 0 || avoid_after < 0 || avoid_before > grid.intervals[1] ||
      avoid_after > grid.intervals[3])
    throw InconsistentProblem("avoidance node counts exceed the phase grids");

  const Vec7 q = x0.head<7>();
  const Vec7 qd = x0.tail<7>();
  auto in = [](double v, double lo, double hi) { return v >= lo && v <= hi; };
  for (int leg = 0; leg < 2; ++leg) {
    if (!in(q[3 + 2 * leg], params.hip_angle_min, params.hip_angle_max) ||
        !in(q[4 + 2 * leg], params.knee_angle_min, params.knee_angle_max))
      throw InconsistentProblem("x0 violates joint limits");
  }
  if (qd.lpNorm<Eigen::Infinity>() > 1e-9)
    throw InconsistentProblem("x0 must be at rest");

  PlanarModel model(params);
  for (int leg = 0; leg < 2; ++leg) {
    const Vec2 f = model.foot_position(q, static_cast<Leg>(leg));
    if (std::abs(f.y()) > 1e-6)
      throw InconsistentProblem("x0 feet are not on the ground");
  }
  double residual = 0.0;
  standing_equilibrium(model, q, nullptr, nullptr, &residual);
  if (residual > 1e-5)
    throw InconsistentProblem("x0 is not a static equilibrium, residual " +
                              std::to_string(residual));
}

Vec7 standing_pose(const ModelParams& params, double base_height, double base_x) {
  const double lmax = params.leg_length();
  const double rmin = std::cos(params.knee_angle_max / 2.0);
  const double rmax = std::cos(params.knee_angle_min / 2.0);
  const double ratio = std::clamp(base_height / lmax, rmin + 1e-9, rmax - 1e-9);
  const double knee = 2.0 * std::acos(ratio);
  Vec7 q;
  q << base_x, lmax * ratio, 0.0, -knee / 2.0, knee, -knee / 2.0, knee;
  return q;
}

void standing_equilibrium(const PlanarModel& model, const Vec7& q, Vec4* u, Vec4* forces,
                          double* residual) {
  const auto terms = model.dynamics_terms(q, Vec7::Zero());
  const Eigen::MatrixXd J = model.contact_jacobian(q, JumpPhase::AllFeetContact);
  Eigen::MatrixXd A(7, 8);
  A.leftCols<4>() = terms.B;
  A.rightCols<4>() = J.transpose();
  const Eigen::VectorXd w = A.completeOrthogonalDecomposition().solve(terms.G);
  if (u) *u = w.head<4>();
  if (forces) *forces = w.tail<4>();
  if (residual) *residual = (A * w - terms.G).lpNorm<Eigen::Infinity>();
}

Vec2 leg_ik(const ModelParams& params, const Vec7& base_pose, Leg leg, const Vec2& foot_target) {
  const double th = base_pose[2];
  const double side = leg == Leg::Front ? 1.0 : -1.0;
  const Vec2 hip(base_pose[0] + side * params.body_half_length * std::cos(th),
                 base_pose[1] + side * params.body_half_length * std::sin(th));
  Vec2 d = foot_target - hip;
  const double l0 = params.link_length[0], l1 = params.link_length[1];
  double r = d.norm();
  const double rlo = std::abs(l0 - l1) + 1e-6, rhi = l0 + l1 - 1e-6;
  if (r < 1e-12) {
    d = Vec2(0.0, -rlo);
    r = rlo;
  } else {
    const double rc = std::clamp(r, rlo, rhi);
    d *= rc / r;
    r = rc;
  }
  const double phi = std::atan2(d.x(), -d.y());
  const double ca = std::clamp((l0 * l0 + r * r - l1 * l1) / (2.0 * l0 * r), -1.0, 1.0);
  const double cg = std::clamp((l0 * l0 + l1 * l1 - r * r) / (2.0 * l0 * l1), -1.0, 1.0);
  const double hip_angle = phi - std::acos(ca) - th;
  const double knee_angle = kPi - std::acos(cg);
  return Vec2(std::clamp(hip_angle, params.hip_angle_min, params.hip_angle_max),
              std::clamp(knee_angle, params.knee_angle_min, params.knee_angle_max));
}

std::string ballistic_bound_reason(const JumpProblem& problem) {
  const auto& p = problem.params;
  PlanarModel model(p);
  const Vec7 q0 = problem.x0.head<7>();
  const ExtentBox box = extent_box(model, q0, 1.0, 0.01);
  const double sill_top = region_top(problem.obstacle.lower);
  const double apex_needed = sill_top + problem.d_min + 0.55 * box.h;
  const double z_ext = p.leg_length();
  const double rise = apex_needed - z_ext;
  if (rise <= 0.0) return {};

  const double mass = p.total_mass();
  const double stroke =
      std::max(0.05, z_ext - p.leg_length() * std::cos(p.knee_angle_max / 2.0));
  // Work budget over one extension stroke: torque times sweep per lumped leg
  // (knee plus half again for the hip), capped by the contact force limit.
  const double sweep_work = 2.0 * p.torque_limit * 1.5 * (p.knee_angle_max - p.knee_angle_min);
  const double force_work = 2.0 * p.contact_force_z_max * stroke;
  const double work = std::min(sweep_work, force_work);
  const double kinetic = work - mass * p.gravity * stroke;
  const double rise_max = kinetic <= 0.0 ? 0.0 : kinetic / (mass * p.gravity);
  if (rise > rise_max) {
    return "obstacle top at " + std::to_string(sill_top) + " m needs a " +
           std::to_string(rise) + " m ballistic rise, launch work allows at most " +
           std::to_string(rise_max) + " m";
  }
  return {};
}

namespace {

int forces_in_phase(JumpPhase p) {
  switch (p) {
    case JumpPhase::AllFeetContact:
    case JumpPhase::Landing: return 4;
    case JumpPhase::RearFeetContact: return 2;
    case JumpPhase::Flight: return 0;
  }
  return 0;
}

bool slot_constrained(const JumpProblem& problem, int phase, int k) {
  if (phase == 2) return true;
  if (phase == 1) return k > problem.grid.intervals[1] - problem.avoid_before;
  if (phase == 3) return k < problem.avoid_after;
  return false;
}

}  // namespace

AssembledJump assemble(const JumpProblem& problem) {
  problem.validate();
  auto model = std::make_shared<const PlanarModel>(problem.params);
  const auto& p = problem.params;
  const auto& grid = problem.grid;
  AssembledJump out;
  Nlp& nlp = out.nlp;
  JumpLayout& L = out.layout;

  // ---- variables -----------------------------------------------------------
  for (int i = 0; i < 4; ++i) {
    L.duration[i] =
        nlp.add_variable("T" + std::to_string(i + 1), grid.duration_lo[i], grid.duration_hi[i],
                         0.5 * (grid.duration_lo[i] + grid.duration_hi[i]));
  }
  L.delta = nlp.add_variable("delta", 0.0, problem.delta_max, 0.0);

  for (int phase = 0; phase < 4; ++phase) {
    L.phase_begin[phase] = static_cast<int>(L.slots.size());
    const int n = grid.intervals[phase];
    for (int k = 0; k <= n; ++k) {
      SlotLayout s;
      s.phase = static_cast<JumpPhase>(phase);
      s.k = k;
      const std::string tag = "p" + std::to_string(phase + 1) + "n" + std::to_string(k);
      s.q = nlp.add_variables(7, tag + ".q");
      s.qd = nlp.add_variables(7, tag + ".qd");
      s.a = nlp.add_variables(7, tag + ".a");
      s.u = nlp.add_variables(4, tag + ".u");
      nlp.set_bounds(s.q + 1, 0.02, 2.5);
      nlp.set_bounds(s.q + 2, -1.2, 1.2);
      for (int leg = 0; leg < 2; ++leg) {
        nlp.set_bounds(s.q + 3 + 2 * leg, p.hip_angle_min, p.hip_angle_max);
        nlp.set_bounds(s.q + 4 + 2 * leg, p.knee_angle_min, p.knee_angle_max);
      }
      for (int j = 0; j < 4; ++j) {
        nlp.set_bounds(s.qd + 3 + j, -p.joint_velocity_limit, p.joint_velocity_limit);
        nlp.set_bounds(s.u + j, -p.torque_limit, p.torque_limit);
      }
      s.n_forces = forces_in_phase(s.phase);
      if (s.n_forces > 0) {
        s.T = nlp.add_variables(s.n_forces, tag + ".f");
        for (int f = 0; f < s.n_forces / 2; ++f)
          nlp.set_bounds(s.T + 2 * f + 1, p.contact_force_z_min, p.contact_force_z_max);
      }
      s.constrained = slot_constrained(problem, phase, k);
      if (s.constrained) {
        s.w = nlp.add_variable(tag + ".w", 0.01, problem.box_extent_max, 0.5);
        s.h = nlp.add_variable(tag + ".h", 0.01, problem.box_extent_max, 0.5);
        s.gamma = nlp.add_variables(24, tag + ".g");
        for (int j = 0; j < 24; ++j) {
          nlp.set_bounds(s.gamma + j, 0.0, 1.0);
          nlp.set_start(s.gamma + j, 0.25);
        }
        for (int half = 0; half < 2; ++half) {
          const ConvexRegion& region =
              half == 0 ? problem.obstacle.lower : problem.obstacle.upper;
          if (region.empty()) continue;
          const std::string hs = half == 0 ? ".lo" : ".up";
          s.lambda[half] = nlp.add_variables(4, tag + ".lam" + hs);
          s.mu[half] = nlp.add_variables(4, tag + ".mu" + hs);
          for (int j = 0; j < 4; ++j) {
            nlp.set_bounds(s.lambda[half] + j, 0.0, problem.dual_max);
            nlp.set_bounds(s.mu[half] + j, 0.0, problem.dual_max);
          }
        }
      }
      L.slots.push_back(s);
    }
  }
  L.n_vars = nlp.num_vars();

  // Initial condition: pin the first slot to x0. Terminal: land past the cut.
  {
    const SlotLayout& s0 = L.slots.front();
    for (int j = 0; j < 7; ++j) {
      nlp.set_bounds(s0.q + j, problem.x0[j], problem.x0[j]);
      nlp.set_bounds(s0.qd + j, problem.x0[7 + j], problem.x0[7 + j]);
    }
    const SlotLayout& sf = L.slots.back();
    nlp.set_bounds(sf.q + 0, problem.obstacle.x_obs, kInf);
  }

  // With a real sill the keypoint box cannot straddle it: the final stance has
  // feet on the ground, so the box overlaps the sill in height and must sit
  // entirely beyond the far face. That pushes every keypoint past the face,
  // which bounds the base through the rear hip and puts both feet beyond the
  // face outright. Stating this up front removes a short-jump basin the margin
  // rows alone reject only after the fact.
  if (!problem.obstacle.lower.empty()) {
    double x_face = -kInf;
    const ConvexRegion& low = problem.obstacle.lower;
    for (int i = 0; i < low.A.rows(); ++i)
      if (low.A(i, 0) > 0.9 && std::abs(low.A(i, 1)) < 1e-12)
        x_face = std::max(x_face, low.b[i] / low.A(i, 0));
    if (x_face > -kInf) {
      const SlotLayout& sf = L.slots.back();
      nlp.set_bounds(sf.q + 0,
                     std::max(problem.obstacle.x_obs,
                              x_face + problem.d_min + p.body_half_length),
                     kInf);
      std::vector<int> vars;
      append_range(vars, sf.q, 7);
      nlp.add_lower_bounded(
          vars, std::vector<double>(2, x_face + problem.d_min),
          [model](const auto* x, auto* r) {
            using S = std::decay_t<decltype(x[0])>;
            S pt[2];
            model->foot_point_t(x, 0, pt);
            r[0] = pt[0];
            model->foot_point_t(x, 1, pt);
            r[1] = pt[0];
          },
          "land_past.final");
    }
  }

  // ---- per-phase blocks ------------------------------------------------------
  for (int phase = 0; phase < 4; ++phase) {
    const int n = grid.intervals[phase];
    const double inv2n = 0.5 / static_cast<double>(n);
    const int Ti = L.duration[phase];
    const std::string ptag = "p" + std::to_string(phase + 1);

    for (int k = 0; k < n; ++k) {
      const SlotLayout& a = L.slot(phase, k);
      const SlotLayout& b = L.slot(phase, k + 1);
      std::vector<int> vars{Ti};
      append_range(vars, a.q, 7);
      append_range(vars, b.q, 7);
      append_range(vars, a.qd, 7);
      append_range(vars, b.qd, 7);
      nlp.add_equality(
          vars, 7,
          [inv2n](const auto* x, auto* r) {
            for (int j = 0; j < 7; ++j)
              r[j] = x[8 + j] - x[1 + j] - x[0] * inv2n * (x[15 + j] + x[22 + j]);
          },
          "defect.q." + ptag + ".k" + std::to_string(k));
      vars = {Ti};
      append_range(vars, a.qd, 7);
      append_range(vars, b.qd, 7);
      append_range(vars, a.a, 7);
      append_range(vars, b.a, 7);
      nlp.add_equality(
          vars, 7,
          [inv2n](const auto* x, auto* r) {
            for (int j = 0; j < 7; ++j)
              r[j] = x[8 + j] - x[1 + j] - x[0] * inv2n * (x[15 + j] + x[22 + j]);
          },
          "defect.qd." + ptag + ".k" + std::to_string(k));
    }

    const double mu_eff =
        phase == 3 ? p.friction_mu * problem.landing_mu_scale : p.friction_mu;
    for (int k = 0; k <= n; ++k) {
      const SlotLayout& s = L.slot(phase, k);
      const std::string ntag = ptag + ".k" + std::to_string(k);

      std::vector<int> vars;
      append_range(vars, s.q, 7);
      append_range(vars, s.qd, 7);
      append_range(vars, s.a, 7);
      append_range(vars, s.u, 4);
      if (s.T >= 0) append_range(vars, s.T, s.n_forces);
      switch (s.phase) {
        case JumpPhase::AllFeetContact:
        case JumpPhase::Landing:
          nlp.add_equality(
              vars, 7,
              [model](const auto* x, auto* r) {
                model->dynamics_residual(x, x + 7, x + 14, x + 21, x + 25, x + 27, r);
              },
              "dyn." + ntag);
          break;
        case JumpPhase::RearFeetContact:
          nlp.add_equality(
              vars, 7,
              [model](const auto* x, auto* r) {
                model->dynamics_residual(x, x + 7, x + 14, x + 21, nullptr, x + 25, r);
              },
              "dyn." + ntag);
          break;
        case JumpPhase::Flight:
          nlp.add_equality(
              vars, 7,
              [model](const auto* x, auto* r) {
                model->dynamics_residual(x, x + 7, x + 14, x + 21, nullptr, nullptr, r);
              },
              "dyn." + ntag);
          break;
      }

      for (int leg = 0; leg < 2; ++leg) {
        if (!PlanarModel::leg_in_contact(s.phase, static_cast<Leg>(leg))) continue;
        std::vector<int> kin;
        append_range(kin, s.q, 7);
        append_range(kin, s.qd, 7);
        append_range(kin, s.a, 7);
        nlp.add_equality(
            kin, 2,
            [model, leg](const auto* x, auto* r) {
              model->foot_accel_t(x, x + 7, x + 14, leg, r);
            },
            "contact." + ntag + (leg == 0 ? ".front" : ".back"));

        const int fbase = s.phase == JumpPhase::RearFeetContact ? s.T : s.T + 2 * leg;
        nlp.add_lower_bounded(
            {fbase, fbase + 1}, {0.0, 0.0},
            [mu_eff](const auto* x, auto* r) {
              r[0] = mu_eff * x[1] - x[0];
              r[1] = mu_eff * x[1] + x[0];
            },
            "friction." + ntag + (leg == 0 ? ".front" : ".back"), true);
      }

      if (s.phase == JumpPhase::RearFeetContact) {
        std::vector<int> vz;
        append_range(vz, s.q, 7);
        vz.push_back(L.delta);
        nlp.add_constraint(
            vz, {-kInf, 0.0}, {0.0, kInf},
            [model](const auto* x, auto* r) {
              using S = std::decay_t<decltype(x[0])>;
              S foot[2];
              model->foot_point_t(x, 1, foot);
              r[0] = foot[1];
              r[1] = foot[1] + x[7];
            },
            "rear_foot_z." + ntag);
      }
    }
  }

  // Touchdown: both feet on the ground and momentarily at rest where the
  // flight arc hands over to the landing phase.
  {
    const SlotLayout& s = L.slot(3, 0);
    std::vector<int> vars;
    append_range(vars, s.q, 7);
    append_range(vars, s.qd, 7);
    nlp.add_equality(
        vars, 6,
        [model](const auto* x, auto* r) {
          using S = std::decay_t<decltype(x[0])>;
          S pt[2], vel[2];
          for (int leg = 0; leg < 2; ++leg) {
            model->foot_point_t(x, leg, pt);
            model->foot_velocity_t(x, x + 7, leg, vel);
            r[leg] = pt[1];
            r[2 + 2 * leg] = vel[0];
            r[3 + 2 * leg] = vel[1];
          }
        },
        "touchdown");
  }

  // Phase-boundary continuity of (q, qd).
  for (int phase = 0; phase < 3; ++phase) {
    const SlotLayout& a = L.slot(phase, grid.intervals[phase]);
    const SlotLayout& b = L.slot(phase + 1, 0);
    std::vector<int> vars;
    append_range(vars, a.q, 7);
    append_range(vars, a.qd, 7);
    append_range(vars, b.q, 7);
    append_range(vars, b.qd, 7);
    nlp.add_equality(
        vars, 14,
        [](const auto* x, auto* r) {
          for (int j = 0; j < 14; ++j) r[j] = x[14 + j] - x[j];
        },
        "continuity.p" + std::to_string(phase + 1), true);
  }

  // ---- clearance rows --------------------------------------------------------
  const double margin_lo = problem.d_min + problem.eps_strict;
  const double norm_hi = (1.0 - problem.eps_strict) * (1.0 - problem.eps_strict);
  for (std::size_t si = 0; si < L.slots.size(); ++si) {
    const SlotLayout& s = L.slots[si];
    if (!s.constrained) continue;
    const std::string ntag = "s" + std::to_string(si);

    for (int i = 0; i < 6; ++i) {
      std::vector<int> vars;
      append_range(vars, s.q, 7);
      vars.push_back(s.w);
      vars.push_back(s.h);
      append_range(vars, s.gamma + 4 * i, 4);
      nlp.add_equality(
          vars, 2,
          [model, i](const auto* x, auto* r) {
            using S = std::decay_t<decltype(x[0])>;
            S kp[6][2];
            for (int m = 0; m < 6; ++m) model->keypoint_t(x, m, kp[m]);
            S px = (kp[0][0] + kp[1][0] + kp[2][0] + kp[3][0] + kp[4][0] + kp[5][0]) / 6.0;
            S pz = (kp[0][1] + kp[1][1] + kp[2][1] + kp[3][1] + kp[4][1] + kp[5][1]) / 6.0;
            const S c = cos(x[2]), sn = sin(x[2]);
            r[0] = kp[i][0];
            r[1] = kp[i][1];
            for (int j = 0; j < 4; ++j) {
              const Vec2 sign = BoundingBox::corner_sign(j);
              const S bx = x[7] * (0.5 * sign.x());
              const S bz = x[8] * (0.5 * sign.y());
              r[0] -= x[9 + j] * (px + c * bx - sn * bz);
              r[1] -= x[9 + j] * (pz + sn * bx + c * bz);
            }
          },
          "hull." + ntag + ".kp" + std::to_string(i));
    }

    nlp.add_equality(
        range(s.gamma, 24), 6,
        [](const auto* x, auto* r) {
          for (int i = 0; i < 6; ++i)
            r[i] = x[4 * i] + x[4 * i + 1] + x[4 * i + 2] + x[4 * i + 3] - 1.0;
        },
        "hull_sum." + ntag, true);

    for (int half = 0; half < 2; ++half) {
      if (s.lambda[half] < 0) continue;
      const ConvexRegion region =
          half == 0 ? problem.obstacle.lower : problem.obstacle.upper;
      const std::string htag = ntag + (half == 0 ? ".lo" : ".up");

      std::vector<int> mv;
      append_range(mv, s.q, 7);
      mv.push_back(s.w);
      mv.push_back(s.h);
      append_range(mv, s.lambda[half], 4);
      append_range(mv, s.mu[half], 4);
      nlp.add_lower_bounded(
          mv, {margin_lo},
          [model, region](const auto* x, auto* r) {
            using S = std::decay_t<decltype(x[0])>;
            S kp[6][2];
            for (int m = 0; m < 6; ++m) model->keypoint_t(x, m, kp[m]);
            S px = (kp[0][0] + kp[1][0] + kp[2][0] + kp[3][0] + kp[4][0] + kp[5][0]) / 6.0;
            S pz = (kp[0][1] + kp[1][1] + kp[2][1] + kp[3][1] + kp[4][1] + kp[5][1]) / 6.0;
            r[0] = dual_separation_value(region, px, pz, x[7], x[8], x + 9, x + 13);
          },
          "margin." + htag);

      std::vector<int> fv{s.q + 2};
      append_range(fv, s.lambda[half], 4);
      append_range(fv, s.mu[half], 4);
      nlp.add_equality(
          fv, 2,
          [region](const auto* x, auto* r) {
            dual_frame_rows(region, x[0], x + 1, x + 5, r);
          },
          "frame." + htag);

      nlp.add_constraint(
          range(s.lambda[half], 4), {-kInf}, {norm_hi},
          [region](const auto* x, auto* r) { r[0] = dual_norm_sq(region, x); },
          "norm." + htag);
    }
  }

  // ---- cost -----------------------------------------------------------------
  {
    const SlotLayout& sf = L.slots.back();
    const Mat7 w = problem.weights.terminal;
    const Vec7 q0 = problem.q0;
    nlp.add_cost(
        range(sf.q, 7),
        [w, q0](const auto* x, auto* r) {
          using S = std::decay_t<decltype(x[0])>;
          S acc(0.0);
          for (int i = 0; i < 7; ++i)
            for (int j = 0; j < 7; ++j) acc += w(i, j) * (x[i] - q0[i]) * (x[j] - q0[j]);
          r[0] = acc;
        },
        "cost.terminal");
  }
  for (std::size_t si = 0; si < L.slots.size(); ++si) {
    const SlotLayout& s = L.slots[si];
    const std::string ntag = "s" + std::to_string(si);
    nlp.add_cost(range(s.qd, 7), quad_form<7>(problem.weights.velocity), "cost.qd." + ntag);
    nlp.add_cost(range(s.a, 7), quad_form<7>(problem.weights.acceleration), "cost.a." + ntag);
    nlp.add_cost(range(s.u, 4), quad_form<4>(problem.weights.torque), "cost.u." + ntag);
    if (s.n_forces == 4) {
      nlp.add_cost(range(s.T, 4), quad_form<4>(problem.weights.force), "cost.f." + ntag);
    } else if (s.n_forces == 2) {
      const Eigen::Matrix2d sub = problem.weights.force.block<2, 2>(2, 2);
      nlp.add_cost(range(s.T, 2), quad_form<2>(sub), "cost.f." + ntag);
    }
    if (s.constrained) {
      const double pwh = problem.weights.box_size;
      nlp.add_cost(
          {s.w, s.h},
          [pwh](const auto* x, auto* r) { r[0] = pwh * (x[0] * x[0] + x[1] * x[1]); },
          "cost.wh." + ntag);
    }
  }
  {
    const double p1 = problem.weights.stance_time, p2 = problem.weights.rear_time;
    nlp.add_cost(
        {L.duration[0], L.duration[1]},
        [p1, p2](const auto* x, auto* r) { r[0] = p1 * x[0] + p2 * x[1]; }, "cost.time");
    const double pd = problem.weights.contact_relax * (grid.intervals[1] + 1);
    nlp.add_cost(
        {L.delta}, [pd](const auto* x, auto* r) { r[0] = pd * x[0]; }, "cost.delta");
  }

  // Warm start every variable from the heuristic guess.
  const JumpTrajectory guess = initial_guess(problem);
  const Eigen::VectorXd xg = pack(L, guess);
  for (int i = 0; i < L.n_vars; ++i) nlp.set_start(i, xg[i]);

  return out;
}

Eigen::VectorXd pack(const JumpLayout& layout, const JumpTrajectory& traj) {
  if (traj.nodes.size() != layout.slots.size())
    throw InconsistentProblem("trajectory has " + std::to_string(traj.nodes.size()) +
                              " nodes, layout expects " + std::to_string(layout.slots.size()));
  Eigen::VectorXd x = Eigen::VectorXd::Zero(layout.n_vars);
  for (int i = 0; i < 4; ++i) x[layout.duration[i]] = traj.phase_duration[i];
  x[layout.delta] = traj.delta;
  for (std::size_t si = 0; si < layout.slots.size(); ++si) {
    const SlotLayout& s = layout.slots[si];
    const TrajectoryNode& n = traj.nodes[si];
    for (int j = 0; j < 7; ++j) {
      x[s.q + j] = n.q[j];
      x[s.qd + j] = n.qd[j];
      x[s.a + j] = n.qdd[j];
    }
    for (int j = 0; j < 4; ++j) x[s.u + j] = n.u[j];
    if (s.n_forces == 4) {
      for (int j = 0; j < 4; ++j) x[s.T + j] = n.force[j];
    } else if (s.n_forces == 2) {
      x[s.T + 0] = n.force[2];
      x[s.T + 1] = n.force[3];
    }
    if (s.constrained) {
      x[s.w] = n.w;
      x[s.h] = n.h;
      for (int i = 0; i < 6; ++i)
        for (int j = 0; j < 4; ++j) x[s.gamma + 4 * i + j] = n.gamma(i, j);
      for (int j = 0; j < 4; ++j) {
        if (s.lambda[0] >= 0) {
          x[s.lambda[0] + j] = n.lambda_lower[j];
          x[s.mu[0] + j] = n.mu_lower[j];
        }
        if (s.lambda[1] >= 0) {
          x[s.lambda[1] + j] = n.lambda_upper[j];
          x[s.mu[1] + j] = n.mu_upper[j];
        }
      }
    }
  }
  return x;
}

JumpTrajectory unpack(const JumpLayout& layout, const Eigen::VectorXd& x) {
  JumpTrajectory traj;
  for (int i = 0; i < 4; ++i) traj.phase_duration[i] = x[layout.duration[i]];
  traj.delta = x[layout.delta];
  traj.phase_begin = layout.phase_begin;
  traj.nodes.resize(layout.slots.size());
  double phase_start = 0.0;
  int prev_phase = 0;
  for (std::size_t si = 0; si < layout.slots.size(); ++si) {
    const SlotLayout& s = layout.slots[si];
    const int phase = static_cast<int>(s.phase);
    if (phase != prev_phase) {
      phase_start += traj.phase_duration[prev_phase];
      prev_phase = phase;
    }
    TrajectoryNode& node = traj.nodes[si];
    node.phase = s.phase;
    const int intervals =
        (phase < 3 ? layout.phase_begin[phase + 1] : static_cast<int>(layout.slots.size())) -
        layout.phase_begin[phase] - 1;
    node.t = phase_start + traj.phase_duration[phase] * s.k / std::max(1, intervals);
    for (int j = 0; j < 7; ++j) {
      node.q[j] = x[s.q + j];
      node.qd[j] = x[s.qd + j];
      node.qdd[j] = x[s.a + j];
    }
    for (int j = 0; j < 4; ++j) node.u[j] = x[s.u + j];
    node.force.setZero();
    if (s.n_forces == 4) {
      for (int j = 0; j < 4; ++j) node.force[j] = x[s.T + j];
    } else if (s.n_forces == 2) {
      node.force[2] = x[s.T + 0];
      node.force[3] = x[s.T + 1];
    }
    node.constrained = s.constrained;
    if (s.constrained) {
      node.w = x[s.w];
      node.h = x[s.h];
      for (int i = 0; i < 6; ++i)
        for (int j = 0; j < 4; ++j) node.gamma(i, j) = x[s.gamma + 4 * i + j];
      for (int j = 0; j < 4; ++j) {
        if (s.lambda[0] >= 0) {
          node.lambda_lower[j] = x[s.lambda[0] + j];
          node.mu_lower[j] = x[s.mu[0] + j];
        }
        if (s.lambda[1] >= 0) {
          node.lambda_upper[j] = x[s.lambda[1] + j];
          node.mu_upper[j] = x[s.mu[1] + j];
        }
      }
    }
  }
  return traj;
}

double evaluate_cost(const JumpTrajectory& traj, const CostWeights& weights,
                     const PhaseGrid& grid, const Vec7& q0) {
  double j = 0.0;
  if (!traj.nodes.empty()) {
    const Vec7 e = traj.nodes.back().q - q0;
    j += e.dot(weights.terminal * e);
  }
  for (const auto& n : traj.nodes) {
    j += n.qd.dot(weights.velocity * n.qd);
    j += n.qdd.dot(weights.acceleration * n.qdd);
    j += n.force.dot(weights.force * n.force);
    j += n.u.dot(weights.torque * n.u);
    if (n.constrained) j += weights.box_size * (n.w * n.w + n.h * n.h);
  }
  j += weights.stance_time * traj.phase_duration[0];
  j += weights.rear_time * traj.phase_duration[1];
  j += weights.contact_relax * (grid.intervals[1] + 1) * traj.delta;
  return j;
}

JumpTrajectory initial_guess(const JumpProblem& problem, int attempt, std::uint64_t seed) {
  const auto& p = problem.params;
  const auto& grid = problem.grid;
  PlanarModel model(p);
  std::mt19937_64 rng(seed * 0x9e3779b97f4a7c15ull + static_cast<std::uint64_t>(attempt));
  std::uniform_real_distribution<double> uni(-1.0, 1.0);
  auto jitter = [&](double scale) { return attempt == 0 ? 0.0 : scale * uni(rng); };

  const Vec7 qstart = problem.x0.head<7>();
  const double z0 = qstart[1];
  const double g = p.gravity;
  const Vec2 foot_f0 = model.foot_position(qstart, Leg::Front);
  const Vec2 foot_b0 = model.foot_position(qstart, Leg::Back);
  const ExtentBox box0 = extent_box(model, qstart, 1.02, 0.05);

  const double sill_top = region_top(problem.obstacle.lower);
  const bool has_sill = !problem.obstacle.lower.empty();
  double x_face_hi = problem.obstacle.x_obs, x_face_lo = problem.obstacle.x_obs;
  for (int i = 0; i < problem.obstacle.lower.A.rows(); ++i) {
    if (std::abs(problem.obstacle.lower.A(i, 1)) > 1e-12) continue;
    if (problem.obstacle.lower.A(i, 0) > 0.9)
      x_face_hi = std::max(x_face_hi, problem.obstacle.lower.b[i]);
    if (problem.obstacle.lower.A(i, 0) < -0.9)
      x_face_lo = std::min(x_face_lo, -problem.obstacle.lower.b[i]);
  }
  // The hull box is symmetric about the keypoint mean, so it stays wider than
  // the stance itself; the landing spot and the arc must clear the sill with
  // that width, not the foot prints. Hold the tuck while the box is over the
  // sill, then reach the feet forward to prints the body can brake over.
  double apex = std::max(z0 + 0.10, sill_top + problem.d_min + 0.55 * box0.h + 0.04) +
                jitter(0.05);
  const double x_land = has_sill ? x_face_hi + problem.d_min + 0.37 + jitter(0.04)
                                 : problem.obstacle.x_obs + 0.30 + jitter(0.08);
  // Touch down with real knee bend: near extension the fold rate that keeps
  // a falling base over planted feet blows up.
  const double z_stand_max = p.leg_length() * std::cos(p.knee_angle_min / 2.0);
  const double z_land = has_sill ? 0.85 * z_stand_max : 0.95 * z0;
  const double th_launch = 0.35 + jitter(0.12);
  const double z_lift = std::min(z0 + 0.05, 0.98 * p.leg_length());
  const double x_lift = qstart[0] + 0.04;

  JumpTrajectory traj;
  traj.phase_duration[0] = std::clamp(0.30 * (1.0 + jitter(0.2)), grid.duration_lo[0],
                                      grid.duration_hi[0]);
  traj.phase_duration[1] = std::clamp(0.30 * (1.0 + jitter(0.2)), grid.duration_lo[1],
                                      grid.duration_hi[1]);
  traj.phase_duration[3] = std::clamp(0.3, grid.duration_lo[3], grid.duration_hi[3]);
  const double T4 = traj.phase_duration[3];
  const double mu_land = p.friction_mu * problem.landing_mu_scale;
  auto flight_time = [&](double a) {
    return std::sqrt(std::max(0.01, 2.0 * (a - z_lift) / g)) +
           std::sqrt(std::max(0.01, 2.0 * (a - z_land) / g));
  };
  if (has_sill) {
    // Raise the arc until friction in the fixed landing window can brake the
    // carry-in speed down to a stride the legs can span. Braking strength
    // scales with the vertical momentum being absorbed, so a steeper arc
    // also brakes harder.
    apex = std::max(apex, sill_top + problem.d_min + 0.46);
    for (int it = 0; it < 60; ++it) {
      const double vxa = (x_land - x_lift) / flight_time(apex);
      const double vza = std::sqrt(std::max(0.01, 2.0 * g * (apex - z_land)));
      const double cap = 0.45 / T4 + 0.5 * mu_land * (g * T4 + vza);
      if (vxa <= cap || apex > z_lift + 0.45) break;
      apex += 0.02;
    }
  }
  const double vz = std::sqrt(std::max(0.2, 2.0 * g * (apex - z_lift)));
  const double t_fall = std::sqrt(std::max(0.01, 2.0 * (apex - z_land) / g));
  traj.phase_duration[2] =
      std::clamp(vz / g + t_fall, grid.duration_lo[2], grid.duration_hi[2]);
  traj.delta = 1e-3;

  const double T3 = traj.phase_duration[2];
  const double vx = (x_land - x_lift) / T3;
  // Touchdown state from the arc, then a friction-limited brake while the
  // legs absorb the vertical momentum.
  const double pitch_td = 0.05;
  const double z_td = z_lift + vz * T3 - 0.5 * g * T3 * T3;
  const double vz_td = vz - g * T3;
  const double z_stop = std::max(0.55 * z0, z_td + 0.5 * vz_td * 0.35 * T4);
  const double t_stop_z = std::max(0.02, 2.0 * (z_stop - z_td) / std::min(vz_td, -0.05));
  // Brake hard while the legs absorb the drop (the impact normal force buys
  // friction), then at the gentler rate the standing weight supports.
  const double a_brake1 = 0.9 * mu_land * (g + std::abs(vz_td) / t_stop_z);
  const double a_brake2 = 0.8 * mu_land * g;
  const double v_mid = std::max(0.0, vx - a_brake1 * t_stop_z);
  const double v_end = std::max(0.0, v_mid - a_brake2 * (T4 - t_stop_z));
  const double travel = 0.5 * (vx + v_mid) * t_stop_z +
                        0.5 * (v_mid + v_end) *
                            std::min(T4 - t_stop_z,
                                     v_mid / std::max(a_brake2, 1e-6));

  // Fractions of the flight where the tuck must be complete and may release:
  // complete before the box reaches the sill, hold until the box is past it.
  double tuck_in = 0.45, tuck_out = 0.50;
  if (has_sill) {
    const double x_enter = x_face_lo - problem.d_min - 0.38;
    tuck_in = std::clamp((x_enter - x_lift) / (x_land - x_lift) - 0.04, 0.18, 0.45);
    tuck_out = 0.65;
  }

  // Base poses at the phase boundaries (x, z, pitch).
  const Eigen::Vector3d b_start(qstart[0], z0, qstart[2]);
  const Eigen::Vector3d b_crouch(qstart[0] - 0.02, 0.80 * z0 + jitter(0.02), 0.08);
  const Eigen::Vector3d b_lift(x_lift, z_lift, th_launch);

  auto stance_pose = [&](const Eigen::Vector3d& base, const Vec2& ff, const Vec2& fb) {
    Vec7 q;
    q << base[0], base[1], base[2], 0, 0, 0, 0;
    const Vec2 jf = leg_ik(p, q, Leg::Front, ff);
    const Vec2 jb = leg_ik(p, q, Leg::Back, fb);
    q[3] = jf[0];
    q[4] = jf[1];
    q[5] = jb[0];
    q[6] = jb[1];
    return q;
  };

  const double tuck_hip = -0.85 + jitter(0.1);
  const double tuck_knee = std::min(2.30 + jitter(0.15), p.knee_angle_max - 0.05);

  const Vec7 q_crouch = stance_pose(b_crouch, foot_f0, foot_b0);
  Vec7 q_lift = stance_pose(b_lift, foot_f0, foot_b0);
  // Front legs already folding at liftoff.
  q_lift[3] = 0.5 * (q_lift[3] + tuck_hip);
  q_lift[4] = 0.5 * (q_lift[4] + tuck_knee);
  // Landing prints ahead of the touchdown point, so the braking body crosses
  // them instead of outrunning them. Pull them back until both legs verifiably
  // reach at the touchdown pose, or the flight tail cannot finish the reach.
  double print_off = std::min(0.6 * travel, 0.35);
  for (int it = 0; it < 30; ++it) {
    const Vec2 pf(x_land + print_off + p.body_half_length, 0.0);
    const Vec2 pb(x_land + print_off - p.body_half_length, 0.0);
    const Vec7 qtd = stance_pose(Eigen::Vector3d(x_land, z_td, pitch_td), pf, pb);
    const double err =
        std::max((model.foot_position(qtd, Leg::Front) - pf).norm(),
                 (model.foot_position(qtd, Leg::Back) - pb).norm());
    if (err < 5e-3 || print_off <= 0.05) break;
    print_off = std::max(0.05, print_off - 0.02);
  }
  const double x_pc = x_land + print_off;
  const Vec2 foot_f1(x_pc + p.body_half_length, 0.0);
  const Vec2 foot_b1(x_pc - p.body_half_length, 0.0);
  Vec7 q_rel;
  q_rel << x_lift + vx * tuck_out * T3,
      z_lift + vz * tuck_out * T3 - 0.5 * g * tuck_out * T3 * tuck_out * T3,
      th_launch + tuck_out * (pitch_td - th_launch), tuck_hip, tuck_knee, tuck_hip,
      tuck_knee;
  const Vec2 foot_rel_f = model.foot_position(q_rel, Leg::Front);
  const Vec2 foot_rel_b = model.foot_position(q_rel, Leg::Back);

  Vec4 u_eq;
  double eq_res = 0.0;
  standing_equilibrium(model, qstart, &u_eq, nullptr, &eq_res);
  const double mg = p.total_mass() * g;
  auto clamp_fz = [&](double f) {
    return std::clamp(f, p.contact_force_z_min + 1.0, p.contact_force_z_max - 1.0);
  };

  for (int phase = 0; phase < 4; ++phase) {
    const int n = grid.intervals[phase];
    traj.phase_begin[phase] = static_cast<int>(traj.nodes.size());
    const double t0 = traj.phase_start_time(phase);
    const double dt = traj.phase_duration[phase] / n;
    for (int k = 0; k <= n; ++k) {
      const double s = static_cast<double>(k) / n;
      TrajectoryNode node;
      node.phase = static_cast<JumpPhase>(phase);
      node.t = t0 + k * dt;
      switch (phase) {
        case 0: {
          const Eigen::Vector3d base = b_start + s * (b_crouch - b_start);
          node.q = stance_pose(base, foot_f0, foot_b0);
          node.u = u_eq;
          node.force = Vec4(0.0, clamp_fz(0.5 * mg), 0.0, clamp_fz(0.5 * mg));
          break;
        }
        case 1: {
          const Eigen::Vector3d base = b_crouch + s * (b_lift - b_crouch);
          Vec7 q;
          q << base[0], base[1], base[2], 0, 0, 0, 0;
          const Vec2 jb = leg_ik(p, q, Leg::Back, foot_b0);
          q[5] = jb[0];
          q[6] = jb[1];
          q[3] = q_crouch[3] + s * (q_lift[3] - q_crouch[3]);
          q[4] = q_crouch[4] + s * (q_lift[4] - q_crouch[4]);
          node.q = q;
          node.u = u_eq;
          node.force = Vec4(0.0, 0.0, 0.0, clamp_fz(mg));
          break;
        }
        case 2: {
          Vec7 q;
          q[0] = x_lift + vx * s * T3;
          const double t = s * T3;
          q[1] = z_lift + vz * t - 0.5 * g * t * t;
          q[2] = th_launch + s * (pitch_td - th_launch);
          auto ease = [](double t) { return t * t * (3.0 - 2.0 * t); };
          if (s < tuck_out) {
            // Eased tuck, then hold while the box crosses the sill.
            for (int j = 3; j < 7; ++j) {
              const double tj = (j == 3 || j == 5) ? tuck_hip : tuck_knee;
              q[j] = s < tuck_in ? q_lift[j] + ease(s / tuck_in) * (tj - q_lift[j]) : tj;
            }
          } else {
            // Reach the feet toward the prints on a quintic that flattens
            // hard at arrival, so even the sampled path lands with near-zero
            // foot velocity; the height drops late to keep the box bottom
            // high until the body is past the sill.
            const double sr = (s - tuck_out) / (1.0 - tuck_out);
            const double sg = sr * sr * sr * (10.0 + sr * (6.0 * sr - 15.0));
            const double sz = sg * sg;
            const Vec2 ff(foot_rel_f[0] + sg * (foot_f1[0] - foot_rel_f[0]),
                          foot_rel_f[1] + sz * (foot_f1[1] - foot_rel_f[1]));
            const Vec2 fb(foot_rel_b[0] + sg * (foot_b1[0] - foot_rel_b[0]),
                          foot_rel_b[1] + sz * (foot_b1[1] - foot_rel_b[1]));
            q.tail<4>().setZero();
            const Vec2 jf = leg_ik(p, q, Leg::Front, ff);
            const Vec2 jb = leg_ik(p, q, Leg::Back, fb);
            q[3] = jf[0];
            q[4] = jf[1];
            q[5] = jb[0];
            q[6] = jb[1];
          }
          node.q = q;
          node.u.setZero();
          node.force.setZero();
          break;
        }
        default: {
          // Brake over the prints while the legs soak up the drop, then rise
          // back toward the rest height.
          const double t = s * T4;
          const double t1 = std::min({t, t_stop_z, vx / std::max(a_brake1, 1e-6)});
          const double t2 =
              std::clamp(t - t_stop_z, 0.0, v_mid / std::max(a_brake2, 1e-6));
          const double tz = std::min(t, t_stop_z);
          Eigen::Vector3d base;
          base[0] = x_land + vx * t1 - 0.5 * a_brake1 * t1 * t1 + v_mid * t2 -
                    0.5 * a_brake2 * t2 * t2;
          base[1] = z_td + vz_td * tz - 0.5 * (vz_td / t_stop_z) * tz * tz;
          if (t > t_stop_z)
            base[1] += (0.97 * z0 - z_stop) * (t - t_stop_z) / std::max(T4 - t_stop_z, 1e-6);
          base[2] = pitch_td * (1.0 - s);
          node.q = stance_pose(base, foot_f1, foot_b1);
          node.u = u_eq;
          node.force = Vec4(0.0, clamp_fz(0.5 * mg), 0.0, clamp_fz(0.5 * mg));
          break;
        }
      }
      traj.nodes.push_back(node);
    }
  }

  // Exact start and exact boundary continuity.
  traj.nodes.front().q = qstart;
  for (int phase = 1; phase < 4; ++phase) {
    const int b = traj.phase_begin[phase];
    traj.nodes[b].q = traj.nodes[b - 1].q;
  }

  // Velocities by finite differences within each phase, then accelerations.
  for (int phase = 0; phase < 4; ++phase) {
    const int b = traj.phase_begin[phase];
    const int n = grid.intervals[phase];
    const double dt = traj.phase_duration[phase] / n;
    for (int k = 0; k <= n; ++k) {
      auto& node = traj.nodes[b + k];
      if (k == 0)
        node.qd = (traj.nodes[b + 1].q - node.q) / dt;
      else if (k == n)
        node.qd = (node.q - traj.nodes[b + k - 1].q) / dt;
      else
        node.qd = (traj.nodes[b + k + 1].q - traj.nodes[b + k - 1].q) / (2.0 * dt);
    }
    for (int k = 0; k <= n; ++k) {
      auto& node = traj.nodes[b + k];
      if (k == 0)
        node.qdd = (traj.nodes[b + 1].qd - node.qd) / dt;
      else if (k == n)
        node.qdd = (node.qd - traj.nodes[b + k - 1].qd) / dt;
      else
        node.qdd = (traj.nodes[b + k + 1].qd - traj.nodes[b + k - 1].qd) / (2.0 * dt);
    }
  }
  traj.nodes.front().qd = problem.x0.tail<7>();
  for (int phase = 1; phase < 4; ++phase) {
    const int b = traj.phase_begin[phase];
    traj.nodes[b].qd = traj.nodes[b - 1].qd;
  }
  // Flight carries gravity exactly in the guess.
  for (int k = 0; k <= grid.intervals[2]; ++k) {
    auto& node = traj.nodes[traj.phase_begin[2] + k];
    node.qdd[0] = 0.0;
    node.qdd[1] = -g;
  }

  // Inverse dynamics: pick torques and contact forces that explain the guessed
  // motion in least squares, so the first iterations do not have to buy
  // feasibility by flattening the jump.
  for (auto& node : traj.nodes) {
    const auto terms = model.dynamics_terms(node.q, node.qd);
    Eigen::MatrixXd Jc(0, 7);
    if (node.phase == JumpPhase::Flight) {
      // Nothing actuates the base in the air: let the base acceleration
      // absorb the leg-swing coupling so the unactuated rows close exactly.
      const Eigen::Vector3d rb = -(terms.C * node.qd + terms.G).head<3>() -
                                 terms.D.topRightCorner<3, 4>() * node.qdd.tail<4>();
      node.qdd.head<3>() = terms.D.topLeftCorner<3, 3>().ldlt().solve(rb);
    } else {
      Jc = model.contact_jacobian(node.q, node.phase);
    }
    const Vec7 rhs = terms.D * node.qdd + terms.C * node.qd + terms.G;
    const int nc = static_cast<int>(Jc.rows());
    Eigen::MatrixXd M(7, 4 + nc);
    M.leftCols(4) = terms.B;
    if (nc > 0) M.rightCols(nc) = Jc.transpose();
    const Eigen::VectorXd sol = M.completeOrthogonalDecomposition().solve(rhs);
    if (!sol.allFinite()) continue;
    for (int j = 0; j < 4; ++j)
      node.u[j] = std::clamp(sol[j], -p.torque_limit, p.torque_limit);
    node.force.setZero();
    const double mu_eff = node.phase == JumpPhase::Landing
                              ? p.friction_mu * problem.landing_mu_scale
                              : p.friction_mu;
    auto fill_leg = [&](int leg, double fx, double fz) {
      fz = clamp_fz(fz);
      node.force[2 * leg] = std::clamp(fx, -mu_eff * fz, mu_eff * fz);
      node.force[2 * leg + 1] = fz;
    };
    if (node.phase == JumpPhase::RearFeetContact)
      fill_leg(1, sol[4], sol[5]);
    else if (nc == 4) {
      fill_leg(0, sol[4], sol[5]);
      fill_leg(1, sol[6], sol[7]);
    }
  }

  // Bounding boxes, convex weights and dual starts on constrained nodes.
  for (std::size_t si = 0; si < traj.nodes.size(); ++si) {
    auto& node = traj.nodes[si];
    const int phase = static_cast<int>(node.phase);
    const int k = static_cast<int>(si) - traj.phase_begin[phase];
    if (!slot_constrained(problem, phase, k)) continue;
    node.constrained = true;
    const ExtentBox eb = extent_box(model, node.q, 1.02, 0.05);
    node.w = std::min(eb.w, problem.box_extent_max - 1e-3);
    node.h = std::min(eb.h, problem.box_extent_max - 1e-3);
    node.gamma = eb.gamma;
    if (!problem.obstacle.lower.empty())
      warm_duals(problem.obstacle.lower, eb.P, node.w, node.h, node.q[2],
                 node.lambda_lower, node.mu_lower);
    if (!problem.obstacle.upper.empty())
      warm_duals(problem.obstacle.upper, eb.P, node.w, node.h, node.q[2],
                 node.lambda_upper, node.mu_upper);
  }
  return traj;
}

JumpSolveOptions JumpSolveOptions::from_config(const KvConfig& cfg) {
  JumpSolveOptions o;
  o.max_iterations = cfg.get_int("solver.max_iterations", o.max_iterations);
  o.tol = cfg.get_double("solver.tol", o.tol);
  o.constraint_tol = cfg.get_double("solver.constraint_tol", o.constraint_tol);
  o.multi_start = cfg.get_int("solver.multi_start", o.multi_start);
  o.seed = static_cast<std::uint64_t>(cfg.get_int("solver.seed", 0));
  o.time_limit_s = cfg.get_double("solver.time_limit_s", o.time_limit_s);
  o.verbosity = cfg.get_int("solver.verbosity", o.verbosity);
  return o;
}

namespace {

struct Certificate {
  double max_defect = 0.0;
  double max_dynamics = 0.0;
  double min_clearance = kInf;
  std::string failure;  // empty when the trajectory certifies
};

Certificate certify(const JumpProblem& problem, JumpTrajectory& traj, double tol) {
  Certificate cert;
  PlanarModel model(problem.params);
  const auto& grid = problem.grid;

  for (int phase = 0; phase < 4; ++phase) {
    const int b = traj.phase_begin[phase];
    const int n = grid.intervals[phase];
    const double dt = traj.phase_duration[phase] / n;
    for (int k = 0; k <= n; ++k) {
      const auto& node = traj.nodes[b + k];
      const Vec14 xd = model.phase_dynamics(node.state(), node.u, node.force, node.phase);
      cert.max_dynamics = std::max(
          cert.max_dynamics, (xd - node.state_derivative()).lpNorm<Eigen::Infinity>());
      if (k < n) {
        const auto& next = traj.nodes[b + k + 1];
        const Vec14 defect = next.state() - node.state() -
                             0.5 * dt * (node.state_derivative() + next.state_derivative());
        cert.max_defect = std::max(cert.max_defect, defect.lpNorm<Eigen::Infinity>());
      }
    }
  }
  if (cert.max_dynamics > tol)
    cert.failure = "dynamics residual " + std::to_string(cert.max_dynamics);
  else if (cert.max_defect > tol)
    cert.failure = "defect residual " + std::to_string(cert.max_defect);

  std::vector<std::vector<Vec2>> halves;
  if (!problem.obstacle.lower.empty()) halves.push_back(problem.obstacle.lower.verts);
  if (!problem.obstacle.upper.empty()) halves.push_back(problem.obstacle.upper.verts);
  for (auto& node : traj.nodes) {
    BoundingBox box;
    if (node.constrained) {
      const ExtentBox eb = extent_box(model, node.q, 1.0, 0.0);
      box = BoundingBox{eb.P, node.q[2], node.w, node.h};
    } else {
      const ExtentBox eb = extent_box(model, node.q, 1.0, 1e-4);
      box = BoundingBox{eb.P, node.q[2], eb.w, eb.h};
    }
    const auto poly = box_polygon(box);
    node.clearance = kInf;
    for (const auto& half : halves)
      node.clearance = std::min(node.clearance, signed_distance_oracle(poly, half));
    if (node.constrained) {
      cert.min_clearance = std::min(cert.min_clearance, node.clearance);
      if (node.clearance < problem.d_min - 1e-5 && cert.failure.empty())
        cert.failure = "clearance " + std::to_string(node.clearance) + " below margin at t=" +
                       std::to_string(node.t);
    }
  }
  return cert;
}

}  // namespace

JumpTrajectory solve(const JumpProblem& problem, const JumpSolveOptions& options) {
  problem.validate();
  if (const std::string reason = ballistic_bound_reason(problem); !reason.empty())
    throw InfeasibleJump(reason);

  AssembledJump aj = assemble(problem);
  IpOptions ip;
  ip.max_iter = options.max_iterations;
  ip.tol = options.tol;
  ip.constraint_tol = std::min(options.constraint_tol * 1e-2, 1e-8);
  ip.time_limit_s = options.time_limit_s;
  ip.verbosity = options.verbosity;

  const int attempts = std::max(1, options.multi_start);
  IpResult best;
  bool have_best = false;
  std::string cert_failure;
  for (int attempt = 0; attempt < attempts; ++attempt) {
    Eigen::VectorXd x0;
    if (attempt == 0) {
      x0 = Eigen::Map<const Eigen::VectorXd>(aj.nlp.start().data(),
                                             static_cast<int>(aj.nlp.start().size()));
    } else {
      x0 = pack(aj.layout, initial_guess(problem, attempt, options.seed));
    }
    IpResult res = ip_solve(aj.nlp, x0, ip);
    if (res.ok()) {
      JumpTrajectory traj = unpack(aj.layout, res.x);
      // Polish the acceleration block: with (q, qd, u, T) fixed, the mass
      // matrix solve makes the node dynamics exact; the defects only move by
      // O(dt) times the correction, well inside the certification tolerance.
      {
        PlanarModel model(problem.params);
        for (auto& node : traj.nodes)
          node.qdd =
              model.phase_dynamics(node.state(), node.u, node.force, node.phase).tail<7>();
      }
      traj.report.objective = res.f;
      traj.report.kkt_error = res.kkt_error;
      traj.report.constraint_violation = res.constraint_violation;
      traj.report.iterations = res.iterations;
      traj.report.converged = true;
      traj.report.message = res.message.empty() ? to_string(res.status) : res.message;
      Certificate cert = certify(problem, traj, options.constraint_tol);
      if (cert.failure.empty()) return traj;
      cert_failure = cert.failure;
    }
    if (!have_best || res.constraint_violation < best.constraint_violation) {
      best = std::move(res);
      have_best = true;
    }
  }

  if (!cert_failure.empty())
    throw InfeasibleJump("solution failed certification: " + cert_failure);
  switch (best.status) {
    case IpStatus::Infeasible:
      throw InfeasibleJump(best.worst_row_label.empty() ? std::string("unknown row")
                                                        : best.worst_row_label,
                           best.constraint_violation);
    case IpStatus::MaxIterations:
    case IpStatus::TimeLimit:
      if (best.constraint_violation > 1e2 * options.constraint_tol)
        throw InfeasibleJump(best.worst_row_label, best.constraint_violation);
      throw OptimizationTimeout("no convergence in " + std::to_string(best.iterations) +
                                " iterations, violation " +
                                std::to_string(best.constraint_violation));
    default:
      throw OptimizationTimeout(std::string("solver stopped: ") + to_string(best.status) +
                                ", " + best.message + " (worst " + best.worst_row_label +
                                " at " + std::to_string(best.constraint_violation) + ")");
  }
}

}  // namespace jumpnav
