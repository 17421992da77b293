#pragma once

// Planar two-leg quadruped: 7 generalized coordinates
// q = [q_x, q_z, q_theta, q_F1, q_F2, q_B1, q_B2].
//
// Conventions (fixed here and documented in the README):
//   - q_theta is the trunk pitch, counterclockwise from horizontal.
//   - Hips sit at body_center +- body_half_length along the trunk axis.
//   - Joint zero means the leg points straight down; hip angles are relative
//     to the trunk, knee angles relative to the upper link. Positive angles
//     swing the link forward (+x at zero pitch).
//
// Every point of the mechanism is a sum of "chain terms" k * u^(d)(psi),
// where u(psi) = (sin psi, -cos psi) is the downward link direction, d counts
// derivatives of u (u' = (cos, sin), u'' = -u), and psi is one of five angle
// sums. Velocities, accelerations, Jacobians and the full inverse-dynamics
// residual all fall out of one table per body, for any scalar type, which is
// how the trajectory optimizer obtains exact first and second derivatives.

#include <jumpnav/autodiff.hpp>
#include <jumpnav/errors.hpp>
#include <jumpnav/model_params.hpp>

#include <Eigen/Dense>
#include <array>
#include <type_traits>

namespace jumpnav {

using Vec2 = Eigen::Vector2d;
using Vec4 = Eigen::Vector4d;
using Mat2 = Eigen::Matrix2d;
using Vec7 = Eigen::Matrix<double, 7, 1>;
using Vec14 = Eigen::Matrix<double, 14, 1>;
using Mat7 = Eigen::Matrix<double, 7, 7>;
using Mat27 = Eigen::Matrix<double, 2, 7>;
using Mat74 = Eigen::Matrix<double, 7, 4>;

enum class Leg { Front = 0, Back = 1 };

enum class JumpPhase { AllFeetContact = 0, RearFeetContact = 1, Flight = 2, Landing = 3 };

const char* to_string(JumpPhase p);

// Named views of the math vectors, matching the documented field lists.
struct PlanarConfig {
  double q_x = 0, q_z = 0, q_theta = 0, q_f1 = 0, q_f2 = 0, q_b1 = 0, q_b2 = 0;
  Vec7 vec() const {
    Vec7 v;
    v << q_x, q_z, q_theta, q_f1, q_f2, q_b1, q_b2;
    return v;
  }
  static PlanarConfig from(const Vec7& v) {
    return {v[0], v[1], v[2], v[3], v[4], v[5], v[6]};
  }
};

struct PlanarState {
  PlanarConfig q;
  Vec7 qdot = Vec7::Zero();
  Vec14 vec() const {
    Vec14 x;
    x << q.vec(), qdot;
    return x;
  }
  static PlanarState from(const Vec14& x) {
    return {PlanarConfig::from(x.head<7>()), x.tail<7>()};
  }
};

struct ControlInput {
  double tau_f1 = 0, tau_f2 = 0, tau_b1 = 0, tau_b2 = 0;
  Vec4 vec() const { return Vec4(tau_f1, tau_f2, tau_b1, tau_b2); }
  static ControlInput from(const Vec4& v) { return {v[0], v[1], v[2], v[3]}; }
};

struct ContactForces {
  double t_fx = 0, t_fz = 0, t_bx = 0, t_bz = 0;
  Vec4 vec() const { return Vec4(t_fx, t_fz, t_bx, t_bz); }
  static ContactForces from(const Vec4& v) { return {v[0], v[1], v[2], v[3]}; }
};

namespace detail {

// Angle sums: psi[0]=theta, psi[1]=theta+F1, psi[2]=theta+F1+F2,
// psi[3]=theta+B1, psi[4]=theta+B1+B2. Masks are over the five angle
// coordinates (theta, F1, F2, B1, B2) = q indices 2..6.
inline constexpr unsigned kPsiMask[5] = {0x1u, 0x3u, 0x7u, 0x9u, 0x19u};

struct ChainTerm {
  double k = 0;  // length coefficient
  int psi = 0;   // which angle sum
  int d = 0;     // derivative order of u
};

struct Chain {
  int n = 0;
  ChainTerm t[3];
  unsigned umask = 0;  // union of angle masks over the terms
};

struct BodySpec {
  double mass = 0, inertia = 0;
  unsigned wmask = 0;  // angular velocity = sum of qdot over these angles
  Chain chain;
};

template <class S>
struct TrigTable {
  S s[5], c[5];
};

}  // namespace detail

class PlanarModel {
 public:
  explicit PlanarModel(const ModelParams& params);

  const ModelParams& params() const { return params_; }

  // ---- kinematics ----------------------------------------------------------
  struct KeyPoints {
    Vec2 hip_f, hip_b, knee_f, knee_b, foot_f, foot_b;
    std::array<Vec2, 6> all() const { return {hip_f, hip_b, knee_f, knee_b, foot_f, foot_b}; }
  };
  KeyPoints forward_kinematics(const Vec7& q) const;
  std::array<Vec2, 6> keypoints(const Vec7& q) const { return forward_kinematics(q).all(); }
  Vec2 foot_position(const Vec7& q, Leg leg) const;
  Vec2 foot_velocity(const Vec7& q, const Vec7& qd, Leg leg) const;
  Vec2 foot_acceleration(const Vec7& q, const Vec7& qd, const Vec7& qdd, Leg leg) const;
  Mat27 foot_jacobian(const Vec7& q, Leg leg) const;

  // Rows: contacting feet in order front, back; two rows (x, z) per foot.
  // Throws FlightHasNoContact for the flight phase.
  Eigen::MatrixXd contact_jacobian(const Vec7& q, JumpPhase phase) const;
  static bool leg_in_contact(JumpPhase phase, Leg leg);

  // ---- dynamics -------------------------------------------------------------
  struct DynamicsTerms {
    Mat7 D, C;
    Vec7 G;
    Mat74 B;
  };
  // Throws SingularMassMatrix when cond(D) exceeds the configured bound.
  DynamicsTerms dynamics_terms(const Vec7& q, const Vec7& qd) const;
  Mat7 mass_matrix(const Vec7& q) const;
  Vec7 gravity_vector(const Vec7& q) const;
  static Mat74 input_matrix();

  // xdot = [qdot; qddot] with qddot = D^{-1}(B u + J^T T - C qdot - G).
  // T components of non-contacting legs must be zero (NonzeroForceOnFreeLeg).
  Vec14 phase_dynamics(const Vec14& x, const Vec4& u, const Vec4& T, JumpPhase phase) const;

  double kinetic_energy(const Vec7& q, const Vec7& qd) const;
  double potential_energy(const Vec7& q) const;

  // ---- scalar-generic core ---------------------------------------------------
  // Used directly by the trajectory optimizer's constraint blocks with dual
  // scalars; S is double, Dual or Dual2.

  template <class S>
  detail::TrigTable<S> trig(const S* q) const {
    detail::TrigTable<S> t;
    S psi[5];
    psi[0] = q[2];
    psi[1] = q[2] + q[3];
    psi[2] = psi[1] + q[4];
    psi[3] = q[2] + q[5];
    psi[4] = psi[3] + q[6];
    for (int i = 0; i < 5; ++i) {
      t.s[i] = sin(psi[i]);
      t.c[i] = cos(psi[i]);
    }
    return t;
  }

  // u^(d)(psi) from the trig table; derivative order taken mod 4.
  template <class S>
  static void dir(const detail::TrigTable<S>& t, int psi, int d, S out[2]) {
    switch (d & 3) {
      case 0: out[0] = t.s[psi]; out[1] = -t.c[psi]; break;
      case 1: out[0] = t.c[psi]; out[1] = t.s[psi]; break;
      case 2: out[0] = -t.s[psi]; out[1] = t.c[psi]; break;
      default: out[0] = -t.c[psi]; out[1] = -t.s[psi]; break;
    }
  }

  template <class S>
  void chain_point(const detail::Chain& ch, const S* q, const detail::TrigTable<S>& t,
                   S out[2]) const {
    out[0] = q[0];
    out[1] = q[1];
    for (int i = 0; i < ch.n; ++i) {
      S u[2];
      dir(t, ch.t[i].psi, ch.t[i].d, u);
      out[0] += ch.t[i].k * u[0];
      out[1] += ch.t[i].k * u[1];
    }
  }

  // Velocity of a chain point given qdot; psid are the angle-sum rates.
  template <class S>
  void chain_velocity(const detail::Chain& ch, const S* qd, const detail::TrigTable<S>& t,
                      const S* psid, S out[2]) const {
    out[0] = qd[0];
    out[1] = qd[1];
    for (int i = 0; i < ch.n; ++i) {
      S u1[2];
      dir(t, ch.t[i].psi, ch.t[i].d + 1, u1);
      out[0] += ch.t[i].k * psid[ch.t[i].psi] * u1[0];
      out[1] += ch.t[i].k * psid[ch.t[i].psi] * u1[1];
    }
  }

  // Acceleration of a chain point given the velocity-rate vector a (dim 7).
  template <class S>
  void chain_accel(const detail::Chain& ch, const S* a, const detail::TrigTable<S>& t,
                   const S* psid, const S* psidd, S out[2]) const {
    out[0] = a[0];
    out[1] = a[1];
    for (int i = 0; i < ch.n; ++i) {
      S u1[2], u2[2];
      dir(t, ch.t[i].psi, ch.t[i].d + 1, u1);
      dir(t, ch.t[i].psi, ch.t[i].d + 2, u2);
      const S w = psid[ch.t[i].psi];
      out[0] += ch.t[i].k * (psidd[ch.t[i].psi] * u1[0] + w * w * u2[0]);
      out[1] += ch.t[i].k * (psidd[ch.t[i].psi] * u1[1] + w * w * u2[1]);
    }
  }

  // Jacobian column of a chain point w.r.t. angle coordinate `ang` (0..4).
  template <class S>
  void chain_jac_col(const detail::Chain& ch, const detail::TrigTable<S>& t, int ang,
                     S out[2]) const {
    out[0] = S(0.0);
    out[1] = S(0.0);
    for (int i = 0; i < ch.n; ++i) {
      if (!(detail::kPsiMask[ch.t[i].psi] & (1u << ang))) continue;
      S u1[2];
      dir(t, ch.t[i].psi, ch.t[i].d + 1, u1);
      out[0] += ch.t[i].k * u1[0];
      out[1] += ch.t[i].k * u1[1];
    }
  }

  template <class S>
  void angle_rates(const S* qd, S psid[5]) const {
    psid[0] = qd[2];
    psid[1] = qd[2] + qd[3];
    psid[2] = psid[1] + qd[4];
    psid[3] = qd[2] + qd[5];
    psid[4] = psid[3] + qd[6];
  }

  // D(q) a + C(q, qd) qd + G(q), via d'Alembert over the five bodies: each
  // contributes m * (com accel + g e_z) . Jv plus I * wdot on its angle rows.
  template <class S>
  void inertial_force(const S* q, const S* qd, const S* a, S out[7]) const {
    const auto t = trig(q);
    S psid[5], psidd[5];
    angle_rates(qd, psid);
    angle_rates(a, psidd);
    for (int i = 0; i < 7; ++i) out[i] = S(0.0);
    const double g = params_.gravity;
    for (const auto& b : bodies_) {
      S acc[2];
      chain_accel(b.chain, a, t, psid, psidd, acc);
      acc[1] += g;
      out[0] += b.mass * acc[0];
      out[1] += b.mass * acc[1];
      S wdot = S(0.0);
      for (int k = 0; k < 5; ++k)
        if (b.wmask & (1u << k)) wdot += a[2 + k];
      for (int k = 0; k < 5; ++k) {
        const bool in_chain = (b.chain.umask & (1u << k)) != 0;
        const bool in_w = (b.wmask & (1u << k)) != 0;
        if (!in_chain && !in_w) continue;
        S acc_dot = S(0.0);
        if (in_chain) {
          S col[2];
          chain_jac_col(b.chain, t, k, col);
          acc_dot = acc[0] * col[0] + acc[1] * col[1];
        }
        out[2 + k] += b.mass * acc_dot;
        if (in_w) out[2 + k] += b.inertia * wdot;
      }
    }
  }

  // Full inverse-dynamics residual of one collocation node:
  //   D a + C qd + G - B u - J_F^T T_F - J_B^T T_B.
  // Pass nullptr for the force pair of a leg that is not in contact.
  template <class S>
  void dynamics_residual(const S* q, const S* qd, const S* a, const S* u,
                         const std::type_identity_t<S>* t_front,
                         const std::type_identity_t<S>* t_back, S out[7]) const {
    inertial_force(q, qd, a, out);
    out[3] -= u[0];
    out[4] -= u[1];
    out[5] -= u[2];
    out[6] -= u[3];
    const auto t = trig(q);
    const S* forces[2] = {t_front, t_back};
    for (int leg = 0; leg < 2; ++leg) {
      const S* T = forces[leg];
      if (!T) continue;
      out[0] -= T[0];
      out[1] -= T[1];
      for (int k = 0; k < 5; ++k) {
        if (!(feet_[leg].umask & (1u << k))) continue;
        S col[2];
        chain_jac_col(feet_[leg], t, k, col);
        out[2 + k] -= T[0] * col[0] + T[1] * col[1];
      }
    }
  }

  // Foot position / velocity / acceleration for constraint blocks.
  template <class S>
  void foot_point_t(const S* q, int leg, S out[2]) const {
    const auto t = trig(q);
    chain_point(feet_[leg], q, t, out);
  }
  template <class S>
  void foot_velocity_t(const S* q, const S* qd, int leg, S out[2]) const {
    const auto t = trig(q);
    S psid[5];
    angle_rates(qd, psid);
    chain_velocity(feet_[leg], qd, t, psid, out);
  }
  template <class S>
  void foot_accel_t(const S* q, const S* qd, const S* a, int leg, S out[2]) const {
    const auto t = trig(q);
    S psid[5], psidd[5];
    angle_rates(qd, psid);
    angle_rates(a, psidd);
    chain_accel(feet_[leg], a, t, psid, psidd, out);
  }

  // Key point for the collision bounding box; order matches keypoints():
  // hip_F, hip_B, knee_F, knee_B, foot_F, foot_B.
  template <class S>
  void keypoint_t(const S* q, int idx, S out[2]) const {
    const auto t = trig(q);
    chain_point(kp_[idx], q, t, out);
  }

  const detail::Chain& foot_chain(int leg) const { return feet_[leg]; }

 private:
  Mat7 mass_matrix_nothrow(const Vec7& q) const;
  void body_jacobian(const detail::BodySpec& b, const detail::TrigTable<double>& t,
                     Mat27& J) const;
  void body_jacobian_partial(const detail::BodySpec& b, const detail::TrigTable<double>& t,
                             int ang, Mat27& dJ) const;

  ModelParams params_;
  std::array<detail::BodySpec, 5> bodies_;
  std::array<detail::Chain, 2> feet_;
  std::array<detail::Chain, 6> kp_;
};

}  // namespace jumpnav
