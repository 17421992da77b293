#include <jumpnav/planar_model.hpp>

#include <Eigen/Eigenvalues>

namespace jumpnav {

const char* to_string(JumpPhase p) {
  switch (p) {
    case JumpPhase::AllFeetContact: return "AllFeetContact";
    case JumpPhase::RearFeetContact: return "RearFeetContact";
    case JumpPhase::Flight: return "Flight";
    case JumpPhase::Landing: return "Landing";
  }
  return "Unknown";
}

namespace {

detail::Chain make_chain(std::initializer_list<detail::ChainTerm> terms) {
  detail::Chain ch;
  for (const auto& t : terms) {
    ch.t[ch.n++] = t;
    ch.umask |= detail::kPsiMask[t.psi];
  }
  return ch;
}

}  // namespace

PlanarModel::PlanarModel(const ModelParams& params) : params_(params) {
  params_.validate();
  const double a = params_.body_half_length;
  const double L0 = params_.link_length[0], L1 = params_.link_length[1];
  const double c0 = params_.link_com_offset[0], c1 = params_.link_com_offset[1];

  bodies_[0] = {params_.body_mass + params_.payload_mass, params_.body_inertia, 0x1u,
                make_chain({})};
  bodies_[1] = {params_.link_mass[0], params_.link_inertia[0], 0x3u,
                make_chain({{a, 0, 1}, {c0, 1, 0}})};
  bodies_[2] = {params_.link_mass[1], params_.link_inertia[1], 0x7u,
                make_chain({{a, 0, 1}, {L0, 1, 0}, {c1, 2, 0}})};
  bodies_[3] = {params_.link_mass[0], params_.link_inertia[0], 0x9u,
                make_chain({{-a, 0, 1}, {c0, 3, 0}})};
  bodies_[4] = {params_.link_mass[1], params_.link_inertia[1], 0x19u,
                make_chain({{-a, 0, 1}, {L0, 3, 0}, {c1, 4, 0}})};

  feet_[0] = make_chain({{a, 0, 1}, {L0, 1, 0}, {L1, 2, 0}});
  feet_[1] = make_chain({{-a, 0, 1}, {L0, 3, 0}, {L1, 4, 0}});

  kp_[0] = make_chain({{a, 0, 1}});                            // hip F
  kp_[1] = make_chain({{-a, 0, 1}});                           // hip B
  kp_[2] = make_chain({{a, 0, 1}, {L0, 1, 0}});                // knee F
  kp_[3] = make_chain({{-a, 0, 1}, {L0, 3, 0}});               // knee B
  kp_[4] = feet_[0];                                           // foot F
  kp_[5] = feet_[1];                                           // foot B
}

PlanarModel::KeyPoints PlanarModel::forward_kinematics(const Vec7& q) const {
  const auto t = trig(q.data());
  KeyPoints kp;
  Vec2* out[6] = {&kp.hip_f, &kp.hip_b, &kp.knee_f, &kp.knee_b, &kp.foot_f, &kp.foot_b};
  for (int i = 0; i < 6; ++i) {
    double p[2];
    chain_point(kp_[i], q.data(), t, p);
    *out[i] = Vec2(p[0], p[1]);
  }
  return kp;
}

Vec2 PlanarModel::foot_position(const Vec7& q, Leg leg) const {
  double p[2];
  foot_point_t(q.data(), static_cast<int>(leg), p);
  return Vec2(p[0], p[1]);
}

Vec2 PlanarModel::foot_velocity(const Vec7& q, const Vec7& qd, Leg leg) const {
  double v[2];
  foot_velocity_t(q.data(), qd.data(), static_cast<int>(leg), v);
  return Vec2(v[0], v[1]);
}

Vec2 PlanarModel::foot_acceleration(const Vec7& q, const Vec7& qd, const Vec7& qdd,
                                    Leg leg) const {
  double acc[2];
  foot_accel_t(q.data(), qd.data(), qdd.data(), static_cast<int>(leg), acc);
  return Vec2(acc[0], acc[1]);
}

Mat27 PlanarModel::foot_jacobian(const Vec7& q, Leg leg) const {
  const auto t = trig(q.data());
  Mat27 J = Mat27::Zero();
  J(0, 0) = 1;
  J(1, 1) = 1;
  const auto& ch = feet_[static_cast<int>(leg)];
  for (int k = 0; k < 5; ++k) {
    double col[2];
    chain_jac_col(ch, t, k, col);
    J(0, 2 + k) = col[0];
    J(1, 2 + k) = col[1];
  }
  return J;
}

bool PlanarModel::leg_in_contact(JumpPhase phase, Leg leg) {
  switch (phase) {
    case JumpPhase::AllFeetContact:
    case JumpPhase::Landing: return true;
    case JumpPhase::RearFeetContact: return leg == Leg::Back;
    case JumpPhase::Flight: return false;
  }
  return false;
}

Eigen::MatrixXd PlanarModel::contact_jacobian(const Vec7& q, JumpPhase phase) const {
  if (phase == JumpPhase::Flight) throw FlightHasNoContact();
  const bool front = leg_in_contact(phase, Leg::Front);
  const bool back = leg_in_contact(phase, Leg::Back);
  Eigen::MatrixXd J(2 * (front + back), 7);
  int row = 0;
  if (front) {
    J.middleRows<2>(row) = foot_jacobian(q, Leg::Front);
    row += 2;
  }
  if (back) J.middleRows<2>(row) = foot_jacobian(q, Leg::Back);
  return J;
}

void PlanarModel::body_jacobian(const detail::BodySpec& b, const detail::TrigTable<double>& t,
                                Mat27& J) const {
  J.setZero();
  J(0, 0) = 1;
  J(1, 1) = 1;
  for (int k = 0; k < 5; ++k) {
    if (!(b.chain.umask & (1u << k))) continue;
    double col[2];
    chain_jac_col(b.chain, t, k, col);
    J(0, 2 + k) = col[0];
    J(1, 2 + k) = col[1];
  }
}

void PlanarModel::body_jacobian_partial(const detail::BodySpec& b,
                                        const detail::TrigTable<double>& t, int ang,
                                        Mat27& dJ) const {
  dJ.setZero();
  for (int k = 0; k < 5; ++k) {
    double col[2] = {0, 0};
    for (int i = 0; i < b.chain.n; ++i) {
      const auto& term = b.chain.t[i];
      const unsigned mask = detail::kPsiMask[term.psi];
      if (!(mask & (1u << k)) || !(mask & (1u << ang))) continue;
      double u2[2];
      dir(t, term.psi, term.d + 2, u2);
      col[0] += term.k * u2[0];
      col[1] += term.k * u2[1];
    }
    dJ(0, 2 + k) = col[0];
    dJ(1, 2 + k) = col[1];
  }
}

Mat7 PlanarModel::mass_matrix_nothrow(const Vec7& q) const {
  const auto t = trig(q.data());
  Mat7 D = Mat7::Zero();
  Mat27 J;
  for (const auto& b : bodies_) {
    body_jacobian(b, t, J);
    D.noalias() += b.mass * J.transpose() * J;
    for (int i = 0; i < 5; ++i) {
      if (!(b.wmask & (1u << i))) continue;
      for (int j = 0; j < 5; ++j)
        if (b.wmask & (1u << j)) D(2 + i, 2 + j) += b.inertia;
    }
  }
  return D;
}

Mat7 PlanarModel::mass_matrix(const Vec7& q) const { return mass_matrix_nothrow(q); }

Vec7 PlanarModel::gravity_vector(const Vec7& q) const {
  const auto t = trig(q.data());
  Vec7 G = Vec7::Zero();
  Mat27 J;
  for (const auto& b : bodies_) {
    body_jacobian(b, t, J);
    G += params_.gravity * b.mass * J.row(1).transpose();
  }
  return G;
}

Mat74 PlanarModel::input_matrix() {
  Mat74 B = Mat74::Zero();
  B.bottomRows<4>().setIdentity();
  return B;
}

PlanarModel::DynamicsTerms PlanarModel::dynamics_terms(const Vec7& q, const Vec7& qd) const {
  DynamicsTerms out;
  out.D = mass_matrix_nothrow(q);
  {
    Eigen::SelfAdjointEigenSolver<Mat7> eig(out.D);
    const double lo = eig.eigenvalues().minCoeff();
    const double hi = eig.eigenvalues().maxCoeff();
    if (!(lo > 0.0) || hi / lo > params_.mass_matrix_condition_limit)
      throw SingularMassMatrix(lo > 0.0 ? hi / lo : std::numeric_limits<double>::infinity());
  }

  // Partials of D w.r.t. the five angle coordinates; base translations leave
  // D unchanged.
  const auto t = trig(q.data());
  std::array<Mat7, 7> dD;
  dD[0].setZero();
  dD[1].setZero();
  Mat27 J, dJ;
  for (int ang = 0; ang < 5; ++ang) {
    Mat7 acc = Mat7::Zero();
    for (const auto& b : bodies_) {
      if (!(b.chain.umask & (1u << ang))) continue;
      body_jacobian(b, t, J);
      body_jacobian_partial(b, t, ang, dJ);
      acc.noalias() += b.mass * (dJ.transpose() * J + J.transpose() * dJ);
    }
    dD[2 + ang] = acc;
  }

  for (int k = 0; k < 7; ++k)
    for (int j = 0; j < 7; ++j) {
      double s = 0;
      for (int i = 0; i < 7; ++i)
        s += qd[i] * (dD[i](k, j) + dD[j](k, i) - dD[k](i, j));
      out.C(k, j) = 0.5 * s;
    }

  out.G = gravity_vector(q);
  out.B = input_matrix();
  return out;
}

Vec14 PlanarModel::phase_dynamics(const Vec14& x, const Vec4& u, const Vec4& T,
                                  JumpPhase phase) const {
  const Vec7 q = x.head<7>();
  const Vec7 qd = x.tail<7>();
  const bool front = leg_in_contact(phase, Leg::Front);
  const bool back = leg_in_contact(phase, Leg::Back);
  if (!front && (T[0] != 0.0 || T[1] != 0.0)) throw NonzeroForceOnFreeLeg();
  if (!back && (T[2] != 0.0 || T[3] != 0.0)) throw NonzeroForceOnFreeLeg();

  // Bias h = C qd + G falls out of the inertial residual at zero rates.
  Vec7 h;
  const Vec7 zero = Vec7::Zero();
  inertial_force(q.data(), qd.data(), zero.data(), h.data());

  Vec7 rhs = -h;
  rhs.tail<4>() += u;
  if (front) rhs += foot_jacobian(q, Leg::Front).transpose() * T.head<2>();
  if (back) rhs += foot_jacobian(q, Leg::Back).transpose() * T.tail<2>();

  const Mat7 D = mass_matrix_nothrow(q);
  Vec14 xdot;
  xdot.head<7>() = qd;
  xdot.tail<7>() = D.ldlt().solve(rhs);
  return xdot;
}

double PlanarModel::kinetic_energy(const Vec7& q, const Vec7& qd) const {
  return 0.5 * qd.dot(mass_matrix_nothrow(q) * qd);
}

double PlanarModel::potential_energy(const Vec7& q) const {
  const auto t = trig(q.data());
  double pe = 0.0;
  for (const auto& b : bodies_) {
    double p[2];
    chain_point(b.chain, q.data(), t, p);
    pe += b.mass * params_.gravity * p[1];
  }
  return pe;
}

}  // namespace jumpnav
