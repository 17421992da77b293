#include <jumpnav/planar_model.hpp>

#include <doctest.h>

#include <Eigen/Geometry>
#include <random>

using namespace jumpnav;

namespace {

ModelParams default_params() { return ModelParams{}; }

// Independent forward-kinematics oracle assembled link by link from 2D
// rotations: down(phi) = R(phi) * (0, -1), hips at +-a along the trunk axis.
struct FkOracle {
  ModelParams p;
  Vec2 base(const Vec7& q) const { return Vec2(q[0], q[1]); }
  Vec2 hip(const Vec7& q, int leg) const {
    const double sgn = leg == 0 ? 1.0 : -1.0;
    return base(q) + Eigen::Rotation2Dd(q[2]) * Vec2(sgn * p.body_half_length, 0);
  }
  Vec2 knee(const Vec7& q, int leg) const {
    const double hip_angle = q[2] + (leg == 0 ? q[3] : q[5]);
    return hip(q, leg) + Eigen::Rotation2Dd(hip_angle) * Vec2(0, -p.link_length[0]);
  }
  Vec2 foot(const Vec7& q, int leg) const {
    const double knee_angle =
        q[2] + (leg == 0 ? q[3] + q[4] : q[5] + q[6]);
    return knee(q, leg) + Eigen::Rotation2Dd(knee_angle) * Vec2(0, -p.link_length[1]);
  }
  Vec2 link_com(const Vec7& q, int leg, int link) const {
    const Vec2 origin = link == 0 ? hip(q, leg) : knee(q, leg);
    const double angle =
        q[2] + (leg == 0 ? (link == 0 ? q[3] : q[3] + q[4]) : (link == 0 ? q[5] : q[5] + q[6]));
    return origin + Eigen::Rotation2Dd(angle) * Vec2(0, -p.link_com_offset[link]);
  }
};

Vec7 random_q(std::mt19937& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const ModelParams p;
  Vec7 q;
  q[0] = u(rng);
  q[1] = 0.4 + 0.2 * u(rng);
  q[2] = 0.8 * u(rng);
  std::uniform_real_distribution<double> hip(p.hip_angle_min, p.hip_angle_max);
  std::uniform_real_distribution<double> knee(p.knee_angle_min, p.knee_angle_max);
  q[3] = hip(rng);
  q[4] = knee(rng);
  q[5] = hip(rng);
  q[6] = knee(rng);
  return q;
}

Vec7 random_qd(std::mt19937& rng, double scale = 1.0) {
  std::uniform_real_distribution<double> u(-scale, scale);
  Vec7 qd;
  for (int i = 0; i < 7; ++i) qd[i] = u(rng);
  return qd;
}

}  // namespace

TEST_CASE("straight-down reference puts both feet on the ground") {
  const ModelParams p = default_params();
  const PlanarModel model(p);
  Vec7 q = Vec7::Zero();
  q[1] = p.leg_length();
  const auto kp = model.forward_kinematics(q);
  CHECK(kp.foot_f[1] == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(kp.foot_b[1] == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(kp.foot_f[0] == doctest::Approx(p.body_half_length));
  CHECK(kp.foot_b[0] == doctest::Approx(-p.body_half_length));
}

TEST_CASE("key points translate with the base") {
  const PlanarModel model(default_params());
  std::mt19937 rng(3);
  const Vec7 q = random_q(rng);
  Vec7 q2 = q;
  q2[0] += 1.0;
  const auto a = model.keypoints(q);
  const auto b = model.keypoints(q2);
  for (int i = 0; i < 6; ++i) {
    CHECK(b[i][0] - a[i][0] == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(b[i][1] - a[i][1] == doctest::Approx(0.0).epsilon(1e-14));
  }
}

TEST_CASE("forward kinematics agrees with the transform-chain oracle") {
  const ModelParams p = default_params();
  const PlanarModel model(p);
  const FkOracle oracle{p};
  std::mt19937 rng(11);
  for (int t = 0; t < 50; ++t) {
    const Vec7 q = random_q(rng);
    const auto kp = model.forward_kinematics(q);
    CHECK((kp.hip_f - oracle.hip(q, 0)).norm() < 1e-10);
    CHECK((kp.hip_b - oracle.hip(q, 1)).norm() < 1e-10);
    CHECK((kp.knee_f - oracle.knee(q, 0)).norm() < 1e-10);
    CHECK((kp.knee_b - oracle.knee(q, 1)).norm() < 1e-10);
    CHECK((kp.foot_f - oracle.foot(q, 0)).norm() < 1e-10);
    CHECK((kp.foot_b - oracle.foot(q, 1)).norm() < 1e-10);
  }
}

TEST_CASE("contact jacobian: rigid translation moves the foot with the base") {
  const PlanarModel model(default_params());
  std::mt19937 rng(5);
  const Vec7 q = random_q(rng);
  Vec7 qd = Vec7::Zero();
  qd[0] = 0.7;
  const auto J = model.contact_jacobian(q, JumpPhase::AllFeetContact);
  const Eigen::VectorXd v = J * qd;
  REQUIRE(J.rows() == 4);
  CHECK(v[0] == doctest::Approx(0.7));
  CHECK(v[1] == doctest::Approx(0.0));
  CHECK(v[2] == doctest::Approx(0.7));
  CHECK(v[3] == doctest::Approx(0.0));
}

TEST_CASE("foot jacobian matches central finite differences") {
  const PlanarModel model(default_params());
  std::mt19937 rng(17);
  const double h = 1e-7;
  for (int t = 0; t < 20; ++t) {
    const Vec7 q = random_q(rng);
    for (int leg = 0; leg < 2; ++leg) {
      const Mat27 J = model.foot_jacobian(q, static_cast<Leg>(leg));
      for (int i = 0; i < 7; ++i) {
        Vec7 qp = q, qm = q;
        qp[i] += h;
        qm[i] -= h;
        const Vec2 fd = (model.foot_position(qp, static_cast<Leg>(leg)) -
                         model.foot_position(qm, static_cast<Leg>(leg))) /
                        (2 * h);
        CHECK(std::abs(J(0, i) - fd[0]) < 1e-6);
        CHECK(std::abs(J(1, i) - fd[1]) < 1e-6);
      }
    }
  }
}

TEST_CASE("flight phase has no contact jacobian") {
  const PlanarModel model(default_params());
  CHECK_THROWS_AS(model.contact_jacobian(Vec7::Zero(), JumpPhase::Flight),
                  FlightHasNoContact);
  CHECK(model.contact_jacobian(Vec7::Zero(), JumpPhase::RearFeetContact).rows() == 2);
  CHECK(model.contact_jacobian(Vec7::Zero(), JumpPhase::Landing).rows() == 4);
}

TEST_CASE("mass matrix is symmetric positive definite across the joint space") {
  const PlanarModel model(default_params());
  std::mt19937 rng(23);
  double min_eig = 1e30;
  for (int t = 0; t < 1000; ++t) {
    const Vec7 q = random_q(rng);
    const Mat7 D = model.mass_matrix(q);
    CHECK((D - D.transpose()).cwiseAbs().maxCoeff() <= 1e-12);
    Eigen::SelfAdjointEigenSolver<Mat7> eig(D);
    min_eig = std::min(min_eig, eig.eigenvalues().minCoeff());
  }
  CHECK(min_eig > 0.0);
}

TEST_CASE("kinetic energy matches the per-body velocity oracle") {
  const ModelParams p = default_params();
  const PlanarModel model(p);
  const FkOracle oracle{p};
  std::mt19937 rng(29);
  const double h = 1e-7;
  for (int t = 0; t < 20; ++t) {
    const Vec7 q = random_q(rng);
    const Vec7 qd = random_qd(rng, 2.0);
    // Body COM velocities by finite differences along qd.
    auto vel = [&](auto&& pos) {
      const Vec7 qp = q + h * qd, qm = q - h * qd;
      return Vec2((pos(qp) - pos(qm)) / (2 * h));
    };
    double ke = 0.0;
    // Trunk.
    ke += 0.5 * (p.body_mass + p.payload_mass) *
              vel([&](const Vec7& qq) { return oracle.base(qq); }).squaredNorm() +
          0.5 * p.body_inertia * qd[2] * qd[2];
    for (int leg = 0; leg < 2; ++leg)
      for (int link = 0; link < 2; ++link) {
        const Vec2 v =
            vel([&](const Vec7& qq) { return oracle.link_com(qq, leg, link); });
        double w = qd[2] + (leg == 0 ? qd[3] : qd[5]);
        if (link == 1) w += (leg == 0 ? qd[4] : qd[6]);
        ke += 0.5 * p.link_mass[link] * v.squaredNorm() +
              0.5 * p.link_inertia[link] * w * w;
      }
    CHECK(model.kinetic_energy(q, qd) == doctest::Approx(ke).epsilon(1e-6));
  }
}

TEST_CASE("coriolis matrix leaves Ddot - 2C skew symmetric") {
  const PlanarModel model(default_params());
  std::mt19937 rng(31);
  const double h = 1e-6;
  for (int t = 0; t < 10; ++t) {
    const Vec7 q = random_q(rng);
    const Vec7 qd = random_qd(rng, 1.5);
    const auto terms = model.dynamics_terms(q, qd);
    const Mat7 Ddot =
        (model.mass_matrix(q + h * qd) - model.mass_matrix(q - h * qd)) / (2 * h);
    const Mat7 N = Ddot - 2 * terms.C;
    CHECK((N + N.transpose()).cwiseAbs().maxCoeff() <= 1e-8);
  }
}

TEST_CASE("gravity vector at straight-down carries only the weight") {
  const ModelParams p = default_params();
  const PlanarModel model(p);
  Vec7 q = Vec7::Zero();
  q[1] = p.leg_length();
  const Vec7 G = model.gravity_vector(q);
  CHECK(G[0] == doctest::Approx(0.0));
  CHECK(G[1] == doctest::Approx(p.total_mass() * p.gravity));
  CHECK(G[2] == doctest::Approx(0.0).epsilon(1e-12));
  for (int i = 3; i < 7; ++i) CHECK(G[i] == doctest::Approx(0.0).epsilon(1e-12));
  // And G is the analytic potential-energy gradient everywhere.
  std::mt19937 rng(37);
  const Vec7 qr = random_q(rng);
  const Vec7 Gr = model.gravity_vector(qr);
  const double h = 1e-6;
  for (int i = 0; i < 7; ++i) {
    Vec7 qp = qr, qm = qr;
    qp[i] += h;
    qm[i] -= h;
    const double fd = (model.potential_energy(qp) - model.potential_energy(qm)) / (2 * h);
    CHECK(Gr[i] == doctest::Approx(fd).epsilon(1e-6));
  }
}

TEST_CASE("free fall accelerates the base at -g with zero rates") {
  const PlanarModel model(default_params());
  std::mt19937 rng(41);
  const Vec7 q = random_q(rng);
  Vec14 x;
  x << q, Vec7::Zero();
  const Vec14 xdot =
      model.phase_dynamics(x, Vec4::Zero(), Vec4::Zero(), JumpPhase::Flight);
  CHECK(xdot[7] == doctest::Approx(0.0).epsilon(1e-10));
  CHECK(xdot[8] == doctest::Approx(-model.params().gravity).epsilon(1e-10));
  for (int i = 9; i < 14; ++i) CHECK(xdot[i] == doctest::Approx(0.0).epsilon(1e-9));
}

TEST_CASE("force on a non-contacting leg is rejected") {
  const PlanarModel model(default_params());
  Vec14 x = Vec14::Zero();
  x[1] = 0.4;
  Vec4 T(1.0, 0, 0, 0);
  CHECK_THROWS_AS(model.phase_dynamics(x, Vec4::Zero(), T, JumpPhase::Flight),
                  NonzeroForceOnFreeLeg);
  CHECK_THROWS_AS(model.phase_dynamics(x, Vec4::Zero(), T, JumpPhase::RearFeetContact),
                  NonzeroForceOnFreeLeg);
  // Back-leg force in rear contact is fine.
  Vec4 Tb(0, 0, 1.0, 20.0);
  CHECK_NOTHROW(model.phase_dynamics(x, Vec4::Zero(), Tb, JumpPhase::RearFeetContact));
}

TEST_CASE("power balance: dE/dt equals actuator power in flight") {
  const PlanarModel model(default_params());
  std::mt19937 rng(43);
  const Vec7 q = random_q(rng);
  const Vec7 qd = random_qd(rng, 1.0);
  const Vec4 u(0.5, -1.0, 0.8, 0.3);
  Vec14 x;
  x << q, qd;
  auto energy = [&](const Vec14& s) {
    return model.kinetic_energy(s.head<7>(), s.tail<7>()) +
           model.potential_energy(s.head<7>());
  };
  auto f = [&](const Vec14& s) {
    return model.phase_dynamics(s, u, Vec4::Zero(), JumpPhase::Flight);
  };
  // RK4 micro-steps forward and back for a central estimate of dE/dt.
  auto rk4 = [&](Vec14 s, double dt) {
    const Vec14 k1 = f(s), k2 = f(s + 0.5 * dt * k1), k3 = f(s + 0.5 * dt * k2),
                k4 = f(s + dt * k3);
    return Vec14(s + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4));
  };
  const double dt = 1e-6;
  const double dEdt = (energy(rk4(x, dt)) - energy(rk4(x, -dt))) / (2 * dt);
  const double power = u.dot(qd.tail<4>());
  CHECK(dEdt == doctest::Approx(power).epsilon(1e-8));
}

TEST_CASE("static standing equilibrium has zero acceleration") {
  const ModelParams p = default_params();
  const PlanarModel model(p);
  Vec7 q = Vec7::Zero();
  q[1] = p.leg_length() * std::cos(0.35);
  q[3] = -0.35;
  q[4] = 0.70;
  q[5] = -0.35;
  q[6] = 0.70;
  // Solve B u + J^T T = G in least-squares (8 unknowns, 7 equations).
  const Vec7 G = model.gravity_vector(q);
  Eigen::Matrix<double, 7, 8> A;
  A.leftCols<4>() = PlanarModel::input_matrix();
  A.middleCols<2>(4) = model.foot_jacobian(q, Leg::Front).transpose();
  A.rightCols<2>() = model.foot_jacobian(q, Leg::Back).transpose();
  const Eigen::VectorXd sol = A.completeOrthogonalDecomposition().solve(G);
  Vec14 x;
  x << q, Vec7::Zero();
  Vec4 u = sol.head<4>();
  Vec4 T;
  T << sol.segment<2>(4), sol.tail<2>();
  const Vec14 xdot = model.phase_dynamics(x, u, T, JumpPhase::AllFeetContact);
  CHECK(xdot.tail<7>().cwiseAbs().maxCoeff() <= 1e-9);
}

TEST_CASE("unforced flight conserves energy over a half-second rollout") {
  const PlanarModel model(default_params());
  Vec7 q = Vec7::Zero();
  q[1] = 0.45;
  q[3] = -0.3;
  q[4] = 0.6;
  q[5] = 0.2;
  q[6] = 0.5;
  Vec7 qd;
  qd << 0.5, 2.0, 1.0, -0.8, 0.6, 0.4, -0.2;
  Vec14 x;
  x << q, qd;
  auto f = [&](const Vec14& s) {
    return model.phase_dynamics(s, Vec4::Zero(), Vec4::Zero(), JumpPhase::Flight);
  };
  const double e0 = model.kinetic_energy(q, qd) + model.potential_energy(q);
  const double dt = 1e-4;
  for (int i = 0; i < 5000; ++i) {
    const Vec14 k1 = f(x), k2 = f(x + 0.5 * dt * k1), k3 = f(x + 0.5 * dt * k2),
                k4 = f(x + dt * k3);
    x += dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4);
  }
  const double e1 =
      model.kinetic_energy(x.head<7>(), x.tail<7>()) + model.potential_energy(x.head<7>());
  CHECK(std::abs(e1 - e0) / std::abs(e0) <= 1e-5);
}

TEST_CASE("dynamics terms are translation invariant") {
  const PlanarModel model(default_params());
  std::mt19937 rng(47);
  const Vec7 q = random_q(rng);
  const Vec7 qd = random_qd(rng);
  Vec7 q2 = q;
  q2[0] += 3.7;
  q2[1] += -1.2;
  const auto t1 = model.dynamics_terms(q, qd);
  const auto t2 = model.dynamics_terms(q2, qd);
  CHECK((t1.D - t2.D).cwiseAbs().maxCoeff() <= 1e-12);
  CHECK((t1.C - t2.C).cwiseAbs().maxCoeff() <= 1e-12);
  CHECK((t1.G - t2.G).cwiseAbs().maxCoeff() <= 1e-12);
  CHECK((t1.B - t2.B).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("inverse dynamics residual is consistent with phase_dynamics") {
  const PlanarModel model(default_params());
  std::mt19937 rng(53);
  for (int t = 0; t < 10; ++t) {
    const Vec7 q = random_q(rng);
    const Vec7 qd = random_qd(rng, 2.0);
    const Vec4 u(1.0, -2.0, 0.5, 1.5);
    const Vec4 T(3.0, 40.0, -2.0, 35.0);
    Vec14 x;
    x << q, qd;
    const Vec14 xdot = model.phase_dynamics(x, u, T, JumpPhase::AllFeetContact);
    const Vec7 a = xdot.tail<7>();
    double res[7];
    model.dynamics_residual(q.data(), qd.data(), a.data(), u.data(), T.data(),
                            T.data() + 2, res);
    for (int i = 0; i < 7; ++i) CHECK(std::abs(res[i]) < 1e-9);
  }
}

TEST_CASE("dual-scalar dynamics residual differentiates cleanly") {
  const PlanarModel model(default_params());
  std::mt19937 rng(59);
  const Vec7 q = random_q(rng);
  const Vec7 qd = random_qd(rng);
  const Vec7 a = random_qd(rng, 10.0);
  // Pack locals [q, qd, a] and compare the AD Jacobian of the residual in a
  // couple of directions against finite differences.
  auto eval = [&](const auto* x, auto* r) {
    model.dynamics_residual(x, x + 7, x + 14, x + 14, nullptr, nullptr, r);
  };
  double xl[21];
  for (int i = 0; i < 7; ++i) {
    xl[i] = q[i];
    xl[7 + i] = qd[i];
    xl[14 + i] = a[i];
  }
  double r0[7], J[7 * 21];
  jumpnav::ad::eval_jacobian(eval, xl, 21, 7, r0, J);
  const double h = 1e-6;
  for (int col = 0; col < 21; col += 5) {
    double xp[21], xm[21];
    std::copy(xl, xl + 21, xp);
    std::copy(xl, xl + 21, xm);
    xp[col] += h;
    xm[col] -= h;
    double rp[7], rm[7];
    eval(xp, rp);
    eval(xm, rm);
    for (int row = 0; row < 7; ++row) {
      const double fd = (rp[row] - rm[row]) / (2 * h);
      CHECK(J[row * 21 + col] == doctest::Approx(fd).epsilon(1e-5));
    }
  }
}

TEST_CASE("singular mass matrix guard reacts to the configured bound") {
  ModelParams p = default_params();
  p.mass_matrix_condition_limit = 10.0;  // absurdly tight: must trip
  const PlanarModel strict(p);
  CHECK_THROWS_AS(strict.dynamics_terms(Vec7::Zero(), Vec7::Zero()), SingularMassMatrix);
  const PlanarModel normal(default_params());
  CHECK_NOTHROW(normal.dynamics_terms(Vec7::Zero(), Vec7::Zero()));
}

TEST_CASE("parameter validation rejects broken configs") {
  ModelParams p = default_params();
  p.body_mass = -1;
  CHECK_THROWS_AS(p.validate(), InvalidParams);
  p = default_params();
  p.friction_mu = 2.5;
  CHECK_THROWS_AS(p.validate(), InvalidParams);
  p = default_params();
  p.contact_force_z_min = 600;
  CHECK_THROWS_AS(p.validate(), InvalidParams);
  CHECK_NOTHROW(default_params().validate());
}
