#pragma once

// Discrete jump trajectory: the collocation nodes of a solved four-phase jump
// (all feet, rear feet, flight, landing) on a concatenated timeline. Phase
// boundary nodes are duplicated with identical (q, qdot) and their own inputs
// and accelerations, so piecewise-linear resampling is right-continuous at
// the boundary instants.

#include <jumpnav/planar_model.hpp>

#include <Eigen/Core>
#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace jumpnav {

struct TrajectoryNode {
  double t = 0.0;
  JumpPhase phase = JumpPhase::AllFeetContact;
  Vec7 q = Vec7::Zero();
  Vec7 qd = Vec7::Zero();
  Vec7 qdd = Vec7::Zero();          // velocity-derivative half of xdot
  Vec4 u = Vec4::Zero();            // joint torques (F1, F2, B1, B2)
  Vec4 force = Vec4::Zero();        // ground forces (Fx, Fz, Bx, Bz), zero off contact
  bool constrained = false;         // carries bounding box and dual variables
  double w = 0.0, h = 0.0;          // bounding box extents
  Eigen::Matrix<double, 6, 4> gamma = Eigen::Matrix<double, 6, 4>::Zero();
  Vec4 lambda_lower = Vec4::Zero(), mu_lower = Vec4::Zero();
  Vec4 lambda_upper = Vec4::Zero(), mu_upper = Vec4::Zero();
  double clearance = 0.0;           // post-hoc oracle distance to the nearer obstacle half

  Vec14 state() const {
    Vec14 x;
    x << q, qd;
    return x;
  }
  Vec14 state_derivative() const {
    Vec14 xd;
    xd << qd, qdd;
    return xd;
  }
};

struct SolverReport {
  double objective = 0.0;
  double kkt_error = 0.0;
  double constraint_violation = 0.0;
  int iterations = 0;
  bool converged = false;
  std::string message;
};

struct JumpTrajectory {
  std::vector<TrajectoryNode> nodes;            // all phases concatenated, boundaries duplicated
  std::array<double, 4> phase_duration = {0, 0, 0, 0};
  std::array<int, 4> phase_begin = {0, 0, 0, 0};  // first node index of each phase
  double delta = 0.0;                             // rear-foot height relaxation
  SolverReport report;

  double duration() const {
    return phase_duration[0] + phase_duration[1] + phase_duration[2] + phase_duration[3];
  }
  double phase_start_time(int phase) const {
    double t = 0.0;
    for (int i = 0; i < phase; ++i) t += phase_duration[i];
    return t;
  }
};

// One interpolated sample of the dense reference consumed by the tracking
// controller: desired configuration, velocity, feedforward torque and ground
// force, plus the phase tag governing gain scheduling.
struct ReferenceSample {
  double t = 0.0;
  JumpPhase phase = JumpPhase::AllFeetContact;
  Vec7 q = Vec7::Zero();
  Vec7 qd = Vec7::Zero();
  Vec4 u = Vec4::Zero();
  Vec4 force = Vec4::Zero();
};

// Piecewise-linear interpolation at uniform timestamps t_j = j / rate_hz,
// j = 0 .. floor(duration * rate_hz). Node timestamps, including the
// duplicated phase boundaries, are reproduced exactly; at a boundary instant
// the later phase wins.
std::vector<ReferenceSample> resample(const JumpTrajectory& traj, double rate_hz);

// Interpolate at one timestamp (clamped to [0, duration]).
ReferenceSample sample_at(const JumpTrajectory& traj, double t);

// Columnar text export: one row per node with columns
//   time phase q(7) qd(7) u(4) force(4) w h clearance
// preceded by a commented header carrying the config hash, phase durations,
// the relaxation delta and the solver report. Round trips through
// load_trajectory except for fields not in the column set (qdd, gamma, duals).
void save_trajectory(const JumpTrajectory& traj, const std::string& path,
                     std::uint64_t config_hash);
std::string trajectory_to_string(const JumpTrajectory& traj, std::uint64_t config_hash);
JumpTrajectory load_trajectory(const std::string& path, std::uint64_t* config_hash = nullptr);
JumpTrajectory trajectory_from_string(const std::string& text,
                                      std::uint64_t* config_hash = nullptr);

}  // namespace jumpnav
