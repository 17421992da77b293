#pragma once

// Multi-phase trapezoidal collocation for a window jump. Four phases (all
// feet, rear feet, flight, landing) with per-phase node grids and free stance
// and flight durations; decision variables are the state, its derivative,
// joint torques and ground forces at every node, plus one bounding box
// (w, h, gamma) and one dual pair (lambda, mu) per obstacle half at every
// clearance-constrained node. Contact structure is built in: flight nodes
// carry no force variables and rear-contact nodes none for the front leg.

#include <jumpnav/collision.hpp>
#include <jumpnav/ip_solver.hpp>
#include <jumpnav/kv_config.hpp>
#include <jumpnav/nlp.hpp>
#include <jumpnav/planar_model.hpp>
#include <jumpnav/trajectory.hpp>

#include <Eigen/Core>
#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace jumpnav {

struct PhaseGrid {
  std::array<int, 4> intervals = {15, 15, 25, 10};         // N_i, nodes per phase = N_i + 1
  std::array<double, 4> duration_lo = {0.1, 0.1, 0.1, 0.3};  // [s]
  std::array<double, 4> duration_hi = {0.8, 0.8, 0.8, 0.3};  // equal bounds pin a duration

  int total_intervals() const {
    return intervals[0] + intervals[1] + intervals[2] + intervals[3];
  }
  int total_slots() const { return total_intervals() + 4; }
  void validate() const;  // throws InconsistentProblem
};

struct CostWeights {
  Mat7 terminal = Mat7::Zero();           // (q_final - q0)^T P (q_final - q0), q_x weight 0
  Mat7 velocity = Mat7::Identity() * 0.01;
  Mat7 acceleration = Mat7::Identity() * 1e-4;
  Eigen::Matrix4d force = Eigen::Matrix4d::Identity() * 1e-5;
  Eigen::Matrix4d torque = Eigen::Matrix4d::Identity() * 1e-3;
  double stance_time = 20.0, rear_time = 20.0;  // linear cost on phase 1 and 2 durations
  double contact_relax = 100.0;                 // per rear-phase node, times delta
  double box_size = 1.0;                        // times (w^2 + h^2) per constrained node

  CostWeights();
  void validate() const;
};

struct JumpProblem {
  ModelParams params;
  PhaseGrid grid;
  CostWeights weights;
  Vec14 x0 = Vec14::Zero();  // standing start, must be a static equilibrium
  Vec7 q0 = Vec7::Zero();    // configuration reference for the terminal cost
  WindowObstacle obstacle;
  double d_min = 0.03;
  double landing_mu_scale = 0.6;
  int avoid_before = 3;  // trailing rear-phase nodes with clearance constraints
  int avoid_after = 3;   // leading landing nodes with clearance constraints
  double eps_strict = 1e-6;
  double delta_max = 0.05;
  double box_extent_max = 1.5;
  double dual_max = 100.0;

  // Throws InconsistentProblem when x0 is not a standing equilibrium within
  // tolerance or violates joint limits.
  void validate() const;
};

// Index map of one node slot in the decision vector. T is -1 for flight
// slots; rear-contact slots own two force components (back leg only).
struct SlotLayout {
  JumpPhase phase = JumpPhase::AllFeetContact;
  int k = 0;        // node index within the phase, 0..N_i
  int q = -1, qd = -1, a = -1, u = -1, T = -1;
  int n_forces = 0;
  bool constrained = false;
  int w = -1, h = -1, gamma = -1;            // gamma: 24 = 6 keypoints x 4 corners
  std::array<int, 2> lambda = {-1, -1};      // per obstacle half (lower, upper)
  std::array<int, 2> mu = {-1, -1};
};

struct JumpLayout {
  std::array<int, 4> duration = {-1, -1, -1, -1};
  int delta = -1;
  std::vector<SlotLayout> slots;             // concatenated phases, boundaries duplicated
  std::array<int, 4> phase_begin = {0, 0, 0, 0};  // first slot of each phase
  int n_vars = 0;

  const SlotLayout& slot(int phase, int k) const { return slots[phase_begin[phase] + k]; }
};

struct AssembledJump {
  Nlp nlp;
  JumpLayout layout;
};

// Builds the full NLP: defect and dynamics equalities, contact kinematics,
// friction cones, force bounds, the rear-foot height relaxation, keypoint
// convex-hull and dual separation rows per constrained node, terminal
// land-past bound and phase-boundary continuity. Throws InconsistentProblem.
AssembledJump assemble(const JumpProblem& problem);

// Decision vector <-> trajectory, an exact bijection over the layout.
Eigen::VectorXd pack(const JumpLayout& layout, const JumpTrajectory& traj);
JumpTrajectory unpack(const JumpLayout& layout, const Eigen::VectorXd& x);

// Total cost of a trajectory by direct summation, same formula the NLP cost
// blocks implement: terminal + per-node stage terms + duration + relaxation
// + box size.
double evaluate_cost(const JumpTrajectory& traj, const CostWeights& weights,
                     const PhaseGrid& grid, const Vec7& q0);

// Heuristic warm start: crouch, launch, ballistic arc with tucked legs, land.
// attempt > 0 perturbs the key poses deterministically from the seed.
JumpTrajectory initial_guess(const JumpProblem& problem, int attempt = 0,
                             std::uint64_t seed = 0);

struct JumpSolveOptions {
  int max_iterations = 600;
  double tol = 1e-8;
  double constraint_tol = 1e-6;
  int multi_start = 1;
  std::uint64_t seed = 0;
  double time_limit_s = 280.0;
  int verbosity = 0;

  static JumpSolveOptions from_config(const KvConfig& cfg);
};

// Solves the NLP and certifies the result: defect and dynamics residuals,
// terminal bound, and an oracle polygon-distance check of every constrained
// node against both obstacle halves (>= d_min - 1e-5, independent of the
// duals). Throws InfeasibleJump or OptimizationTimeout.
JumpTrajectory solve(const JumpProblem& problem, const JumpSolveOptions& options = {});

// Standing pose helpers: symmetric knee-bent configuration with both feet
// directly below their hips at the given base height, and its equilibrium
// torque/force pair.
Vec7 standing_pose(const ModelParams& params, double base_height, double base_x = 0.0);
void standing_equilibrium(const PlanarModel& model, const Vec7& q, Vec4* u, Vec4* forces,
                          double* residual);

// Two-link leg inverse kinematics: joint angles (hip, knee) placing the foot
// at a world target given the base pose, knee bending positive. The target is
// clamped to the reachable annulus and the result to the joint limits.
Vec2 leg_ik(const ModelParams& params, const Vec7& base_pose, Leg leg, const Vec2& foot_target);

// Conservative reachability screen: compares the potential energy needed to
// lift the box center over the lintel sill against the best-case launch work
// the force and torque limits allow. Returns a reason string when the jump is
// provably out of reach, empty otherwise.
std::string ballistic_bound_reason(const JumpProblem& problem);

}  // namespace jumpnav
