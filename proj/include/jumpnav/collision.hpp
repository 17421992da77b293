#pragma once

// Convex geometry for jump clearance. The robot is wrapped in a pitched
// rectangle with free width and height; obstacles are world-frame rectangles
// in half-plane form. Separation is enforced through the dual form of the
// minimum-distance problem, which stays smooth in the box pose, so the rows
// drop straight into the trajectory NLP. A brute-force polygon distance
// lives alongside as an independent check on the dual certificates.

#include <jumpnav/errors.hpp>
#include <jumpnav/nlp.hpp>
#include <jumpnav/planar_model.hpp>

#include <Eigen/Dense>
#include <array>
#include <optional>
#include <vector>

namespace jumpnav {

// {y : A y <= b} with unit-norm rows, plus the matching vertex loop for the
// brute-force distance path. Every instance here is a bounded rectangle.
struct ConvexRegion {
  Eigen::Matrix<double, Eigen::Dynamic, 2> A;
  Eigen::VectorXd b;
  std::vector<Vec2> verts;  // counter-clockwise

  static ConvexRegion rectangle(const Vec2& center, double half_x, double half_z);
  bool contains(const Vec2& y, double tol = 1e-12) const;
  // A default-constructed region is empty and produces no constraint rows.
  bool empty() const { return A.rows() == 0; }
};

// Sill and lintel of a window cut: two disjoint rectangles sharing an
// x-station, with a clear vertical opening between them.
struct WindowObstacle {
  ConvexRegion lower;
  ConvexRegion upper;
  double x_obs = 0.0;
  double opening_height = 0.0;

  // sill_top_z: top edge of the lower block; the lintel spans from
  // sill_top_z + opening_height up to ceiling_z.
  static WindowObstacle make(double x_obs, double sill_top_z, double opening_height,
                             double ceiling_z, double half_thickness, double ground_z = 0.0);
};

// Pitched rectangle E = R(pitch) * B + P with B = {y : L y <= l(w,h)},
// L fixed at (+x, -x, +z, -z) rows and l = (w/2, w/2, h/2, h/2). Putting the
// size dependence in l keeps every NLP row polynomial in (w, h).
struct BoundingBox {
  Vec2 P = Vec2::Zero();
  double pitch = 0.0;
  double w = 0.0;
  double h = 0.0;

  static const Eigen::Matrix<double, 4, 2>& L();
  Eigen::Vector4d l() const { return Eigen::Vector4d(w / 2, w / 2, h / 2, h / 2); }
  Mat2 rotation() const;
  // Corner j in the box frame carries signs corner_sign(j) * (w/2, h/2);
  // order (+,+), (-,+), (-,-), (+,-) walks the rectangle counter-clockwise.
  static Vec2 corner_sign(int j);
  std::array<Vec2, 4> vertices() const;
};

struct DualVariables {
  Eigen::VectorXd lambda;  // one per obstacle face, >= 0
  Eigen::VectorXd mu;      // one per box face, >= 0
};

// Separation margin certified by (lambda, mu):
//   -l(w,h)^T mu + (A P - b)^T lambda
// Any feasible pair bounds the true box-obstacle distance from below.
template <class S>
S dual_separation_value(const ConvexRegion& obs, const S& px, const S& pz, const S& w,
                        const S& h, const S* lambda, const S* mu) {
  S v = -(mu[0] + mu[1]) * (w * 0.5) - (mu[2] + mu[3]) * (h * 0.5);
  for (int i = 0; i < obs.A.rows(); ++i)
    v += (obs.A(i, 0) * px + obs.A(i, 1) * pz - obs.b[i]) * lambda[i];
  return v;
}

// Frame-alignment rows L^T mu + R(pitch)^T A^T lambda = 0 (2 rows).
template <class S>
void dual_frame_rows(const ConvexRegion& obs, const S& pitch, const S* lambda, const S* mu,
                     S* out) {
  S ax = mu[0] - mu[1];  // L^T mu
  S az = mu[2] - mu[3];
  S wx = lambda[0] * obs.A(0, 0);
  S wz = lambda[0] * obs.A(0, 1);
  for (int i = 1; i < obs.A.rows(); ++i) {
    wx += lambda[i] * obs.A(i, 0);
    wz += lambda[i] * obs.A(i, 1);
  }
  const S c = cos(pitch), s = sin(pitch);
  out[0] = ax + c * wx + s * wz;
  out[1] = az - s * wx + c * wz;
}

// Squared Euclidean norm of A^T lambda; the dual needs it <= 1.
template <class S>
S dual_norm_sq(const ConvexRegion& obs, const S* lambda) {
  S wx = lambda[0] * obs.A(0, 0);
  S wz = lambda[0] * obs.A(0, 1);
  for (int i = 1; i < obs.A.rows(); ++i) {
    wx += lambda[i] * obs.A(i, 0);
    wz += lambda[i] * obs.A(i, 1);
  }
  return wx * wx + wz * wz;
}

// Box fit around the six model key points: center pinned to their mean,
// each point written as a convex combination of the four box corners. The
// fit itself is left to the solver; this only assembles structure.
struct BoxFitProblem {
  Vec2 P = Vec2::Zero();
  double pitch = 0.0;
  std::array<Vec2, 6> keypoints{};

  struct Vars {
    int w = -1;
    int h = -1;
    int gamma0 = -1;  // 6x4 row-major block of convex weights
  };
  // Adds w, h, gamma variables plus the membership equalities and the
  // weight-sum rows. Caller supplies the cost (typically w^2 + h^2).
  Vars add_to(Nlp& nlp) const;
};

BoxFitProblem bounding_box_from_keypoints(const std::array<Vec2, 6>& keypoints, double pitch);

// Smallest (w, h) that still covers the key points at this pitch and center:
// rotate into the box frame and take the largest coordinate excursions.
std::pair<double, double> min_box_extents(const BoxFitProblem& fit);

// Appends the dual separation rows in (px, pz, w, h, lambda, mu) for one
// obstacle. Strict inequalities are closed with eps_strict of slack; lambda
// and mu carry plain >= 0 bounds.
struct AvoidanceVars {
  int px = -1, pz = -1, w = -1, h = -1;
  int lambda0 = -1, mu0 = -1;
};
AvoidanceVars add_dual_avoidance(Nlp& nlp, const AvoidanceVars& vars, double pitch,
                                 const ConvexRegion& obs, double d_min,
                                 double eps_strict = 1e-6);

// Euclidean separation of two convex polygons (0 when they intersect),
// by separating-axis intersection test plus brute force over edge pairs.
// Independent of the dual machinery above by construction.
double signed_distance_oracle(const std::vector<Vec2>& pa, const std::vector<Vec2>& pb);

// Best certified margin for a fixed box: maximizes the dual objective from a
// cold start. Returns the achieved value and the maximizing multipliers.
struct DualSeparationResult {
  double value = 0.0;
  DualVariables duals;
  bool converged = false;
};
DualSeparationResult max_dual_separation(const BoundingBox& box, const ConvexRegion& obs,
                                         double eps_strict = 1e-6);

// Convenience wrapper: a witness proving distance(box, obs) >= d_min, if the
// margin is actually attainable.
std::optional<DualVariables> find_dual_witness(const BoundingBox& box, const ConvexRegion& obs,
                                               double d_min, double eps_strict = 1e-6);

}  // namespace jumpnav
