#include <jumpnav/collision.hpp>

#include <jumpnav/ip_solver.hpp>

#include <algorithm>
#include <cmath>

namespace jumpnav {

namespace {

void validate_polygon(const std::vector<Vec2>& p, const char* which) {
  if (p.size() < 3)
    throw MalformedPolygon(std::string(which) + ": need at least 3 vertices");
  double sign = 0.0;
  const int n = static_cast<int>(p.size());
  for (int i = 0; i < n; ++i) {
    if (!p[i].allFinite()) throw MalformedPolygon(std::string(which) + ": non-finite vertex");
    const Vec2 e0 = p[(i + 1) % n] - p[i];
    const Vec2 e1 = p[(i + 2) % n] - p[(i + 1) % n];
    const double cross = e0.x() * e1.y() - e0.y() * e1.x();
    if (std::abs(cross) < 1e-12) continue;  // collinear run is fine
    if (sign == 0.0)
      sign = cross;
    else if (sign * cross < 0.0)
      throw MalformedPolygon(std::string(which) + ": not convex");
  }
  if (sign == 0.0) throw MalformedPolygon(std::string(which) + ": zero area");
}

double point_segment_distance(const Vec2& p, const Vec2& a, const Vec2& b) {
  const Vec2 ab = b - a;
  const double len2 = ab.squaredNorm();
  const double t = len2 > 0 ? std::clamp((p - a).dot(ab) / len2, 0.0, 1.0) : 0.0;
  return (p - (a + t * ab)).norm();
}

double segment_segment_distance(const Vec2& a0, const Vec2& a1, const Vec2& b0,
                                const Vec2& b1) {
  // Convex polygons that pass the separating-axis test never cross edges, so
  // endpoint-to-segment distances cover the minimum.
  return std::min(std::min(point_segment_distance(a0, b0, b1),
                           point_segment_distance(a1, b0, b1)),
                  std::min(point_segment_distance(b0, a0, a1),
                           point_segment_distance(b1, a0, a1)));
}

bool separated_on_some_axis(const std::vector<Vec2>& pa, const std::vector<Vec2>& pb) {
  auto test_axes = [](const std::vector<Vec2>& edges_of, const std::vector<Vec2>& a,
                      const std::vector<Vec2>& b) {
    const int n = static_cast<int>(edges_of.size());
    for (int i = 0; i < n; ++i) {
      const Vec2 e = edges_of[(i + 1) % n] - edges_of[i];
      const Vec2 axis(-e.y(), e.x());
      if (axis.squaredNorm() < 1e-24) continue;
      double amin = kInf, amax = -kInf, bmin = kInf, bmax = -kInf;
      for (const Vec2& v : a) {
        const double t = axis.dot(v);
        amin = std::min(amin, t);
        amax = std::max(amax, t);
      }
      for (const Vec2& v : b) {
        const double t = axis.dot(v);
        bmin = std::min(bmin, t);
        bmax = std::max(bmax, t);
      }
      if (amax < bmin || bmax < amin) return true;
    }
    return false;
  };
  return test_axes(pa, pa, pb) || test_axes(pb, pa, pb);
}

}  // namespace

ConvexRegion ConvexRegion::rectangle(const Vec2& center, double half_x, double half_z) {
  if (!(half_x > 0) || !(half_z > 0))
    throw MalformedPolygon("rectangle needs positive extents");
  ConvexRegion r;
  r.A.resize(4, 2);
  r.A << 1, 0, -1, 0, 0, 1, 0, -1;
  r.b.resize(4);
  r.b << center.x() + half_x, -center.x() + half_x, center.y() + half_z,
      -center.y() + half_z;
  r.verts = {center + Vec2(half_x, -half_z), center + Vec2(half_x, half_z),
             center + Vec2(-half_x, half_z), center + Vec2(-half_x, -half_z)};
  return r;
}

bool ConvexRegion::contains(const Vec2& y, double tol) const {
  return ((A * y - b).array() <= tol).all();
}

WindowObstacle WindowObstacle::make(double x_obs, double sill_top_z, double opening_height,
                                    double ceiling_z, double half_thickness,
                                    double ground_z) {
  if (!(opening_height > 0)) throw MalformedPolygon("window opening must be positive");
  if (sill_top_z < ground_z) throw MalformedPolygon("sill top below the ground");
  const double lintel_bottom = sill_top_z + opening_height;
  if (!(ceiling_z > lintel_bottom)) throw MalformedPolygon("lintel has no height");
  WindowObstacle w;
  w.x_obs = x_obs;
  w.opening_height = opening_height;
  // A zero-height sill leaves the lower half empty: the cut is only bounded
  // from above.
  if (sill_top_z > ground_z)
    w.lower = ConvexRegion::rectangle(Vec2(x_obs, 0.5 * (ground_z + sill_top_z)),
                                      half_thickness, 0.5 * (sill_top_z - ground_z));
  w.upper = ConvexRegion::rectangle(Vec2(x_obs, 0.5 * (lintel_bottom + ceiling_z)),
                                    half_thickness, 0.5 * (ceiling_z - lintel_bottom));
  return w;
}

const Eigen::Matrix<double, 4, 2>& BoundingBox::L() {
  static const Eigen::Matrix<double, 4, 2> l = [] {
    Eigen::Matrix<double, 4, 2> m;
    m << 1, 0, -1, 0, 0, 1, 0, -1;
    return m;
  }();
  return l;
}

Mat2 BoundingBox::rotation() const { return Eigen::Rotation2Dd(pitch).toRotationMatrix(); }

Vec2 BoundingBox::corner_sign(int j) {
  static const double sx[4] = {1, -1, -1, 1};
  static const double sz[4] = {1, 1, -1, -1};
  return Vec2(sx[j], sz[j]);
}

std::array<Vec2, 4> BoundingBox::vertices() const {
  const Mat2 R = rotation();
  std::array<Vec2, 4> v;
  for (int j = 0; j < 4; ++j) {
    const Vec2 s = corner_sign(j);
    v[j] = P + R * Vec2(s.x() * w / 2, s.y() * h / 2);
  }
  return v;
}

BoxFitProblem bounding_box_from_keypoints(const std::array<Vec2, 6>& keypoints, double pitch) {
  BoxFitProblem fit;
  fit.pitch = pitch;
  fit.keypoints = keypoints;
  Vec2 mean = Vec2::Zero();
  for (const Vec2& p : keypoints) mean += p;
  fit.P = mean / 6.0;
  double spread = 0.0;
  for (const Vec2& p : keypoints) spread = std::max(spread, (p - fit.P).norm());
  if (spread < 1e-12) throw DegenerateKeypoints();
  return fit;
}

std::pair<double, double> min_box_extents(const BoxFitProblem& fit) {
  const Mat2 Rt = Eigen::Rotation2Dd(-fit.pitch).toRotationMatrix();
  double ex = 0.0, ez = 0.0;
  for (const Vec2& p : fit.keypoints) {
    const Vec2 d = Rt * (p - fit.P);
    ex = std::max(ex, std::abs(d.x()));
    ez = std::max(ez, std::abs(d.y()));
  }
  return {2 * ex, 2 * ez};
}

BoxFitProblem::Vars BoxFitProblem::add_to(Nlp& nlp) const {
  Vars v;
  v.w = nlp.add_variable("box_w", 0.0, kInf, 0.5);
  v.h = nlp.add_variable("box_h", 0.0, kInf, 0.5);
  v.gamma0 = nlp.add_variables(24, "gamma");
  for (int i = 0; i < 24; ++i) {
    nlp.set_bounds(v.gamma0 + i, 0.0, kInf);
    nlp.set_start(v.gamma0 + i, 0.25);
  }
  const double c = std::cos(pitch), s = std::sin(pitch);
  for (int i = 0; i < 6; ++i) {
    const Vec2 target = keypoints[i];
    const Vec2 center = P;
    nlp.add_equality(
        {v.w, v.h, v.gamma0 + 4 * i + 0, v.gamma0 + 4 * i + 1, v.gamma0 + 4 * i + 2,
         v.gamma0 + 4 * i + 3},
        2,
        [target, center, c, s](const auto* x, auto* r) {
          using S = std::decay_t<decltype(x[0])>;
          S rx(0.0), rz(0.0);
          for (int j = 0; j < 4; ++j) {
            const Vec2 sj = BoundingBox::corner_sign(j);
            const S bx = x[0] * (0.5 * sj.x());  // corner in the box frame
            const S bz = x[1] * (0.5 * sj.y());
            rx += x[2 + j] * (center.x() + c * bx - s * bz);
            rz += x[2 + j] * (center.y() + s * bx + c * bz);
          }
          r[0] = rx - target.x();
          r[1] = rz - target.y();
        },
        "keypoint_fit[" + std::to_string(i) + "]");
    nlp.add_equality(
        {v.gamma0 + 4 * i + 0, v.gamma0 + 4 * i + 1, v.gamma0 + 4 * i + 2,
         v.gamma0 + 4 * i + 3},
        1,
        [](const auto* x, auto* r) { r[0] = x[0] + x[1] + x[2] + x[3] - 1.0; },
        "gamma_sum[" + std::to_string(i) + "]", /*linear=*/true);
  }
  return v;
}

AvoidanceVars add_dual_avoidance(Nlp& nlp, const AvoidanceVars& vars, double pitch,
                                 const ConvexRegion& obs, double d_min, double eps_strict) {
  AvoidanceVars v = vars;
  const int nf = static_cast<int>(obs.A.rows());
  v.lambda0 = nlp.add_variables(nf, "lambda");
  v.mu0 = nlp.add_variables(4, "mu");
  for (int i = 0; i < nf; ++i) nlp.set_bounds(v.lambda0 + i, 0.0, kInf);
  for (int i = 0; i < 4; ++i) nlp.set_bounds(v.mu0 + i, 0.0, kInf);

  std::vector<int> margin_vars = {v.px, v.pz, v.w, v.h};
  for (int i = 0; i < nf; ++i) margin_vars.push_back(v.lambda0 + i);
  for (int i = 0; i < 4; ++i) margin_vars.push_back(v.mu0 + i);
  nlp.add_lower_bounded(
      margin_vars, {d_min + eps_strict},
      [obs, nf](const auto* x, auto* r) {
        r[0] = dual_separation_value(obs, x[0], x[1], x[2], x[3], x + 4, x + 4 + nf);
      },
      "avoid_margin");

  std::vector<int> frame_vars;
  for (int i = 0; i < nf; ++i) frame_vars.push_back(v.lambda0 + i);
  for (int i = 0; i < 4; ++i) frame_vars.push_back(v.mu0 + i);
  nlp.add_equality(
      frame_vars, 2,
      [obs, nf, pitch](const auto* x, auto* r) {
        using S = std::decay_t<decltype(x[0])>;
        dual_frame_rows(obs, S(pitch), x, x + nf, r);
      },
      "dual_frame", /*linear=*/true);

  std::vector<int> lam_vars;
  for (int i = 0; i < nf; ++i) lam_vars.push_back(v.lambda0 + i);
  const double cap = (1.0 - eps_strict) * (1.0 - eps_strict);
  nlp.add_constraint(
      lam_vars, {-kInf}, {cap},
      [obs](const auto* x, auto* r) { r[0] = dual_norm_sq(obs, x); }, "dual_norm");
  return v;
}

double signed_distance_oracle(const std::vector<Vec2>& pa, const std::vector<Vec2>& pb) {
  validate_polygon(pa, "first polygon");
  validate_polygon(pb, "second polygon");
  if (!separated_on_some_axis(pa, pb)) return 0.0;
  double best = kInf;
  const int na = static_cast<int>(pa.size());
  const int nb = static_cast<int>(pb.size());
  for (int i = 0; i < na; ++i)
    for (int j = 0; j < nb; ++j)
      best = std::min(best, segment_segment_distance(pa[i], pa[(i + 1) % na], pb[j],
                                                     pb[(j + 1) % nb]));
  return best;
}

DualSeparationResult max_dual_separation(const BoundingBox& box, const ConvexRegion& obs,
                                         double eps_strict) {
  const int nf = static_cast<int>(obs.A.rows());
  Nlp nlp;
  const int lam = nlp.add_variables(nf, "lambda");
  const int mu = nlp.add_variables(4, "mu");
  for (int i = 0; i < nf; ++i) nlp.set_bounds(lam + i, 0.0, kInf);
  for (int i = 0; i < 4; ++i) nlp.set_bounds(mu + i, 0.0, kInf);

  std::vector<int> all;
  for (int i = 0; i < nf + 4; ++i) all.push_back(i);
  const double px = box.P.x(), pz = box.P.y(), w = box.w, h = box.h;
  nlp.add_cost(all, [obs, nf, px, pz, w, h](const auto* x, auto* r) {
    using S = std::decay_t<decltype(x[0])>;
    r[0] = -dual_separation_value(obs, S(px), S(pz), S(w), S(h), x, x + nf);
  });
  nlp.add_equality(
      all, 2,
      [obs, nf, pitch = box.pitch](const auto* x, auto* r) {
        using S = std::decay_t<decltype(x[0])>;
        dual_frame_rows(obs, S(pitch), x, x + nf, r);
      },
      "dual_frame", /*linear=*/true);
  std::vector<int> lam_vars;
  for (int i = 0; i < nf; ++i) lam_vars.push_back(lam + i);
  const double cap = (1.0 - eps_strict) * (1.0 - eps_strict);
  nlp.add_constraint(
      lam_vars, {-kInf}, {cap},
      [obs](const auto* x, auto* r) { r[0] = dual_norm_sq(obs, x); }, "dual_norm");

  IpOptions opt;
  opt.verbosity = 0;
  const IpResult res = ip_solve(nlp, opt);
  DualSeparationResult out;
  out.converged = res.ok();
  out.value = -res.f;
  out.duals.lambda = res.x.head(nf);
  out.duals.mu = res.x.segment(nf, 4);
  return out;
}

std::optional<DualVariables> find_dual_witness(const BoundingBox& box, const ConvexRegion& obs,
                                               double d_min, double eps_strict) {
  const DualSeparationResult r = max_dual_separation(box, obs, eps_strict);
  if (!r.converged || r.value < d_min + eps_strict) return std::nullopt;
  return r.duals;
}

}  // namespace jumpnav
