#include <jumpnav/trajectory.hpp>

#include <jumpnav/errors.hpp>

#include <algorithm>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace jumpnav {

namespace {

ReferenceSample lerp(const TrajectoryNode& a, const TrajectoryNode& b, double t) {
  const double dt = b.t - a.t;
  const double s = dt > 0.0 ? (t - a.t) / dt : 0.0;
  ReferenceSample out;
  out.t = t;
  out.phase = a.phase;
  out.q = a.q + s * (b.q - a.q);
  out.qd = a.qd + s * (b.qd - a.qd);
  out.u = a.u + s * (b.u - a.u);
  out.force = a.force + s * (b.force - a.force);
  return out;
}

void append(std::string& s, double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), " %.17g", v);
  s += buf;
}

}  // namespace

ReferenceSample sample_at(const JumpTrajectory& traj, double t) {
  if (traj.nodes.empty()) throw ParseError("empty trajectory");
  if (traj.nodes.size() == 1) return lerp(traj.nodes[0], traj.nodes[0], traj.nodes[0].t);
  t = std::clamp(t, traj.nodes.front().t, traj.nodes.back().t);
  // The segment starts at the last node with t_k <= t, so the later of two
  // duplicated boundary nodes wins at the boundary instant.
  std::size_t k = 0;
  while (k + 2 < traj.nodes.size() && traj.nodes[k + 1].t <= t) ++k;
  return lerp(traj.nodes[k], traj.nodes[k + 1], t);
}

std::vector<ReferenceSample> resample(const JumpTrajectory& traj, double rate_hz) {
  if (rate_hz <= 0.0) throw ParseError("resample rate must be positive");
  const double duration = traj.duration();
  const int count = static_cast<int>(std::floor(duration * rate_hz + 1e-9)) + 1;
  std::vector<ReferenceSample> out;
  out.reserve(static_cast<std::size_t>(count));
  std::size_t k = 0;  // segment cursor, advanced monotonically
  for (int j = 0; j < count; ++j) {
    const double t = static_cast<double>(j) / rate_hz;
    while (k + 2 < traj.nodes.size() && traj.nodes[k + 1].t <= t) ++k;
    out.push_back(lerp(traj.nodes[k], traj.nodes[k + 1 < traj.nodes.size() ? k + 1 : k], t));
  }
  return out;
}

std::string trajectory_to_string(const JumpTrajectory& traj, std::uint64_t config_hash) {
  std::string s;
  s.reserve(traj.nodes.size() * 600 + 1024);
  s += "# jump trajectory v1\n";
  {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "# config_hash %016" PRIx64 "\n", config_hash);
    s += buf;
  }
  s += "# phase_duration";
  for (double T : traj.phase_duration) append(s, T);
  s += "\n# phase_begin";
  for (int b : traj.phase_begin) s += " " + std::to_string(b);
  s += "\n# delta";
  append(s, traj.delta);
  s += "\n# report objective";
  append(s, traj.report.objective);
  s += " kkt";
  append(s, traj.report.kkt_error);
  s += " violation";
  append(s, traj.report.constraint_violation);
  s += " iterations " + std::to_string(traj.report.iterations);
  s += " converged " + std::to_string(traj.report.converged ? 1 : 0);
  s += "\n# columns: time phase q_x q_z q_theta q_f1 q_f2 q_b1 q_b2";
  s += " qd_x qd_z qd_theta qd_f1 qd_f2 qd_b1 qd_b2";
  s += " u_f1 u_f2 u_b1 u_b2 t_fx t_fz t_bx t_bz w h clearance\n";
  for (const auto& n : traj.nodes) {
    std::string row;
    append(row, n.t);
    row += " " + std::to_string(static_cast<int>(n.phase));
    for (int i = 0; i < 7; ++i) append(row, n.q[i]);
    for (int i = 0; i < 7; ++i) append(row, n.qd[i]);
    for (int i = 0; i < 4; ++i) append(row, n.u[i]);
    for (int i = 0; i < 4; ++i) append(row, n.force[i]);
    append(row, n.w);
    append(row, n.h);
    append(row, n.clearance);
    while (!row.empty() && row.front() == ' ') row.erase(row.begin());
    s += row + "\n";
  }
  return s;
}

void save_trajectory(const JumpTrajectory& traj, const std::string& path,
                     std::uint64_t config_hash) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw ParseError("cannot open " + path + " for writing");
  f << trajectory_to_string(traj, config_hash);
  if (!f) throw ParseError("write to " + path + " failed");
}

JumpTrajectory trajectory_from_string(const std::string& text, std::uint64_t* config_hash) {
  JumpTrajectory traj;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  bool saw_magic = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    if (line[0] == '#') {
      std::istringstream h(line.substr(1));
      std::string key;
      h >> key;
      if (key == "jump") {
        saw_magic = true;
      } else if (key == "config_hash") {
        std::string hex;
        h >> hex;
        if (config_hash) *config_hash = std::strtoull(hex.c_str(), nullptr, 16);
      } else if (key == "phase_duration") {
        for (double& T : traj.phase_duration) h >> T;
      } else if (key == "phase_begin") {
        for (int& b : traj.phase_begin) h >> b;
      } else if (key == "delta") {
        h >> traj.delta;
      } else if (key == "report") {
        std::string tag;
        while (h >> tag) {
          if (tag == "objective") h >> traj.report.objective;
          else if (tag == "kkt") h >> traj.report.kkt_error;
          else if (tag == "violation") h >> traj.report.constraint_violation;
          else if (tag == "iterations") h >> traj.report.iterations;
          else if (tag == "converged") {
            int c = 0;
            h >> c;
            traj.report.converged = c != 0;
          }
        }
      }
      continue;
    }
    std::istringstream r(line);
    TrajectoryNode n;
    int phase = 0;
    r >> n.t >> phase;
    for (int i = 0; i < 7; ++i) r >> n.q[i];
    for (int i = 0; i < 7; ++i) r >> n.qd[i];
    for (int i = 0; i < 4; ++i) r >> n.u[i];
    for (int i = 0; i < 4; ++i) r >> n.force[i];
    r >> n.w >> n.h >> n.clearance;
    if (!r || phase < 0 || phase > 3)
      throw ParseError("trajectory line " + std::to_string(lineno) + ": malformed row");
    n.phase = static_cast<JumpPhase>(phase);
    n.constrained = n.w > 0.0 || n.h > 0.0;
    traj.nodes.push_back(n);
  }
  if (!saw_magic) throw ParseError("missing jump trajectory header");
  if (traj.nodes.empty()) throw ParseError("trajectory has no nodes");
  return traj;
}

JumpTrajectory load_trajectory(const std::string& path, std::uint64_t* config_hash) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ParseError("cannot open " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  try {
    return trajectory_from_string(ss.str(), config_hash);
  } catch (const ParseError& e) {
    throw ParseError(path + ": " + e.what());
  }
}

}  // namespace jumpnav
