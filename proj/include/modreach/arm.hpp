#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "modreach/rng.hpp"

namespace modreach {

struct Vec2 {
  double x = 0, y = 0;
};

inline double norm(const Vec2& v) { return std::hypot(v.x, v.y); }
inline double dist(const Vec2& a, const Vec2& b) { return std::hypot(a.x - b.x, a.y - b.y); }

// Joint angles of the active joints, radians. Fixed capacity 3, length = dof.
struct JointConfig {
  int n = 0;
  std::array<double, 3> v{};

  JointConfig() = default;
  JointConfig(std::initializer_list<double> init) {
    if (init.size() > 3) throw std::invalid_argument("at most 3 joints");
    for (double a : init) v[size_t(n++)] = a;
  }
  int size() const { return n; }
  double& operator[](int i) { return v[size_t(i)]; }
  double operator[](int i) const { return v[size_t(i)]; }
  bool operator==(const JointConfig& o) const {
    if (n != o.n) return false;
    for (int i = 0; i < n; ++i)
      if (v[size_t(i)] != o.v[size_t(i)]) return false;
    return true;
  }
};

inline double inf_dist(const JointConfig& a, const JointConfig& b) {
  double m = 0;
  for (int i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

inline double l2_dist(const JointConfig& a, const JointConfig& b) {
  double s = 0;
  for (int i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s);
}

// Target position plus arm configuration: the minimal task state.
struct SceneConfig {
  Vec2 target;
  JointConfig q;
};

// One of 3*dof discrete actions: nudge one joint by +/-delta or hold it.
struct Action {
  int joint = 0;     // index into the active joints
  double delta = 0;  // -step, 0, +step radians
  int id = 0;        // flat id in [0, 3*dof)
};

struct StepResult;

// Planar 3-link arm with a fixed camera frame. dof in {1,2,3} selects which
// joints are active: 1 -> q2 only, 2 -> q2,q3, 3 -> all. Inactive joints are
// frozen at their rest angles.
struct ArmModel {
  int dof = 3;
  std::array<double, 3> links{0.37, 0.374, 0.229};
  std::array<double, 3> rest{0.0, 0.0, 0.0};
  std::array<double, 3> limit_lo{-1.0, -0.8, -1.2};
  std::array<double, 3> limit_hi{1.0, 1.6, 1.2};
  double action_step = 0.04;    // rad per action
  double reach_delta = 0.05;    // m, reward threshold
  double reward_lambda = 1e-3;  // scale of the negative shaping term
  int success_consec = 4;       // consecutive close steps that finish a trial
  double success_dist = 0.16;   // m, evaluation success threshold (7 px)
  int max_steps = 200;
  double frame_half = 0.96;     // camera frame half extent, m

  int active_joint(int i) const { return dof == 3 ? i : i + 1; }
  double lo(int i) const { return limit_lo[size_t(active_joint(i))]; }
  double hi(int i) const { return limit_hi[size_t(active_joint(i))]; }
  int num_actions() const { return 3 * dof; }

  void validate() const {
    if (dof < 1 || dof > 3) throw std::invalid_argument("dof must be 1..3");
    for (int j = 0; j < 3; ++j)
      if (limit_lo[size_t(j)] >= limit_hi[size_t(j)])
        throw std::invalid_argument("joint limits must satisfy lo < hi");
    if (action_step <= 0 || reach_delta <= 0 || frame_half <= 0 || max_steps < 1)
      throw std::invalid_argument("arm model constants must be positive");
  }

  std::array<double, 3> full_config(const JointConfig& q) const {
    std::array<double, 3> full = rest;
    for (int i = 0; i < dof; ++i) full[size_t(active_joint(i))] = q[i];
    return full;
  }

  bool within_limits(const JointConfig& q) const {
    for (int i = 0; i < q.size(); ++i)
      if (q[i] < lo(i) - 1e-12 || q[i] > hi(i) + 1e-12) return false;
    return true;
  }

  bool in_frame(const Vec2& p) const {
    return std::abs(p.x) <= frame_half && std::abs(p.y) <= frame_half;
  }
};

// End-effector position from the chained planar rotations, arm base at the
// frame origin.
inline Vec2 forward_kinematics(const ArmModel& m, const JointConfig& q) {
  const auto full = m.full_config(q);
  Vec2 p;
  double phi = 0;
  for (int i = 0; i < 3; ++i) {
    phi += full[size_t(i)];
    p.x += m.links[size_t(i)] * std::cos(phi);
    p.y += m.links[size_t(i)] * std::sin(phi);
  }
  return p;
}

inline Action action_from_id(const ArmModel& m, int id) {
  if (id < 0 || id >= m.num_actions()) throw std::invalid_argument("invalid action id");
  static constexpr std::array<int, 3> kSign{-1, 0, 1};
  Action a;
  a.id = id;
  a.joint = id / 3;
  a.delta = kSign[size_t(id % 3)] * m.action_step;
  return a;
}

// q'_j = clamp(q_j + delta, limits); only the addressed joint changes.
inline JointConfig apply_action(const ArmModel& m, const JointConfig& q, const Action& a) {
  if (a.joint < 0 || a.joint >= m.dof || a.id < 0 || a.id >= m.num_actions())
    throw std::invalid_argument("invalid action for this arm");
  JointConfig out = q;
  out[a.joint] = std::clamp(q[a.joint] + a.delta, m.lo(a.joint), m.hi(a.joint));
  return out;
}

// Distance-shaped reward: negative while far, 0 while close, 1 once close
// for success_consec consecutive steps.
inline double reward(const ArmModel& m, double d, int n) {
  if (d < 0 || n < 0) throw std::invalid_argument("reward needs d >= 0, n >= 0");
  if (d > m.reach_delta) return m.reward_lambda * (m.reach_delta / d - 1.0);
  return n >= m.success_consec ? 1.0 : 0.0;
}

// Live episode: scene, the goal configuration that generated the target
// (kept for guided exploration), and the termination counters.
struct EpisodeState {
  SceneConfig scene;
  JointConfig q_star;
  int n = 0;         // consecutive steps with d <= reach_delta
  int n_success = 0; // consecutive steps with d <= success_dist
  int step = 0;
  bool done = false;
  bool success = false;  // evaluation criterion, does not end the episode
};

struct StepResult {
  EpisodeState state;
  double reward = 0;
  bool done = false;
};

inline StepResult step(const ArmModel& m, const EpisodeState& s, const Action& a) {
  if (s.done) throw std::logic_error("step on a finished episode");
  EpisodeState next = s;
  next.scene.q = apply_action(m, s.scene.q, a);
  const double d = dist(forward_kinematics(m, next.scene.q), next.scene.target);
  next.n = d <= m.reach_delta ? s.n + 1 : 0;
  next.n_success = d <= m.success_dist ? s.n_success + 1 : 0;
  next.step = s.step + 1;
  if (next.n_success >= m.success_consec) next.success = true;
  const double r = reward(m, d, next.n);
  next.done = next.n >= m.success_consec || next.step >= m.max_steps;
  return {next, r, next.done};
}

inline double end_effector_distance(const ArmModel& m, const EpisodeState& s) {
  return dist(forward_kinematics(m, s.scene.q), s.scene.target);
}

inline JointConfig sample_config(const ArmModel& m, Rng& rng) {
  JointConfig q;
  q.n = m.dof;
  for (int i = 0; i < m.dof; ++i) q[i] = rng.uniform(m.lo(i), m.hi(i));
  return q;
}

// New trial: uniform start configuration, and a goal configuration whose
// end effector (the target) lands inside the camera frame.
inline EpisodeState sample_scene(const ArmModel& m, Rng& rng, int max_retries = 10000) {
  EpisodeState s;
  s.scene.q = sample_config(m, rng);
  for (int attempt = 0; attempt < max_retries; ++attempt) {
    JointConfig q_star = sample_config(m, rng);
    const Vec2 target = forward_kinematics(m, q_star);
    if (m.in_frame(target)) {
      s.q_star = q_star;
      s.scene.target = target;
      return s;
    }
  }
  throw std::runtime_error("no reachable in-frame target after retries; check joint limits");
}

// Affine map of every scene component into [0,1]: camera-frame extents for
// the target, joint limits for the angles. Layout [x, y, q_0..q_{dof-1}].
inline std::vector<double> normalize_theta(const ArmModel& m, const SceneConfig& scene) {
  const double fh = m.frame_half;
  auto unit = [](double v, double lo, double hi, const char* what) {
    if (v < lo - 1e-9 || v > hi + 1e-9)
      throw std::domain_error(std::string(what) + " outside its normalization range");
    return std::clamp((v - lo) / (hi - lo), 0.0, 1.0);
  };
  std::vector<double> theta(size_t(2 + m.dof));
  theta[0] = unit(scene.target.x, -fh, fh, "target.x");
  theta[1] = unit(scene.target.y, -fh, fh, "target.y");
  for (int i = 0; i < m.dof; ++i)
    theta[size_t(2 + i)] = unit(scene.q[i], m.lo(i), m.hi(i), "joint angle");
  return theta;
}

inline SceneConfig denormalize_theta(const ArmModel& m, const std::vector<double>& theta) {
  if (int(theta.size()) != 2 + m.dof)
    throw std::invalid_argument("theta must have 2+dof components");
  for (double t : theta)
    if (t < -1e-9 || t > 1.0 + 1e-9)
      throw std::domain_error("normalized component outside [0,1]");
  SceneConfig s;
  s.target.x = -m.frame_half + theta[0] * 2 * m.frame_half;
  s.target.y = -m.frame_half + theta[1] * 2 * m.frame_half;
  s.q.n = m.dof;
  for (int i = 0; i < m.dof; ++i)
    s.q[i] = m.lo(i) + theta[size_t(2 + i)] * (m.hi(i) - m.lo(i));
  return s;
}

}  // namespace modreach
