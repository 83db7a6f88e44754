#pragma once

#include <cmath>
#include <functional>
#include <stdexcept>
#include <vector>

#include "modreach/arm.hpp"
#include "modreach/metrics.hpp"
#include "modreach/nn.hpp"
#include "modreach/replay.hpp"
#include "modreach/rng.hpp"

namespace modreach {

// Guided exploration: of all one-joint nudges, take the one whose outcome
// lands closest (L2, ties to the lowest action id) to the goal configuration
// that generated the target.
inline Action kgps_action(const ArmModel& m, const JointConfig& q, const JointConfig& q_star) {
  if (q.size() != m.dof || q_star.size() != m.dof)
    throw std::invalid_argument("configuration arity does not match the arm");
  int best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (int id = 0; id < m.num_actions(); ++id) {
    const JointConfig q2 = apply_action(m, q, action_from_id(m, id));
    const double d = l2_dist(q2, q_star);
    if (d < best_d) {
      best_d = d;
      best = id;
    }
  }
  return action_from_id(m, best);
}

// First maximum wins, so ties resolve to the lowest action id.
inline int argmax_index(const float* v, int n) {
  if (n < 1) throw std::invalid_argument("argmax over empty range");
  int best = 0;
  for (int i = 1; i < n; ++i)
    if (v[i] > v[best]) best = i;
  return best;
}

inline Tensor theta_tensor(const ArmModel& m, const SceneConfig& scene) {
  const auto th = normalize_theta(m, scene);
  Tensor t({1, int(th.size())});
  for (size_t i = 0; i < th.size(); ++i) t.data[i] = float(th[i]);
  return t;
}

// Greedy action of the Q head on a normalized scene vector.
inline Action greedy_action(const ArmModel& m, Network& ctl, const SceneConfig& scene) {
  const Tensor& q = ctl.forward(theta_tensor(m, scene));
  if (int(q.data.size()) != m.num_actions())
    throw std::invalid_argument("Q head arity does not match the arm's action set");
  return action_from_id(m, argmax_index(q.ptr(), m.num_actions()));
}

struct ExplorationSchedule {
  double eps_start = 1.0;
  double eps_end = 0.1;
  int64_t decay_steps = 1;

  double at(int64_t step) const { return linear_schedule(eps_start, eps_end, step, decay_steps); }
};

// One RMSProp update on the temporal-difference objective over a minibatch:
// targets r + gamma * max_a' Qhat(s',a'), cut at terminal transitions; only
// the taken action's output receives gradient.
inline double q_update(Network& net, Network& target, OptimizerState& opt,
                       const std::vector<Transition>& batch, int theta_dim, double gamma,
                       double lr) {
  const int m = int(batch.size());
  if (m < 1) throw std::invalid_argument("empty minibatch");
  const int na = net.spec.output_dim();

  Tensor s({m, theta_dim}), s2({m, theta_dim});
  for (int i = 0; i < m; ++i)
    for (int k = 0; k < theta_dim; ++k) {
      s.ptr()[i * theta_dim + k] = batch[size_t(i)].s[size_t(k)];
      s2.ptr()[i * theta_dim + k] = batch[size_t(i)].s2[size_t(k)];
    }

  const Tensor& q2 = target.forward(s2);
  std::vector<float> y(static_cast<size_t>(m));
  for (int i = 0; i < m; ++i) {
    const auto& t = batch[size_t(i)];
    if (t.action < 0 || t.action >= na) throw std::invalid_argument("transition action out of range");
    float v = t.reward;
    if (!t.terminal) v += float(gamma) * q2.ptr()[i * na + argmax_index(q2.ptr() + i * na, na)];
    y[size_t(i)] = v;
  }

  const Tensor& q = net.forward(s);
  Tensor dy({m, na});
  double loss = 0;
  for (int i = 0; i < m; ++i) {
    const float diff = q.ptr()[i * na + batch[size_t(i)].action] - y[size_t(i)];
    loss += double(diff) * diff;
    dy.ptr()[i * na + batch[size_t(i)].action] = diff / float(m);
  }
  loss /= 2.0 * m;

  auto grads = net.backward(dy);
  rmsprop_step(net.params, grads.params, opt, lr);
  return loss;
}

// Rolls one episode to termination under `pick` and reports its outcome.
template <typename PickAction>
EpisodeOutcome run_episode(const ArmModel& m, EpisodeState s, PickAction&& pick) {
  EpisodeOutcome out;
  while (!s.done) {
    const StepResult r = step(m, s, pick(s));
    out.total_reward += r.reward;
    s = r.state;
  }
  out.success = s.success;
  out.d_final = end_effector_distance(m, s);
  out.steps = s.step;
  return out;
}

// Evaluation over freshly sampled scenes; episode i uses its own rng stream,
// so results are independent of caller state and of each other.
template <typename PickAction>
EvalStats evaluate_policy(const ArmModel& m, int episodes, uint64_t seed, PickAction&& pick) {
  if (episodes < 1) throw std::invalid_argument("need at least one episode");
  std::vector<EpisodeOutcome> outs;
  outs.reserve(size_t(episodes));
  for (int i = 0; i < episodes; ++i) {
    Rng rng = Rng::stream(seed, uint64_t(i));
    outs.push_back(run_episode(m, sample_scene(m, rng), pick));
  }
  return aggregate(outs);
}

inline EvalStats evaluate_control(const ArmModel& m, Network& ctl, int episodes, uint64_t seed) {
  return evaluate_policy(m, episodes, seed,
                         [&](const EpisodeState& s) { return greedy_action(m, ctl, s.scene); });
}

struct ControlTrainOpts {
  int64_t updates = 150000;
  int batch = 64;
  double lr_start = 0.01;  // linear decay over `updates`
  double lr_end = 0.001;
  double gamma = 0.99;
  size_t replay_capacity = 100000;
  int64_t warmup = 1000;    // env steps collected before the first update
  int64_t target_sync = 1000;  // updates between target refreshes; 0 keeps target == live
  ExplorationSchedule explore;
  bool kgps = true;         // guided exploration; false draws uniform random actions
  uint64_t seed = 1;
  int64_t eval_every = 5000;
  int eval_episodes = 200;
  double stop_success = 0.0;  // stop once eval success reaches this (0 = run all updates)
};

struct ControlEvalPoint {
  int64_t update = 0;
  double epsilon = 0;
  double loss = std::nan("");
  EvalStats stats;
};

// Q-learning on the normalized scene vector with experience replay and a
// periodically synced target copy. All mutable state lives in the trainer so
// a run can be frozen to disk and resumed to the bit.
class ControlTrainer {
 public:
  ArmModel arm;
  ControlTrainOpts opts;
  Network net, target;
  OptimizerState opt;
  ReplayBuffer<Transition> replay;
  Rng rng;
  EpisodeState ep;
  bool ep_valid = false;
  int64_t updates_done = 0;
  int64_t env_steps = 0;
  double last_loss = std::nan("");
  bool stop_hit = false;

  ControlTrainer(const ArmModel& m, const ControlTrainOpts& o)
      : arm(m), opts(o), replay(o.replay_capacity), rng(o.seed) {
    arm.validate();
    if (opts.updates < 0 || opts.batch < 1 || opts.warmup < 0)
      throw std::invalid_argument("invalid control training options");
    net = Network(NetworkSpec::control(arm.dof));
    net.init_weights(rng);
    opt = OptimizerState(net);
    target = net;
  }

  int theta_dim() const { return 2 + arm.dof; }

  // Behaviour policy: explore with probability eps (guided or uniform),
  // otherwise act greedily on the live net.
  Action act(const EpisodeState& s, double eps) {
    if (rng.uniform() < eps) {
      if (opts.kgps) return kgps_action(arm, s.scene.q, s.q_star);
      return action_from_id(arm, rng.uniform_int(arm.num_actions()));
    }
    return greedy_action(arm, net, s.scene);
  }

  // Advances until `until_updates` gradient updates have happened. `on_eval`
  // fires every eval_every updates with fresh greedy-policy stats; the eval
  // rng streams are keyed by update count and never touch the training rng.
  void run(int64_t until_updates, const std::function<void(const ControlEvalPoint&)>& on_eval = {},
           const std::function<void(int64_t)>& on_checkpoint = {}, int64_t checkpoint_every = 0) {
    until_updates = std::min(until_updates, opts.updates);
    while (updates_done < until_updates) {
      if (!ep_valid || ep.done) {
        ep = sample_scene(arm, rng);
        ep_valid = true;
      }
      const double eps = opts.explore.at(updates_done);
      const Action a = act(ep, eps);
      const StepResult r = step(arm, ep, a);

      Transition t;
      const auto th = normalize_theta(arm, ep.scene);
      const auto th2 = normalize_theta(arm, r.state.scene);
      for (int k = 0; k < theta_dim(); ++k) {
        t.s[size_t(k)] = float(th[size_t(k)]);
        t.s2[size_t(k)] = float(th2[size_t(k)]);
      }
      t.action = a.id;
      t.reward = float(r.reward);
      t.terminal = r.state.n >= arm.success_consec ? 1 : 0;
      replay.push(t);
      ep = r.state;
      ++env_steps;

      if (int64_t(replay.size()) >= std::max<int64_t>(opts.warmup, opts.batch)) {
        std::vector<Transition> batch;
        batch.reserve(size_t(opts.batch));
        for (int i = 0; i < opts.batch; ++i) batch.push_back(replay.sample(rng));
        Network& tgt = opts.target_sync > 0 ? target : net;
        const double lr = linear_schedule(opts.lr_start, opts.lr_end, updates_done, opts.updates);
        last_loss = q_update(net, tgt, opt, batch, theta_dim(), opts.gamma, lr);
        ++updates_done;
        if (opts.target_sync > 0 && updates_done % opts.target_sync == 0) target = net;

        if (opts.eval_every > 0 && updates_done % opts.eval_every == 0) {
          const auto pt = eval_point();
          if (on_eval) on_eval(pt);
          if (opts.stop_success > 0 && pt.stats.success_rate >= opts.stop_success) {
            stop_hit = true;
            return;
          }
        }
        if (on_checkpoint && checkpoint_every > 0 && updates_done % checkpoint_every == 0)
          on_checkpoint(updates_done);
      }
    }
  }

  ControlEvalPoint eval_point() {
    ControlEvalPoint pt;
    pt.update = updates_done;
    pt.epsilon = opts.explore.at(updates_done);
    pt.loss = last_loss;
    pt.stats = evaluate_control(arm, net, opts.eval_episodes,
                                opts.seed ^ 0x9e3779b97f4a7c15ull ^ uint64_t(updates_done));
    return pt;
  }
};

}  // namespace modreach
