#pragma once

#include <cmath>
#include <functional>
#include <stdexcept>
#include <vector>

#include "modreach/control.hpp"
#include "modreach/dataset.hpp"
#include "modreach/render.hpp"
#include "modreach/replay.hpp"

namespace modreach {

// The two nets chain when the regressor's output vector is exactly the Q
// head's input vector.
inline void check_combinable(const Network& per, const Network& ctl) {
  if (per.spec.output_dim() != ctl.spec.input_dim())
    throw std::invalid_argument("perception output dim " +
                                std::to_string(per.spec.output_dim()) +
                                " does not match control input dim " +
                                std::to_string(ctl.spec.input_dim()));
}

// Network input from a rendered frame, reproducing the quantization the
// training corpora went through.
inline Tensor obs_tensor(const Image& img) {
  Tensor t({1, img.h, img.w, 1});
  for (size_t i = 0; i < img.px.size(); ++i) t.data[i] = float(quantize_px(img.px[i])) / 255.f;
  return t;
}

inline Tensor obs_tensor(const std::vector<uint8_t>& bytes, int w, int h) {
  if (int(bytes.size()) != w * h) throw std::invalid_argument("observation byte count mismatch");
  Tensor t({1, h, w, 1});
  for (size_t i = 0; i < bytes.size(); ++i) t.data[i] = float(bytes[i]) / 255.f;
  return t;
}

inline Action greedy_visual_action(const ArmModel& m, Network& per, Network& ctl,
                                   const Tensor& obs) {
  const Tensor& th = per.forward(obs);
  const Tensor& q = ctl.forward(th);
  if (int(q.data.size()) != m.num_actions())
    throw std::invalid_argument("Q head arity does not match the arm's action set");
  return action_from_id(m, argmax_index(q.ptr(), m.num_actions()));
}

// Greedy rollout statistics when the policy only sees rendered frames.
inline EvalStats evaluate_visual(const ArmModel& m, Network& per, Network& ctl, RenderStyle style,
                                 int episodes, uint64_t seed,
                                 const std::vector<Occluder>& occs = {},
                                 const RenderConfig& rc = {}) {
  check_combinable(per, ctl);
  return evaluate_policy(m, episodes, seed, [&](const EpisodeState& s) {
    const Image img = render_scene(m, s.scene, style, occs, rc);
    return greedy_visual_action(m, per, ctl, obs_tensor(img));
  });
}

// g <- beta * a + (1 - beta) * b, elementwise over matching tensor lists.
inline std::vector<Tensor> mix_gradients(double beta, const std::vector<Tensor>& a,
                                         const std::vector<Tensor>& b) {
  if (a.size() != b.size()) throw std::invalid_argument("gradient list size mismatch");
  std::vector<Tensor> out;
  out.reserve(a.size());
  for (size_t i = 0; i < a.size(); ++i) {
    if (a[i].shape != b[i].shape)
      throw std::invalid_argument("gradient shape mismatch at tensor " + std::to_string(i));
    Tensor g(a[i].shape);
    for (size_t k = 0; k < g.data.size(); ++k)
      g.data[k] = std::fma(float(beta), a[i].data[k], float(1 - beta) * b[i].data[k]);
    out.push_back(std::move(g));
  }
  return out;
}

struct FinetuneOpts {
  int64_t updates = 30000;
  double beta = 0.8;         // weight of the regression term in the perception update
  int q_batch = 64;
  int per_batch_b = 192;     // labelled style-B samples per update
  int per_batch_a = 64;      // labelled style-A samples per update
  double lr_start = 0.01;    // linear decay over `updates`, both parts
  double lr_end = 0.001;
  double gamma = 0.99;
  size_t replay_capacity = 20000;
  int64_t warmup = 500;      // env steps before updates start
  int64_t target_sync = 1000;
  double explore_eps = 0.1;  // guided-action probability while collecting
  bool kgps = true;
  RenderStyle style = RenderStyle::a;  // interaction domain
  RenderConfig render;
  bool naive = false;        // task loss only: skip the regression term entirely
  uint64_t seed = 1;
  int64_t eval_every = 2000;
  int eval_episodes = 20;
};

struct FinetuneEvalPoint {
  int64_t update = 0;
  double loss_q = std::nan("");
  double loss_p = std::nan("");
  EvalStats stats;  // greedy visual rollout in the collection style
};

// Joint refinement of the chained nets. Experience is collected through the
// camera in the adaptation style; each update follows the weighted objective
// beta * regression + (1-beta) * temporal difference, where the td gradient
// enters the regressor through the bottleneck vector.
class FinetuneTrainer {
 public:
  ArmModel arm;
  FinetuneOpts opts;
  Network per, ctl, per_target, ctl_target;
  OptimizerState opt_per, opt_ctl;
  ReplayBuffer<VisualTransition> replay;
  Rng rng;
  EpisodeState ep;
  std::vector<uint8_t> obs;  // rendered view of ep.scene
  bool ep_valid = false;
  int64_t updates_done = 0;
  int64_t env_steps = 0;
  double last_lq = std::nan(""), last_lp = std::nan("");

  const Dataset* ds_b = nullptr;  // labelled corpora for the regression term
  const Dataset* ds_a = nullptr;

  FinetuneTrainer(const ArmModel& m, Network per_net, Network ctl_net, const FinetuneOpts& o,
                  const Dataset* corpus_b, const Dataset* corpus_a)
      : arm(m),
        opts(o),
        per(std::move(per_net)),
        ctl(std::move(ctl_net)),
        replay(o.replay_capacity),
        rng(o.seed),
        ds_b(corpus_b),
        ds_a(corpus_a) {
    arm.validate();
    check_combinable(per, ctl);
    if (opts.beta < 0 || opts.beta > 1) throw std::invalid_argument("beta must lie in [0,1]");
    if (!opts.naive) {
      if (opts.per_batch_b > 0 && (!ds_b || ds_b->size() < 1))
        throw std::invalid_argument("regression term needs the style-B corpus");
      if (opts.per_batch_a > 0 && (!ds_a || ds_a->size() < 1))
        throw std::invalid_argument("regression term needs the style-A corpus");
    }
    per_target = per;
    ctl_target = ctl;
    opt_per = OptimizerState(per);
    opt_ctl = OptimizerState(ctl);
  }

  int theta_dim() const { return 2 + arm.dof; }

  std::vector<uint8_t> render_obs(const SceneConfig& scene) const {
    const Image img = render_scene(arm, scene, opts.style, {}, opts.render);
    std::vector<uint8_t> bytes(img.px.size());
    for (size_t i = 0; i < bytes.size(); ++i) bytes[i] = quantize_px(img.px[i]);
    return bytes;
  }

  Action act(double eps) {
    if (rng.uniform() < eps) {
      if (opts.kgps) return kgps_action(arm, ep.scene.q, ep.q_star);
      return action_from_id(arm, rng.uniform_int(arm.num_actions()));
    }
    return greedy_visual_action(arm, per, ctl, obs_tensor(obs, 84, 84));
  }

  void collect_step() {
    if (!ep_valid || ep.done) {
      ep = sample_scene(arm, rng);
      obs = render_obs(ep.scene);
      ep_valid = true;
    }
    const Action a = act(opts.explore_eps);
    const StepResult r = step(arm, ep, a);
    VisualTransition t;
    t.img = obs;
    t.img2 = render_obs(r.state.scene);
    t.action = a.id;
    t.reward = float(r.reward);
    t.terminal = r.state.n >= arm.success_consec ? 1 : 0;
    obs = t.img2;
    replay.push(std::move(t));
    ep = r.state;
    ++env_steps;
  }

  void update() {
    const int qb = opts.q_batch;
    const int na = ctl.spec.output_dim();
    const int td = theta_dim();

    std::vector<const VisualTransition*> batch(static_cast<size_t>(qb));
    for (auto& b : batch) b = &replay.sample(rng);

    Tensor imgs({qb, 84, 84, 1}), imgs2({qb, 84, 84, 1});
    for (int i = 0; i < qb; ++i) {
      const auto& t = *batch[size_t(i)];
      for (int k = 0; k < 84 * 84; ++k) {
        imgs.ptr()[i * 84 * 84 + k] = float(t.img[size_t(k)]) / 255.f;
        imgs2.ptr()[i * 84 * 84 + k] = float(t.img2[size_t(k)]) / 255.f;
      }
    }

    const Tensor& th2 = per_target.forward(imgs2);
    const Tensor& q2 = ctl_target.forward(th2);
    std::vector<float> y(static_cast<size_t>(qb));
    for (int i = 0; i < qb; ++i) {
      const auto& t = *batch[size_t(i)];
      float v = t.reward;
      if (!t.terminal) v += float(opts.gamma) * q2.ptr()[i * na + argmax_index(q2.ptr() + i * na, na)];
      y[size_t(i)] = v;
    }

    const Tensor& th = per.forward(imgs);
    const Tensor& q = ctl.forward(th);
    Tensor dy({qb, na});
    double lq = 0;
    for (int i = 0; i < qb; ++i) {
      const int a = batch[size_t(i)]->action;
      const float diff = q.ptr()[i * na + a] - y[size_t(i)];
      lq += double(diff) * diff;
      dy.ptr()[i * na + a] = diff / float(qb);
    }
    lq /= 2.0 * qb;

    auto g_ctl = ctl.backward(dy);
    auto g_per_q = per.backward(g_ctl.input);

    // Regression branch on labelled frames, style-B share first. The control
    // part never sees this loss; its update is the task gradient alone.
    const int pb = opts.naive ? 0 : opts.per_batch_b + opts.per_batch_a;
    double lp = std::nan("");
    GradientsT<float> g_per_p;
    if (pb > 0) {
      Tensor pin({pb, 84, 84, 1}), plab({pb, td});
      for (int i = 0; i < pb; ++i) {
        const Dataset& ds = i < opts.per_batch_b ? *ds_b : *ds_a;
        const int64_t idx = rng.uniform_int(int(ds.size()));
        ds.decode_image(idx, pin.ptr() + int64_t(i) * 84 * 84);
        std::copy(ds.theta(idx), ds.theta(idx) + td, plab.ptr() + int64_t(i) * td);
      }
      per.forward(pin);
      auto [l, dlp] = quadratic_loss(per.output(), plab);
      lp = l;
      g_per_p = per.backward(dlp);
    }

    const double lr = linear_schedule(opts.lr_start, opts.lr_end, updates_done, opts.updates);
    const auto g_per =
        pb > 0 ? mix_gradients(opts.beta, g_per_p.params, g_per_q.params) : std::move(g_per_q.params);
    rmsprop_step(per.params, g_per, opt_per, lr);
    rmsprop_step(ctl.params, g_ctl.params, opt_ctl, lr);

    last_lq = lq;
    last_lp = lp;
    ++updates_done;
    if (opts.target_sync > 0 && updates_done % opts.target_sync == 0) {
      per_target = per;
      ctl_target = ctl;
    }
  }

  void run(int64_t until_updates, const std::function<void(const FinetuneEvalPoint&)>& on_eval = {},
           const std::function<void(int64_t)>& on_checkpoint = {}, int64_t checkpoint_every = 0) {
    until_updates = std::min(until_updates, opts.updates);
    while (updates_done < until_updates) {
      collect_step();
      if (int64_t(replay.size()) >= std::max<int64_t>(opts.warmup, opts.q_batch)) {
        update();
        if (on_eval && opts.eval_every > 0 && updates_done % opts.eval_every == 0)
          on_eval(eval_point());
        if (on_checkpoint && checkpoint_every > 0 && updates_done % checkpoint_every == 0)
          on_checkpoint(updates_done);
      }
    }
  }

  FinetuneEvalPoint eval_point() {
    FinetuneEvalPoint pt;
    pt.update = updates_done;
    pt.loss_q = last_lq;
    pt.loss_p = last_lp;
    pt.stats = evaluate_visual(arm, per, ctl, opts.style, opts.eval_episodes,
                               opts.seed ^ 0xd1342543de82ef95ull ^ uint64_t(updates_done), {},
                               opts.render);
    return pt;
  }
};

}  // namespace modreach
