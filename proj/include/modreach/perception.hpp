#pragma once

#include <cmath>
#include <functional>
#include <stdexcept>
#include <vector>

#include "modreach/dataset.hpp"
#include "modreach/nn.hpp"
#include "modreach/rng.hpp"

namespace modreach {

// Minibatch split between the two corpora. `p_real` is the fraction drawn
// from the style-B corpus; the per-batch count is exact, not in expectation.
struct MixPolicy {
  double p_real = 0.0;

  int count_b(int batch) const {
    if (batch < 1) throw std::invalid_argument("batch must be positive");
    if (p_real < 0 || p_real > 1) throw std::invalid_argument("mix fraction must lie in [0,1]");
    return int(std::lround(p_real * batch));
  }
  int count_a(int batch) const { return batch - count_b(batch); }
};

// Per-sample Euclidean errors of the regressor over a whole corpus, in
// normalized units. Deterministic.
struct PerceptionEval {
  double e_mu = 0;
  double e_sigma = 0;
  std::vector<double> errors;
};

inline PerceptionEval eval_perception(Network& net, const Dataset& ds, int batch = 256) {
  if (ds.size() < 1) throw std::invalid_argument("empty evaluation corpus");
  if (net.spec.output_dim() != ds.theta_dim())
    throw std::invalid_argument("network output does not match dataset labels");
  const int64_t n = ds.size();
  PerceptionEval ev;
  ev.errors.reserve(size_t(n));
  for (int64_t off = 0; off < n; off += batch) {
    const int m = int(std::min<int64_t>(batch, n - off));
    Tensor in({m, ds.h, ds.w, 1});
    for (int i = 0; i < m; ++i) ds.decode_image(off + i, in.ptr() + int64_t(i) * ds.image_numel());
    const Tensor& out = net.forward(in);
    for (int i = 0; i < m; ++i) {
      const float* pred = out.ptr() + int64_t(i) * ds.theta_dim();
      const float* lab = ds.theta(off + i);
      double s = 0;
      for (int k = 0; k < ds.theta_dim(); ++k) {
        const double d = double(pred[k]) - double(lab[k]);
        s += d * d;
      }
      ev.errors.push_back(std::sqrt(s));
    }
  }
  for (double e : ev.errors) ev.e_mu += e;
  ev.e_mu /= double(n);
  double var = 0;
  for (double e : ev.errors) var += (e - ev.e_mu) * (e - ev.e_mu);
  ev.e_sigma = std::sqrt(var / double(n));
  return ev;
}

struct PerceptionTrainOpts {
  int64_t steps = 100000;
  int batch = 128;
  double lr_start = 0.01;  // linear decay over `steps`
  double lr_end = 0.001;
  MixPolicy mix;           // style-B share per batch
  int64_t eval_every = 2500;
  double stop_err = 0.0;   // stop once the style-A eval e_mu falls to this (0 = run all steps)
  int64_t trace_every = 100;
};

struct PerceptionEvalPoint {
  int64_t step = 0;
  double loss = std::nan("");
  double err_a = std::nan("");
  double err_b = std::nan("");
};

struct PerceptionTrainResult {
  int64_t steps_run = 0;
  PerceptionEvalPoint last;
  std::vector<std::pair<int64_t, double>> loss_trace;  // every trace_every steps
};

// Supervised regression on the normalized scene vector with RMSProp and a
// linearly decaying rate. Each update draws `mix.count_b` samples from the
// style-B corpus and the rest from style-A, exactly. `on_eval` fires every
// `eval_every` steps and at the end; evaluation never touches the training
// rng, so interleaved evals do not change the trajectory.
inline PerceptionTrainResult train_perception(
    Network& net, OptimizerState& opt, Rng& rng, const Dataset* ds_a, const Dataset* ds_b,
    const PerceptionTrainOpts& o, const Dataset* eval_a, const Dataset* eval_b,
    const std::function<void(const PerceptionEvalPoint&)>& on_eval = {}, int64_t start_step = 0,
    const std::function<void(int64_t)>& on_checkpoint = {}, int64_t checkpoint_every = 0) {
  const int nb = o.mix.count_b(o.batch);
  const int na = o.batch - nb;
  if (na > 0 && (ds_a == nullptr || ds_a->size() < 1))
    throw std::invalid_argument("style-A share is nonzero but its corpus is missing or empty");
  if (nb > 0 && (ds_b == nullptr || ds_b->size() < 1))
    throw std::invalid_argument("style-B share is nonzero but its corpus is missing or empty");
  const Dataset& ref = na > 0 ? *ds_a : *ds_b;
  if (net.spec.output_dim() != ref.theta_dim())
    throw std::invalid_argument("network output does not match dataset labels");
  if (ds_a && ds_b && ds_a->theta_dim() != ds_b->theta_dim())
    throw std::invalid_argument("corpora disagree on label dimension");

  const int td = ref.theta_dim();
  const int64_t px = ref.image_numel();
  Tensor in({o.batch, ref.h, ref.w, 1});
  Tensor lab({o.batch, td});

  PerceptionTrainResult res;
  double last_loss = std::nan("");

  auto emit = [&](int64_t step) {
    PerceptionEvalPoint pt;
    pt.step = step;
    pt.loss = last_loss;
    if (eval_a) pt.err_a = eval_perception(net, *eval_a).e_mu;
    if (eval_b) pt.err_b = eval_perception(net, *eval_b).e_mu;
    if (on_eval) on_eval(pt);
    res.last = pt;
    return pt;
  };

  int64_t step = start_step;
  for (; step < o.steps; ++step) {
    for (int i = 0; i < o.batch; ++i) {
      const Dataset& ds = i < na ? *ds_a : *ds_b;
      const int64_t idx = rng.uniform_int(int(ds.size()));
      ds.decode_image(idx, in.ptr() + int64_t(i) * px);
      std::copy(ds.theta(idx), ds.theta(idx) + td, lab.ptr() + int64_t(i) * td);
    }
    net.forward(in);
    auto [loss, dy] = quadratic_loss(net.output(), lab);
    last_loss = loss;
    auto grads = net.backward(dy);
    const double lr = linear_schedule(o.lr_start, o.lr_end, step, o.steps);
    rmsprop_step(net.params, grads.params, opt, lr);

    if (o.trace_every > 0 && (step + 1) % o.trace_every == 0)
      res.loss_trace.emplace_back(step + 1, loss);

    if (o.eval_every > 0 && (step + 1) % o.eval_every == 0) {
      const auto pt = emit(step + 1);
      if (o.stop_err > 0 && eval_a && pt.err_a <= o.stop_err) {
        res.steps_run = step + 1;
        if (on_checkpoint && checkpoint_every > 0) on_checkpoint(step + 1);
        return res;
      }
    }
    if (on_checkpoint && checkpoint_every > 0 && (step + 1) % checkpoint_every == 0)
      on_checkpoint(step + 1);
  }
  if (o.eval_every <= 0 || step == 0 || step % o.eval_every != 0) emit(step);
  res.steps_run = step;
  return res;
}

}  // namespace modreach
