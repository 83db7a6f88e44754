#pragma once

#include <Eigen/Core>

#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "modreach/rng.hpp"
#include "modreach/tensor.hpp"

#include <nlohmann/json.hpp>

namespace modreach {

// ---------------------------------------------------------------------------
// Architecture description
// ---------------------------------------------------------------------------

enum class LayerKind { conv, fc, relu, sigmoid };

struct LayerSpec {
  LayerKind kind{};
  // conv
  int kh = 0, kw = 0, oc = 0, stride = 1;
  // fc
  int units = 0;

  static LayerSpec conv2d(int kh, int kw, int oc, int stride) {
    LayerSpec l;
    l.kind = LayerKind::conv;
    l.kh = kh;
    l.kw = kw;
    l.oc = oc;
    l.stride = stride;
    return l;
  }
  static LayerSpec fc(int units) {
    LayerSpec l;
    l.kind = LayerKind::fc;
    l.units = units;
    return l;
  }
  static LayerSpec relu() {
    LayerSpec l;
    l.kind = LayerKind::relu;
    return l;
  }
  static LayerSpec sigmoid() {
    LayerSpec l;
    l.kind = LayerKind::sigmoid;
    return l;
  }
};

// Declarative network layout: input shape (per sample, HWC for images) plus
// an ordered layer list. Shapes of consecutive layers must chain.
struct NetworkSpec {
  std::vector<int> input_shape;  // per-sample, e.g. {84,84,1} or {5}
  std::vector<LayerSpec> layers;

  // Image regressor: three conv stages and one fully-connected head squashed
  // to [0,1], ending in 2+dof outputs.
  static NetworkSpec perception(int dof) {
    NetworkSpec s;
    s.input_shape = {84, 84, 1};
    s.layers = {LayerSpec::conv2d(8, 8, 16, 4), LayerSpec::relu(),
                LayerSpec::conv2d(4, 4, 32, 2), LayerSpec::relu(),
                LayerSpec::conv2d(3, 3, 32, 1), LayerSpec::relu(),
                LayerSpec::fc(2 + dof),         LayerSpec::sigmoid()};
    return s;
  }

  // Q-value head: 2+dof inputs, hidden 400 and 300, one output per action.
  static NetworkSpec control(int dof) {
    NetworkSpec s;
    s.input_shape = {2 + dof};
    s.layers = {LayerSpec::fc(400), LayerSpec::relu(), LayerSpec::fc(300),
                LayerSpec::relu(), LayerSpec::fc(3 * dof)};
    return s;
  }

  // Per-sample output shape of every layer, input first. Throws on shapes
  // that do not chain (conv needs rank-3 HWC input and exact stride fit).
  std::vector<std::vector<int>> shape_chain() const {
    std::vector<std::vector<int>> chain{input_shape};
    for (const auto& l : layers) {
      const auto& in = chain.back();
      switch (l.kind) {
        case LayerKind::conv: {
          if (in.size() != 3)
            throw std::invalid_argument("conv input must be HWC, got " + shape_str(in));
          const int h = in[0], w = in[1];
          if ((h - l.kh) % l.stride != 0 || (w - l.kw) % l.stride != 0 ||
              h < l.kh || w < l.kw)
            throw std::invalid_argument("conv kernel/stride does not fit input " + shape_str(in));
          chain.push_back({(h - l.kh) / l.stride + 1, (w - l.kw) / l.stride + 1, l.oc});
          break;
        }
        case LayerKind::fc:
          chain.push_back({l.units});
          break;
        case LayerKind::relu:
        case LayerKind::sigmoid:
          chain.push_back(in);
          break;
      }
    }
    return chain;
  }

  int output_dim() const {
    auto chain = shape_chain();
    return int(shape_numel(chain.back()));
  }
  int input_dim() const { return int(shape_numel(input_shape)); }

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["input"] = input_shape;
    j["layers"] = nlohmann::json::array();
    for (const auto& l : layers) {
      nlohmann::json e;
      switch (l.kind) {
        case LayerKind::conv:
          e = {{"kind", "conv"}, {"kh", l.kh}, {"kw", l.kw}, {"oc", l.oc}, {"stride", l.stride}};
          break;
        case LayerKind::fc:
          e = {{"kind", "fc"}, {"units", l.units}};
          break;
        case LayerKind::relu:
          e = {{"kind", "relu"}};
          break;
        case LayerKind::sigmoid:
          e = {{"kind", "sigmoid"}};
          break;
      }
      j["layers"].push_back(e);
    }
    return j;
  }

  static NetworkSpec from_json(const nlohmann::json& j) {
    NetworkSpec s;
    s.input_shape = j.at("input").get<std::vector<int>>();
    for (const auto& e : j.at("layers")) {
      const std::string kind = e.at("kind").get<std::string>();
      if (kind == "conv")
        s.layers.push_back(LayerSpec::conv2d(e.at("kh"), e.at("kw"), e.at("oc"), e.at("stride")));
      else if (kind == "fc")
        s.layers.push_back(LayerSpec::fc(e.at("units")));
      else if (kind == "relu")
        s.layers.push_back(LayerSpec::relu());
      else if (kind == "sigmoid")
        s.layers.push_back(LayerSpec::sigmoid());
      else
        throw std::runtime_error("unknown layer kind '" + kind + "'");
    }
    s.shape_chain();  // validate
    return s;
  }

  bool operator==(const NetworkSpec& o) const { return to_json() == o.to_json(); }
};

// ---------------------------------------------------------------------------
// Network with cached activations and hand-rolled reverse mode
// ---------------------------------------------------------------------------

// Row-major bias add and per-column sums as plain loops. Only additions, so
// results are bit-identical however the compiler vectorizes them; Eigen's
// partial-reduction expressions do not give that guarantee for mapped
// buffers of arbitrary alignment.
template <typename T>
void add_bias(T* y, const T* b, int64_t rows, int64_t cols) {
  for (int64_t i = 0; i < rows; ++i) {
    T* row = y + i * cols;
    for (int64_t j = 0; j < cols; ++j) row[j] += b[j];
  }
}

template <typename T>
void col_sums(const T* src, T* dst, int64_t rows, int64_t cols) {
  for (int64_t j = 0; j < cols; ++j) dst[j] = T(0);
  for (int64_t i = 0; i < rows; ++i) {
    const T* row = src + i * cols;
    for (int64_t j = 0; j < cols; ++j) dst[j] += row[j];
  }
}

template <typename T>
struct GradientsT {
  std::vector<TensorT<T>> params;  // mirrors NetworkT::params
  TensorT<T> input;                // dL/d(input), batch shaped
};

template <typename T>
class NetworkT {
 public:
  using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  using MatMap = Eigen::Map<Mat>;
  using ConstMatMap = Eigen::Map<const Mat>;

  NetworkSpec spec;
  std::vector<TensorT<T>> params;  // per conv/fc layer: weight then bias

  NetworkT() = default;

  explicit NetworkT(NetworkSpec s) : spec(std::move(s)) {
    chain_ = spec.shape_chain();
    param_index_.assign(spec.layers.size(), -1);
    for (size_t l = 0; l < spec.layers.size(); ++l) {
      const auto& ls = spec.layers[l];
      if (ls.kind == LayerKind::conv) {
        const int cin = chain_[l][2];
        param_index_[l] = int(params.size());
        params.emplace_back(std::vector<int>{ls.kh * ls.kw * cin, ls.oc});
        params.emplace_back(std::vector<int>{ls.oc});
      } else if (ls.kind == LayerKind::fc) {
        const int in = int(shape_numel(chain_[l]));
        param_index_[l] = int(params.size());
        params.emplace_back(std::vector<int>{in, ls.units});
        params.emplace_back(std::vector<int>{ls.units});
      }
    }
  }

  // Uniform fan-in init, biases zero.
  void init_weights(Rng& rng) {
    for (size_t l = 0; l < spec.layers.size(); ++l) {
      if (param_index_[l] < 0) continue;
      auto& w = params[size_t(param_index_[l])];
      const int fan_in = w.shape[0];
      const double bound = std::sqrt(1.0 / double(fan_in));
      for (auto& v : w.data) v = T(rng.uniform(-bound, bound));
      params[size_t(param_index_[l]) + 1].fill(T(0));
    }
  }

  // Forward pass on a batch [m, input_shape...]; caches activations for a
  // subsequent backward. Returns the output activation [m, out].
  const TensorT<T>& forward(const TensorT<T>& input) {
    check_input(input);
    const int m = input.shape[0];
    acts_.resize(spec.layers.size() + 1);
    acts_[0] = input;
    cols_.resize(spec.layers.size());
    for (size_t l = 0; l < spec.layers.size(); ++l) {
      const auto& ls = spec.layers[l];
      const auto& x = acts_[l];
      auto& y = acts_[l + 1];
      std::vector<int> yshape = batch_shape(m, chain_[l + 1]);
      if (y.shape != yshape) y = TensorT<T>(yshape);
      switch (ls.kind) {
        case LayerKind::conv:
          conv_forward(l, x, y);
          break;
        case LayerKind::fc:
          fc_forward(l, x, y);
          break;
        case LayerKind::relu: {
          const T* xp = x.ptr();
          T* yp = y.ptr();
          const int64_t n = x.numel();
          for (int64_t i = 0; i < n; ++i) yp[i] = xp[i] > T(0) ? xp[i] : T(0);
          break;
        }
        case LayerKind::sigmoid: {
          const T* xp = x.ptr();
          T* yp = y.ptr();
          const int64_t n = x.numel();
          for (int64_t i = 0; i < n; ++i) yp[i] = T(1) / (T(1) + std::exp(-xp[i]));
          break;
        }
      }
#ifndef NDEBUG
      if (!y.all_finite())
        throw std::runtime_error("non-finite activation after layer " + std::to_string(l));
#endif
    }
    forward_done_ = true;
    return acts_.back();
  }

  // Reverse pass for the cached forward. `upstream` is dL/d(output) with the
  // output's batch shape. Returns parameter gradients plus the gradient at
  // the network input (needed when two networks are chained through a
  // bottleneck).
  GradientsT<T> backward(const TensorT<T>& upstream) {
    if (!forward_done_) throw std::logic_error("backward called before forward");
    if (upstream.shape != acts_.back().shape)
      throw std::invalid_argument("upstream gradient shape " + shape_str(upstream.shape) +
                                  " does not match output " + shape_str(acts_.back().shape));
    GradientsT<T> g;
    g.params.reserve(params.size());
    for (const auto& p : params) g.params.emplace_back(p.shape);

    TensorT<T> dy = upstream;
    for (int l = int(spec.layers.size()) - 1; l >= 0; --l) {
      const auto& ls = spec.layers[size_t(l)];
      const auto& x = acts_[size_t(l)];
      TensorT<T> dx(x.shape);
      switch (ls.kind) {
        case LayerKind::conv:
          conv_backward(size_t(l), x, dy, g, dx);
          break;
        case LayerKind::fc:
          fc_backward(size_t(l), x, dy, g, dx);
          break;
        case LayerKind::relu: {
          const T* xp = x.ptr();
          const T* dp = dy.ptr();
          T* op = dx.ptr();
          const int64_t n = x.numel();
          for (int64_t i = 0; i < n; ++i) op[i] = xp[i] > T(0) ? dp[i] : T(0);
          break;
        }
        case LayerKind::sigmoid: {
          const T* yp = acts_[size_t(l) + 1].ptr();
          const T* dp = dy.ptr();
          T* op = dx.ptr();
          const int64_t n = x.numel();
          for (int64_t i = 0; i < n; ++i) op[i] = dp[i] * yp[i] * (T(1) - yp[i]);
          break;
        }
      }
      dy = std::move(dx);
    }
    g.input = std::move(dy);
    return g;
  }

  // Last forward's output (valid until the next forward).
  const TensorT<T>& output() const { return acts_.back(); }

  template <typename U>
  NetworkT<U> cast() const {
    NetworkT<U> out{spec};
    for (size_t i = 0; i < params.size(); ++i)
      for (size_t k = 0; k < params[i].data.size(); ++k)
        out.params[i].data[k] = U(params[i].data[k]);
    return out;
  }

  const std::vector<std::vector<int>>& shape_chain() const { return chain_; }

 private:
  static std::vector<int> batch_shape(int m, const std::vector<int>& per_sample) {
    std::vector<int> s{m};
    s.insert(s.end(), per_sample.begin(), per_sample.end());
    return s;
  }

  void check_input(const TensorT<T>& input) const {
    if (input.rank() < 1 || input.sample_numel() != shape_numel(spec.input_shape))
      throw std::invalid_argument("input shape " + shape_str(input.shape) +
                                  " does not match network input " + shape_str(spec.input_shape));
#ifndef NDEBUG
    if (!input.all_finite()) throw std::runtime_error("non-finite network input");
#endif
  }

  struct ConvGeom {
    int h, w, c, kh, kw, oc, s, oh, ow;
    int k() const { return kh * kw * c; }
  };

  ConvGeom geom(size_t l) const {
    const auto& ls = spec.layers[l];
    const auto& in = chain_[l];
    const auto& out = chain_[l + 1];
    return {in[0], in[1], in[2], ls.kh, ls.kw, ls.oc, ls.stride, out[0], out[1]};
  }

  // Patch rows are contiguous in HWC, so each (ky) slab is one memcpy.
  static void im2col(const T* x, const ConvGeom& g, T* cols) {
    const int kwc = g.kw * g.c;
    for (int oy = 0; oy < g.oh; ++oy)
      for (int ox = 0; ox < g.ow; ++ox) {
        T* row = cols + (int64_t(oy) * g.ow + ox) * g.k();
        for (int ky = 0; ky < g.kh; ++ky) {
          const T* src = x + (int64_t(oy * g.s + ky) * g.w + int64_t(ox) * g.s) * g.c;
          std::copy(src, src + kwc, row + int64_t(ky) * kwc);
        }
      }
  }

  static void col2im_add(const T* cols, const ConvGeom& g, T* dx) {
    const int kwc = g.kw * g.c;
    for (int oy = 0; oy < g.oh; ++oy)
      for (int ox = 0; ox < g.ow; ++ox) {
        const T* row = cols + (int64_t(oy) * g.ow + ox) * g.k();
        for (int ky = 0; ky < g.kh; ++ky) {
          T* dst = dx + (int64_t(oy * g.s + ky) * g.w + int64_t(ox) * g.s) * g.c;
          const T* src = row + int64_t(ky) * kwc;
          for (int i = 0; i < kwc; ++i) dst[i] += src[i];
        }
      }
  }

  void conv_forward(size_t l, const TensorT<T>& x, TensorT<T>& y) {
    const ConvGeom g = geom(l);
    const int m = x.shape[0];
    const int64_t rows = int64_t(m) * g.oh * g.ow;
    auto& cols = cols_[l];
    if (cols.numel() != rows * g.k()) cols = TensorT<T>({int(rows), g.k()});
    for (int n = 0; n < m; ++n)
      im2col(x.ptr() + int64_t(n) * x.sample_numel(), g,
             cols.ptr() + int64_t(n) * g.oh * g.ow * g.k());
    const auto& w = params[size_t(param_index_[l])];
    const auto& b = params[size_t(param_index_[l]) + 1];
    ConstMatMap cm(cols.ptr(), rows, g.k());
    ConstMatMap wm(w.ptr(), g.k(), g.oc);
    MatMap ym(y.ptr(), rows, g.oc);
    ym.noalias() = cm * wm;
    add_bias(y.ptr(), b.ptr(), rows, g.oc);
  }

  void conv_backward(size_t l, const TensorT<T>& x, const TensorT<T>& dy,
                     GradientsT<T>& g, TensorT<T>& dx) {
    const ConvGeom geo = geom(l);
    const int m = x.shape[0];
    const int64_t rows = int64_t(m) * geo.oh * geo.ow;
    const auto& cols = cols_[l];  // cached by forward
    const auto& w = params[size_t(param_index_[l])];
    auto& dw = g.params[size_t(param_index_[l])];
    auto& db = g.params[size_t(param_index_[l]) + 1];

    ConstMatMap dym(dy.ptr(), rows, geo.oc);
    ConstMatMap cm(cols.ptr(), rows, geo.k());
    MatMap dwm(dw.ptr(), geo.k(), geo.oc);
    dwm.noalias() = cm.transpose() * dym;
    col_sums(dy.ptr(), db.ptr(), rows, geo.oc);

    TensorT<T> dcols({int(rows), geo.k()});
    MatMap dcm(dcols.ptr(), rows, geo.k());
    ConstMatMap wm(w.ptr(), geo.k(), geo.oc);
    dcm.noalias() = dym * wm.transpose();
    dx.fill(T(0));
    for (int n = 0; n < m; ++n)
      col2im_add(dcols.ptr() + int64_t(n) * geo.oh * geo.ow * geo.k(), geo,
                 dx.ptr() + int64_t(n) * dx.sample_numel());
  }

  void fc_forward(size_t l, const TensorT<T>& x, TensorT<T>& y) {
    const int m = x.shape[0];
    const int in = int(x.sample_numel());
    const auto& w = params[size_t(param_index_[l])];
    const auto& b = params[size_t(param_index_[l]) + 1];
    const int out = w.shape[1];
    ConstMatMap xm(x.ptr(), m, in);
    ConstMatMap wm(w.ptr(), in, out);
    MatMap ym(y.ptr(), m, out);
    ym.noalias() = xm * wm;
    add_bias(y.ptr(), b.ptr(), m, out);
  }

  void fc_backward(size_t l, const TensorT<T>& x, const TensorT<T>& dy,
                   GradientsT<T>& g, TensorT<T>& dx) {
    const int m = x.shape[0];
    const int in = int(x.sample_numel());
    const auto& w = params[size_t(param_index_[l])];
    const int out = w.shape[1];
    auto& dw = g.params[size_t(param_index_[l])];
    auto& db = g.params[size_t(param_index_[l]) + 1];
    ConstMatMap xm(x.ptr(), m, in);
    ConstMatMap dym(dy.ptr(), m, out);
    MatMap dwm(dw.ptr(), in, out);
    dwm.noalias() = xm.transpose() * dym;
    col_sums(dy.ptr(), db.ptr(), m, out);
    ConstMatMap wm(w.ptr(), in, out);
    MatMap dxm(dx.ptr(), m, in);
    dxm.noalias() = dym * wm.transpose();
  }

  std::vector<std::vector<int>> chain_;
  std::vector<int> param_index_;      // layer -> index of weight tensor, -1 if none
  std::vector<TensorT<T>> acts_;      // acts_[0] = input, acts_[l+1] = layer l output
  std::vector<TensorT<T>> cols_;      // per conv layer im2col workspace
  bool forward_done_ = false;
};

using Network = NetworkT<float>;

// ---------------------------------------------------------------------------
// Loss and optimizer
// ---------------------------------------------------------------------------

// L = 1/(2m) sum_j ||pred_j - target_j||^2, gradient (pred - target)/m.
template <typename T>
std::pair<T, TensorT<T>> quadratic_loss(const TensorT<T>& pred, const TensorT<T>& target) {
  if (pred.shape != target.shape)
    throw std::invalid_argument("loss shape mismatch " + shape_str(pred.shape) + " vs " +
                                shape_str(target.shape));
  const int m = pred.shape.empty() ? 0 : pred.shape[0];
  if (m < 1) throw std::invalid_argument("loss needs at least one sample");
  TensorT<T> grad(pred.shape);
  T loss = 0;
  const int64_t n = pred.numel();
  for (int64_t i = 0; i < n; ++i) {
    const T d = pred.data[size_t(i)] - target.data[size_t(i)];
    loss += d * d;
    grad.data[size_t(i)] = d / T(m);
  }
  return {loss / (T(2) * T(m)), std::move(grad)};
}

// Running mean-square gradient state for RMSProp.
template <typename T>
struct OptimizerStateT {
  std::vector<TensorT<T>> acc;
  double rho = 0.9;
  double eps = 1e-6;

  OptimizerStateT() = default;
  OptimizerStateT(const NetworkT<T>& net, double rho_ = 0.9, double eps_ = 1e-6)
      : rho(rho_), eps(eps_) {
    acc.reserve(net.params.size());
    for (const auto& p : net.params) acc.emplace_back(p.shape);
  }
};

using OptimizerState = OptimizerStateT<float>;

// acc <- rho*acc + (1-rho)*g^2 ; p <- p - lr * g / sqrt(acc + eps)
template <typename T>
void rmsprop_step(std::vector<TensorT<T>>& params, const std::vector<TensorT<T>>& grads,
                  OptimizerStateT<T>& state, double lr) {
  if (params.size() != grads.size() || params.size() != state.acc.size())
    throw std::invalid_argument("optimizer tensor count mismatch");
  const T rho = T(state.rho), eps = T(state.eps), eta = T(lr);
  for (size_t i = 0; i < params.size(); ++i) {
    if (params[i].shape != grads[i].shape)
      throw std::invalid_argument("optimizer shape mismatch at tensor " + std::to_string(i));
#ifndef NDEBUG
    if (!grads[i].all_finite())
      throw std::runtime_error("non-finite gradient in tensor " + std::to_string(i));
#endif
    T* p = params[i].ptr();
    const T* g = grads[i].ptr();
    T* a = state.acc[i].ptr();
    const int64_t n = params[i].numel();
    for (int64_t k = 0; k < n; ++k) {
      // std::fma pins the rounding so results do not depend on how the
      // compiler vectorizes this loop for a given buffer alignment.
      a[k] = std::fma(rho, a[k], (T(1) - rho) * g[k] * g[k]);
      p[k] -= eta * g[k] / std::sqrt(a[k] + eps);
    }
  }
}

// Linear schedule from `start` to `end` over `steps` updates, then flat.
inline double linear_schedule(double start, double end, int64_t step, int64_t steps) {
  if (steps <= 0 || step >= steps) return end;
  return start + (end - start) * double(step) / double(steps);
}

}  // namespace modreach
