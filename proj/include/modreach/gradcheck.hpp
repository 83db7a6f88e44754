#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "modreach/nn.hpp"
#include "modreach/rng.hpp"

namespace modreach {

inline double gradcheck_rel_err(double a, double b) {
  return std::abs(a - b) / std::max(1e-8, std::abs(a) + std::abs(b));
}

struct GradCheckReport {
  std::string name;
  int checked = 0;
  double max_rel_err = 0.0;
  bool pass(double tol = 1e-4) const { return checked > 0 && max_rel_err <= tol; }
};

namespace detail {

template <typename Net>
double gradcheck_loss(Net& net, const TensorT<double>& x, const TensorT<double>& y) {
  return quadratic_loss(net.forward(x), y).first;
}

inline TensorT<double> gradcheck_input(const NetworkSpec& spec, int batch, Rng& rng) {
  std::vector<int> shape{batch};
  shape.insert(shape.end(), spec.input_shape.begin(), spec.input_shape.end());
  TensorT<double> x(shape);
  for (auto& v : x.data) v = rng.uniform(-1.0, 1.0);
  return x;
}

inline TensorT<double> gradcheck_target(const NetworkSpec& spec, int batch, Rng& rng) {
  const auto out = spec.shape_chain().back();
  std::vector<int> shape{batch};
  shape.insert(shape.end(), out.begin(), out.end());
  TensorT<double> y(shape);
  for (auto& v : y.data) v = rng.uniform(-1.0, 1.0);
  return y;
}

}  // namespace detail

// Central differences on randomly chosen parameters, in double precision,
// against the analytic backward pass. The objective is the quadratic loss
// against a fixed random target.
inline GradCheckReport gradcheck_params(const std::string& name, const NetworkSpec& spec,
                                        int n_checks, uint64_t seed, int batch = 2,
                                        double h = 1e-5) {
  NetworkT<double> net(spec);
  Rng rng(seed);
  net.init_weights(rng);
  const TensorT<double> x = detail::gradcheck_input(spec, batch, rng);
  const TensorT<double> y = detail::gradcheck_target(spec, batch, rng);

  auto [loss, dy] = quadratic_loss(net.forward(x), y);
  (void)loss;
  const auto analytic = net.backward(dy);

  int64_t total = 0;
  for (const auto& p : net.params) total += p.numel();
  if (total == 0) throw std::invalid_argument("gradcheck_params on a network without parameters");

  GradCheckReport rep{name, 0, 0.0};
  for (int c = 0; c < n_checks; ++c) {
    int64_t flat = int64_t(rng.uniform_int(uint64_t(total)));
    size_t t = 0;
    while (flat >= net.params[t].numel()) flat -= net.params[t++].numel();
    double& p = net.params[t].data[size_t(flat)];
    const double saved = p;
    p = saved + h;
    const double lp = detail::gradcheck_loss(net, x, y);
    p = saved - h;
    const double lm = detail::gradcheck_loss(net, x, y);
    p = saved;
    const double numeric = (lp - lm) / (2.0 * h);
    const double exact = analytic.params[t].data[size_t(flat)];
    rep.max_rel_err = std::max(rep.max_rel_err, gradcheck_rel_err(numeric, exact));
    ++rep.checked;
  }
  return rep;
}

// Same check against the gradient at the network input; this is the path the
// combined fine-tuning update rides on, and the only gradient parameterless
// layers expose.
inline GradCheckReport gradcheck_inputs(const std::string& name, const NetworkSpec& spec,
                                        int n_checks, uint64_t seed, int batch = 2,
                                        double h = 1e-5) {
  NetworkT<double> net(spec);
  Rng rng(seed);
  net.init_weights(rng);
  TensorT<double> x = detail::gradcheck_input(spec, batch, rng);
  const TensorT<double> y = detail::gradcheck_target(spec, batch, rng);

  auto [loss, dy] = quadratic_loss(net.forward(x), y);
  (void)loss;
  const auto analytic = net.backward(dy);

  GradCheckReport rep{name, 0, 0.0};
  for (int c = 0; c < n_checks; ++c) {
    const int64_t i = int64_t(rng.uniform_int(uint64_t(x.numel())));
    const double saved = x.data[size_t(i)];
    x.data[size_t(i)] = saved + h;
    const double lp = detail::gradcheck_loss(net, x, y);
    x.data[size_t(i)] = saved - h;
    const double lm = detail::gradcheck_loss(net, x, y);
    x.data[size_t(i)] = saved;
    const double numeric = (lp - lm) / (2.0 * h);
    const double exact = analytic.input.data[size_t(i)];
    rep.max_rel_err = std::max(rep.max_rel_err, gradcheck_rel_err(numeric, exact));
    ++rep.checked;
  }
  return rep;
}

// One report per layer type (parameters and input gradients) plus the two
// assembled networks at 100 random parameters each.
inline std::vector<GradCheckReport> gradcheck_all(uint64_t seed, int dof = 3) {
  NetworkSpec conv_s1;
  conv_s1.input_shape = {6, 6, 2};
  conv_s1.layers = {LayerSpec::conv2d(3, 3, 4, 1)};
  NetworkSpec conv_s2;
  conv_s2.input_shape = {7, 7, 1};
  conv_s2.layers = {LayerSpec::conv2d(3, 3, 2, 2)};
  NetworkSpec fc1;
  fc1.input_shape = {7};
  fc1.layers = {LayerSpec::fc(5)};
  NetworkSpec act_relu;
  act_relu.input_shape = {12};
  act_relu.layers = {LayerSpec::relu()};
  NetworkSpec act_sig;
  act_sig.input_shape = {12};
  act_sig.layers = {LayerSpec::sigmoid()};

  std::vector<GradCheckReport> out;
  out.push_back(gradcheck_params("conv stride 1", conv_s1, 40, seed));
  out.push_back(gradcheck_params("conv stride 2", conv_s2, 40, seed + 1));
  out.push_back(gradcheck_params("fc", fc1, 35, seed + 2));
  out.push_back(gradcheck_inputs("conv input", conv_s1, 24, seed + 3));
  out.push_back(gradcheck_inputs("fc input", fc1, 14, seed + 4));
  out.push_back(gradcheck_inputs("relu input", act_relu, 24, seed + 5));
  out.push_back(gradcheck_inputs("sigmoid input", act_sig, 24, seed + 6));
  out.push_back(gradcheck_params("perception net", NetworkSpec::perception(dof), 100, seed + 7));
  out.push_back(gradcheck_params("control net", NetworkSpec::control(dof), 100, seed + 8));
  out.push_back(gradcheck_inputs("perception net input", NetworkSpec::perception(dof), 20, seed + 9));
  out.push_back(gradcheck_inputs("control net input", NetworkSpec::control(dof), 20, seed + 10));
  return out;
}

}  // namespace modreach
