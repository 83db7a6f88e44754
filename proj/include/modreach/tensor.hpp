#pragma once

#include <cmath>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace modreach {

inline int64_t shape_numel(const std::vector<int>& shape) {
  int64_t n = 1;
  for (int d : shape) {
    if (d <= 0) throw std::invalid_argument("tensor dimension must be positive");
    n *= d;
  }
  return n;
}

// Dense row-major tensor. float for training, double for gradient checks.
template <typename T>
struct TensorT {
  std::vector<int> shape;
  std::vector<T> data;

  TensorT() = default;
  explicit TensorT(std::vector<int> s) : shape(std::move(s)) {
    data.assign(size_t(shape_numel(shape)), T(0));
  }

  static TensorT zeros(std::vector<int> s) { return TensorT(std::move(s)); }

  int64_t numel() const { return int64_t(data.size()); }
  int dim(int i) const { return shape.at(size_t(i)); }
  int rank() const { return int(shape.size()); }

  // Elements per sample for batched tensors of shape [m, ...].
  int64_t sample_numel() const {
    if (shape.empty()) throw std::invalid_argument("tensor has no batch dimension");
    return numel() / shape[0];
  }

  T* ptr() { return data.data(); }
  const T* ptr() const { return data.data(); }

  void fill(T v) { std::fill(data.begin(), data.end(), v); }

  bool all_finite() const {
    for (T v : data)
      if (!std::isfinite(double(v))) return false;
    return true;
  }
};

using Tensor = TensorT<float>;

inline std::string shape_str(const std::vector<int>& s) {
  std::string out = "[";
  for (size_t i = 0; i < s.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(s[i]);
  }
  return out + "]";
}

}  // namespace modreach
