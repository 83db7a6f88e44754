#pragma once

#include <array>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "modreach/rng.hpp"

namespace modreach {

// One environment step in bottleneck coordinates. `s`/`s2` hold the
// normalized scene vector (2+dof components used). `terminal` marks a goal
// completion whose successor value must not be bootstrapped; step-limit cuts
// keep bootstrapping.
struct Transition {
  std::array<float, 5> s{}, s2{};
  int32_t action = 0;
  float reward = 0;
  uint8_t terminal = 0;

  bool operator==(const Transition& o) const {
    return s == o.s && s2 == o.s2 && action == o.action && reward == o.reward &&
           terminal == o.terminal;
  }
};

// Same step but with the rendered observations, for fine-tuning through the
// camera. Images are stored quantized.
struct VisualTransition {
  std::vector<uint8_t> img, img2;
  int32_t action = 0;
  float reward = 0;
  uint8_t terminal = 0;
};

// Fixed-capacity ring: once full, new items overwrite the oldest.
template <typename T>
class ReplayBuffer {
 public:
  explicit ReplayBuffer(size_t capacity) : cap_(capacity) {
    if (capacity < 1) throw std::invalid_argument("replay capacity must be positive");
  }

  void push(T item) {
    if (items_.size() < cap_) {
      items_.push_back(std::move(item));
    } else {
      items_[head_] = std::move(item);
      head_ = (head_ + 1) % cap_;
    }
  }

  size_t size() const { return items_.size(); }
  size_t capacity() const { return cap_; }
  bool empty() const { return items_.empty(); }

  const T& operator[](size_t i) const { return items_[i]; }

  const T& sample(Rng& rng) const {
    if (items_.empty()) throw std::logic_error("sample from empty replay buffer");
    return items_[size_t(rng.uniform_int(int(items_.size())))];
  }

  // Raw storage access for serialization; `head` is the next overwrite slot.
  const std::vector<T>& items() const { return items_; }
  size_t head() const { return head_; }
  void restore(std::vector<T> items, size_t head) {
    if (items.size() > cap_ || (items.size() < cap_ && head != 0) || (head >= cap_ && !items.empty()))
      throw std::invalid_argument("replay restore state inconsistent with capacity");
    items_ = std::move(items);
    head_ = items_.empty() ? 0 : head;
  }

 private:
  size_t cap_;
  size_t head_ = 0;
  std::vector<T> items_;
};

}  // namespace modreach
