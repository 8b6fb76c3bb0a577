#pragma once

#include <cstddef>
#include <deque>
#include <stdexcept>
#include <vector>

#include "pirl/augmented.hpp"
#include "pirl/rng.hpp"

namespace pirl {

struct Transition {
  AugmentedState s;
  int action = 0;  // index into the action set
  double reward = 0.0;
  AugmentedState s_next;
  bool terminal = false;
};

/// Bounded FIFO store with uniform sampling (with replacement).
class ReplayMemory {
 public:
  explicit ReplayMemory(std::size_t capacity) : capacity_(capacity) {
    if (capacity == 0) throw std::invalid_argument("ReplayMemory: capacity must be positive");
  }

  void push(Transition t) {
    if (buffer_.size() == capacity_) buffer_.pop_front();
    buffer_.push_back(std::move(t));
  }

  std::size_t size() const { return buffer_.size(); }
  std::size_t capacity() const { return capacity_; }
  const Transition& operator[](std::size_t i) const { return buffer_[i]; }

  const Transition& sample(Rng& rng) const {
    if (buffer_.empty()) throw std::logic_error("ReplayMemory: sampling from empty buffer");
    return buffer_[rng.uniform_int(static_cast<int>(buffer_.size()))];
  }

  std::vector<Transition> sample_batch(std::size_t n, Rng& rng) const {
    std::vector<Transition> batch;
    batch.reserve(n);
    for (std::size_t i = 0; i < n; ++i) batch.push_back(sample(rng));
    return batch;
  }

 private:
  std::size_t capacity_;
  std::deque<Transition> buffer_;
};

}  // namespace pirl
