#ifndef JSAFE_AGENTS_REPLAY_HPP
#define JSAFE_AGENTS_REPLAY_HPP

#include <random>
#include <vector>

#include "jsafe/errors.hpp"
#include "jsafe/traffic/observation.hpp"

namespace jsafe {

struct Transition {
  ObservationMatrix state;
  int action = 0;
  double reward = 0.0;
  ObservationMatrix next_state;
  bool done = false;
};

/// Fixed-capacity ring buffer; the oldest transition is overwritten first.
class ReplayMemory {
 public:
  explicit ReplayMemory(std::size_t capacity) : capacity_(capacity) {
    if (capacity == 0) throw ContractViolation("replay capacity must be positive");
    items_.reserve(std::min<std::size_t>(capacity, 1u << 16));
  }

  void push(Transition t) {
    if (items_.size() < capacity_) {
      items_.push_back(std::move(t));
    } else {
      items_[next_] = std::move(t);
    }
    next_ = (next_ + 1) % capacity_;
  }

  std::size_t size() const { return items_.size(); }
  std::size_t capacity() const { return capacity_; }
  const Transition& operator[](std::size_t i) const { return items_.at(i); }

  /// `count` indices drawn uniformly with replacement.
  std::vector<std::size_t> sample_indices(std::size_t count, std::mt19937_64& rng) const {
    if (items_.empty()) throw ContractViolation("cannot sample from an empty replay memory");
    std::uniform_int_distribution<std::size_t> pick(0, items_.size() - 1);
    std::vector<std::size_t> out(count);
    for (auto& i : out) i = pick(rng);
    return out;
  }

  std::vector<const Transition*> sample(std::size_t count, std::mt19937_64& rng) const {
    std::vector<const Transition*> out;
    for (std::size_t i : sample_indices(count, rng)) out.push_back(&items_[i]);
    return out;
  }

 private:
  std::size_t capacity_;
  std::size_t next_ = 0;
  std::vector<Transition> items_;
};

}  // namespace jsafe

#endif  // JSAFE_AGENTS_REPLAY_HPP
