#pragma once

#include <span>
#include <string>

#include "flashsac/common.hpp"

namespace flashsac {

struct Transition {
  Vector state;
  Vector action;
  double reward_raw = 0.0;
  Vector next_state;
  bool terminated = false;
  bool truncated = false;
};

// Circular FIFO buffer. States and actions are held in single precision and
// promoted to double when sampled.
class ReplayBuffer {
 public:
  ReplayBuffer(long long capacity, int state_dim, int action_dim);

  void push_batch(std::span<const Transition> transitions);
  // Columnar fast path used by the trainer.
  void push_batch(const Matrix& states, const Matrix& actions,
                  const Vector& rewards, const Matrix& next_states,
                  const BoolVec& terminated, const BoolVec& truncated);

  struct Batch {
    Matrix states;       // [B x S]
    Matrix actions;      // [B x A]
    Vector rewards_raw;  // [B]
    Matrix next_states;  // [B x S]
    BoolVec terminated;
    BoolVec truncated;
  };

  Batch sample(int batch_size, Rng& rng) const;
  std::vector<long long> sample_indices(int batch_size, Rng& rng) const;
  Batch gather(const std::vector<long long>& indices) const;

  long long capacity() const { return capacity_; }
  long long size() const { return size_; }
  long long write_cursor() const { return cursor_; }
  long long total_inserted() const { return total_; }
  int state_dim() const { return state_dim_; }
  int action_dim() const { return action_dim_; }

  // Debug snapshot in the checkpoint container format.
  void save_snapshot(const std::string& path) const;

 private:
  void push_one(const double* s, const double* a, double r, const double* s2,
                bool term, bool trunc);

  long long capacity_;
  int state_dim_, action_dim_;
  long long cursor_ = 0, size_ = 0, total_ = 0;
  std::vector<float> states_, actions_, next_states_, rewards_;
  BoolVec terminated_, truncated_;
};

}  // namespace flashsac
