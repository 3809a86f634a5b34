#include "flashsac/replay.hpp"

#include "flashsac/checkpoint.hpp"

namespace flashsac {

ReplayBuffer::ReplayBuffer(long long capacity, int state_dim, int action_dim)
    : capacity_(capacity), state_dim_(state_dim), action_dim_(action_dim) {
  if (capacity <= 0) throw ConfigError("ReplayBuffer: capacity must be positive");
  if (state_dim <= 0 || action_dim <= 0)
    throw ConfigError("ReplayBuffer: dims must be positive");
  states_.resize(static_cast<size_t>(capacity) * state_dim);
  next_states_.resize(static_cast<size_t>(capacity) * state_dim);
  actions_.resize(static_cast<size_t>(capacity) * action_dim);
  rewards_.resize(static_cast<size_t>(capacity));
  terminated_.resize(static_cast<size_t>(capacity));
  truncated_.resize(static_cast<size_t>(capacity));
}

void ReplayBuffer::push_one(const double* s, const double* a, double r,
                            const double* s2, bool term, bool trunc) {
  size_t at = static_cast<size_t>(cursor_);
  for (int i = 0; i < state_dim_; ++i) {
    states_[at * state_dim_ + i] = static_cast<float>(s[i]);
    next_states_[at * state_dim_ + i] = static_cast<float>(s2[i]);
  }
  for (int i = 0; i < action_dim_; ++i)
    actions_[at * action_dim_ + i] = static_cast<float>(a[i]);
  rewards_[at] = static_cast<float>(r);
  // termination takes precedence when both flags are raised
  terminated_[at] = term;
  truncated_[at] = trunc && !term;
  cursor_ = (cursor_ + 1) % capacity_;
  total_ += 1;
  if (size_ < capacity_) size_ += 1;
}

void ReplayBuffer::push_batch(std::span<const Transition> transitions) {
  for (const auto& t : transitions) {
    if (t.state.size() != state_dim_ || t.next_state.size() != state_dim_ ||
        t.action.size() != action_dim_) {
      throw ShapeError("ReplayBuffer::push_batch: transition schema mismatch");
    }
    push_one(t.state.data(), t.action.data(), t.reward_raw, t.next_state.data(),
             t.terminated, t.truncated);
  }
}

void ReplayBuffer::push_batch(const Matrix& states, const Matrix& actions,
                              const Vector& rewards, const Matrix& next_states,
                              const BoolVec& terminated, const BoolVec& truncated) {
  const auto n = states.rows();
  if (states.cols() != state_dim_ || next_states.cols() != state_dim_ ||
      actions.cols() != action_dim_ || actions.rows() != n ||
      rewards.size() != n || next_states.rows() != n ||
      static_cast<Eigen::Index>(terminated.size()) != n ||
      static_cast<Eigen::Index>(truncated.size()) != n) {
    throw ShapeError("ReplayBuffer::push_batch: columnar schema mismatch");
  }
  Vector s(state_dim_), s2(state_dim_), a(action_dim_);
  for (Eigen::Index r = 0; r < n; ++r) {
    s = states.row(r);
    s2 = next_states.row(r);
    a = actions.row(r);
    push_one(s.data(), a.data(), rewards[r], s2.data(), terminated[r] != 0,
             truncated[r] != 0);
  }
}

std::vector<long long> ReplayBuffer::sample_indices(int batch_size,
                                                    Rng& rng) const {
  if (size_ < 1) throw UsageError("ReplayBuffer::sample: buffer is empty");
  std::vector<long long> idx(static_cast<size_t>(batch_size));
  for (auto& i : idx)
    i = static_cast<long long>(rng.uniform() * static_cast<double>(size_));
  return idx;
}

ReplayBuffer::Batch ReplayBuffer::gather(const std::vector<long long>& indices) const {
  Batch b;
  const int n = static_cast<int>(indices.size());
  b.states.resize(n, state_dim_);
  b.next_states.resize(n, state_dim_);
  b.actions.resize(n, action_dim_);
  b.rewards_raw.resize(n);
  b.terminated.resize(static_cast<size_t>(n));
  b.truncated.resize(static_cast<size_t>(n));
  for (int r = 0; r < n; ++r) {
    size_t at = static_cast<size_t>(indices[static_cast<size_t>(r)]);
    for (int i = 0; i < state_dim_; ++i) {
      b.states(r, i) = states_[at * state_dim_ + i];
      b.next_states(r, i) = next_states_[at * state_dim_ + i];
    }
    for (int i = 0; i < action_dim_; ++i)
      b.actions(r, i) = actions_[at * action_dim_ + i];
    b.rewards_raw[r] = rewards_[at];
    b.terminated[static_cast<size_t>(r)] = terminated_[at];
    b.truncated[static_cast<size_t>(r)] = truncated_[at];
  }
  return b;
}

ReplayBuffer::Batch ReplayBuffer::sample(int batch_size, Rng& rng) const {
  return gather(sample_indices(batch_size, rng));
}

void ReplayBuffer::save_snapshot(const std::string& path) const {
  std::vector<NamedTensor> tensors;
  const auto n = size_;
  auto to_matrix = [&](const std::vector<float>& src, int dim) {
    Matrix m(n, dim);
    for (long long r = 0; r < n; ++r)
      for (int c = 0; c < dim; ++c)
        m(r, c) = src[static_cast<size_t>(r) * dim + c];
    return m;
  };
  tensors.push_back(NamedTensor::from_matrix("state", to_matrix(states_, state_dim_)));
  tensors.push_back(
      NamedTensor::from_matrix("action", to_matrix(actions_, action_dim_)));
  Vector r(n), term(n), trunc(n);
  for (long long i = 0; i < n; ++i) {
    r[i] = rewards_[static_cast<size_t>(i)];
    term[i] = terminated_[static_cast<size_t>(i)] ? 1.0 : 0.0;
    trunc[i] = truncated_[static_cast<size_t>(i)] ? 1.0 : 0.0;
  }
  tensors.push_back(NamedTensor::from_vector("reward_raw", r));
  tensors.push_back(
      NamedTensor::from_matrix("next_state", to_matrix(next_states_, state_dim_)));
  tensors.push_back(NamedTensor::from_vector("terminated", term));
  tensors.push_back(NamedTensor::from_vector("truncated", trunc));
  write_tensor_file(path, tensors);
}

}  // namespace flashsac
