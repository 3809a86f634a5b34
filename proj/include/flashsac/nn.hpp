#pragma once

#include <array>
#include <optional>

#include "flashsac/common.hpp"

namespace flashsac {

enum class Mode { Train, Eval };

constexpr double kBatchNormEps = 1e-5;
constexpr double kBatchNormMomentum = 0.01;
constexpr double kRmsNormEps = 1e-8;

struct LinearParams {
  Matrix weight;  // [out_dim x in_dim]
  Vector bias;    // [out_dim]
  int in_dim() const { return static_cast<int>(weight.cols()); }
  int out_dim() const { return static_cast<int>(weight.rows()); }
};

// Shared container for batch-norm and RMS-norm parameters. RMS instances use
// gamma only; running statistics are sized zero for them.
struct NormParams {
  Vector gamma;
  Vector beta;
  Vector running_mean;  // batch norm only
  Vector running_var;   // batch norm only
  double momentum = kBatchNormMomentum;
  int dim() const { return static_cast<int>(gamma.size()); }
  bool is_batch_norm() const { return running_mean.size() > 0; }
};

struct BlockParams {
  LinearParams expand;   // [h -> e*h]
  LinearParams project;  // [e*h -> h]
  NormParams bn;         // [e*h]
  int expansion = 4;
};

struct NetworkConfig {
  int input_dim = 0;
  int hidden = 0;
  int blocks = 0;
  int head_dim = 0;
  int expansion = 4;
  bool use_batch_norm = true;  // ablation switch; blocks skip BN when false
};

struct NetworkParams {
  NetworkConfig config;
  LinearParams embed;
  std::vector<BlockParams> blocks;
  NormParams final_norm;  // RMS, [hidden]
  LinearParams head;
};

// ---- Forward tapes -------------------------------------------------------

struct LinearTape {
  Matrix x;  // forward input, needed for dW
};

struct BatchNormTape {
  Mode mode = Mode::Train;
  Vector inv_std;  // 1/sqrt(var + eps); batch var in train, running var in eval
  Matrix xhat;     // normalized input
  Vector batch_mean, batch_var;  // train mode only
};

struct RmsNormTape {
  Matrix x;
  Vector inv_rms;  // per row
};

struct BlockTape {
  LinearTape expand;  // expand.x is the block input
  BatchNormTape bn;
  Matrix relu_out;    // doubles as the projection input
};

// One backward pass per forward pass; reuse throws UsageError.
struct NetworkTape {
  Mode mode = Mode::Train;
  Matrix input;
  std::vector<BlockTape> blocks;
  RmsNormTape final_norm;
  Matrix features;  // post-RMSNorm, head input
  bool consumed = false;
};

// Gradients mirror the trainable tensors of NetworkParams.
struct LinearGrads {
  Matrix weight;
  Vector bias;
};
struct NormGrads {
  Vector gamma;
  Vector beta;
};
struct BlockGrads {
  LinearGrads expand, project;
  NormGrads bn;
};
struct NetworkGrads {
  LinearGrads embed;
  std::vector<BlockGrads> blocks;
  NormGrads final_norm;
  LinearGrads head;
};

NetworkGrads zero_grads(const NetworkParams& p);

// ---- Layer primitives ----------------------------------------------------

Matrix linear_forward(const Matrix& x, const LinearParams& p);

// Spec-level op: train mode standardizes with batch statistics and updates
// the running statistics in place; eval mode is pure.
Matrix batchnorm_forward(const Matrix& x, NormParams& p, Mode mode);

// Pure core used by network forwards: never mutates p; train-mode batch
// statistics are reported through the tape for the caller to fold in.
Matrix batchnorm_forward_pure(const Matrix& x, const NormParams& p, Mode mode,
                              BatchNormTape* tape);
void batchnorm_update_running(NormParams& p, const Vector& batch_mean,
                              const Vector& batch_var);
Matrix batchnorm_backward(const NormParams& p, const BatchNormTape& tape,
                          const Matrix& grad_out, NormGrads* grads);

Matrix rmsnorm_forward(const Matrix& x, const NormParams& p,
                       RmsNormTape* tape = nullptr);
Matrix rmsnorm_backward(const NormParams& p, const RmsNormTape& tape,
                        const Matrix& grad_out, NormGrads* grads);

Matrix block_forward(const Matrix& x, const BlockParams& p, Mode mode,
                     bool use_batch_norm = true, BlockTape* tape = nullptr);

// ---- Whole-network forward/backward --------------------------------------

struct ForwardResult {
  Matrix features;  // [B x hidden]
  Matrix head_out;  // [B x head_dim]
};

// Composition: embed -> blocks -> RMSNorm -> head. Train mode normalizes with
// batch statistics; pass `stat_update` to fold those statistics into the
// running estimates (target critics forward in train mode without it).
ForwardResult network_forward(const Matrix& x, const NetworkParams& p,
                              Mode mode, NetworkTape* tape = nullptr);
ForwardResult network_forward_train(const Matrix& x, NetworkParams& p,
                                    NetworkTape* tape);

// Reverse-mode pass. head_grad is d(loss)/d(head_out). Returns
// d(loss)/d(input); parameter gradients are accumulated into *grads when
// non-null. Consumes the tape.
Matrix network_backward(const NetworkParams& p, NetworkTape& tape,
                        const Matrix& head_grad, NetworkGrads* grads);

// ---- Parameter management --------------------------------------------------

// Rescales every linear weight row to unit L2 norm and every gamma/beta
// vector to norm sqrt(d). Biases untouched; zero rows/vectors left as-is.
void project_weights(NetworkParams& p);

NetworkParams init_params(const NetworkConfig& config, std::uint64_t seed);

// Flat views over the trainable tensors (row-major per tensor, fixed order).
// Running statistics are excluded; RMS-norm beta slots are excluded.
Vector params_to_vector(const NetworkParams& p);
void vector_to_params(const Vector& v, NetworkParams& p);
Vector grads_to_vector(const NetworkParams& p, const NetworkGrads& g);
long long param_count(const NetworkParams& p);
double param_norm(const NetworkParams& p);

// ---- Optimizer -------------------------------------------------------------

constexpr double kAdamBeta1 = 0.9;
constexpr double kAdamBeta2 = 0.999;
constexpr double kAdamEps = 1e-8;

struct AdamState {
  NetworkGrads m, v;
  long long step = 0;
};

AdamState make_adam_state(const NetworkParams& p);
void adam_step(NetworkParams& p, const NetworkGrads& g, AdamState& s, double lr);

struct ScalarAdam {
  double m = 0.0, v = 0.0;
  long long step = 0;
  void update(double& x, double grad, double lr);
};

// EMA of every tensor including running statistics: target <- tau*online + (1-tau)*target.
void ema_update(NetworkParams& target, const NetworkParams& online, double tau);

}  // namespace flashsac
