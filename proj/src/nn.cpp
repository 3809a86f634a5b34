#include "flashsac/nn.hpp"

#include <cmath>
#include <string>

namespace flashsac {

namespace {

void check_finite(const Matrix& m, const char* stage, int layer_index) {
  if (!m.allFinite()) {
    throw NumericalError(std::string("non-finite values after ") + stage +
                         " (layer index " + std::to_string(layer_index) + ")");
  }
}

Matrix relu(const Matrix& x) { return x.cwiseMax(0.0); }

}  // namespace

NetworkGrads zero_grads(const NetworkParams& p) {
  NetworkGrads g;
  auto zl = [](const LinearParams& l) {
    return LinearGrads{Matrix::Zero(l.weight.rows(), l.weight.cols()),
                       Vector::Zero(l.bias.size())};
  };
  g.embed = zl(p.embed);
  g.blocks.resize(p.blocks.size());
  for (size_t i = 0; i < p.blocks.size(); ++i) {
    g.blocks[i].expand = zl(p.blocks[i].expand);
    g.blocks[i].project = zl(p.blocks[i].project);
    g.blocks[i].bn = NormGrads{Vector::Zero(p.blocks[i].bn.dim()),
                               Vector::Zero(p.blocks[i].bn.dim())};
  }
  g.final_norm = NormGrads{Vector::Zero(p.final_norm.dim()),
                           Vector::Zero(p.final_norm.dim())};
  g.head = zl(p.head);
  return g;
}

Matrix linear_forward(const Matrix& x, const LinearParams& p) {
  if (x.cols() != p.weight.cols()) {
    throw ShapeError("linear_forward: input has " + std::to_string(x.cols()) +
                     " columns, layer expects " + std::to_string(p.weight.cols()));
  }
  Matrix y = x * p.weight.transpose();
  y.rowwise() += p.bias.transpose();
  return y;
}

namespace detail {

// Fused standardize-scale-shift pass, optionally applying ReLU to the output.
// Columns are contiguous (column-major), so each column is handled in one
// sweep: y_col = act(gamma * (x - mean) * inv_std + beta).
Matrix batchnorm_core(const Matrix& x, const NormParams& p, Mode mode,
                      BatchNormTape* tape, bool fuse_relu) {
  const int d = p.dim();
  if (x.cols() != d) throw ShapeError("batchnorm_forward: feature dim mismatch");
  const Eigen::Index batch = x.rows();
  Vector mean(d), var(d);
  if (mode == Mode::Train) {
    if (batch < 2)
      throw ShapeError("batchnorm_forward: train mode needs batch size >= 2");
    const double inv_b = 1.0 / static_cast<double>(batch);
    for (int j = 0; j < d; ++j) {
      const double* col = x.col(j).data();
      double s = 0.0, sq = 0.0;
      for (Eigen::Index i = 0; i < batch; ++i) {
        s += col[i];
        sq += col[i] * col[i];
      }
      double m = s * inv_b;
      mean[j] = m;
      var[j] = std::max(0.0, sq * inv_b - m * m);
    }
  } else {
    mean = p.running_mean;
    var = p.running_var;
  }
  Vector inv_std = (var.array() + kBatchNormEps).rsqrt();
  Matrix y(batch, d);
  Matrix* xhat_store = nullptr;
  if (tape) {
    tape->mode = mode;
    tape->inv_std = inv_std;
    tape->xhat.resize(batch, d);
    xhat_store = &tape->xhat;
    if (mode == Mode::Train) {
      tape->batch_mean = mean;
      tape->batch_var = var;
    }
  }
  for (int j = 0; j < d; ++j) {
    const double m = mean[j], is = inv_std[j], g = p.gamma[j], b = p.beta[j];
    const double* col = x.col(j).data();
    double* out = y.col(j).data();
    if (xhat_store) {
      double* xh = xhat_store->col(j).data();
      for (Eigen::Index i = 0; i < batch; ++i) {
        double v = (col[i] - m) * is;
        xh[i] = v;
        double o = g * v + b;
        out[i] = fuse_relu ? (o > 0.0 ? o : 0.0) : o;
      }
    } else {
      for (Eigen::Index i = 0; i < batch; ++i) {
        double o = g * (col[i] - m) * is + b;
        out[i] = fuse_relu ? (o > 0.0 ? o : 0.0) : o;
      }
    }
  }
  return y;
}

}  // namespace detail

Matrix batchnorm_forward_pure(const Matrix& x, const NormParams& p, Mode mode,
                              BatchNormTape* tape) {
  return detail::batchnorm_core(x, p, mode, tape, false);
}

void batchnorm_update_running(NormParams& p, const Vector& batch_mean,
                              const Vector& batch_var) {
  p.running_mean = (1.0 - p.momentum) * p.running_mean + p.momentum * batch_mean;
  p.running_var = (1.0 - p.momentum) * p.running_var + p.momentum * batch_var;
}

Matrix batchnorm_forward(const Matrix& x, NormParams& p, Mode mode) {
  BatchNormTape tape;
  Matrix y = batchnorm_forward_pure(x, p, mode, &tape);
  if (mode == Mode::Train)
    batchnorm_update_running(p, tape.batch_mean, tape.batch_var);
  return y;
}

Matrix batchnorm_backward(const NormParams& p, const BatchNormTape& tape,
                          const Matrix& grad_out, NormGrads* grads) {
  const int d = p.dim();
  const Eigen::Index batch = grad_out.rows();
  const double inv_b = 1.0 / static_cast<double>(batch);
  Matrix dx(batch, d);
  // Per-column fused reduction and rebuild:
  //   dxhat = g * gamma; in train mode the batch statistics contribute
  //   dx = inv_std * (dxhat - mean(dxhat) - xhat * mean(dxhat * xhat)).
  for (int j = 0; j < d; ++j) {
    const double* g = grad_out.col(j).data();
    const double* xh = tape.xhat.col(j).data();
    double sum_g = 0.0, sum_gx = 0.0;
    for (Eigen::Index i = 0; i < batch; ++i) {
      sum_g += g[i];
      sum_gx += g[i] * xh[i];
    }
    if (grads) {
      grads->gamma[j] += sum_gx;
      grads->beta[j] += sum_g;
    }
    const double gamma = p.gamma[j], is = tape.inv_std[j];
    double* out = dx.col(j).data();
    if (tape.mode == Mode::Eval) {
      const double scale = gamma * is;
      for (Eigen::Index i = 0; i < batch; ++i) out[i] = scale * g[i];
    } else {
      const double mean_dxhat = gamma * sum_g * inv_b;
      const double mean_dxhat_xhat = gamma * sum_gx * inv_b;
      for (Eigen::Index i = 0; i < batch; ++i) {
        out[i] = is * (gamma * g[i] - mean_dxhat - xh[i] * mean_dxhat_xhat);
      }
    }
  }
  return dx;
}

Matrix rmsnorm_forward(const Matrix& x, const NormParams& p, RmsNormTape* tape) {
  const int d = static_cast<int>(x.cols());
  if (p.dim() != d) throw ShapeError("rmsnorm_forward: feature dim mismatch");
  Vector inv_rms =
      ((x.array().square().rowwise().mean()) + kRmsNormEps).rsqrt().matrix();
  Matrix y = (x.array().colwise() * inv_rms.array()).rowwise() *
             p.gamma.transpose().array();
  if (tape) {
    tape->x = x;
    tape->inv_rms = std::move(inv_rms);
  }
  return y;
}

Matrix rmsnorm_backward(const NormParams& p, const RmsNormTape& tape,
                        const Matrix& grad_out, NormGrads* grads) {
  const double d = static_cast<double>(tape.x.cols());
  if (grads) {
    Matrix xhat = tape.x.array().colwise() * tape.inv_rms.array();
    grads->gamma += (grad_out.array() * xhat.array()).colwise().sum().matrix();
  }
  // y_i = gamma_i * x_i * inv_rms(row). With s = sum_i g_i * gamma_i * x_i:
  // dx_j = gamma_j * g_j * inv_rms - x_j * s * inv_rms^3 / d.
  Matrix g_gamma = grad_out.array().rowwise() * p.gamma.transpose().array();
  Vector s = (g_gamma.array() * tape.x.array()).rowwise().sum();
  Matrix dx = g_gamma.array().colwise() * tape.inv_rms.array();
  Vector coef = s.array() * tape.inv_rms.array().cube() / d;
  dx -= (tape.x.array().colwise() * coef.array()).matrix();
  return dx;
}

Matrix block_forward(const Matrix& x, const BlockParams& p, Mode mode,
                     bool use_batch_norm, BlockTape* tape) {
  Matrix z = linear_forward(x, p.expand);
  BatchNormTape* bn_tape = tape ? &tape->bn : nullptr;
  Matrix a = use_batch_norm
                 ? detail::batchnorm_core(z, p.bn, mode, bn_tape, true)
                 : relu(z);
  Matrix y = x;
  y.noalias() += a * p.project.weight.transpose();
  y.rowwise() += p.project.bias.transpose();
  if (tape) {
    tape->expand.x = x;
    tape->relu_out = std::move(a);
  }
  return y;
}

namespace {

// Slow stage-by-stage replay used only to attribute a non-finite value to a
// layer once the fast path has detected one.
[[noreturn]] void localize_non_finite(const Matrix& x, const NetworkParams& p,
                                      Mode mode) {
  Matrix h = linear_forward(x, p.embed);
  check_finite(h, "embed", 0);
  for (size_t i = 0; i < p.blocks.size(); ++i) {
    h = block_forward(h, p.blocks[i], mode, p.config.use_batch_norm, nullptr);
    check_finite(h, "block", static_cast<int>(i) + 1);
  }
  Matrix f = rmsnorm_forward(h, p.final_norm);
  check_finite(f, "rmsnorm", static_cast<int>(p.blocks.size()) + 1);
  Matrix out = linear_forward(f, p.head);
  check_finite(out, "head", static_cast<int>(p.blocks.size()) + 2);
  throw NumericalError("non-finite output with finite stages (unreachable)");
}

}  // namespace

ForwardResult network_forward(const Matrix& x, const NetworkParams& p,
                              Mode mode, NetworkTape* tape) {
  if (x.cols() != p.embed.in_dim())
    throw ShapeError("network_forward: input dim mismatch");
  if (!x.allFinite()) throw NumericalError("network_forward: non-finite input");
  if (tape) {
    tape->mode = mode;
    tape->input = x;
    tape->blocks.assign(p.blocks.size(), BlockTape{});
    tape->consumed = false;
  }
  Matrix h = linear_forward(x, p.embed);
  for (size_t i = 0; i < p.blocks.size(); ++i) {
    h = block_forward(h, p.blocks[i], mode, p.config.use_batch_norm,
                      tape ? &tape->blocks[i] : nullptr);
  }
  ForwardResult out;
  out.features = rmsnorm_forward(h, p.final_norm, tape ? &tape->final_norm : nullptr);
  out.head_out = linear_forward(out.features, p.head);
  // NaN/Inf propagates to the head; only on detection is the forward replayed
  // stage by stage to name the offending layer.
  if (!out.head_out.allFinite() || !out.features.allFinite())
    localize_non_finite(x, p, mode);
  if (tape) tape->features = out.features;
  return out;
}

ForwardResult network_forward_train(const Matrix& x, NetworkParams& p,
                                    NetworkTape* tape) {
  NetworkTape local;
  NetworkTape* t = tape ? tape : &local;
  ForwardResult out = network_forward(x, p, Mode::Train, t);
  if (p.config.use_batch_norm) {
    for (size_t i = 0; i < p.blocks.size(); ++i) {
      batchnorm_update_running(p.blocks[i].bn, t->blocks[i].bn.batch_mean,
                               t->blocks[i].bn.batch_var);
    }
  }
  return out;
}

Matrix network_backward(const NetworkParams& p, NetworkTape& tape,
                        const Matrix& head_grad, NetworkGrads* grads) {
  if (tape.consumed)
    throw UsageError("network_backward: tape already consumed");
  tape.consumed = true;

  auto linear_backward = [&](const LinearParams& lp, const Matrix& x,
                             const Matrix& g, LinearGrads* lg) -> Matrix {
    if (lg) {
      lg->weight += g.transpose() * x;
      lg->bias += g.colwise().sum();
    }
    return g * lp.weight;
  };

  // head
  Matrix g = linear_backward(p.head, tape.features, head_grad,
                             grads ? &grads->head : nullptr);
  // final RMS norm
  g = rmsnorm_backward(p.final_norm, tape.final_norm, g,
                       grads ? &grads->final_norm : nullptr);
  // blocks in reverse
  for (int i = static_cast<int>(p.blocks.size()) - 1; i >= 0; --i) {
    const BlockParams& bp = p.blocks[static_cast<size_t>(i)];
    BlockTape& bt = tape.blocks[static_cast<size_t>(i)];
    BlockGrads* bg = grads ? &grads->blocks[static_cast<size_t>(i)] : nullptr;
    // y = x + project(relu(bn(expand(x))))
    Matrix g_proj_in = linear_backward(bp.project, bt.relu_out, g,
                                       bg ? &bg->project : nullptr);
    // relu: mask from its cached output
    Matrix g_relu =
        (bt.relu_out.array() > 0.0).select(g_proj_in, Matrix::Zero(
            g_proj_in.rows(), g_proj_in.cols()));
    Matrix g_expand_out =
        p.config.use_batch_norm
            ? batchnorm_backward(bp.bn, bt.bn, g_relu, bg ? &bg->bn : nullptr)
            : std::move(g_relu);
    Matrix g_branch_in = linear_backward(bp.expand, bt.expand.x, g_expand_out,
                                         bg ? &bg->expand : nullptr);
    g += g_branch_in;  // residual path
  }
  // embed
  return linear_backward(p.embed, tape.input, g, grads ? &grads->embed : nullptr);
}

void project_weights(NetworkParams& p) {
  auto proj_rows = [](Matrix& w) {
    for (Eigen::Index r = 0; r < w.rows(); ++r) {
      double n = w.row(r).norm();
      if (n > 0.0) w.row(r) /= n;
    }
  };
  auto proj_vec = [](Vector& v) {
    double n = v.norm();
    if (n > 0.0) v *= std::sqrt(static_cast<double>(v.size())) / n;
  };
  auto proj_norm_params = [&](NormParams& np) {
    proj_vec(np.gamma);
    proj_vec(np.beta);
  };
  proj_rows(p.embed.weight);
  for (auto& b : p.blocks) {
    proj_rows(b.expand.weight);
    proj_rows(b.project.weight);
    proj_norm_params(b.bn);
  }
  proj_norm_params(p.final_norm);
  proj_rows(p.head.weight);
}

NetworkParams init_params(const NetworkConfig& config, std::uint64_t seed) {
  if (config.input_dim <= 0 || config.hidden <= 0 || config.head_dim <= 0 ||
      config.blocks < 0 || config.expansion <= 0) {
    throw ConfigError("init_params: invalid network config");
  }
  Rng rng(seed);
  auto init_linear = [&](int out, int in) {
    LinearParams l;
    l.weight.resize(out, in);
    for (int r = 0; r < out; ++r)
      for (int c = 0; c < in; ++c) l.weight(r, c) = rng.normal();
    for (int r = 0; r < out; ++r) {
      double n = l.weight.row(r).norm();
      if (n > 0.0) l.weight.row(r) /= n;
    }
    l.bias = Vector::Zero(out);
    return l;
  };
  auto init_batch_norm = [&](int d) {
    NormParams np;
    np.gamma = Vector::Ones(d);
    np.beta = Vector::Zero(d);
    np.running_mean = Vector::Zero(d);
    np.running_var = Vector::Ones(d);
    np.momentum = kBatchNormMomentum;
    return np;
  };
  NetworkParams p;
  p.config = config;
  p.embed = init_linear(config.hidden, config.input_dim);
  const int inner = config.hidden * config.expansion;
  p.blocks.resize(static_cast<size_t>(config.blocks));
  for (auto& b : p.blocks) {
    b.expansion = config.expansion;
    b.expand = init_linear(inner, config.hidden);
    b.project = init_linear(config.hidden, inner);
    b.bn = init_batch_norm(inner);
  }
  p.final_norm.gamma = Vector::Ones(config.hidden);
  p.final_norm.beta = Vector::Zero(config.hidden);
  p.head = init_linear(config.head_dim, config.hidden);
  return p;
}

// ---- flat parameter views --------------------------------------------------

namespace {

// Visits trainable tensors in a fixed order. RMS-norm beta slots are skipped.
template <typename P, typename FnMat, typename FnVec>
void visit_params(P& p, FnMat&& fm, FnVec&& fv) {
  fm(p.embed.weight);
  fv(p.embed.bias);
  for (auto& b : p.blocks) {
    fm(b.expand.weight);
    fv(b.expand.bias);
    fv(b.bn.gamma);
    fv(b.bn.beta);
    fm(b.project.weight);
    fv(b.project.bias);
  }
  fv(p.final_norm.gamma);
  fm(p.head.weight);
  fv(p.head.bias);
}

template <typename G, typename FnMat, typename FnVec>
void visit_grads(G& g, FnMat&& fm, FnVec&& fv) {
  fm(g.embed.weight);
  fv(g.embed.bias);
  for (auto& b : g.blocks) {
    fm(b.expand.weight);
    fv(b.expand.bias);
    fv(b.bn.gamma);
    fv(b.bn.beta);
    fm(b.project.weight);
    fv(b.project.bias);
  }
  fv(g.final_norm.gamma);
  fm(g.head.weight);
  fv(g.head.bias);
}

}  // namespace

long long param_count(const NetworkParams& p) {
  long long n = 0;
  visit_params(
      p, [&](const Matrix& m) { n += m.size(); },
      [&](const Vector& v) { n += v.size(); });
  return n;
}

Vector params_to_vector(const NetworkParams& p) {
  Vector out(param_count(p));
  Eigen::Index at = 0;
  auto put_mat = [&](const Matrix& m) {
    for (Eigen::Index r = 0; r < m.rows(); ++r)
      for (Eigen::Index c = 0; c < m.cols(); ++c) out[at++] = m(r, c);
  };
  auto put_vec = [&](const Vector& v) {
    for (Eigen::Index i = 0; i < v.size(); ++i) out[at++] = v[i];
  };
  visit_params(p, put_mat, put_vec);
  return out;
}

void vector_to_params(const Vector& v, NetworkParams& p) {
  if (v.size() != param_count(p))
    throw ShapeError("vector_to_params: size mismatch");
  Eigen::Index at = 0;
  auto get_mat = [&](Matrix& m) {
    for (Eigen::Index r = 0; r < m.rows(); ++r)
      for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = v[at++];
  };
  auto get_vec = [&](Vector& w) {
    for (Eigen::Index i = 0; i < w.size(); ++i) w[i] = v[at++];
  };
  visit_params(p, get_mat, get_vec);
}

Vector grads_to_vector(const NetworkParams& p, const NetworkGrads& g) {
  Vector out(param_count(p));
  Eigen::Index at = 0;
  auto put_mat = [&](const Matrix& m) {
    for (Eigen::Index r = 0; r < m.rows(); ++r)
      for (Eigen::Index c = 0; c < m.cols(); ++c) out[at++] = m(r, c);
  };
  auto put_vec = [&](const Vector& v) {
    for (Eigen::Index i = 0; i < v.size(); ++i) out[at++] = v[i];
  };
  visit_grads(g, put_mat, put_vec);
  return out;
}

double param_norm(const NetworkParams& p) {
  double sq = 0.0;
  visit_params(
      p, [&](const Matrix& m) { sq += m.squaredNorm(); },
      [&](const Vector& v) { sq += v.squaredNorm(); });
  return std::sqrt(sq);
}

// ---- Adam ------------------------------------------------------------------

AdamState make_adam_state(const NetworkParams& p) {
  return AdamState{zero_grads(p), zero_grads(p), 0};
}

namespace {

void adam_tensor(Eigen::Ref<Matrix> x, const Matrix& g, Matrix& m, Matrix& v,
                 double lr, double bc1, double bc2) {
  m = kAdamBeta1 * m + (1.0 - kAdamBeta1) * g;
  v = kAdamBeta2 * v.array().matrix() + (1.0 - kAdamBeta2) * g.array().square().matrix();
  x.array() -= lr * (m.array() / bc1) / ((v.array() / bc2).sqrt() + kAdamEps);
}

void adam_tensor_vec(Eigen::Ref<Vector> x, const Vector& g, Vector& m, Vector& v,
                     double lr, double bc1, double bc2) {
  m = kAdamBeta1 * m + (1.0 - kAdamBeta1) * g;
  v = kAdamBeta2 * v.array().matrix() + (1.0 - kAdamBeta2) * g.array().square().matrix();
  x.array() -= lr * (m.array() / bc1) / ((v.array() / bc2).sqrt() + kAdamEps);
}

}  // namespace

void adam_step(NetworkParams& p, const NetworkGrads& g, AdamState& s, double lr) {
  s.step += 1;
  const double bc1 = 1.0 - std::pow(kAdamBeta1, static_cast<double>(s.step));
  const double bc2 = 1.0 - std::pow(kAdamBeta2, static_cast<double>(s.step));
  adam_tensor(p.embed.weight, g.embed.weight, s.m.embed.weight, s.v.embed.weight,
              lr, bc1, bc2);
  adam_tensor_vec(p.embed.bias, g.embed.bias, s.m.embed.bias, s.v.embed.bias, lr,
                  bc1, bc2);
  for (size_t i = 0; i < p.blocks.size(); ++i) {
    auto& bp = p.blocks[i];
    auto& bg = g.blocks[i];
    auto& bm = s.m.blocks[i];
    auto& bv = s.v.blocks[i];
    adam_tensor(bp.expand.weight, bg.expand.weight, bm.expand.weight,
                bv.expand.weight, lr, bc1, bc2);
    adam_tensor_vec(bp.expand.bias, bg.expand.bias, bm.expand.bias,
                    bv.expand.bias, lr, bc1, bc2);
    adam_tensor_vec(bp.bn.gamma, bg.bn.gamma, bm.bn.gamma, bv.bn.gamma, lr, bc1,
                    bc2);
    adam_tensor_vec(bp.bn.beta, bg.bn.beta, bm.bn.beta, bv.bn.beta, lr, bc1, bc2);
    adam_tensor(bp.project.weight, bg.project.weight, bm.project.weight,
                bv.project.weight, lr, bc1, bc2);
    adam_tensor_vec(bp.project.bias, bg.project.bias, bm.project.bias,
                    bv.project.bias, lr, bc1, bc2);
  }
  adam_tensor_vec(p.final_norm.gamma, g.final_norm.gamma, s.m.final_norm.gamma,
                  s.v.final_norm.gamma, lr, bc1, bc2);
  adam_tensor(p.head.weight, g.head.weight, s.m.head.weight, s.v.head.weight, lr,
              bc1, bc2);
  adam_tensor_vec(p.head.bias, g.head.bias, s.m.head.bias, s.v.head.bias, lr,
                  bc1, bc2);
}

void ScalarAdam::update(double& x, double grad, double lr) {
  step += 1;
  m = kAdamBeta1 * m + (1.0 - kAdamBeta1) * grad;
  v = kAdamBeta2 * v + (1.0 - kAdamBeta2) * grad * grad;
  const double bc1 = 1.0 - std::pow(kAdamBeta1, static_cast<double>(step));
  const double bc2 = 1.0 - std::pow(kAdamBeta2, static_cast<double>(step));
  x -= lr * (m / bc1) / (std::sqrt(v / bc2) + kAdamEps);
}

void ema_update(NetworkParams& target, const NetworkParams& online, double tau) {
  auto mix_m = [tau](Matrix& t, const Matrix& o) { t = tau * o + (1.0 - tau) * t; };
  auto mix_v = [tau](Vector& t, const Vector& o) { t = tau * o + (1.0 - tau) * t; };
  mix_m(target.embed.weight, online.embed.weight);
  mix_v(target.embed.bias, online.embed.bias);
  for (size_t i = 0; i < target.blocks.size(); ++i) {
    mix_m(target.blocks[i].expand.weight, online.blocks[i].expand.weight);
    mix_v(target.blocks[i].expand.bias, online.blocks[i].expand.bias);
    mix_v(target.blocks[i].bn.gamma, online.blocks[i].bn.gamma);
    mix_v(target.blocks[i].bn.beta, online.blocks[i].bn.beta);
    mix_v(target.blocks[i].bn.running_mean, online.blocks[i].bn.running_mean);
    mix_v(target.blocks[i].bn.running_var, online.blocks[i].bn.running_var);
    mix_m(target.blocks[i].project.weight, online.blocks[i].project.weight);
    mix_v(target.blocks[i].project.bias, online.blocks[i].project.bias);
  }
  mix_v(target.final_norm.gamma, online.final_norm.gamma);
  mix_v(target.final_norm.beta, online.final_norm.beta);
  mix_m(target.head.weight, online.head.weight);
  mix_v(target.head.bias, online.head.bias);
}

}  // namespace flashsac
