#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "acton/core.hpp"
#include "acton/random.hpp"
#include "acton/tensor.hpp"

namespace acton {

/// A trainable tensor and its accumulated gradient.
struct Param {
  std::string name;
  Tensor value;
  Tensor grad;

  Param() = default;
  Param(std::string n, std::vector<std::size_t> shape)
      : name(std::move(n)), value(shape), grad(std::move(shape)) {}
  void zero_grad() { grad.fill(0.0); }
};

enum class Mode { Train, Eval };

// Layers below cache what their backward pass needs from the most recent
// forward call. Tensors are row-major; sequence activations are B x L x C.

class Embedding {
public:
  Embedding() = default;
  Embedding(std::size_t vocab, std::size_t dim);

  /// ids holds `batch` sequences of equal length back to back.
  Tensor forward(std::span<const SymbolId> ids, std::size_t batch);
  /// Adds incoming row gradients into the touched table rows.
  void backward(const Tensor& d_out);

  std::size_t vocab() const { return table.value.dim(0); }
  std::size_t dim() const { return table.value.dim(1); }

  Param table;

private:
  std::vector<SymbolId> ids_;
};

/// Stride-1 1-D convolution over B x n x C with `padding` zeros on each side,
/// a bias per filter and optional ReLU. Filters are N x (k * C), the k input
/// rows of a window concatenated.
class Conv1D {
public:
  Conv1D() = default;
  Conv1D(std::size_t in_channels, std::size_t filters, std::size_t kernel, std::size_t padding,
         bool relu = true);

  static std::size_t output_length(std::size_t n, std::size_t kernel, std::size_t padding);

  Tensor forward(const Tensor& x);
  Tensor backward(const Tensor& d_out);

  std::size_t kernel() const { return kernel_; }
  std::size_t padding() const { return padding_; }
  std::size_t filters() const { return weight.value.dim(0); }
  std::size_t in_channels() const { return in_channels_; }

  Param weight;
  Param bias;

private:
  std::size_t in_channels_ = 0, kernel_ = 0, padding_ = 0;
  bool relu_ = true;
  Tensor input_, output_;
};

class AvgPool1D {
public:
  AvgPool1D() = default;
  AvgPool1D(std::size_t window, std::size_t stride);

  static std::size_t output_length(std::size_t n, std::size_t window, std::size_t stride);

  Tensor forward(const Tensor& x);
  Tensor backward(const Tensor& d_out);

  std::size_t window() const { return window_; }
  std::size_t stride() const { return stride_; }

private:
  std::size_t window_ = 1, stride_ = 1;
  std::vector<std::size_t> in_shape_;
};

/// Normalises every feature (last axis) over all leading positions.
class BatchNorm {
public:
  BatchNorm() = default;
  explicit BatchNorm(std::size_t features, double momentum = 0.9, double eps = 1e-5);

  Tensor forward(const Tensor& x, Mode mode);
  Tensor backward(const Tensor& d_out);

  Param gamma;
  Param beta;
  Tensor running_mean;
  Tensor running_var;
  double momentum = 0.9;
  double eps = 1e-5;

private:
  Tensor xhat_;
  std::vector<double> inv_std_;
  Mode last_mode_ = Mode::Eval;
};

/// Inverted dropout: survivors are scaled by 1 / (1 - p) in training.
class Dropout {
public:
  Dropout() = default;
  explicit Dropout(double p);

  Tensor forward(const Tensor& x, Mode mode, Rng& rng);
  Tensor backward(const Tensor& d_out) const;

  double rate() const { return p_; }
  std::span<const double> mask() const { return mask_; }

private:
  double p_ = 0.0;
  std::vector<double> mask_;  // empty means identity
};

/// y = W x + b (optionally ReLU) for x of shape B x in. W is out x in.
class Dense {
public:
  Dense() = default;
  Dense(std::size_t in, std::size_t out, bool relu);

  Tensor forward(const Tensor& x);
  Tensor backward(const Tensor& d_out);

  std::size_t in() const { return weight.value.dim(1); }
  std::size_t out() const { return weight.value.dim(0); }

  Param weight;
  Param bias;

private:
  bool relu_ = false;
  Tensor input_, output_;
};

/// Row-wise softmax of B x K logits with max subtraction.
Tensor softmax(const Tensor& logits);

struct CrossEntropyResult {
  double loss = 0.0;        // data term + elastic-net penalty
  double data_loss = 0.0;
  std::size_t counted = 0;  // rows with a gold label
  Tensor d_logits;          // gradient through softmax: (p - onehot) / B
  Tensor d_weight;          // penalty gradient lambda2 W + lambda1 sign(W)
  bool clamped = false;     // some gold probability fell below 1e-12
};

/// Mean cross-entropy over rows whose gold label is >= 0 plus
/// (l2 / 2) ||W||^2 + l1 ||W||_1. Rows labelled -1 are ignored.
CrossEntropyResult cross_entropy_elastic_net(const Tensor& probs, std::span<const int> gold,
                                             const Tensor& weight, double l1, double l2);

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamMoments {
  Tensor m;
  Tensor v;
  std::uint64_t step = 0;
};

/// One bias-corrected Adam update of `p` from `p.grad`.
void adam_step(Param& p, AdamMoments& state, const AdamConfig& cfg);

/// Uniform fan-in initialisation U(-sqrt(6 / fan_in), sqrt(6 / fan_in)) scaled by `gain`.
void init_uniform_fan_in(Tensor& t, std::size_t fan_in, Rng& rng, double gain = 1.0);

}  // namespace acton
