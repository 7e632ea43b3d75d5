#include "acton/layers.hpp"

#include <algorithm>
#include <cmath>

#include "acton/error.hpp"

namespace acton {

void init_uniform_fan_in(Tensor& t, std::size_t fan_in, Rng& rng, double gain) {
  const double r = gain * std::sqrt(6.0 / static_cast<double>(std::max<std::size_t>(fan_in, 1)));
  for (auto& v : t.values()) v = uniform(rng, -r, r);
}

// ---------------------------------------------------------------------------
// Embedding

Embedding::Embedding(std::size_t vocab, std::size_t dim) : table("embedding", {vocab, dim}) {}

Tensor Embedding::forward(std::span<const SymbolId> ids, std::size_t batch) {
  require(batch > 0 && ids.size() % batch == 0, ErrorCode::ShapeMismatch,
          "embedding input is not batch x length");
  const std::size_t n = ids.size() / batch, d = dim(), V = vocab();
  Tensor out({batch, n, d});
  ids_.assign(ids.begin(), ids.end());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    require(ids[i] >= 0 && static_cast<std::size_t>(ids[i]) < V, ErrorCode::IdOutOfRange,
            "symbol id " + std::to_string(ids[i]));
    std::copy_n(table.value.data() + static_cast<std::size_t>(ids[i]) * d, d, out.data() + i * d);
  }
  return out;
}

void Embedding::backward(const Tensor& d_out) {
  const std::size_t d = dim();
  require(d_out.size() == ids_.size() * d, ErrorCode::ShapeMismatch, "embedding gradient shape");
  for (std::size_t i = 0; i < ids_.size(); ++i) {
    double* g = table.grad.data() + static_cast<std::size_t>(ids_[i]) * d;
    const double* src = d_out.data() + i * d;
    for (std::size_t j = 0; j < d; ++j) g[j] += src[j];
  }
}

// ---------------------------------------------------------------------------
// Conv1D

Conv1D::Conv1D(std::size_t in_channels, std::size_t filters, std::size_t kernel,
               std::size_t padding, bool relu)
    : weight("weight", {filters, kernel * in_channels}),
      bias("bias", {filters}),
      in_channels_(in_channels),
      kernel_(kernel),
      padding_(padding),
      relu_(relu) {
  require(kernel > 0 && filters > 0 && in_channels > 0, ErrorCode::InvalidConfig,
          "conv dimensions must be positive");
}

std::size_t Conv1D::output_length(std::size_t n, std::size_t kernel, std::size_t padding) {
  require(n + 2 * padding >= kernel, ErrorCode::ShapeMismatch, "kernel longer than padded input");
  return n + 2 * padding - kernel + 1;
}

Tensor Conv1D::forward(const Tensor& x) {
  require(x.rank() == 3 && x.dim(2) == in_channels_, ErrorCode::ShapeMismatch,
          "conv input " + shape_string(x.shape()) + " expects C=" + std::to_string(in_channels_));
  const std::size_t B = x.dim(0), n = x.dim(1), C = in_channels_, N = filters(), k = kernel_;
  const std::size_t L = output_length(n, k, padding_);
  input_ = x;
  Tensor out({B, L, N});
  const double* W = weight.value.data();
  for (std::size_t b = 0; b < B; ++b) {
    for (std::size_t i = 0; i < L; ++i) {
      double* y = out.data() + (b * L + i) * N;
      for (std::size_t f = 0; f < N; ++f) y[f] = bias.value[f];
      for (std::size_t t = 0; t < k; ++t) {
        const long src = static_cast<long>(i + t) - static_cast<long>(padding_);
        if (src < 0 || src >= static_cast<long>(n)) continue;
        const double* xr = x.data() + (b * n + static_cast<std::size_t>(src)) * C;
        for (std::size_t f = 0; f < N; ++f) {
          const double* w = W + f * k * C + t * C;
          double s = 0.0;
          for (std::size_t c = 0; c < C; ++c) s += w[c] * xr[c];
          y[f] += s;
        }
      }
      if (relu_)
        for (std::size_t f = 0; f < N; ++f) y[f] = std::max(y[f], 0.0);
    }
  }
  output_ = out;
  return out;
}

Tensor Conv1D::backward(const Tensor& d_out) {
  require(d_out.same_shape(output_), ErrorCode::ShapeMismatch, "conv gradient shape");
  const std::size_t B = input_.dim(0), n = input_.dim(1), C = in_channels_, N = filters(),
                    k = kernel_, L = output_.dim(1);
  Tensor dx(input_.shape());
  const double* W = weight.value.data();
  double* dW = weight.grad.data();
  std::vector<double> g(N);
  for (std::size_t b = 0; b < B; ++b) {
    for (std::size_t i = 0; i < L; ++i) {
      const std::size_t o = (b * L + i) * N;
      for (std::size_t f = 0; f < N; ++f) {
        g[f] = d_out[o + f];
        if (relu_ && output_[o + f] <= 0.0) g[f] = 0.0;
        bias.grad[f] += g[f];
      }
      for (std::size_t t = 0; t < k; ++t) {
        const long src = static_cast<long>(i + t) - static_cast<long>(padding_);
        if (src < 0 || src >= static_cast<long>(n)) continue;
        const std::size_t xo = (b * n + static_cast<std::size_t>(src)) * C;
        const double* xr = input_.data() + xo;
        double* dxr = dx.data() + xo;
        for (std::size_t f = 0; f < N; ++f) {
          const double gf = g[f];
          if (gf == 0.0) continue;
          const double* w = W + f * k * C + t * C;
          double* dw = dW + f * k * C + t * C;
          for (std::size_t c = 0; c < C; ++c) {
            dw[c] += gf * xr[c];
            dxr[c] += gf * w[c];
          }
        }
      }
    }
  }
  return dx;
}

// ---------------------------------------------------------------------------
// AvgPool1D

AvgPool1D::AvgPool1D(std::size_t window, std::size_t stride) : window_(window), stride_(stride) {
  require(window > 0 && stride > 0, ErrorCode::InvalidConfig, "pool window and stride must be positive");
}

std::size_t AvgPool1D::output_length(std::size_t n, std::size_t window, std::size_t stride) {
  require(window <= n, ErrorCode::WindowTooLarge,
          "pool window " + std::to_string(window) + " exceeds map length " + std::to_string(n));
  return (n - window) / stride + 1;
}

Tensor AvgPool1D::forward(const Tensor& x) {
  require(x.rank() == 3, ErrorCode::ShapeMismatch, "pool expects B x L x C");
  const std::size_t B = x.dim(0), n = x.dim(1), C = x.dim(2);
  const std::size_t L = output_length(n, window_, stride_);
  in_shape_ = x.shape();
  Tensor out({B, L, C});
  const double inv = 1.0 / static_cast<double>(window_);
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t j = 0; j < L; ++j) {
      double* y = out.data() + (b * L + j) * C;
      for (std::size_t t = 0; t < window_; ++t) {
        const double* xr = x.data() + (b * n + j * stride_ + t) * C;
        for (std::size_t c = 0; c < C; ++c) y[c] += xr[c];
      }
      for (std::size_t c = 0; c < C; ++c) y[c] *= inv;
    }
  return out;
}

Tensor AvgPool1D::backward(const Tensor& d_out) {
  const std::size_t B = in_shape_.at(0), n = in_shape_.at(1), C = in_shape_.at(2);
  const std::size_t L = output_length(n, window_, stride_);
  require(d_out.shape() == std::vector<std::size_t>{B, L, C}, ErrorCode::ShapeMismatch,
          "pool gradient shape");
  Tensor dx(in_shape_);
  const double inv = 1.0 / static_cast<double>(window_);
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t j = 0; j < L; ++j) {
      const double* g = d_out.data() + (b * L + j) * C;
      for (std::size_t t = 0; t < window_; ++t) {
        double* dxr = dx.data() + (b * n + j * stride_ + t) * C;
        for (std::size_t c = 0; c < C; ++c) dxr[c] += g[c] * inv;
      }
    }
  return dx;
}

// ---------------------------------------------------------------------------
// BatchNorm

BatchNorm::BatchNorm(std::size_t features, double momentum_, double eps_)
    : gamma("gamma", {features}),
      beta("beta", {features}),
      running_mean({features}, 0.0),
      running_var({features}, 1.0),
      momentum(momentum_),
      eps(eps_) {
  gamma.value.fill(1.0);
}

Tensor BatchNorm::forward(const Tensor& x, Mode mode) {
  const std::size_t C = gamma.value.size();
  require(x.rank() >= 1 && x.shape().back() == C, ErrorCode::ShapeMismatch,
          "batchnorm expects last axis " + std::to_string(C));
  const std::size_t R = x.size() / C;
  Tensor out(x.shape());
  xhat_ = Tensor(x.shape());
  inv_std_.assign(C, 0.0);
  last_mode_ = mode;
  if (mode == Mode::Train) {
    require(R >= 2, ErrorCode::BatchTooSmall, "batchnorm needs at least 2 rows in training");
    std::vector<double> mean(C, 0.0), var(C, 0.0);
    for (std::size_t r = 0; r < R; ++r)
      for (std::size_t c = 0; c < C; ++c) mean[c] += x[r * C + c];
    for (auto& m : mean) m /= static_cast<double>(R);
    for (std::size_t r = 0; r < R; ++r)
      for (std::size_t c = 0; c < C; ++c) {
        const double dlt = x[r * C + c] - mean[c];
        var[c] += dlt * dlt;
      }
    for (std::size_t c = 0; c < C; ++c) {
      var[c] /= static_cast<double>(R);
      inv_std_[c] = 1.0 / std::sqrt(var[c] + eps);
      const double unbiased = var[c] * static_cast<double>(R) / static_cast<double>(R - 1);
      running_mean[c] = momentum * running_mean[c] + (1.0 - momentum) * mean[c];
      running_var[c] = momentum * running_var[c] + (1.0 - momentum) * unbiased;
    }
    for (std::size_t r = 0; r < R; ++r)
      for (std::size_t c = 0; c < C; ++c) {
        const double h = (x[r * C + c] - mean[c]) * inv_std_[c];
        xhat_[r * C + c] = h;
        out[r * C + c] = gamma.value[c] * h + beta.value[c];
      }
  } else {
    for (std::size_t c = 0; c < C; ++c) inv_std_[c] = 1.0 / std::sqrt(running_var[c] + eps);
    for (std::size_t r = 0; r < R; ++r)
      for (std::size_t c = 0; c < C; ++c) {
        const double h = (x[r * C + c] - running_mean[c]) * inv_std_[c];
        xhat_[r * C + c] = h;
        out[r * C + c] = gamma.value[c] * h + beta.value[c];
      }
  }
  return out;
}

Tensor BatchNorm::backward(const Tensor& d_out) {
  require(d_out.same_shape(xhat_), ErrorCode::ShapeMismatch, "batchnorm gradient shape");
  const std::size_t C = gamma.value.size(), R = d_out.size() / C;
  Tensor dx(d_out.shape());
  std::vector<double> sum_dxhat(C, 0.0), sum_dxhat_xhat(C, 0.0);
  for (std::size_t r = 0; r < R; ++r)
    for (std::size_t c = 0; c < C; ++c) {
      const double dy = d_out[r * C + c];
      const double h = xhat_[r * C + c];
      gamma.grad[c] += dy * h;
      beta.grad[c] += dy;
      const double dxhat = dy * gamma.value[c];
      sum_dxhat[c] += dxhat;
      sum_dxhat_xhat[c] += dxhat * h;
    }
  const double Rd = static_cast<double>(R);
  for (std::size_t r = 0; r < R; ++r)
    for (std::size_t c = 0; c < C; ++c) {
      const double dxhat = d_out[r * C + c] * gamma.value[c];
      if (last_mode_ == Mode::Train)
        dx[r * C + c] = inv_std_[c] / Rd *
                        (Rd * dxhat - sum_dxhat[c] - xhat_[r * C + c] * sum_dxhat_xhat[c]);
      else
        dx[r * C + c] = dxhat * inv_std_[c];
    }
  return dx;
}

// ---------------------------------------------------------------------------
// Dropout

Dropout::Dropout(double p) : p_(p) {
  require(p >= 0.0 && p < 1.0, ErrorCode::InvalidConfig, "dropout rate must lie in [0, 1)");
}

Tensor Dropout::forward(const Tensor& x, Mode mode, Rng& rng) {
  if (mode == Mode::Eval || p_ == 0.0) {
    mask_.clear();
    return x;
  }
  mask_.resize(x.size());
  const double keep = 1.0 / (1.0 - p_);
  Tensor out(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) {
    mask_[i] = uniform01(rng) < p_ ? 0.0 : keep;
    out[i] = x[i] * mask_[i];
  }
  return out;
}

Tensor Dropout::backward(const Tensor& d_out) const {
  if (mask_.empty()) return d_out;
  require(d_out.size() == mask_.size(), ErrorCode::ShapeMismatch, "dropout gradient shape");
  Tensor dx(d_out.shape());
  for (std::size_t i = 0; i < d_out.size(); ++i) dx[i] = d_out[i] * mask_[i];
  return dx;
}

// ---------------------------------------------------------------------------
// Dense

Dense::Dense(std::size_t in, std::size_t out, bool relu)
    : weight("weight", {out, in}), bias("bias", {out}), relu_(relu) {}

Tensor Dense::forward(const Tensor& x) {
  const std::size_t I = in(), O = out();
  require(x.rank() >= 1 && x.size() % I == 0 && x.size() / I > 0, ErrorCode::ShapeMismatch,
          "dense input " + shape_string(x.shape()) + " expects width " + std::to_string(I));
  const std::size_t B = x.size() / I;
  input_ = x;
  input_.reshape({B, I});
  Tensor y({B, O});
  for (std::size_t b = 0; b < B; ++b) {
    const double* xr = x.data() + b * I;
    for (std::size_t o = 0; o < O; ++o) {
      const double* w = weight.value.data() + o * I;
      double s = bias.value[o];
      for (std::size_t i = 0; i < I; ++i) s += w[i] * xr[i];
      y[b * O + o] = relu_ ? std::max(s, 0.0) : s;
    }
  }
  output_ = y;
  return y;
}

Tensor Dense::backward(const Tensor& d_out) {
  require(d_out.same_shape(output_), ErrorCode::ShapeMismatch, "dense gradient shape");
  const std::size_t I = in(), O = out(), B = output_.dim(0);
  Tensor dx({B, I});
  for (std::size_t b = 0; b < B; ++b) {
    const double* xr = input_.data() + b * I;
    double* dxr = dx.data() + b * I;
    for (std::size_t o = 0; o < O; ++o) {
      double g = d_out[b * O + o];
      if (relu_ && output_[b * O + o] <= 0.0) g = 0.0;
      if (g == 0.0) continue;
      bias.grad[o] += g;
      const double* w = weight.value.data() + o * I;
      double* dw = weight.grad.data() + o * I;
      for (std::size_t i = 0; i < I; ++i) {
        dw[i] += g * xr[i];
        dxr[i] += g * w[i];
      }
    }
  }
  return dx;
}

// ---------------------------------------------------------------------------
// Softmax, loss, optimiser

Tensor softmax(const Tensor& logits) {
  require(logits.rank() == 2, ErrorCode::ShapeMismatch, "softmax expects B x K");
  const std::size_t B = logits.dim(0), K = logits.dim(1);
  Tensor p(logits.shape());
  for (std::size_t b = 0; b < B; ++b) {
    const double* l = logits.data() + b * K;
    const double mx = *std::max_element(l, l + K);
    double z = 0.0;
    for (std::size_t k = 0; k < K; ++k) z += (p[b * K + k] = std::exp(l[k] - mx));
    for (std::size_t k = 0; k < K; ++k) p[b * K + k] /= z;
  }
  return p;
}

CrossEntropyResult cross_entropy_elastic_net(const Tensor& probs, std::span<const int> gold,
                                             const Tensor& weight, double l1, double l2) {
  require(probs.rank() == 2 && probs.dim(0) == gold.size(), ErrorCode::ShapeMismatch,
          "probabilities and gold labels disagree in batch size");
  const std::size_t B = probs.dim(0), K = probs.dim(1);
  CrossEntropyResult r;
  r.d_logits = Tensor(probs.shape());
  for (int g : gold) {
    require(g >= -1 && g < static_cast<int>(K), ErrorCode::LabelOutOfRange,
            "gold label " + std::to_string(g));
    if (g >= 0) ++r.counted;
  }
  if (r.counted > 0) {
    const double inv = 1.0 / static_cast<double>(r.counted);
    for (std::size_t b = 0; b < B; ++b) {
      if (gold[b] < 0) continue;
      const auto g = static_cast<std::size_t>(gold[b]);
      double pg = probs[b * K + g];
      if (pg < 1e-12) {
        pg = 1e-12;
        r.clamped = true;
      }
      r.data_loss -= std::log(pg) * inv;
      for (std::size_t k = 0; k < K; ++k)
        r.d_logits[b * K + k] = (probs[b * K + k] - (k == g ? 1.0 : 0.0)) * inv;
    }
  }
  r.d_weight = Tensor(weight.shape());
  double penalty = 0.0;
  for (std::size_t i = 0; i < weight.size(); ++i) {
    const double w = weight[i];
    penalty += 0.5 * l2 * w * w + l1 * std::abs(w);
    const double sgn = w > 0.0 ? 1.0 : (w < 0.0 ? -1.0 : 0.0);
    r.d_weight[i] = l2 * w + l1 * sgn;
  }
  r.loss = r.data_loss + penalty;
  return r;
}

void adam_step(Param& p, AdamMoments& s, const AdamConfig& cfg) {
  require(p.value.same_shape(p.grad), ErrorCode::ShapeMismatch, "parameter/gradient shapes");
  if (s.m.size() != p.value.size()) {
    s.m = Tensor(p.value.shape());
    s.v = Tensor(p.value.shape());
    s.step = 0;
  }
  ++s.step;
  const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(s.step));
  const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(s.step));
  for (std::size_t i = 0; i < p.value.size(); ++i) {
    const double g = p.grad[i];
    s.m[i] = cfg.beta1 * s.m[i] + (1.0 - cfg.beta1) * g;
    s.v[i] = cfg.beta2 * s.v[i] + (1.0 - cfg.beta2) * g * g;
    const double mhat = s.m[i] / c1;
    const double vhat = s.v[i] / c2;
    p.value[i] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
  }
}

}  // namespace acton
