#pragma once

#include <algorithm>
#include <cstddef>
#include <limits>
#include <memory>
#include <string>
#include <vector>

#include "dgsense/core/rng.hpp"
#include "dgsense/core/tensor.hpp"
#include "dgsense/nn/kernels.hpp"
#include "dgsense/nn/module.hpp"

namespace dgsense::nn {

namespace detail {

inline std::size_t batch_of(const Shape& s) {
  if (s.empty()) throw ArgumentError("expected a batched tensor");
  return s[0];
}

inline void expect_rank(const Shape& s, std::size_t rank, const char* layer) {
  if (s.size() != rank) {
    throw ArgumentError(std::string(layer) + " expects rank " + std::to_string(rank) +
                        " input, got " + shape_string(s));
  }
}

}  // namespace detail

/// y = x W^T + b over the flattened per-sample features.
template <typename T>
class Linear final : public Module<T> {
 public:
  Linear(std::size_t in, std::size_t out, Rng& rng) : in_(in), out_(out) {
    weight_.value = Tensor<T>({out, in});
    bias_.value = Tensor<T>({out});
    init_he(weight_.value, in, rng);
  }

  Tensor<T> forward(const Tensor<T>& x) override {
    const std::size_t B = detail::batch_of(x.shape());
    if (x.size() != B * in_) {
      throw ArgumentError("Linear expects " + std::to_string(in_) + " features per sample, got " +
                          shape_string(x.shape()));
    }
    input_ = x;
    Tensor<T> y({B, out_});
    const T* W = weight_.value.data();
    for (std::size_t b = 0; b < B; ++b) {
      const T* xb = x.data() + b * in_;
      for (std::size_t o = 0; o < out_; ++o) {
        y[b * out_ + o] = bias_.value[o] + kernels::dot(W + o * in_, xb, in_);
      }
    }
    return y;
  }

  Tensor<T> backward(const Tensor<T>& g) override {
    const std::size_t B = detail::batch_of(input_.shape());
    Tensor<T> dx(input_.shape());
    const T* W = weight_.value.data();
    if (!this->frozen_) {
      T* dW = weight_.grad_buffer().data();
      T* db = bias_.grad_buffer().data();
      for (std::size_t b = 0; b < B; ++b) {
        const T* xb = input_.data() + b * in_;
        for (std::size_t o = 0; o < out_; ++o) {
          const T go = g[b * out_ + o];
          db[o] += go;
          kernels::axpy(go, xb, dW + o * in_, in_);
        }
      }
    }
    for (std::size_t b = 0; b < B; ++b) {
      T* dxb = dx.data() + b * in_;
      for (std::size_t o = 0; o < out_; ++o) kernels::axpy(g[b * out_ + o], W + o * in_, dxb, in_);
    }
    return dx;
  }

  std::unique_ptr<Module<T>> clone() const override { return std::make_unique<Linear>(*this); }

  void collect(const std::string& prefix, ParamList<T>& out) override {
    out.push_back({join_name(prefix, "weight"), &weight_});
    out.push_back({join_name(prefix, "bias"), &bias_});
  }

  Parameter<T>& weight() { return weight_; }
  Parameter<T>& bias() { return bias_; }

 private:
  std::size_t in_, out_;
  Parameter<T> weight_, bias_;
  Tensor<T> input_;
};

/// 2-D convolution over (B, C, H, W). A 1-D temporal convolution is the
/// special case H = 1, kernel (1, k).
template <typename T>
class Conv2d final : public Module<T> {
 public:
  struct Options {
    std::size_t in_channels, out_channels;
    std::size_t kh = 3, kw = 3, sh = 1, sw = 1, ph = 1, pw = 1;
    bool bias = true;
  };

  Conv2d(const Options& o, Rng& rng) : opt_(o) {
    weight_.value = Tensor<T>({o.out_channels, o.in_channels * o.kh * o.kw});
    bias_.value = Tensor<T>({o.out_channels});
    init_he(weight_.value, o.in_channels * o.kh * o.kw, rng);
  }

  Tensor<T> forward(const Tensor<T>& x) override {
    detail::expect_rank(x.shape(), 4, "Conv2d");
    if (x.dim(1) != opt_.in_channels) {
      throw ArgumentError("Conv2d channel mismatch: expected " + std::to_string(opt_.in_channels) +
                          ", got " + shape_string(x.shape()));
    }
    geom_ = {opt_.in_channels, x.dim(2), x.dim(3), opt_.kh, opt_.kw, opt_.sh, opt_.sw, opt_.ph, opt_.pw};
    if (x.dim(2) + 2 * opt_.ph < opt_.kh || x.dim(3) + 2 * opt_.pw < opt_.kw) {
      throw ArgumentError("Conv2d kernel larger than padded input " + shape_string(x.shape()));
    }
    const std::size_t B = x.dim(0);
    const std::size_t K = geom_.rows(), P = geom_.cols();
    const std::size_t Cout = opt_.out_channels;
    in_shape_ = x.shape();
    cols_.assign(B * K * P, T{0});
    Tensor<T> y({B, Cout, geom_.out_h(), geom_.out_w()});
    const T* W = weight_.value.data();
    const std::size_t in_stride = opt_.in_channels * x.dim(2) * x.dim(3);
    for (std::size_t b = 0; b < B; ++b) {
      T* col = cols_.data() + b * K * P;
      kernels::im2col(x.data() + b * in_stride, geom_, col);
      T* yb = y.data() + b * Cout * P;
      for (std::size_t o = 0; o < Cout; ++o) {
        T* yo = yb + o * P;
        std::fill(yo, yo + P, bias_.value[o]);
        for (std::size_t k = 0; k < K; ++k) kernels::axpy(W[o * K + k], col + k * P, yo, P);
      }
    }
    return y;
  }

  Tensor<T> backward(const Tensor<T>& g) override {
    const std::size_t B = in_shape_[0];
    const std::size_t K = geom_.rows(), P = geom_.cols();
    const std::size_t Cout = opt_.out_channels;
    const T* W = weight_.value.data();
    Tensor<T> dx(in_shape_);
    const std::size_t in_stride = in_shape_[1] * in_shape_[2] * in_shape_[3];
    std::vector<T> dcol(K * P);
    T* dW = this->frozen_ ? nullptr : weight_.grad_buffer().data();
    T* db = this->frozen_ ? nullptr : bias_.grad_buffer().data();
    for (std::size_t b = 0; b < B; ++b) {
      const T* gb = g.data() + b * Cout * P;
      const T* col = cols_.data() + b * K * P;
      if (dW) {
        for (std::size_t o = 0; o < Cout; ++o) {
          const T* go = gb + o * P;
          db[o] += kernels::sum(go, P);
          for (std::size_t k = 0; k < K; ++k) dW[o * K + k] += kernels::dot(go, col + k * P, P);
        }
      }
      std::fill(dcol.begin(), dcol.end(), T{0});
      for (std::size_t o = 0; o < Cout; ++o) {
        const T* go = gb + o * P;
        for (std::size_t k = 0; k < K; ++k) kernels::axpy(W[o * K + k], go, dcol.data() + k * P, P);
      }
      kernels::col2im(dcol.data(), geom_, dx.data() + b * in_stride);
    }
    return dx;
  }

  std::unique_ptr<Module<T>> clone() const override { return std::make_unique<Conv2d>(*this); }

  void collect(const std::string& prefix, ParamList<T>& out) override {
    out.push_back({join_name(prefix, "weight"), &weight_});
    if (opt_.bias) out.push_back({join_name(prefix, "bias"), &bias_});
  }

  Parameter<T>& weight() { return weight_; }
  Parameter<T>& bias() { return bias_; }
  const Options& options() const { return opt_; }

 private:
  Options opt_;
  Parameter<T> weight_, bias_;
  kernels::ConvGeometry geom_{};
  Shape in_shape_;
  std::vector<T> cols_;
};

/// Transposed convolution (the adjoint of Conv2d's data path). Output extent
/// is (in - 1) * stride - 2 * pad + kernel along each axis.
template <typename T>
class ConvTranspose2d final : public Module<T> {
 public:
  struct Options {
    std::size_t in_channels, out_channels;
    std::size_t kh = 4, kw = 4, sh = 2, sw = 2, ph = 1, pw = 1;
  };

  ConvTranspose2d(const Options& o, Rng& rng) : opt_(o) {
    weight_.value = Tensor<T>({o.in_channels, o.out_channels * o.kh * o.kw});
    bias_.value = Tensor<T>({o.out_channels});
    init_he(weight_.value, o.in_channels * o.kh * o.kw / std::max<std::size_t>(1, o.sh * o.sw), rng);
  }

  Tensor<T> forward(const Tensor<T>& x) override {
    detail::expect_rank(x.shape(), 4, "ConvTranspose2d");
    if (x.dim(1) != opt_.in_channels) throw ArgumentError("ConvTranspose2d channel mismatch");
    const std::size_t B = x.dim(0), H = x.dim(2), Wd = x.dim(3);
    const std::size_t Ho = (H - 1) * opt_.sh + opt_.kh - 2 * opt_.ph;
    const std::size_t Wo = (Wd - 1) * opt_.sw + opt_.kw - 2 * opt_.pw;
    geom_ = {opt_.out_channels, Ho, Wo, opt_.kh, opt_.kw, opt_.sh, opt_.sw, opt_.ph, opt_.pw};
    input_ = x;
    const std::size_t K = geom_.rows(), P = H * Wd;
    const std::size_t Cin = opt_.in_channels, Cout = opt_.out_channels;
    Tensor<T> y({B, Cout, Ho, Wo});
    std::vector<T> col(K * P);
    const T* W = weight_.value.data();
    for (std::size_t b = 0; b < B; ++b) {
      std::fill(col.begin(), col.end(), T{0});
      const T* xb = x.data() + b * Cin * P;
      for (std::size_t c = 0; c < Cin; ++c) {
        for (std::size_t k = 0; k < K; ++k) kernels::axpy(W[c * K + k], xb + c * P, col.data() + k * P, P);
      }
      T* yb = y.data() + b * Cout * Ho * Wo;
      kernels::col2im(col.data(), geom_, yb);
      for (std::size_t o = 0; o < Cout; ++o) {
        for (std::size_t i = 0; i < Ho * Wo; ++i) yb[o * Ho * Wo + i] += bias_.value[o];
      }
    }
    return y;
  }

  Tensor<T> backward(const Tensor<T>& g) override {
    const std::size_t B = input_.dim(0), P = input_.dim(2) * input_.dim(3);
    const std::size_t K = geom_.rows();
    const std::size_t Cin = opt_.in_channels, Cout = opt_.out_channels;
    const std::size_t out_stride = Cout * geom_.height * geom_.width;
    const T* W = weight_.value.data();
    Tensor<T> dx(input_.shape());
    std::vector<T> dcol(K * P);
    T* dW = this->frozen_ ? nullptr : weight_.grad_buffer().data();
    T* db = this->frozen_ ? nullptr : bias_.grad_buffer().data();
    for (std::size_t b = 0; b < B; ++b) {
      const T* gb = g.data() + b * out_stride;
      kernels::im2col(gb, geom_, dcol.data());
      const T* xb = input_.data() + b * Cin * P;
      if (dW) {
        for (std::size_t o = 0; o < Cout; ++o) {
          db[o] += kernels::sum(gb + o * geom_.height * geom_.width, geom_.height * geom_.width);
        }
        for (std::size_t c = 0; c < Cin; ++c) {
          for (std::size_t k = 0; k < K; ++k) dW[c * K + k] += kernels::dot(xb + c * P, dcol.data() + k * P, P);
        }
      }
      T* dxb = dx.data() + b * Cin * P;
      for (std::size_t c = 0; c < Cin; ++c) {
        for (std::size_t k = 0; k < K; ++k) kernels::axpy(W[c * K + k], dcol.data() + k * P, dxb + c * P, P);
      }
    }
    return dx;
  }

  std::unique_ptr<Module<T>> clone() const override { return std::make_unique<ConvTranspose2d>(*this); }

  void collect(const std::string& prefix, ParamList<T>& out) override {
    out.push_back({join_name(prefix, "weight"), &weight_});
    out.push_back({join_name(prefix, "bias"), &bias_});
  }

 private:
  Options opt_;
  Parameter<T> weight_, bias_;
  kernels::ConvGeometry geom_{};
  Tensor<T> input_;
};

template <typename T>
class ReLU final : public Module<T> {
 public:
  Tensor<T> forward(const Tensor<T>& x) override {
    Tensor<T> y = x;
    for (auto& v : y.values()) v = v > T{0} ? v : T{0};
    output_ = y;
    return y;
  }
  Tensor<T> backward(const Tensor<T>& g) override {
    Tensor<T> dx = g;
    for (std::size_t i = 0; i < dx.size(); ++i) {
      if (!(output_[i] > T{0})) dx[i] = T{0};
    }
    return dx;
  }
  std::unique_ptr<Module<T>> clone() const override { return std::make_unique<ReLU>(*this); }

 private:
  Tensor<T> output_;
};

/// Non-overlapping max pooling; trailing rows/columns that do not fill a
/// window are dropped. Ties pick the first element in scan order.
template <typename T>
class MaxPool2d final : public Module<T> {
 public:
  MaxPool2d(std::size_t kh, std::size_t kw) : kh_(kh), kw_(kw) {}

  Tensor<T> forward(const Tensor<T>& x) override {
    detail::expect_rank(x.shape(), 4, "MaxPool2d");
    in_shape_ = x.shape();
    const std::size_t BC = x.dim(0) * x.dim(1), H = x.dim(2), W = x.dim(3);
    const std::size_t Ho = H / kh_, Wo = W / kw_;
    if (Ho == 0 || Wo == 0) throw ArgumentError("MaxPool2d window larger than input");
    Tensor<T> y({x.dim(0), x.dim(1), Ho, Wo});
    argmax_.assign(y.size(), 0);
    for (std::size_t c = 0; c < BC; ++c) {
      const T* xc = x.data() + c * H * W;
      for (std::size_t i = 0; i < Ho; ++i) {
        for (std::size_t j = 0; j < Wo; ++j) {
          std::size_t best = (i * kh_) * W + j * kw_;
          for (std::size_t a = 0; a < kh_; ++a) {
            for (std::size_t b = 0; b < kw_; ++b) {
              const std::size_t idx = (i * kh_ + a) * W + j * kw_ + b;
              if (xc[idx] > xc[best]) best = idx;
            }
          }
          const std::size_t o = (c * Ho + i) * Wo + j;
          y[o] = xc[best];
          argmax_[o] = c * H * W + best;
        }
      }
    }
    return y;
  }

  Tensor<T> backward(const Tensor<T>& g) override {
    Tensor<T> dx(in_shape_);
    for (std::size_t o = 0; o < g.size(); ++o) dx[argmax_[o]] += g[o];
    return dx;
  }

  std::unique_ptr<Module<T>> clone() const override { return std::make_unique<MaxPool2d>(*this); }

 private:
  std::size_t kh_, kw_;
  Shape in_shape_;
  std::vector<std::size_t> argmax_;
};

/// (B, C, H, W) -> (B, C) spatial mean.
template <typename T>
class GlobalAvgPool final : public Module<T> {
 public:
  Tensor<T> forward(const Tensor<T>& x) override {
    detail::expect_rank(x.shape(), 4, "GlobalAvgPool");
    in_shape_ = x.shape();
    const std::size_t BC = x.dim(0) * x.dim(1), HW = x.dim(2) * x.dim(3);
    Tensor<T> y({x.dim(0), x.dim(1)});
    for (std::size_t c = 0; c < BC; ++c) y[c] = kernels::sum(x.data() + c * HW, HW) / static_cast<T>(HW);
    return y;
  }
  Tensor<T> backward(const Tensor<T>& g) override {
    Tensor<T> dx(in_shape_);
    const std::size_t HW = in_shape_[2] * in_shape_[3];
    for (std::size_t c = 0; c < g.size(); ++c) {
      const T v = g[c] / static_cast<T>(HW);
      std::fill(dx.data() + c * HW, dx.data() + (c + 1) * HW, v);
    }
    return dx;
  }
  std::unique_ptr<Module<T>> clone() const override { return std::make_unique<GlobalAvgPool>(*this); }

 private:
  Shape in_shape_;
};

/// Per-sample reshape; the batch axis is preserved.
template <typename T>
class Reshape final : public Module<T> {
 public:
  explicit Reshape(Shape per_sample) : per_sample_(std::move(per_sample)) {}
  Tensor<T> forward(const Tensor<T>& x) override {
    in_shape_ = x.shape();
    Shape s{detail::batch_of(x.shape())};
    s.insert(s.end(), per_sample_.begin(), per_sample_.end());
    return x.reshaped(s);
  }
  Tensor<T> backward(const Tensor<T>& g) override { return g.reshaped(in_shape_); }
  std::unique_ptr<Module<T>> clone() const override { return std::make_unique<Reshape>(*this); }

 private:
  Shape per_sample_;
  Shape in_shape_;
};

/// Keeps the top-left (H, W) window of (B, C, H', W').
template <typename T>
class Crop2d final : public Module<T> {
 public:
  Crop2d(std::size_t h, std::size_t w) : h_(h), w_(w) {}
  Tensor<T> forward(const Tensor<T>& x) override {
    detail::expect_rank(x.shape(), 4, "Crop2d");
    if (x.dim(2) < h_ || x.dim(3) < w_) throw ArgumentError("Crop2d target exceeds input");
    in_shape_ = x.shape();
    const std::size_t BC = x.dim(0) * x.dim(1), H = x.dim(2), W = x.dim(3);
    Tensor<T> y({x.dim(0), x.dim(1), h_, w_});
    for (std::size_t c = 0; c < BC; ++c) {
      for (std::size_t i = 0; i < h_; ++i) {
        std::copy_n(x.data() + (c * H + i) * W, w_, y.data() + (c * h_ + i) * w_);
      }
    }
    return y;
  }
  Tensor<T> backward(const Tensor<T>& g) override {
    Tensor<T> dx(in_shape_);
    const std::size_t BC = in_shape_[0] * in_shape_[1], H = in_shape_[2], W = in_shape_[3];
    for (std::size_t c = 0; c < BC; ++c) {
      for (std::size_t i = 0; i < h_; ++i) {
        std::copy_n(g.data() + (c * h_ + i) * w_, w_, dx.data() + (c * H + i) * W);
      }
    }
    return dx;
  }
  std::unique_ptr<Module<T>> clone() const override { return std::make_unique<Crop2d>(*this); }

 private:
  std::size_t h_, w_;
  Shape in_shape_;
};

}  // namespace dgsense::nn
