#pragma once

#include <memory>
#include <optional>

#include "dgsense/nn/attention.hpp"
#include "dgsense/nn/layers.hpp"

namespace dgsense::nn {

/// Basic residual block: out = relu(attention(conv(relu(conv(x)))) + shortcut(x)).
/// The shortcut is the identity unless stride or width changes, in which
/// case it is a strided 1x1 convolution.
template <typename T>
class ResidualBlock final : public Module<T> {
 public:
  struct Options {
    std::size_t in_channels, out_channels;
    std::size_t stride = 1;
    bool attention = true;
    std::size_t reduction = 4;
    std::size_t spatial_kernel = 3;
    /// (1, 3) kernels for time series, (3, 3) for images.
    bool temporal = false;
  };

  ResidualBlock(const Options& o, Rng& rng)
      : conv1_(conv_opts(o.in_channels, o.out_channels, o.stride, o.temporal), rng),
        conv2_(conv_opts(o.out_channels, o.out_channels, 1, o.temporal), rng) {
    if (o.attention) cbam_.emplace(o.out_channels, o.reduction, o.spatial_kernel, rng);
    if (o.stride != 1 || o.in_channels != o.out_channels) {
      typename Conv2d<T>::Options sc{o.in_channels, o.out_channels, 1, 1,
                                     o.temporal ? 1 : o.stride, o.stride, 0, 0};
      shortcut_.emplace(sc, rng);
    }
  }

  Tensor<T> forward(const Tensor<T>& x) override {
    Tensor<T> path = conv2_.forward(relu_.forward(conv1_.forward(x)));
    if (cbam_) path = cbam_->forward(path);
    const Tensor<T> skip = shortcut_ ? shortcut_->forward(x) : x;
    if (skip.shape() != path.shape()) throw ArgumentError("residual branch shapes differ");
    for (std::size_t i = 0; i < path.size(); ++i) path[i] += skip[i];
    return out_relu_.forward(path);
  }

  Tensor<T> backward(const Tensor<T>& g) override {
    const Tensor<T> d = out_relu_.backward(g);
    Tensor<T> dpath = cbam_ ? cbam_->backward(d) : d;
    Tensor<T> dx = conv1_.backward(relu_.backward(conv2_.backward(dpath)));
    const Tensor<T> dskip = shortcut_ ? shortcut_->backward(d) : d;
    for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += dskip[i];
    return dx;
  }

  std::unique_ptr<Module<T>> clone() const override { return std::make_unique<ResidualBlock>(*this); }

  void collect(const std::string& prefix, ParamList<T>& out) override {
    conv1_.collect(join_name(prefix, "conv1"), out);
    conv2_.collect(join_name(prefix, "conv2"), out);
    if (cbam_) cbam_->collect(join_name(prefix, "cbam"), out);
    if (shortcut_) shortcut_->collect(join_name(prefix, "shortcut"), out);
  }

  void set_frozen(bool frozen) override {
    Module<T>::set_frozen(frozen);
    conv1_.set_frozen(frozen);
    conv2_.set_frozen(frozen);
    if (cbam_) cbam_->set_frozen(frozen);
    if (shortcut_) shortcut_->set_frozen(frozen);
  }

  /// Zeroes the residual path (both convolutions), leaving relu(shortcut(x)).
  void zero_path() {
    conv1_.weight().value.fill(T{0});
    conv1_.bias().value.fill(T{0});
    conv2_.weight().value.fill(T{0});
    conv2_.bias().value.fill(T{0});
  }

  Cbam<T>* attention() { return cbam_ ? &*cbam_ : nullptr; }
  Conv2d<T>* shortcut() { return shortcut_ ? &*shortcut_ : nullptr; }

 private:
  static typename Conv2d<T>::Options conv_opts(std::size_t in, std::size_t out, std::size_t stride,
                                               bool temporal) {
    if (temporal) return {in, out, 1, 3, 1, stride, 0, 1};
    return {in, out, 3, 3, stride, stride, 1, 1};
  }

  Conv2d<T> conv1_;
  ReLU<T> relu_;
  Conv2d<T> conv2_;
  std::optional<Cbam<T>> cbam_;
  std::optional<Conv2d<T>> shortcut_;
  ReLU<T> out_relu_;
};

}  // namespace dgsense::nn
