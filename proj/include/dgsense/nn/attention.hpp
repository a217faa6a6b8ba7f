#pragma once

#include <cmath>
#include <cstddef>
#include <memory>
#include <vector>

#include "dgsense/nn/layers.hpp"

namespace dgsense::nn {

template <typename T>
inline T sigmoid(T x) {
  return x >= T{0} ? T{1} / (T{1} + std::exp(-x)) : std::exp(x) / (T{1} + std::exp(x));
}

/// Convolutional block attention: a channel gate from a shared two-layer
/// MLP over global average- and max-pooled descriptors, then a spatial gate
/// from a convolution over the channel-wise average and max maps. Both gates
/// are sigmoids and multiply the input.
template <typename T>
class Cbam final : public Module<T> {
 public:
  Cbam(std::size_t channels, std::size_t reduction, std::size_t spatial_kernel, Rng& rng)
      : channels_(channels),
        fc1_(channels, std::max<std::size_t>(1, channels / reduction), rng),
        fc2_(std::max<std::size_t>(1, channels / reduction), channels, rng),
        spatial_({2, 1, spatial_kernel, spatial_kernel, 1, 1, spatial_kernel / 2, spatial_kernel / 2},
                 rng) {}

  Tensor<T> forward(const Tensor<T>& x) override {
    detail::expect_rank(x.shape(), 4, "Cbam");
    if (x.dim(1) != channels_) throw ArgumentError("Cbam channel mismatch");
    const std::size_t B = x.dim(0), C = channels_, HW = x.dim(2) * x.dim(3);
    input_ = x;

    Tensor<T> pooled({2 * B, C});
    max_pos_.assign(B * C, 0);
    for (std::size_t b = 0; b < B; ++b) {
      for (std::size_t c = 0; c < C; ++c) {
        const T* xc = x.data() + (b * C + c) * HW;
        pooled[b * C + c] = kernels::sum(xc, HW) / static_cast<T>(HW);
        std::size_t best = 0;
        for (std::size_t i = 1; i < HW; ++i) {
          if (xc[i] > xc[best]) best = i;
        }
        pooled[(B + b) * C + c] = xc[best];
        max_pos_[b * C + c] = best;
      }
    }
    const Tensor<T> m = fc2_.forward(relu_.forward(fc1_.forward(pooled)));
    channel_gate_ = Tensor<T>({B, C});
    for (std::size_t i = 0; i < B * C; ++i) channel_gate_[i] = sigmoid(m[i] + m[B * C + i]);

    gated_ = x;
    for (std::size_t b = 0; b < B; ++b) {
      for (std::size_t c = 0; c < C; ++c) {
        T* gc = gated_.data() + (b * C + c) * HW;
        const T a = channel_gate_[b * C + c];
        for (std::size_t i = 0; i < HW; ++i) gc[i] *= a;
      }
    }

    Tensor<T> maps({B, 2, x.dim(2), x.dim(3)});
    chan_max_.assign(B * HW, 0);
    for (std::size_t b = 0; b < B; ++b) {
      for (std::size_t i = 0; i < HW; ++i) {
        T acc = 0;
        std::size_t best = 0;
        T best_v = gated_[(b * C) * HW + i];
        for (std::size_t c = 0; c < C; ++c) {
          const T v = gated_[(b * C + c) * HW + i];
          acc += v;
          if (v > best_v) {
            best_v = v;
            best = c;
          }
        }
        maps[(b * 2) * HW + i] = acc / static_cast<T>(C);
        maps[(b * 2 + 1) * HW + i] = best_v;
        chan_max_[b * HW + i] = best;
      }
    }
    const Tensor<T> s = spatial_.forward(maps);
    spatial_gate_ = Tensor<T>(s.shape());
    for (std::size_t i = 0; i < s.size(); ++i) spatial_gate_[i] = sigmoid(s[i]);

    Tensor<T> y = gated_;
    for (std::size_t b = 0; b < B; ++b) {
      for (std::size_t c = 0; c < C; ++c) {
        T* yc = y.data() + (b * C + c) * HW;
        const T* g = spatial_gate_.data() + b * HW;
        for (std::size_t i = 0; i < HW; ++i) yc[i] *= g[i];
      }
    }
    return y;
  }

  Tensor<T> backward(const Tensor<T>& dy) override {
    const std::size_t B = input_.dim(0), C = channels_, HW = input_.dim(2) * input_.dim(3);
    // Spatial gate.
    Tensor<T> dgated(input_.shape());
    Tensor<T> dlogit_s(spatial_gate_.shape());
    for (std::size_t b = 0; b < B; ++b) {
      const T* g = spatial_gate_.data() + b * HW;
      for (std::size_t c = 0; c < C; ++c) {
        const std::size_t off = (b * C + c) * HW;
        for (std::size_t i = 0; i < HW; ++i) {
          dgated[off + i] = dy[off + i] * g[i];
          dlogit_s[b * HW + i] += dy[off + i] * gated_[off + i];
        }
      }
      for (std::size_t i = 0; i < HW; ++i) dlogit_s[b * HW + i] *= g[i] * (T{1} - g[i]);
    }
    const Tensor<T> dmaps = spatial_.backward(dlogit_s);
    for (std::size_t b = 0; b < B; ++b) {
      for (std::size_t i = 0; i < HW; ++i) {
        const T davg = dmaps[(b * 2) * HW + i] / static_cast<T>(C);
        for (std::size_t c = 0; c < C; ++c) dgated[(b * C + c) * HW + i] += davg;
        dgated[(b * C + chan_max_[b * HW + i]) * HW + i] += dmaps[(b * 2 + 1) * HW + i];
      }
    }
    // Channel gate.
    Tensor<T> dx(input_.shape());
    Tensor<T> dlogit_c({B, C});
    for (std::size_t b = 0; b < B; ++b) {
      for (std::size_t c = 0; c < C; ++c) {
        const std::size_t off = (b * C + c) * HW;
        const T a = channel_gate_[b * C + c];
        T da = 0;
        for (std::size_t i = 0; i < HW; ++i) {
          da += dgated[off + i] * input_[off + i];
          dx[off + i] = dgated[off + i] * a;
        }
        dlogit_c[b * C + c] = da * a * (T{1} - a);
      }
    }
    Tensor<T> dm({2 * B, C});
    std::copy_n(dlogit_c.data(), B * C, dm.data());
    std::copy_n(dlogit_c.data(), B * C, dm.data() + B * C);
    const Tensor<T> dpooled = fc1_.backward(relu_.backward(fc2_.backward(dm)));
    for (std::size_t b = 0; b < B; ++b) {
      for (std::size_t c = 0; c < C; ++c) {
        const std::size_t off = (b * C + c) * HW;
        const T davg = dpooled[b * C + c] / static_cast<T>(HW);
        for (std::size_t i = 0; i < HW; ++i) dx[off + i] += davg;
        dx[off + max_pos_[b * C + c]] += dpooled[(B + b) * C + c];
      }
    }
    return dx;
  }

  std::unique_ptr<Module<T>> clone() const override { return std::make_unique<Cbam>(*this); }

  void collect(const std::string& prefix, ParamList<T>& out) override {
    fc1_.collect(join_name(prefix, "mlp0"), out);
    fc2_.collect(join_name(prefix, "mlp1"), out);
    spatial_.collect(join_name(prefix, "spatial"), out);
  }

  void set_frozen(bool frozen) override {
    Module<T>::set_frozen(frozen);
    fc1_.set_frozen(frozen);
    relu_.set_frozen(frozen);
    fc2_.set_frozen(frozen);
    spatial_.set_frozen(frozen);
  }

  /// Test hook: drives both gates to 1 so the module becomes the identity.
  void saturate_gates() {
    fc2_.weight().value.fill(T{0});
    fc2_.bias().value.fill(T{20});
    spatial_.weight().value.fill(T{0});
    spatial_.bias().value.fill(T{40});
  }

  const Tensor<T>& channel_gate() const { return channel_gate_; }
  const Tensor<T>& spatial_gate() const { return spatial_gate_; }

 private:
  std::size_t channels_;
  Linear<T> fc1_;
  ReLU<T> relu_;
  Linear<T> fc2_;
  Conv2d<T> spatial_;
  Tensor<T> input_, gated_, channel_gate_, spatial_gate_;
  std::vector<std::size_t> max_pos_, chan_max_;
};

}  // namespace dgsense::nn
