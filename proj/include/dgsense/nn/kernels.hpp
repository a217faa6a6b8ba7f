#pragma once

#include <cstddef>

namespace dgsense::nn::kernels {

/// Dot product with eight independent accumulators (vectorisable without
/// reassociation flags, and the summation order is fixed).
template <typename T>
inline T dot(const T* a, const T* b, std::size_t n) {
  T acc[8] = {};
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    for (int k = 0; k < 8; ++k) acc[k] += a[i + k] * b[i + k];
  }
  T tail = 0;
  for (; i < n; ++i) tail += a[i] * b[i];
  return ((acc[0] + acc[1]) + (acc[2] + acc[3])) + ((acc[4] + acc[5]) + (acc[6] + acc[7])) + tail;
}

/// y += alpha * x
template <typename T>
inline void axpy(T alpha, const T* x, T* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

template <typename T>
inline T sum(const T* x, std::size_t n) {
  T acc = 0;
  for (std::size_t i = 0; i < n; ++i) acc += x[i];
  return acc;
}

/// Convolution geometry for one (C, H, W) image.
struct ConvGeometry {
  std::size_t channels, height, width;
  std::size_t kh, kw, sh, sw, ph, pw;

  std::size_t out_h() const { return (height + 2 * ph - kh) / sh + 1; }
  std::size_t out_w() const { return (width + 2 * pw - kw) / sw + 1; }
  std::size_t rows() const { return channels * kh * kw; }
  std::size_t cols() const { return out_h() * out_w(); }
};

/// Unfolds image patches into a (C*kh*kw) x (Ho*Wo) matrix.
template <typename T>
inline void im2col(const T* image, const ConvGeometry& g, T* col) {
  const std::size_t oh = g.out_h(), ow = g.out_w();
  for (std::size_t c = 0; c < g.channels; ++c) {
    for (std::size_t ki = 0; ki < g.kh; ++ki) {
      for (std::size_t kj = 0; kj < g.kw; ++kj) {
        T* row = col + ((c * g.kh + ki) * g.kw + kj) * oh * ow;
        for (std::size_t y = 0; y < oh; ++y) {
          const auto iy = static_cast<std::ptrdiff_t>(y * g.sh + ki) -
                          static_cast<std::ptrdiff_t>(g.ph);
          for (std::size_t x = 0; x < ow; ++x) {
            const auto ix = static_cast<std::ptrdiff_t>(x * g.sw + kj) -
                            static_cast<std::ptrdiff_t>(g.pw);
            const bool inside = iy >= 0 && ix >= 0 &&
                                iy < static_cast<std::ptrdiff_t>(g.height) &&
                                ix < static_cast<std::ptrdiff_t>(g.width);
            row[y * ow + x] =
                inside ? image[(c * g.height + static_cast<std::size_t>(iy)) * g.width +
                               static_cast<std::size_t>(ix)]
                       : T{0};
          }
        }
      }
    }
  }
}

/// Adjoint of im2col: scatters-and-adds column entries back into the image.
template <typename T>
inline void col2im(const T* col, const ConvGeometry& g, T* image) {
  const std::size_t oh = g.out_h(), ow = g.out_w();
  for (std::size_t c = 0; c < g.channels; ++c) {
    for (std::size_t ki = 0; ki < g.kh; ++ki) {
      for (std::size_t kj = 0; kj < g.kw; ++kj) {
        const T* row = col + ((c * g.kh + ki) * g.kw + kj) * oh * ow;
        for (std::size_t y = 0; y < oh; ++y) {
          const auto iy = static_cast<std::ptrdiff_t>(y * g.sh + ki) -
                          static_cast<std::ptrdiff_t>(g.ph);
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(g.height)) continue;
          for (std::size_t x = 0; x < ow; ++x) {
            const auto ix = static_cast<std::ptrdiff_t>(x * g.sw + kj) -
                            static_cast<std::ptrdiff_t>(g.pw);
            if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(g.width)) continue;
            image[(c * g.height + static_cast<std::size_t>(iy)) * g.width +
                  static_cast<std::size_t>(ix)] += row[y * ow + x];
          }
        }
      }
    }
  }
}

}  // namespace dgsense::nn::kernels
