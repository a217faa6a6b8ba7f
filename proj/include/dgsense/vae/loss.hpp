#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "dgsense/core/error.hpp"
#include "dgsense/core/rng.hpp"
#include "dgsense/core/tensor.hpp"
#include "dgsense/nets/batch.hpp"

namespace dgsense::vae {

namespace detail {

template <typename T>
void check_sigma(std::span<const T> mu, std::span<const T> sigma) {
  if (mu.size() != sigma.size()) throw ArgumentError("mu and sigma differ in length");
  for (T s : sigma) {
    if (!(s > T{0})) throw ArgumentError("sigma must be strictly positive");
  }
}

}  // namespace detail

/// z = mu + sigma * eps, eps drawn from the standard normal stream.
template <typename T>
std::vector<T> reparameterize(std::span<const T> mu, std::span<const T> sigma, Rng& rng) {
  detail::check_sigma(mu, sigma);
  std::vector<T> z(mu.size());
  for (std::size_t i = 0; i < z.size(); ++i) z[i] = mu[i] + sigma[i] * static_cast<T>(rng.normal());
  return z;
}

/// KL(N(mu, diag sigma^2) || N(0, I)).
template <typename T>
T kl_normal(std::span<const T> mu, std::span<const T> sigma) {
  detail::check_sigma(mu, sigma);
  double acc = 0;
  for (std::size_t i = 0; i < mu.size(); ++i) {
    const double m = mu[i], s = sigma[i];
    acc += m * m + s * s - 1.0 - 2.0 * std::log(s);
  }
  return static_cast<T>(0.5 * acc);
}

/// Batch objective: mean over samples of MSE(x_b, rec_b) + lambda * KL_b.
/// x and x_rec are (B, ...); mu and sigma are (B, latent).
template <typename T>
T vae_loss(const Tensor<T>& x, const Tensor<T>& x_rec, const Tensor<T>& mu, const Tensor<T>& sigma,
           double lambda_kl) {
  if (x.shape() != x_rec.shape()) {
    throw ArgumentError("reconstruction shape " + shape_string(x_rec.shape()) + " differs from input " +
                        shape_string(x.shape()));
  }
  if (x.rank() == 0 || mu.rank() != 2 || mu.shape() != sigma.shape() || mu.dim(0) != x.dim(0)) {
    throw ArgumentError("latent statistics must be (batch, latent) and match the input batch");
  }
  const std::size_t B = x.dim(0), P = x.size() / B, L = mu.dim(1);
  double total = 0;
  for (std::size_t b = 0; b < B; ++b) {
    double se = 0;
    for (std::size_t i = 0; i < P; ++i) {
      const double d = static_cast<double>(x[b * P + i]) - static_cast<double>(x_rec[b * P + i]);
      se += d * d;
    }
    const T kl = kl_normal<T>(std::span<const T>(mu.data() + b * L, L), std::span<const T>(sigma.data() + b * L, L));
    total += se / static_cast<double>(P) + lambda_kl * static_cast<double>(kl);
  }
  return static_cast<T>(total / static_cast<double>(B));
}

/// Sum over modalities of the per-modality batch objective; the KL term
/// enters once per modality.
template <typename T>
T crossmodal_loss(const nets::ModalBatch<T>& x, const nets::ModalBatch<T>& rec, const Tensor<T>& mu,
                  const Tensor<T>& sigma, double lambda_kl) {
  if (x.empty()) throw ArgumentError("cross-modal loss needs at least one modality");
  double total = 0;
  for (const auto& [kind, xk] : x) {
    auto it = rec.find(kind);
    if (it == rec.end()) {
      throw ArgumentError("missing reconstruction for modality " + std::string(to_string(kind)));
    }
    total += vae_loss(xk, it->second, mu, sigma, lambda_kl);
  }
  return static_cast<T>(total);
}

}  // namespace dgsense::vae
