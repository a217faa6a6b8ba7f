#pragma once

#include <cmath>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "dgsense/core/error.hpp"
#include "dgsense/core/rng.hpp"
#include "dgsense/core/tensor.hpp"

namespace dgsense::nn {

/// Trainable tensor. `grad` stays empty until a backward pass accumulates
/// into it, so frozen modules never materialise gradients.
template <typename T>
struct Parameter {
  Tensor<T> value;
  Tensor<T> grad;

  Tensor<T>& grad_buffer() {
    if (grad.size() != value.size()) grad = Tensor<T>(value.shape());
    return grad;
  }
  void zero_grad() {
    if (!grad.empty()) grad.fill(T{0});
  }
};

template <typename T>
struct ParamRef {
  std::string name;
  Parameter<T>* param;
};

template <typename T>
using ParamList = std::vector<ParamRef<T>>;

inline std::string join_name(const std::string& prefix, const std::string& name) {
  return prefix.empty() ? name : prefix + "." + name;
}

/// A differentiable layer. forward() caches what backward() needs; backward()
/// returns the input gradient and, unless frozen, accumulates parameter
/// gradients. One forward must precede each backward.
template <typename T>
class Module {
 public:
  virtual ~Module() = default;

  virtual Tensor<T> forward(const Tensor<T>& x) = 0;
  virtual Tensor<T> backward(const Tensor<T>& grad_out) = 0;
  virtual std::unique_ptr<Module> clone() const = 0;

  virtual void collect(const std::string& /*prefix*/, ParamList<T>& /*out*/) {}

  virtual void set_frozen(bool frozen) { frozen_ = frozen; }
  bool frozen() const noexcept { return frozen_; }

  ParamList<T> parameters(const std::string& prefix = "") {
    ParamList<T> out;
    collect(prefix, out);
    return out;
  }

 protected:
  bool frozen_ = false;
};

/// He-normal initialisation for weights feeding rectifiers.
template <typename T>
void init_he(Tensor<T>& w, std::size_t fan_in, Rng& rng) {
  const double std = std::sqrt(2.0 / static_cast<double>(fan_in));
  for (auto& v : w.values()) v = static_cast<T>(rng.normal() * std);
}

template <typename T>
class Sequential final : public Module<T> {
 public:
  Sequential() = default;
  Sequential(const Sequential& other) : Module<T>(other) {
    for (const auto& l : other.layers_) layers_.push_back(l->clone());
  }
  Sequential& operator=(const Sequential& other) {
    if (this != &other) {
      Sequential tmp(other);
      *this = std::move(tmp);
    }
    return *this;
  }
  Sequential(Sequential&&) noexcept = default;
  Sequential& operator=(Sequential&&) noexcept = default;

  template <typename Layer>
  Layer& add(Layer layer) {
    auto ptr = std::make_unique<Layer>(std::move(layer));
    Layer& ref = *ptr;
    layers_.push_back(std::move(ptr));
    return ref;
  }
  void add_module(std::unique_ptr<Module<T>> layer) { layers_.push_back(std::move(layer)); }

  std::size_t size() const noexcept { return layers_.size(); }
  Module<T>& operator[](std::size_t i) { return *layers_[i]; }

  Tensor<T> forward(const Tensor<T>& x) override {
    Tensor<T> h = x;
    for (auto& l : layers_) h = l->forward(h);
    return h;
  }

  Tensor<T> backward(const Tensor<T>& grad_out) override {
    Tensor<T> g = grad_out;
    for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) g = (*it)->backward(g);
    return g;
  }

  std::unique_ptr<Module<T>> clone() const override {
    return std::make_unique<Sequential>(*this);
  }

  void collect(const std::string& prefix, ParamList<T>& out) override {
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      layers_[i]->collect(join_name(prefix, std::to_string(i)), out);
    }
  }

  void set_frozen(bool frozen) override {
    Module<T>::set_frozen(frozen);
    for (auto& l : layers_) l->set_frozen(frozen);
  }

 private:
  std::vector<std::unique_ptr<Module<T>>> layers_;
};

}  // namespace dgsense::nn
