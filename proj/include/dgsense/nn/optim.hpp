#pragma once

#include <cmath>
#include <memory>
#include <string>
#include <vector>

#include "dgsense/core/error.hpp"
#include "dgsense/nn/module.hpp"

namespace dgsense::nn {

template <typename T>
class Optimizer {
 public:
  explicit Optimizer(ParamList<T> params) : params_(std::move(params)) {}
  virtual ~Optimizer() = default;

  virtual void step() = 0;

  void zero_grad() {
    for (auto& p : params_) p.param->zero_grad();
  }

  const ParamList<T>& params() const { return params_; }

 protected:
  ParamList<T> params_;
};

template <typename T>
class Sgd final : public Optimizer<T> {
 public:
  Sgd(ParamList<T> params, double lr) : Optimizer<T>(std::move(params)), lr_(lr) {}

  void step() override {
    for (auto& p : this->params_) {
      if (p.param->grad.empty()) continue;
      auto& v = p.param->value;
      const auto& g = p.param->grad;
      for (std::size_t i = 0; i < v.size(); ++i) v[i] -= static_cast<T>(lr_) * g[i];
    }
  }

 private:
  double lr_;
};

/// Adaptive moment estimation with bias correction.
template <typename T>
class Adam final : public Optimizer<T> {
 public:
  Adam(ParamList<T> params, double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : Optimizer<T>(std::move(params)), lr_(lr), b1_(beta1), b2_(beta2), eps_(eps) {
    for (auto& p : this->params_) {
      m_.emplace_back(p.param->value.size(), 0.0);
      v_.emplace_back(p.param->value.size(), 0.0);
    }
  }

  void step() override {
    ++t_;
    const double c1 = 1.0 - std::pow(b1_, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(b2_, static_cast<double>(t_));
    for (std::size_t k = 0; k < this->params_.size(); ++k) {
      auto* p = this->params_[k].param;
      if (p->grad.empty()) continue;
      auto& m = m_[k];
      auto& v = v_[k];
      for (std::size_t i = 0; i < m.size(); ++i) {
        const double g = static_cast<double>(p->grad[i]);
        m[i] = b1_ * m[i] + (1.0 - b1_) * g;
        v[i] = b2_ * v[i] + (1.0 - b2_) * g * g;
        const double update = lr_ * (m[i] / c1) / (std::sqrt(v[i] / c2) + eps_);
        p->value[i] = static_cast<T>(static_cast<double>(p->value[i]) - update);
      }
    }
  }

 private:
  double lr_, b1_, b2_, eps_;
  long t_ = 0;
  std::vector<std::vector<double>> m_, v_;
};

template <typename T>
std::unique_ptr<Optimizer<T>> make_optimizer(const std::string& name, ParamList<T> params,
                                             double lr) {
  if (name == "adam") return std::make_unique<Adam<T>>(std::move(params), lr);
  if (name == "sgd") return std::make_unique<Sgd<T>>(std::move(params), lr);
  throw ArgumentError("unknown optimizer '" + name + "'");
}

}  // namespace dgsense::nn
