#pragma once

#include <cmath>
#include <vector>

#include "texweave/nn.hpp"

namespace texweave {

struct AdamConfig {
  double learning_rate = 0.0002;
  double beta1 = 0.5;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Adaptive-moment optimizer without weight decay over a fixed parameter list.
template <typename T>
class Adam {
 public:
  Adam(std::vector<nn::Param<T>*> params, AdamConfig config) : params_(std::move(params)), config_(config) {
    if (!(config_.learning_rate > 0)) throw std::invalid_argument("learning rate must be > 0");
    for (auto* p : params_) {
      m_.emplace_back(p->value.size(), T(0));
      v_.emplace_back(p->value.size(), T(0));
    }
  }

  void step() {
    ++t_;
    const double c1 = 1.0 - std::pow(config_.beta1, double(t_));
    const double c2 = 1.0 - std::pow(config_.beta2, double(t_));
    const T b1 = T(config_.beta1), b2 = T(config_.beta2);
    const T step_size = T(config_.learning_rate / c1);
    const T inv_c2 = T(1.0 / c2);
    const T eps = T(config_.eps);
    for (std::size_t k = 0; k < params_.size(); ++k) {
      auto& value = params_[k]->value;
      const auto& grad = params_[k]->grad;
      auto& m = m_[k];
      auto& v = v_[k];
      for (std::size_t i = 0; i < value.size(); ++i) {
        const T g = grad[i];
        m[i] = b1 * m[i] + (T(1) - b1) * g;
        v[i] = b2 * v[i] + (T(1) - b2) * g * g;
        value[i] -= step_size * m[i] / (std::sqrt(v[i] * inv_c2) + eps);
      }
    }
  }

  void zero_grad() {
    for (auto* p : params_) p->zero_grad();
  }

  const AdamConfig& config() const { return config_; }
  long long steps() const { return t_; }
  std::vector<std::vector<T>>& first_moments() { return m_; }
  std::vector<std::vector<T>>& second_moments() { return v_; }
  const std::vector<std::vector<T>>& first_moments() const { return m_; }
  const std::vector<std::vector<T>>& second_moments() const { return v_; }
  void set_steps(long long t) { t_ = t; }

 private:
  std::vector<nn::Param<T>*> params_;
  AdamConfig config_;
  std::vector<std::vector<T>> m_, v_;
  long long t_ = 0;
};

}  // namespace texweave
