#pragma once

#include <cmath>
#include <stdexcept>
#include <string>

#include "texweave/tensor.hpp"

namespace texweave {

struct LossWeights {
  double lambda_cyc = 10.0;
  double lambda_sp = 0.4;
  double alpha = 0.005;
  double beta = 0.995;

  void validate() const;
  bool operator==(const LossWeights&) const = default;
};

struct LossBreakdown {
  double gan_g = 0, gan_f = 0, cyc = 0, sp = 0, total = 0, d_y = 0, d_x = 0;
};

/// Value of a scalar loss and its gradient with respect to the differentiated input.
template <typename T>
struct LossValue {
  T value;
  Tensor<T> grad;
};

template <typename T>
struct DiscriminatorLoss {
  T value;
  Tensor<T> grad_real;
  Tensor<T> grad_fake;
};

inline constexpr double kProbClamp = 1e-7;

namespace detail {

template <typename T>
T sigmoid(T z) {
  return z >= T(0) ? T(1) / (T(1) + std::exp(-z)) : std::exp(z) / (T(1) + std::exp(z));
}

template <typename T>
T sign(T v) {
  return v > T(0) ? T(1) : (v < T(0) ? T(-1) : T(0));
}

// -log(clamp(p)) and its derivative with respect to the logit, for p = s(z) (positive)
// or p = 1 - s(z) (negative).
template <typename T>
std::pair<T, T> neg_log_prob(T logit, bool positive) {
  const T s = sigmoid(logit);
  const T lo = T(kProbClamp), hi = T(1) - T(kProbClamp);
  const T p = positive ? s : T(1) - s;
  const T pc = std::clamp(p, lo, hi);
  const bool clamped = p < lo || p > hi;
  // d(-log s)/dz = -(1 - s);  d(-log(1 - s))/dz = s
  const T d = clamped ? T(0) : (positive ? -(T(1) - s) : s);
  return {-std::log(pc), d};
}

}  // namespace detail

/// Invisible-pattern target: every element scaled into a narrow band just above -1.
template <typename T>
Tensor<T> sp_target(const Tensor<T>& normal, double alpha, double beta) {
  Tensor<T> out = normal;
  for (auto& v : out.values()) v = static_cast<T>(v * alpha - beta);
  return out;
}

template <typename T>
T mean_abs_diff(const Tensor<T>& a, const Tensor<T>& b) {
  Tensor<T>::require_same_shape(a, b, "mean_abs_diff");
  if (a.size() == 0) return T(0);
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(double(a[i]) - double(b[i]));
  return static_cast<T>(s / double(a.size()));
}

/// Mean absolute error; gradient is with respect to `prediction`.
template <typename T>
LossValue<T> sp_loss(const Tensor<T>& prediction, const Tensor<T>& target) {
  Tensor<T>::require_same_shape(prediction, target, "sp_loss");
  LossValue<T> r{mean_abs_diff(prediction, target), Tensor<T>(prediction.channels(), prediction.height(),
                                                               prediction.width())};
  const T inv_n = prediction.size() ? T(1) / T(prediction.size()) : T(0);
  for (std::size_t i = 0; i < prediction.size(); ++i) r.grad[i] = detail::sign(prediction[i] - target[i]) * inv_n;
  return r;
}

/// L_D = -1/2 mean log s(real) - 1/2 mean log(1 - s(fake)).
template <typename T>
DiscriminatorLoss<T> adversarial_d_loss(const Tensor<T>& real_logits, const Tensor<T>& fake_logits) {
  DiscriminatorLoss<T> r{T(0), Tensor<T>(real_logits.channels(), real_logits.height(), real_logits.width()),
                         Tensor<T>(fake_logits.channels(), fake_logits.height(), fake_logits.width())};
  double total = 0;
  const T wr = T(0.5) / T(real_logits.size());
  for (std::size_t i = 0; i < real_logits.size(); ++i) {
    auto [l, d] = detail::neg_log_prob(real_logits[i], true);
    total += double(l) * wr;
    r.grad_real[i] = d * wr;
  }
  const T wf = T(0.5) / T(fake_logits.size());
  for (std::size_t i = 0; i < fake_logits.size(); ++i) {
    auto [l, d] = detail::neg_log_prob(fake_logits[i], false);
    total += double(l) * wf;
    r.grad_fake[i] = d * wf;
  }
  r.value = static_cast<T>(total);
  return r;
}

/// Non-saturating generator loss L_G = -mean log s(fake).
template <typename T>
LossValue<T> adversarial_g_loss(const Tensor<T>& fake_logits) {
  LossValue<T> r{T(0), Tensor<T>(fake_logits.channels(), fake_logits.height(), fake_logits.width())};
  double total = 0;
  const T w = T(1) / T(fake_logits.size());
  for (std::size_t i = 0; i < fake_logits.size(); ++i) {
    auto [l, d] = detail::neg_log_prob(fake_logits[i], true);
    total += double(l) * w;
    r.grad[i] = d * w;
  }
  r.value = static_cast<T>(total);
  return r;
}

/// Positive where the channel mean of the prediction is above zero. Not differentiated.
template <typename T>
BinaryMask dynamic_mask(const Tensor<T>& prediction) {
  BinaryMask m(prediction.height(), prediction.width());
  for (int y = 0; y < prediction.height(); ++y)
    for (int x = 0; x < prediction.width(); ++x) {
      double s = 0;
      for (int c = 0; c < prediction.channels(); ++c) s += prediction(c, y, x);
      m.at(y, x) = s / prediction.channels() > 0.0 ? 1 : 0;
    }
  return m;
}

/// Cycle L1 over pixels where `mask` is 0, normalized by kept pixels x channels.
/// Gradient is with respect to `recovered`.
template <typename T>
LossValue<T> dmcc_loss(const Tensor<T>& input, const Tensor<T>& recovered, const BinaryMask& mask) {
  Tensor<T>::require_same_shape(input, recovered, "dmcc_loss");
  if (mask.height != input.height() || mask.width != input.width())
    throw std::invalid_argument("dmcc_loss: mask shape mismatch");
  LossValue<T> r{T(0), Tensor<T>(input.channels(), input.height(), input.width())};
  const std::size_t kept = mask.size() - mask.positives();
  if (kept == 0) return r;
  const double inv = 1.0 / (double(kept) * input.channels());
  double s = 0;
  const std::size_t plane = input.plane();
  for (int c = 0; c < input.channels(); ++c)
    for (std::size_t i = 0; i < plane; ++i) {
      if (mask.values[i]) continue;
      const std::size_t k = c * plane + i;
      const double d = double(recovered[k]) - double(input[k]);
      s += std::abs(d);
      r.grad[k] = static_cast<T>(detail::sign(d) * inv);
    }
  r.value = static_cast<T>(s * inv);
  return r;
}

/// Plain mean absolute cycle error; gradient is with respect to `roundtrip`.
template <typename T>
LossValue<T> mask_free_cycle(const Tensor<T>& original, const Tensor<T>& roundtrip) {
  return sp_loss(roundtrip, original);
}

/// Weighted sum of generator-side components. `cyc` must already hold both cycle terms.
LossBreakdown total_generator_loss(const LossBreakdown& components, const LossWeights& weights);

}  // namespace texweave
